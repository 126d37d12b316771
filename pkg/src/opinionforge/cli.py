"""Command-line driver: generate -> infer -> summarize -> diagnose, plus oracle.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, formats
from .diagnostics import chain_stats, plot_rows
from .errors import (
    DataError,
    InstanceTooLargeError,
    NumericalAbort,
    OpinionForgeError,
    ParameterDomainError,
    PreconditionError,
)
from .generative import forward_generate_network, random_truth
from .inference import SamplerConfig, gibbs_run, summarize_posterior
from .kernels import BACKEND
from .model import LogitParams
from .oracle import OracleConfig, exact_posterior

log = logging.getLogger("opinionforge")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--lambda-mode", choices=("fixed", "blocked-joint", "paper-literal"), default="blocked-joint")
    _add_grid_flags(p)


def _add_grid_flags(p: argparse.ArgumentParser, small: bool = False) -> None:
    p.add_argument("--bias-grid", type=int, default=3 if small else 101)
    p.add_argument("--epsilon-grid", type=int, default=3 if small else 201)
    p.add_argument("--epsilon-min", type=float, default=-20.0)
    p.add_argument("--epsilon-max", type=float, default=20.0)
    p.add_argument("--theta-grid", type=int, default=3 if small else 201)
    p.add_argument("--theta-min", type=float, default=-20.0)
    p.add_argument("--theta-max", type=float, default=20.0)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output-dir", type=Path, default=Path("."))
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--levels", type=int, default=4)
    common.add_argument("--lambda-max", type=int, default=30)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="opinionforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample ground truth and a synthetic ratings CSV")
    g.add_argument("--num-trustors", type=int, default=30)
    g.add_argument("--num-trustees", type=int, default=20)
    g.add_argument("--epsilon", type=float, default=6.0)
    g.add_argument("--theta", type=_floats, default=None, help="comma-separated, non-increasing")
    g.add_argument("--density", type=float, default=1.0)

    i = sub.add_parser("infer", parents=[common], help="run the Gibbs sampler on a ratings CSV")
    i.add_argument("--input", type=Path, required=True)
    _add_sampler_flags(i)

    s = sub.add_parser("summarize", parents=[common], help="trace -> opinions JSON")
    s.add_argument("--input", type=Path, required=True)

    d = sub.add_parser("diagnose", parents=[common], help="trace -> ESS / Geweke report and plot CSV")
    d.add_argument("--input", type=Path, required=True)

    o = sub.add_parser("oracle", parents=[common], help="exact marginals of a tiny ratings CSV")
    o.add_argument("--input", type=Path, required=True)
    o.add_argument("--behavior-grid", type=int, default=0, help="simplex subdivisions; 0 integrates B exactly")
    o.add_argument("--lambda-mode", choices=("fixed", "blocked-joint"), default="blocked-joint")
    _add_grid_flags(o, small=True)
    return parser


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(
        iterations=args.iterations, burn_in=args.burn_in, thin=args.thin, seed=args.seed,
        lambda_max=args.lambda_max, bias_grid=args.bias_grid,
        epsilon_bounds=(args.epsilon_min, args.epsilon_max), epsilon_grid=args.epsilon_grid,
        theta_bounds=(args.theta_min, args.theta_max), theta_grid=args.theta_grid,
        lambda_mode=args.lambda_mode.replace("-", "_"),
    )


def _finish(args, outputs: dict[str, Path], config: dict, started: float) -> None:
    root = args.output_dir
    manifest = formats.RunManifest(
        command=args.command,
        input=str(args.input) if getattr(args, "input", None) else None,
        outputs={k: str(p.relative_to(root)) for k, p in outputs.items()},
        config=config,
        version=__version__,
        seed=args.seed,
        duration_seconds=time.perf_counter() - started,
        backend=BACKEND,
    )
    formats.write_manifest(root / "manifest.json", manifest)
    for p in outputs.values():
        log.info("wrote %s", p)


def cmd_generate(args) -> dict:
    if args.theta is None:
        theta = tuple(np.linspace(1.5, -3.5, args.levels - 1)) if args.levels > 2 else (0.0,)
    else:
        theta = args.theta
    if len(theta) != args.levels - 1:
        raise UsageError(f"--theta needs {args.levels - 1} values for {args.levels} levels")
    try:
        logit = LogitParams(args.epsilon, theta)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
        truth = random_truth(args.num_trustors, args.num_trustees, logit, rng, (1, args.lambda_max), args.density)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from exc
    ratings, latents = forward_generate_network(truth, args.seed)
    out = {"ratings": args.output_dir / "ratings.csv", "truth": args.output_dir / "truth.json"}
    formats.write_ratings_csv(out["ratings"], ratings)
    formats.write_truth_json(out["truth"], truth, latents)
    cfg = {
        "num_trustors": args.num_trustors, "num_trustees": args.num_trustees, "levels": args.levels,
        "lambda_max": args.lambda_max, "epsilon": args.epsilon, "theta": list(theta), "density": args.density,
    }
    return {"outputs": out, "config": cfg}


def cmd_infer(args) -> dict:
    try:
        config = _sampler_config(args)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from exc
    ratings, ids = formats.read_ratings_csv(args.input, args.levels)
    log.info("loaded %d edges (%d trustors, %d trustees)", ratings.num_edges, ratings.num_trustors, ratings.num_trustees)
    trace = gibbs_run(ratings, config)
    out = {
        "trace": args.output_dir / "trace.ndjson",
        "opinions": args.output_dir / "opinions.json",
        "ids": args.output_dir / "ids.json",
    }
    formats.write_trace(out["trace"], trace, ids)
    formats.export_opinions_json(summarize_posterior(trace), out["opinions"], ids)
    formats.atomic_write_text(out["ids"], formats.dumps(ids.to_dict()))
    return {"outputs": out, "config": config.to_dict()}


def cmd_summarize(args) -> dict:
    trace, ids = formats.read_trace(args.input)
    out = {"opinions": args.output_dir / "opinions.json"}
    formats.export_opinions_json(summarize_posterior(trace), out["opinions"], ids)
    return {"outputs": out, "config": trace.config.to_dict()}


def cmd_diagnose(args) -> dict:
    trace, _ = formats.read_trace(args.input)
    stats = chain_stats(trace)
    out = {"diagnostics": args.output_dir / "diagnostics.json", "plot": args.output_dir / "plot.csv"}
    formats.atomic_write_text(out["diagnostics"], formats.dumps(stats.to_dict()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("iteration", "statistic", "value"))
    w.writerows((it, name, repr(v)) for it, name, v in plot_rows(trace))
    formats.atomic_write_text(out["plot"], buf.getvalue())
    for name, ess, z in zip(stats.statistics, stats.ess, stats.geweke_z):
        print(f"{name:22s} ess={ess:10.1f} geweke_z={z:+.3f}", file=sys.stderr)
    return {"outputs": out, "config": trace.config.to_dict()}


def cmd_oracle(args) -> dict:
    try:
        cfg = OracleConfig(
            lambda_max=args.lambda_max, bias_grid=args.bias_grid, epsilon_grid=args.epsilon_grid,
            theta_grid=args.theta_grid, behavior_grid=args.behavior_grid,
            epsilon_bounds=(args.epsilon_min, args.epsilon_max), theta_bounds=(args.theta_min, args.theta_max),
            lambda_mode=args.lambda_mode.replace("-", "_"),
        )
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from exc
    ratings, ids = formats.read_ratings_csv(args.input, args.levels)
    post = exact_posterior(ratings, cfg)
    doc = post.to_dict()
    doc["ids"] = ids.to_dict()
    out = {"exact": args.output_dir / "exact.json"}
    formats.atomic_write_text(out["exact"], formats.dumps(doc))
    cfg_d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    cfg_d["epsilon_bounds"] = list(cfg.epsilon_bounds)
    cfg_d["theta_bounds"] = list(cfg.theta_bounds)
    return {"outputs": out, "config": cfg_d}


COMMANDS = {
    "generate": cmd_generate,
    "infer": cmd_infer,
    "summarize": cmd_summarize,
    "diagnose": cmd_diagnose,
    "oracle": cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    started = time.perf_counter()
    try:
        result = COMMANDS[args.command](args)
        _finish(args, result["outputs"], result["config"], started)
    except UsageError as exc:
        print(f"opinionforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalAbort as exc:
        print(f"opinionforge {args.command}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, PreconditionError, InstanceTooLargeError, ParameterDomainError, OSError) as exc:
        print(f"opinionforge {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OpinionForgeError as exc:
        print(f"opinionforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

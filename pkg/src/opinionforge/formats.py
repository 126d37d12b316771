"""On-disk formats: ratings CSV, opinions/truth/manifest JSON, NDJSON traces.

Every writer goes through ``atomic_write_text`` (temp file in the target
directory, then rename). Floats are written with ``repr``, the shortest
string that parses back to the same double, so all readers are lossless.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .generative import GroundTruth
from .inference import GibbsState, PosteriorSummary, SamplerConfig, Trace
from .model import LogitParams, Opinion, RatingMatrix

TRACE_FORMAT = "opinionforge-trace"
TRACE_VERSION = 1
RATING_HEADER = ("trustor", "trustee", "rating")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# ------------------------------------------------------------------ ratings


@dataclass
class IdMap:
    """Dense index -> original string id, per side."""

    trustors: list[str] = field(default_factory=list)
    trustees: list[str] = field(default_factory=list)

    @classmethod
    def identity(cls, ratings: RatingMatrix) -> "IdMap":
        return cls([str(i) for i in range(ratings.num_trustors)], [str(j) for j in range(ratings.num_trustees)])

    def to_dict(self) -> dict:
        return {"trustors": list(self.trustors), "trustees": list(self.trustees)}

    @classmethod
    def from_dict(cls, d: dict) -> "IdMap":
        return cls(list(d["trustors"]), list(d["trustees"]))


def read_ratings_csv(path, levels: int = 4) -> tuple[RatingMatrix, IdMap]:
    """Parse an edge-list CSV; ids are arbitrary strings, indexed by first appearance.

    An optional fourth ``lambda`` column carries known evidence totals.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: line 1: missing header")
    header = tuple(c.strip() for c in rows[0])
    has_lambda = header == RATING_HEADER + ("lambda",)
    if header != RATING_HEADER and not has_lambda:
        raise DataError(f"{path}: line 1: expected header 'trustor,trustee,rating[,lambda]', got {','.join(header)!r}")
    width = len(header)
    tor: dict[str, int] = {}
    tee: dict[str, int] = {}
    seen: dict[tuple[int, int], int] = {}
    ii, jj, rr, ll = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataError(f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
        a, b = row[0].strip(), row[1].strip()
        if not a or not b:
            raise DataError(f"{path}: line {lineno}: empty id")
        try:
            r = int(row[2])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: rating {row[2]!r} is not an integer") from None
        if not 1 <= r <= levels:
            raise DataError(f"{path}: line {lineno}: rating {r} outside 1..{levels}")
        if has_lambda:
            try:
                lam = int(row[3])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: lambda {row[3]!r} is not an integer") from None
            if lam < 1:
                raise DataError(f"{path}: line {lineno}: lambda {lam} must be >= 1")
            ll.append(lam)
        i = tor.setdefault(a, len(tor))
        j = tee.setdefault(b, len(tee))
        if (i, j) in seen:
            raise DataError(f"{path}: line {lineno}: duplicate edge ({a}, {b}), first on line {seen[(i, j)]}")
        seen[(i, j)] = lineno
        ii.append(i)
        jj.append(j)
        rr.append(r)
    ratings = RatingMatrix(
        len(tor), len(tee), levels,
        np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64), np.array(rr, dtype=np.int64),
        np.array(ll, dtype=np.int64) if has_lambda else None,
    )
    return ratings, IdMap(list(tor), list(tee))


def load_ratings_csv(path, levels: int = 4) -> RatingMatrix:
    return read_ratings_csv(path, levels)[0]


def write_ratings_csv(path, ratings: RatingMatrix, ids: IdMap | None = None, with_lambda: bool = True) -> None:
    ids = ids or IdMap.identity(ratings)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    lam = with_lambda and ratings.lambdas is not None
    w.writerow(RATING_HEADER + (("lambda",) if lam else ()))
    for e, (i, j, r) in enumerate(zip(ratings.trustors, ratings.trustees, ratings.ratings)):
        row = [ids.trustors[i], ids.trustees[j], int(r)]
        if lam:
            row.append(int(ratings.lambdas[e]))
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())


# ----------------------------------------------------------------- opinions


def summary_to_dict(summary: PosteriorSummary, ids: IdMap | None = None) -> dict:
    if not summary.edges:
        raise DataError("cannot export an empty summary")
    if ids is None:
        ids = IdMap([str(i) for i in range(len(summary.biases_mean))],
                    [str(j) for j in range(len(summary.behaviors_mean))])
    edges = []
    for e, (i, j) in enumerate(summary.edges):
        edges.append({
            "trustor": ids.trustors[i],
            "trustee": ids.trustees[j],
            "trustor_index": int(i),
            "trustee_index": int(j),
            "alpha_mean": float(summary.alpha_mean[e]),
            "beta_mean": float(summary.beta_mean[e]),
            "gamma_mean": float(summary.gamma_mean[e]),
            "lambda_mean": float(summary.lambda_mean[e]),
            "rounded_opinion": [int(x) for x in summary.rounded_opinions[e]],
            "bias_mean": float(summary.edge_bias_mean[e]),
            "expected_belief_mean": float(summary.expected_belief_mean[e]),
            "expected_belief_ci90": [float(x) for x in summary.expected_belief_ci90[e]],
        })
    return {
        "edges": edges,
        "epsilon_mean": float(summary.epsilon_mean),
        "theta_means": [float(x) for x in summary.theta_mean],
        "behaviors": [[float(x) for x in row] for row in summary.behaviors_mean],
        "biases": [float(x) for x in summary.biases_mean],
        "num_samples": int(summary.num_samples),
        "ids": ids.to_dict(),
    }


def summary_from_dict(d: dict) -> PosteriorSummary:
    try:
        recs = d["edges"]
        col = lambda k: np.array([r[k] for r in recs], dtype=float)  # noqa: E731
        return PosteriorSummary(
            edges=[(int(r["trustor_index"]), int(r["trustee_index"])) for r in recs],
            alpha_mean=col("alpha_mean"),
            beta_mean=col("beta_mean"),
            gamma_mean=col("gamma_mean"),
            lambda_mean=col("lambda_mean"),
            expected_belief_mean=col("expected_belief_mean"),
            expected_belief_ci90=np.array([r["expected_belief_ci90"] for r in recs], dtype=float).reshape(-1, 2),
            rounded_opinions=np.array([r["rounded_opinion"] for r in recs], dtype=np.int64).reshape(-1, 3),
            edge_bias_mean=col("bias_mean"),
            behaviors_mean=np.array(d["behaviors"], dtype=float).reshape(-1, 3),
            biases_mean=np.array(d["biases"], dtype=float),
            epsilon_mean=float(d["epsilon_mean"]),
            theta_mean=np.array(d["theta_means"], dtype=float),
            num_samples=int(d["num_samples"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed opinions document: {exc}") from exc


def export_opinions_json(summary: PosteriorSummary, path, ids: IdMap | None = None) -> None:
    atomic_write_text(path, dumps(summary_to_dict(summary, ids)))


def load_opinions_json(path) -> PosteriorSummary:
    return summary_from_dict(_read_json(path))


# -------------------------------------------------------------------- trace


def _state_record(s: GibbsState) -> dict:
    return {
        "iteration": int(s.iteration),
        "opinions": s.opinions.tolist(),
        "behaviors": s.behaviors.tolist(),
        "biases": s.biases.tolist(),
        "epsilon": float(s.epsilon),
        "theta": s.theta.tolist(),
    }


def _ratings_record(ratings: RatingMatrix) -> dict:
    return {
        "num_trustors": ratings.num_trustors,
        "num_trustees": ratings.num_trustees,
        "levels": ratings.levels,
        "edges": [[int(i), int(j), int(r)] for i, j, r in zip(ratings.trustors, ratings.trustees, ratings.ratings)],
        "lambdas": None if ratings.lambdas is None else ratings.lambdas.tolist(),
    }


def _ratings_from_record(d: dict) -> RatingMatrix:
    edges = np.array(d["edges"], dtype=np.int64).reshape(-1, 3)
    return RatingMatrix(
        int(d["num_trustors"]), int(d["num_trustees"]), int(d["levels"]),
        edges[:, 0], edges[:, 1], edges[:, 2],
        None if d["lambdas"] is None else np.array(d["lambdas"], dtype=np.int64),
    )


def trace_to_ndjson(trace: Trace, ids: IdMap | None = None) -> str:
    header = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "config": trace.config.to_dict(),
        "ratings": _ratings_record(trace.ratings),
        "ids": (ids or IdMap.identity(trace.ratings)).to_dict(),
    }
    lines = [json.dumps(header, sort_keys=True, allow_nan=False)]
    lines += [json.dumps(_state_record(s), sort_keys=True, allow_nan=False) for s in trace.samples]
    return "\n".join(lines) + "\n"


def write_trace(path, trace: Trace, ids: IdMap | None = None) -> None:
    atomic_write_text(path, trace_to_ndjson(trace, ids))


def read_trace(path) -> tuple[Trace, IdMap]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line 1: invalid JSON: {exc.msg}") from exc
    if header.get("format") != TRACE_FORMAT or header.get("version") != TRACE_VERSION:
        raise DataError(f"{path}: line 1: not an {TRACE_FORMAT} v{TRACE_VERSION} header")
    config = SamplerConfig.from_dict(header["config"])
    ratings = _ratings_from_record(header["ratings"])
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            d = json.loads(line)
            samples.append(GibbsState(
                np.array(d["opinions"], dtype=np.int64).reshape(-1, 3),
                np.array(d["behaviors"], dtype=float).reshape(-1, 3),
                np.array(d["biases"], dtype=float),
                float(d["epsilon"]),
                np.array(d["theta"], dtype=float),
                int(d["iteration"]),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: malformed sample: {exc}") from exc
    return Trace(samples, config, ratings), IdMap.from_dict(header["ids"])


# -------------------------------------------------------------------- truth


def truth_to_dict(truth: GroundTruth, latents: dict[tuple[int, int], Opinion]) -> dict:
    return {
        "behaviors": truth.behaviors.tolist(),
        "biases": truth.biases.tolist(),
        "epsilon": float(truth.logit.epsilon),
        "theta": [float(x) for x in truth.logit.theta],
        "lambda_max": truth.lambda_max,
        "edges": [
            {"trustor": i, "trustee": j, "lambda": int(lam), "opinion": [int(x) for x in latents[(i, j)]]}
            for (i, j), lam in sorted(truth.lambdas.items())
        ],
    }


def truth_from_dict(d: dict) -> tuple[GroundTruth, dict[tuple[int, int], Opinion]]:
    lambdas = {(int(r["trustor"]), int(r["trustee"])): int(r["lambda"]) for r in d["edges"]}
    latents = {(int(r["trustor"]), int(r["trustee"])): Opinion(*map(int, r["opinion"])) for r in d["edges"]}
    truth = GroundTruth(
        np.array(d["behaviors"], dtype=float), np.array(d["biases"], dtype=float), lambdas,
        LogitParams(float(d["epsilon"]), tuple(d["theta"])), d.get("lambda_max"),
    )
    return truth, latents


def write_truth_json(path, truth: GroundTruth, latents) -> None:
    atomic_write_text(path, dumps(truth_to_dict(truth, latents)))


def read_truth_json(path):
    return truth_from_dict(_read_json(path))


# ----------------------------------------------------------------- manifest


@dataclass
class RunManifest:
    command: str
    input: str | None
    outputs: dict[str, str]
    config: dict
    version: str
    seed: int
    duration_seconds: float
    backend: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)

    def missing_outputs(self, root=".") -> list[str]:
        return [p for p in self.outputs.values() if not (Path(root) / p).exists()]


def write_manifest(path, manifest: RunManifest) -> None:
    atomic_write_text(path, dumps(manifest.to_dict()))


def read_manifest(path) -> RunManifest:
    return RunManifest.from_dict(_read_json(path))

import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from _support import EXACT_FIXTURE, tiny_2x1, tiny_2x1_sampler

from opinionforge.errors import DataError, PreconditionError
from opinionforge.formats import (
    IdMap,
    RunManifest,
    atomic_write_text,
    export_opinions_json,
    load_opinions_json,
    load_ratings_csv,
    read_manifest,
    read_ratings_csv,
    read_trace,
    read_truth_json,
    summary_to_dict,
    trace_to_ndjson,
    write_manifest,
    write_ratings_csv,
    write_trace,
    write_truth_json,
)
from opinionforge.generative import forward_generate_network, random_truth
from opinionforge.inference import PosteriorSummary, SamplerConfig, gibbs_run, summarize_posterior
from opinionforge.model import LogitParams, RatingMatrix
from opinionforge.oracle import ExactPosterior

HEALTH = [HealthCheck.function_scoped_fixture]


def cell(ratings, i, j):
    return dict(zip(ratings.edges, ratings.ratings.tolist()))[(i, j)]


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_header_only_is_empty_and_rejected_downstream(tmp_path):
    r = load_ratings_csv(write(tmp_path / "r.csv", "trustor,trustee,rating\n"))
    assert r.num_edges == 0
    with pytest.raises(PreconditionError):
        gibbs_run(r, SamplerConfig(iterations=1))


def test_three_rows_infer_dimensions(tmp_path):
    r, ids = read_ratings_csv(write(tmp_path / "r.csv", "trustor,trustee,rating\nu,x,1\nv,x,4\nu,y,2\n"))
    assert (r.num_edges, r.num_trustors, r.num_trustees) == (3, 2, 2)
    assert ids.trustors == ["u", "v"] and ids.trustees == ["x", "y"]
    assert cell(r, 0, 1) == 2 and cell(r, 1, 0) == 4
    assert r.lambdas is None


@pytest.mark.parametrize(
    "body, line, words",
    [
        ("u,x,5\n", 2, "outside 1..4"),
        ("u,x,1\nu,x,2\n", 3, "duplicate edge"),
        ("u,x,1\nv,y,two\n", 3, "not an integer"),
        ("u,x\n", 2, "expected 3 fields"),
        ("u,,1\n", 2, "empty id"),
        ("u,x,0\n", 2, "outside 1..4"),
    ],
)
def test_bad_rows_name_their_line(tmp_path, body, line, words):
    path = write(tmp_path / "r.csv", "trustor,trustee,rating\n" + body)
    with pytest.raises(DataError, match=rf"line {line}: .*{words}"):
        load_ratings_csv(path)


def test_bad_header_and_lambda_column(tmp_path):
    with pytest.raises(DataError, match="line 1"):
        load_ratings_csv(write(tmp_path / "a.csv", "from,to,rating\nu,x,1\n"))
    with pytest.raises(DataError, match="line 1"):
        load_ratings_csv(write(tmp_path / "b.csv", ""))
    with pytest.raises(DataError, match="line 2: lambda 0"):
        load_ratings_csv(write(tmp_path / "c.csv", "trustor,trustee,rating,lambda\nu,x,1,0\n"))
    r = load_ratings_csv(write(tmp_path / "d.csv", "trustor,trustee,rating,lambda\nu,x,1,7\nv,x,2,3\n"))
    np.testing.assert_array_equal(r.lambdas, [7, 3])


def test_levels_flag_controls_range(tmp_path):
    path = write(tmp_path / "r.csv", "trustor,trustee,rating\nu,x,5\n")
    assert load_ratings_csv(path, levels=5).levels == 5


ids_text = st.text(st.characters(codec="utf-8", exclude_categories=("Cs", "Cc", "Zs", "Zl", "Zp")), min_size=1, max_size=6)


@settings(max_examples=40, deadline=None, suppress_health_check=HEALTH)
@given(data=st.data())
def test_ratings_csv_round_trip(tmp_path, data):
    m = data.draw(st.integers(1, 5))
    n = data.draw(st.integers(1, 5))
    levels = data.draw(st.integers(2, 6))
    cells = data.draw(st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, n - 1)), min_size=1))
    # ids must cover exactly the observed trustors/trustees, so relabel densely by first appearance
    cells = sorted(cells)
    tor = {i: k for k, i in enumerate(dict.fromkeys(i for i, _ in cells))}
    tee = {j: k for k, j in enumerate(dict.fromkeys(j for _, j in cells))}
    entries = {(tor[i], tee[j]): data.draw(st.integers(1, levels)) for i, j in cells}
    with_lambda = data.draw(st.booleans())
    lambdas = {e: data.draw(st.integers(1, 40)) for e in entries} if with_lambda else None
    r = RatingMatrix.from_entries(len(tor), len(tee), levels, entries, lambdas)
    names = data.draw(st.lists(ids_text, min_size=len(tor) + len(tee), max_size=len(tor) + len(tee), unique=True))
    ids = IdMap(names[: len(tor)], names[len(tor):])
    path = tmp_path / "r.csv"
    write_ratings_csv(path, r, ids)
    back, back_ids = read_ratings_csv(path, levels)
    # ids come back in first-appearance order of the written (sorted) edge list
    relabel_i = [back_ids.trustors.index(ids.trustors[i]) for i in range(len(tor))]
    relabel_j = [back_ids.trustees.index(ids.trustees[j]) for j in range(len(tee))]
    for e, (i, j) in enumerate(r.edges):
        assert cell(back, relabel_i[i], relabel_j[j]) == r.ratings[e]
    assert back.num_edges == r.num_edges
    if with_lambda:
        got = dict(zip(back.edges, back.lambdas))
        for e, (i, j) in enumerate(r.edges):
            assert got[(relabel_i[i], relabel_j[j])] == r.lambdas[e]
    write_ratings_csv(tmp_path / "again.csv", back, back_ids)
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def summaries(draw):
    m = draw(st.integers(1, 3))
    n = draw(st.integers(1, 3))
    edges = sorted(draw(st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, n - 1)), min_size=1)))
    e = len(edges)
    arr = lambda *shape: np.array(draw(st.lists(finite, min_size=int(np.prod(shape)), max_size=int(np.prod(shape))))).reshape(shape)  # noqa: E731
    return PosteriorSummary(
        edges=edges,
        alpha_mean=arr(e), beta_mean=arr(e), gamma_mean=arr(e), lambda_mean=arr(e),
        expected_belief_mean=arr(e), expected_belief_ci90=arr(e, 2),
        rounded_opinions=np.array(draw(st.lists(st.integers(0, 30), min_size=3 * e, max_size=3 * e))).reshape(e, 3),
        edge_bias_mean=arr(e), behaviors_mean=arr(n, 3), biases_mean=arr(m),
        epsilon_mean=draw(finite), theta_mean=arr(draw(st.integers(1, 4))),
        num_samples=draw(st.integers(1, 10**6)),
    )


@settings(max_examples=60, deadline=None, suppress_health_check=HEALTH)
@given(s=summaries())
def test_opinions_json_round_trip_is_bit_exact(tmp_path, s):
    path = tmp_path / "o.json"
    export_opinions_json(s, path)
    back = load_opinions_json(path)
    assert back.edges == s.edges
    for name in ("alpha_mean", "beta_mean", "gamma_mean", "lambda_mean", "expected_belief_mean",
                 "expected_belief_ci90", "rounded_opinions", "edge_bias_mean", "behaviors_mean",
                 "biases_mean", "theta_mean"):
        a, b = getattr(s, name), getattr(back, name)
        assert a.shape == b.shape and a.tobytes() == b.tobytes(), name
    assert back.epsilon_mean == s.epsilon_mean and back.num_samples == s.num_samples
    export_opinions_json(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def _tiny_trace(levels=3, iterations=25, seed=1):
    r = RatingMatrix.from_entries(2, 2, levels, {(0, 0): 1, (1, 0): levels, (1, 1): 2})
    cfg = SamplerConfig(iterations=iterations, burn_in=5, seed=seed, lambda_max=6, bias_grid=4, epsilon_grid=5, theta_grid=7)
    return gibbs_run(r, cfg)


def test_single_edge_schema(tmp_path):
    r = RatingMatrix.from_entries(1, 1, 2, {(0, 0): 2})
    trace = gibbs_run(r, SamplerConfig(iterations=5, lambda_max=4, bias_grid=3, epsilon_grid=3, theta_grid=3))
    export_opinions_json(summarize_posterior(trace), tmp_path / "o.json", IdMap(["ann"], ["bo"]))
    doc = json.loads((tmp_path / "o.json").read_text())
    assert set(doc) == {"edges", "epsilon_mean", "theta_means", "behaviors", "biases", "num_samples", "ids"}
    (rec,) = doc["edges"]
    assert set(rec) == {
        "trustor", "trustee", "trustor_index", "trustee_index", "alpha_mean", "beta_mean", "gamma_mean",
        "lambda_mean", "rounded_opinion", "bias_mean", "expected_belief_mean", "expected_belief_ci90",
    }
    assert rec["trustor"] == "ann" and rec["trustee"] == "bo"
    assert len(rec["rounded_opinion"]) == 3 and all(isinstance(x, int) for x in rec["rounded_opinion"])
    assert sum(rec["rounded_opinion"]) == round(rec["lambda_mean"])
    text = (tmp_path / "o.json").read_text()
    assert text == json.dumps(doc, sort_keys=True, indent=1) + "\n"


def test_empty_summary_rejected():
    s = PosteriorSummary([], *[np.zeros(0)] * 5, np.zeros((0, 2)), np.zeros((0, 3)), np.zeros(0),
                         np.zeros((1, 3)), np.zeros(1), 0.0, np.zeros(1), 1)
    with pytest.raises(DataError):
        summary_to_dict(s)


def test_trace_round_trip(tmp_path):
    trace = _tiny_trace()
    ids = IdMap(["p", "q"], ["x", "y"])
    write_trace(tmp_path / "t.ndjson", trace, ids)
    back, back_ids = read_trace(tmp_path / "t.ndjson")
    assert back_ids == ids
    assert back.config == trace.config
    assert back.ratings.edges == trace.ratings.edges
    np.testing.assert_array_equal(back.ratings.ratings, trace.ratings.ratings)
    assert len(back) == len(trace)
    for a, b in zip(trace.samples, back.samples):
        assert a.iteration == b.iteration and a.epsilon == b.epsilon
        for name in ("opinions", "behaviors", "biases", "theta"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert trace_to_ndjson(back, back_ids) == (tmp_path / "t.ndjson").read_text()


def test_trace_errors(tmp_path):
    with pytest.raises(DataError, match="empty"):
        read_trace(write(tmp_path / "a.ndjson", ""))
    with pytest.raises(DataError, match="line 1"):
        read_trace(write(tmp_path / "b.ndjson", '{"format": "other"}\n'))
    good = trace_to_ndjson(_tiny_trace(iterations=8)).splitlines()
    with pytest.raises(DataError, match="line 3"):
        read_trace(write(tmp_path / "c.ndjson", "\n".join(good[:2] + ['{"iteration": 1}']) + "\n"))


def test_truth_round_trip(tmp_path):
    truth = random_truth(4, 3, LogitParams(6.0, (1.5, -1.0, -3.5)), np.random.default_rng(2), density=0.6)
    _, latents = forward_generate_network(truth, seed=2)
    write_truth_json(tmp_path / "t.json", truth, latents)
    back, back_latents = read_truth_json(tmp_path / "t.json")
    assert back_latents == latents
    assert back.lambdas == truth.lambdas
    assert back.logit == truth.logit and back.lambda_max == truth.lambda_max
    assert back.behaviors.tobytes() == truth.behaviors.tobytes()
    assert back.biases.tobytes() == truth.biases.tobytes()


def test_manifest_round_trip_and_missing_outputs(tmp_path):
    (tmp_path / "a.txt").write_text("x")
    m = RunManifest("infer", "in.csv", {"a": "a.txt", "b": "b.txt"}, {"seed": 3}, "0.1.0", 3, 1.25, "cython")
    write_manifest(tmp_path / "m.json", m)
    back = read_manifest(tmp_path / "m.json")
    assert back == m
    assert back.missing_outputs(tmp_path) == ["b.txt"]


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    atomic_write_text(tmp_path / "sub" / "f.txt", "world")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
    assert (tmp_path / "sub" / "f.txt").read_text() == "world"


def test_malformed_json_is_a_data_error(tmp_path):
    with pytest.raises(DataError, match="line 2"):
        load_opinions_json(write(tmp_path / "o.json", "{\n oops\n}"))
    with pytest.raises(DataError):
        load_opinions_json(write(tmp_path / "p.json", '{"edges": [{"alpha_mean": 1}]}'))


def test_exported_tiny_run_matches_exact_fixture(tmp_path):
    exact = ExactPosterior.from_dict(json.loads(EXACT_FIXTURE.read_text()))
    r, _ = tiny_2x1()
    export_opinions_json(summarize_posterior(gibbs_run(r, tiny_2x1_sampler(15000, seed=9))), tmp_path / "o.json")
    got = [rec["expected_belief_mean"] for rec in json.loads((tmp_path / "o.json").read_text())["edges"]]
    np.testing.assert_allclose(got, exact.expected_belief_mean, atol=0.03)

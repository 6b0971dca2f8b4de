import csv
import json
import math

import numpy as np
import pytest

from clarkmodel.experiments import (ConfigError, ScenarioConfig, integer_measure,
                                    multiplicity_layers, random_measure, reverify_certificate,
                                    run, run_analyze, run_counterexample_integers,
                                    run_counterexample_sharp3, run_synthesize, run_verify_hs,
                                    sharp3_terms)
from clarkmodel.measures import cayley_measure

MINUS_ONE_BLOCK = {"atoms": [{"angle_over_pi": 1.0, "weight": 1.0}]}
DEFAULT_TARGET = [{"angle_over_pi": 1.0, "multiplicity": 2},
                  {"angle_over_pi": 0.5, "multiplicity": 1}]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_parsing():
    cfg = ScenarioConfig.from_dict({"kind": "sweep", "blocks": [MINUS_ONE_BLOCK],
                                    "p_list": [1, "inf"], "t_grid": [1]})
    assert cfg.p_list == [1.0, math.inf] and cfg.t_grid == [1.0]
    assert len(cfg.measures()) == 1


@pytest.mark.parametrize("doc", [
    {"kind": "nonsense"},
    {"kind": "analyze"},
    {"kind": "verify", "t_grid": [-1]},
    {"kind": "verify", "p_list": [0]},
    {"kind": "verify", "unknown_key": 1},
])
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(doc)


def test_config_load(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"kind": "counterexample-sharp3", "sharp3_max_exponent": 4}))
    assert ScenarioConfig.load(path).sharp3_max_exponent == 4


def test_analyze_single_atom(tmp_path):
    cfg = ScenarioConfig(kind="analyze", blocks=[MINUS_ONE_BLOCK], t_grid=[1.0],
                         sections=[64, 128], out=str(tmp_path))
    res = run(cfg)
    assert res.passed
    model = res.report["model"]
    assert model["rank"] == 1
    assert model["trace_norm"] == pytest.approx(math.sqrt(2), rel=1e-12)
    assert model["unitary_block"]["eigenvalues"][0] == pytest.approx(-1, abs=1e-8)
    entry = res.report["per_t"][0]
    assert entry["norms"]["2"] ** 2 == pytest.approx(2 * (1 - math.exp(-1)), rel=1e-10)
    assert entry["sections"]["monotone"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["passed"] and doc["kind"] == "analyze"
    spectra = read_csv(tmp_path / "spectra.csv")
    assert {"t", "M", "block", "index", "singular_value", "method"} <= set(spectra[0])
    assert {r["M"] for r in spectra} == {"", "64", "128"}
    bounds = read_csv(tmp_path / "bounds.csv")
    assert all(r["holds"] == "True" for r in bounds)


def test_analyze_without_time_grid():
    res = run_analyze(ScenarioConfig(kind="analyze", blocks=[MINUS_ONE_BLOCK], t_grid=[]))
    assert res.passed and res.report["per_t"] == []
    assert {b["name"] for b in res.bounds} == {"perturbation_operator_norm",
                                                "perturbation_trace_norm"}


def test_analyze_after_synthesis():
    cert = run_synthesize(ScenarioConfig(kind="synthesize", target=DEFAULT_TARGET,
                                         eps=0.05)).report["certificate"]
    blocks = [{"atoms": [{"angle_over_pi": a["angle_over_pi"], "weight": a["weight"]}
                         for a in b["atoms"]]} for b in cert["blocks"]]
    res = run_analyze(ScenarioConfig(kind="analyze", blocks=blocks, t_grid=[1.0]))
    assert res.passed
    assert res.report["model"]["trace_norm"] < 0.05


def test_sweep_rows(tmp_path):
    cfg = ScenarioConfig(kind="sweep", blocks=[MINUS_ONE_BLOCK, MINUS_ONE_BLOCK],
                         t_grid=[0.5, 1.0], p_list=[1.0, 2.0], out=str(tmp_path))
    res = run(cfg)
    rows = res.report["norms"]
    assert len(rows) == 2 * (2 * 2 + 2)
    k = [r for r in rows if r["operator"] == "K" and r["p"] == 2.0 and r["t"] == 1.0]
    assert all(r["norm"] ** 2 == pytest.approx(0.5) for r in k)
    assert read_csv(tmp_path / "growth.csv")


def test_verify_configured_and_random():
    cfg = ScenarioConfig(kind="verify", blocks=[MINUS_ONE_BLOCK], random_cases=3, seed=1)
    res = run_verify_hs(cfg)
    assert res.passed and res.report["cases"] == 4
    first = res.report["rows"][0]
    assert first["exact"] == pytest.approx(first["circle_form"], rel=1e-12)


def test_random_measure_properties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mu = random_measure(rng, 8)
        assert 1 <= len(mu) <= 8
        ang = np.sort(np.angle(mu.points) % (2 * math.pi))
        assert ang.min() >= 0.1 - 1e-12 and ang.max() <= 2 * math.pi - 0.1 + 1e-12
        if len(mu) > 1:
            assert np.min(np.diff(ang)) > 0.05


def test_integer_measure():
    nu = cayley_measure(integer_measure(3))
    np.testing.assert_allclose(np.sort(nu.points), np.arange(-3, 4), atol=1e-12)
    np.testing.assert_allclose(nu.masses, 1, rtol=1e-12)


def test_integer_counterexample_regression():
    res = run_counterexample_integers(ScenarioConfig(kind="counterexample-integers"))
    assert res.passed and res.report["monotone"] and res.report["ratio_80_10"] >= 4
    values = [r["y_hs_squared"] for r in res.report["rows"]]
    np.testing.assert_allclose(values, [3.7047451320985982, 6.683927833793754,
                                        12.628773508497632, 24.519760388905855,
                                        48.31008842512657], rtol=1e-8)
    for r in res.report["rows"]:
        assert r["k_hs_squared"] == pytest.approx(r["t"] * (2 * r["N"] + 1) / (2 * math.pi),
                                                  rel=1e-12)


def test_integer_counterexample_single_atom():
    res = run_counterexample_integers(ScenarioConfig(kind="counterexample-integers",
                                                     integer_sizes=[0]))
    # one unit mass at 0: 2 (1 - exp(-t m/pi)) with m = 1, t = 1
    y2 = res.report["rows"][0]["y_hs_squared"]
    assert y2 == pytest.approx(2 * (1 - math.exp(-1 / math.pi)), rel=1e-10)


def test_sharp3_terms_and_comparison():
    n = np.arange(0, 10.0)
    np.testing.assert_allclose(sharp3_terms(n), 1 / ((n + 1) * np.log(n + 2)))
    np.testing.assert_array_equal(sharp3_terms(-n), sharp3_terms(n))
    m = np.arange(1, 10**6, dtype=float)
    assert np.all(sharp3_terms(m) >= np.log(np.log(m + 3)) - np.log(np.log(m + 2)))


def test_sharp3_report():
    res = run_counterexample_sharp3(ScenarioConfig(kind="counterexample-sharp3",
                                                   sharp3_max_exponent=12))
    assert res.passed and res.report["termwise_comparison"]
    rows = res.report["rows"]
    assert [r["N"] for r in rows] == [2**j for j in range(13)]
    assert all(r["parfenov_partial"] > r["loglog_lower"] for r in rows)
    assert all(r["tail_upper"] < r["tail_bound"] for r in rows)
    partial = [r["parfenov_partial"] for r in rows]
    assert all(b > a for a, b in zip(partial, partial[1:]))


def test_sharp3_p2_sum_converges():
    # the squared terms sum to a finite total; the tail past N is below 2 / (N log^2 N)
    def partial(N):
        n = np.arange(1, N, dtype=float)
        return sharp3_terms(np.array([0.0]))[0] ** 2 + 2 * math.fsum(sharp3_terms(n) ** 2)
    N = 2**15
    gain = partial(2 * N) - partial(N)
    assert 0 < gain < 2 / (N * math.log(N) ** 2)


@pytest.mark.parametrize("eps", [0.01, 1e-3])
def test_synthesize_light_weights(eps):
    res = run_synthesize(ScenarioConfig(kind="synthesize", target=DEFAULT_TARGET, eps=eps))
    cert = res.report["certificate"]
    assert res.passed
    assert cert["trace_norm"] < cert["mass_bound"] <= eps


def test_multiplicity_layers():
    layers = multiplicity_layers([(-1 + 0j, 2), (1j, 1), (-1j, 3)])
    assert [len(b) for b in layers] == [3, 2, 1]
    np.testing.assert_allclose(layers[2].points, [-1j])


def test_synthesize_default_target():
    res = run_synthesize(ScenarioConfig(kind="synthesize", target=DEFAULT_TARGET))
    cert = res.report["certificate"]
    assert res.passed
    assert len(cert["blocks"]) == 2 and cert["rank"] <= 2
    assert cert["trace_norm"] < cert["mass_bound"] < 0.1
    assert sorted(np.round(cert["eigenvalues"], 8), key=lambda z: (z.real, z.imag)) == \
        sorted(np.round(cert["target"], 8), key=lambda z: (z.real, z.imag))
    for r in cert["semigroup_trace_norms"]["rows"]:
        assert math.isfinite(r["trace_norm"]) and r["holds"]


def test_synthesize_rejects_one():
    with pytest.raises(ConfigError):
        run_synthesize(ScenarioConfig(kind="synthesize",
                                      target=[{"angle_over_pi": 0.0, "multiplicity": 1}]))
    with pytest.raises(ConfigError):
        run_synthesize(ScenarioConfig(kind="synthesize",
                                      target=[{"angle_over_pi": 1.0, "multiplicity": 0}]))


def test_synthesize_empty_target():
    res = run_synthesize(ScenarioConfig(kind="synthesize"))
    assert res.passed and res.report["certificate"]["rank"] == 0


def test_certificate_reverifies_after_reload(tmp_path):
    run(ScenarioConfig(kind="synthesize", target=DEFAULT_TARGET, out=str(tmp_path)))
    doc = json.loads((tmp_path / "report.json").read_text())
    diffs = reverify_certificate(doc)
    tol = doc["certificate"]["tol"]
    assert all(v <= tol for v in diffs.values()), diffs


def test_reports_are_deterministic(tmp_path):
    cfg = dict(kind="analyze", blocks=[MINUS_ONE_BLOCK,
                                       {"atoms": [{"angle_over_pi": 0.5, "weight": 0.3}]}],
               t_grid=[0.5, 2.0])
    a, b = tmp_path / "a", tmp_path / "b"
    run(ScenarioConfig(**cfg, out=str(a)))
    run(ScenarioConfig(**cfg, out=str(b)))
    for name in ("report.json", "spectra.csv", "bounds.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()

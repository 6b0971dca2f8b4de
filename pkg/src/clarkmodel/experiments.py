"""Scenario runner: configuration, the scenario kinds, and report files."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .measures import (CircleMeasure, LineMeasure, cayley_measure, inverse_cayley_measure,
                       moment_integral, point_from_angle, rescale_for_trace_bound)
from .model_ops import (PerturbedShiftModel, match_spectra, stilde_minus_s_norms,
                        unitary_block_check, unitary_semigroup_defect)
from .schatten import (bound_suite, closed_form_validated, finite_section_oracle,
                       fitted_trace_constant, gram_K, gram_X, gram_Y, k_gram_closed_form,
                       k_gram_quadrature, schatten_norm, y_column_norms)

KINDS = ("analyze", "verify", "sweep", "counterexample-integers",
         "counterexample-sharp3", "synthesize")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class ScenarioConfig:
    kind: str = "analyze"
    blocks: list[dict] = field(default_factory=list)
    t_grid: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    p_list: list[float] = field(default_factory=lambda: [1.0, 1.5, 2.0, math.inf])
    sections: list[int] = field(default_factory=list)
    tol: float = 1e-8
    out: str | None = None
    seed: int = 0
    random_cases: int = 0
    max_atoms: int = 8
    integer_sizes: list[int] = field(default_factory=lambda: [5, 10, 20, 40, 80])
    sharp3_max_exponent: int = 20
    target: list[dict] = field(default_factory=list)
    eps: float = 0.1
    q: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        self.t_grid = [float(t) for t in self.t_grid]
        self.p_list = [float(p) for p in self.p_list]
        if any(t < 0 for t in self.t_grid):
            raise ConfigError("t values must be nonnegative")
        if any(not p > 0 for p in self.p_list):
            raise ConfigError("p values must be positive")
        if self.kind in ("analyze", "sweep") and not self.blocks:
            raise ConfigError(f"scenario {self.kind!r} needs at least one measure")

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "p_list" in doc:
            doc["p_list"] = [math.inf if str(p).lower() in ("inf", "infinity") else p
                             for p in doc["p_list"]]
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def measures(self) -> list[CircleMeasure]:
        return [CircleMeasure.from_dict(b) for b in self.blocks]


# -- serialization helpers ------------------------------------------------------

def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        if math.isnan(f):
            return "nan"
        return f
    return obj


def _write_csv(path: Path, rows: list[dict]):
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _jsonable(v) for k, v in r.items()})


@dataclass
class ScenarioResult:
    kind: str
    passed: bool
    report: dict
    spectra: list[dict] = field(default_factory=list)
    bounds: list[dict] = field(default_factory=list)
    growth: list[dict] = field(default_factory=list)

    def write(self, out: str | Path) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"kind": self.kind, "passed": self.passed, **self.report}
        (out / "report.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True))
        _write_csv(out / "spectra.csv", self.spectra)
        _write_csv(out / "bounds.csv", self.bounds)
        _write_csv(out / "growth.csv", self.growth)
        return out


def _spectrum_rows(spectrum, t: float, M: int | None = None, block: int | None = None
                   ) -> list[dict]:
    return [{"t": t, "M": "" if M is None else M, "block": "" if block is None else block,
             "index": i, "singular_value": float(s), "method": spectrum.method}
            for i, s in enumerate(spectrum.values)]


# -- analyze / sweep ------------------------------------------------------------

def _model_summary(model: PerturbedShiftModel, tol: float) -> dict:
    check = unitary_block_check(model, tol=tol)
    pert = stilde_minus_s_norms(model)
    return {
        "blocks": [b.to_dict() for b in model.blocks],
        "line_measures": [{"points": f.line_measure.points, "masses": f.line_measure.masses}
                          for f in model.inner],
        "rank": pert.rank,
        "operator_norm": pert.operator_norm,
        "trace_norm": pert.trace_norm,
        "trace_bound": pert.trace_bound,
        "unitary_block": {"passed": check.passed, "gram_error": check.gram_error,
                          "compression_error": check.compression_error,
                          "eigenvalue_error": check.eigenvalue_error,
                          "eigenvalues": check.eigenvalues, "atoms": check.atoms,
                          "worst_pair": check.worst_pair},
    }


def run_analyze(cfg: ScenarioConfig) -> ScenarioResult:
    """Model checks plus spectra and bounds of the semigroup difference on the t grid."""
    model = PerturbedShiftModel(cfg.measures())
    summary = _model_summary(model, cfg.tol)
    passed = summary["unitary_block"]["passed"]
    spectra, bounds, per_t = [], [], []
    for t in cfg.t_grid:
        y = gram_Y(model, t)
        entry: dict[str, Any] = {"t": t, "norms": {}}
        for p in cfg.p_list:
            entry["norms"][f"{p:g}"] = schatten_norm(y, p)
        spectra += _spectrum_rows(y, t=t)
        if t > 0:
            x = gram_X(model, t)
            rel = float(np.max(np.abs(x.values - y.values)) / max(y.values[0], 1e-300))
            entry["x_vs_y_relative"] = rel
            spectra += _spectrum_rows(x, t=t)
            passed &= rel <= 1e-4
        if cfg.sections:
            sweep = finite_section_oracle(model, t, cfg.sections, reference=y)
            entry["sections"] = {"sizes": sweep.sizes, "gaps": sweep.gaps,
                                 "monotone": sweep.monotone,
                                 "gap_decreasing": sweep.gap_decreasing}
            for M, s in zip(sweep.sizes, sweep.spectra):
                spectra += _spectrum_rows(s, t=t, M=M)
        checks = bound_suite(model, t, q=cfg.q, ps=[p for p in cfg.p_list if p >= 1], y=y)
        for c in checks:
            bounds.append({"t": t, **c.to_dict()})
            passed &= c.holds
        entry["semigroup_defect"] = unitary_semigroup_defect(model, t, t)
        per_t.append(entry)
    if not cfg.t_grid:
        for c in bound_suite(model, 0.0):
            bounds.append({"t": 0.0, **c.to_dict()})
            passed &= c.holds
    return ScenarioResult("analyze", bool(passed), {"model": summary, "per_t": per_t},
                          spectra, bounds)


def run_sweep(cfg: ScenarioConfig) -> ScenarioResult:
    """Schatten norms of ``K`` and ``Y`` over the ``(t, p)`` grid, per block and jointly."""
    model = PerturbedShiftModel(cfg.measures())
    spectra, rows = [], []
    for t in cfg.t_grid:
        y = gram_Y(model, t)
        spectra += _spectrum_rows(y, t=t)
        for n, f in enumerate(model.inner):
            k = gram_K(f.line_measure, t)
            spectra += _spectrum_rows(k, t=t, block=n)
            for p in cfg.p_list:
                rows.append({"t": t, "p": p, "block": n, "operator": "K",
                             "norm": schatten_norm(k, p)})
        for p in cfg.p_list:
            rows.append({"t": t, "p": p, "block": -1, "operator": "Y", "norm": schatten_norm(y, p)})
    return ScenarioResult("sweep", True, {"norms": rows}, spectra, [], rows)


# -- the exact Hilbert-Schmidt identity -----------------------------------------

def random_measure(rng: np.random.Generator, max_atoms: int = 8, min_gap: float = 0.05
                   ) -> CircleMeasure:
    """Random atomic measure with angles kept ``min_gap`` apart and away from 1."""
    n = int(rng.integers(1, max_atoms + 1))
    while True:
        ang = np.sort(rng.uniform(0.1, 2 * math.pi - 0.1, n))
        if n == 1 or np.min(np.diff(ang)) > min_gap:
            break
    return CircleMeasure(np.exp(1j * ang), rng.uniform(0.1, 2.0, n))


def hs_identity_rows(mu: CircleMeasure, ts: Sequence[float], quadrature: bool = True) -> list[dict]:
    """``||K||_{S_2}^2`` against ``t nu(R)/(2 pi)`` by the closed-form and quadrature Grams."""
    nu = cayley_measure(mu)
    mass = nu.total_mass
    # the circle form of the same total: 4 pi int dmu/|1 - xi|^2
    circle_mass = 4 * math.pi * moment_integral(mu, 2)
    rows = []
    for t in ts:
        exact = t * mass / (2 * math.pi)
        closed = math.fsum(np.diag(k_gram_closed_form(nu, t)).real)
        row = {"t": t, "atoms": len(mu), "exact": exact,
               "circle_form": t * circle_mass / (2 * math.pi),
               "closed_form": closed, "closed_rel_error": abs(closed - exact) / exact}
        if quadrature:
            quad = math.fsum(np.diag(k_gram_quadrature(nu, t)).real)
            row.update(quadrature=quad, quadrature_rel_error=abs(quad - exact) / exact)
        rows.append(row)
    return rows


def run_verify_hs(cfg: ScenarioConfig) -> ScenarioResult:
    """Exact Hilbert-Schmidt identity for ``K`` on configured and random measures."""
    measures = cfg.measures()
    rng = np.random.default_rng(cfg.seed)
    measures += [random_measure(rng, cfg.max_atoms) for _ in range(cfg.random_cases)]
    ts = cfg.t_grid or [0.25, 0.5, 1.0, 2.0, 4.0]
    ts = [t for t in ts if t > 0]
    rows = []
    for i, mu in enumerate(measures):
        rows += [{"case": i, **r} for r in hs_identity_rows(mu, ts)]
    closed_ok = all(r["closed_rel_error"] < 1e-12 for r in rows)
    quad_ok = all(r["quadrature_rel_error"] < 1e-6 for r in rows)
    return ScenarioResult("verify", closed_ok and quad_ok,
                          {"closed_form_validated": closed_form_validated(),
                           "closed_form_ok": closed_ok, "quadrature_ok": quad_ok,
                           "cases": len(measures), "rows": rows}, growth=rows)


# -- counterexamples -----------------------------------------------------------------

def integer_measure(N: int) -> CircleMeasure:
    """Circle preimage of the unit point masses at ``-N..N``."""
    nu = LineMeasure(np.arange(-N, N + 1, dtype=float), np.ones(2 * N + 1))
    return inverse_cayley_measure(nu)


def run_counterexample_integers(cfg: ScenarioConfig, t: float = 1.0) -> ScenarioResult:
    """Growth of ``||Y||_{S_2}^2`` for symmetric truncations of the integer measure."""
    rows = []
    for N in cfg.integer_sizes:
        mu = integer_measure(N)
        nu = cayley_measure(mu)
        y2 = math.fsum(y_column_norms(mu, t))
        k2 = math.fsum(np.diag(k_gram_closed_form(nu, t)).real)
        law = t * (2 * N + 1) / (2 * math.pi)
        rows.append({"N": N, "t": t, "y_hs_squared": y2, "k_hs_squared": k2,
                     "k_law": law, "k_law_error": abs(k2 - law)})
    vals = [r["y_hs_squared"] for r in rows]
    monotone = all(b > a for a, b in zip(vals, vals[1:]))
    sizes = [r["N"] for r in rows]
    ratio = None
    if 10 in sizes and 80 in sizes:
        ratio = vals[sizes.index(80)] / vals[sizes.index(10)]
    law_ok = all(r["k_law_error"] < 1e-12 for r in rows)
    passed = monotone and law_ok and (ratio is None or ratio >= 4)
    return ScenarioResult("counterexample-integers", passed,
                          {"monotone": monotone, "ratio_80_10": ratio, "k_law_ok": law_ok,
                           "rows": rows}, growth=rows)


def sharp3_terms(n: np.ndarray) -> np.ndarray:
    """``nu(bin_n)^(1/2) = 1/((|n| + 1) log(|n| + 2))``."""
    n = np.abs(n)
    return 1.0 / ((n + 1) * np.log(n + 2))


def _segment_sums(values: np.ndarray, cuts: Sequence[int]) -> list[float]:
    """Compensated sums of ``values[cuts[i]:cuts[i+1]]``."""
    return [math.fsum(values[a:b]) for a, b in zip(cuts, cuts[1:])]


def run_counterexample_sharp3(cfg: ScenarioConfig) -> ScenarioResult:
    """Divergence of the ``p = 1`` bin sum and convergence of the weighted mass.

    With ``nu(bin_n) = ((|n|+1) log(|n|+2))^-2``:

    * ``sum_{|n|<=N} nu(bin_n)^(1/2) >= loglog(N+2) - loglog 3``, checked at every
      ``N = 2^j`` and backed by the term-wise comparison
      ``1/((n+1) log(n+2)) >= loglog(n+3) - loglog(n+2)``;
    * the one-sided tail of ``sum (|n|+1) nu(bin_n)`` beyond ``N`` is bounded by
      an exact partial sum up to ``L`` plus the integral bound ``1/log(L+1)`` for
      the rest, and this upper bound lies below ``1/log(N+1)``.
    """
    top = 2 ** cfg.sharp3_max_exponent
    sizes = [2 ** j for j in range(cfg.sharp3_max_exponent + 1)]
    n = np.arange(0, top + 1, dtype=float)
    half = sharp3_terms(n)
    lower_terms = np.log(np.log(n[1:] + 3)) - np.log(np.log(n[1:] + 2))
    termwise = bool(np.all(half[1:] >= lower_terms))

    # two-sided partial sums: the n = 0 term once, the others twice
    segs = _segment_sums(half, [1] + [N + 1 for N in sizes])
    acc = [half[0]]
    for s in segs:
        acc.append(acc[-1] + 2 * s)
    partial = acc[1:]

    L = 4 * top
    m = np.arange(0, L + 1, dtype=float)
    weighted = 1.0 / ((m + 1) * np.log(m + 2) ** 2)
    tail_segs = _segment_sums(weighted, [N + 1 for N in sizes] + [L + 1])
    rows = []
    remainder = 1.0 / math.log(L + 1)
    running = [0.0] * len(sizes)
    s = 0.0
    for i in range(len(sizes) - 1, -1, -1):
        s += tail_segs[i]
        running[i] = s
    for i, N in enumerate(sizes):
        lower = math.log(math.log(N + 2)) - math.log(math.log(3))
        upper_tail = running[i] + remainder
        rows.append({"N": N, "parfenov_partial": partial[i], "loglog_lower": lower,
                     "diverging": partial[i] > lower,
                     "tail_upper": upper_tail, "tail_bound": 1 / math.log(N + 1),
                     "two_sided_tail_upper": 2 * upper_tail,
                     "two_sided_bound": 2 / math.log(N + 1),
                     "converging": upper_tail < 1 / math.log(N + 1)})
    passed = termwise and all(r["diverging"] and r["converging"] for r in rows)
    return ScenarioResult("counterexample-sharp3", passed,
                          {"termwise_comparison": termwise, "rows": rows}, growth=rows)


# -- synthesizer -----------------------------------------------------------------------

def _parse_target(target: Sequence[dict]) -> list[tuple[complex, int]]:
    atoms = []
    for a in target:
        xi = point_from_angle(a["angle_over_pi"])
        k = int(a.get("multiplicity", 1))
        if k < 1:
            raise ConfigError("multiplicities must be positive")
        if abs(xi - 1) == 0:
            raise ConfigError("1 is not allowed as an eigenvalue of the unitary part")
        atoms.append((xi, k))
    return atoms


def multiplicity_layers(target: Sequence[tuple[complex, int]],
                        base_weight: float = 1.0) -> list[CircleMeasure]:
    """Layer ``n`` carries every atom of multiplicity at least ``n``."""
    top = max((k for _, k in target), default=0)
    layers = []
    for n in range(1, top + 1):
        pts = [xi for xi, k in target if k >= n]
        layers.append(CircleMeasure(np.array(pts, complex), np.full(len(pts), base_weight)))
    return layers


def run_synthesize(cfg: ScenarioConfig) -> ScenarioResult:
    """Build a block model with prescribed unitary part and small trace-class perturbation."""
    target = _parse_target(cfg.target)
    if not target:
        cert = {"blocks": [], "rank": 0, "trace_norm": 0.0, "mass_bound": 0.0, "eps": cfg.eps,
                "eigenvalues": [], "note": "empty target: the perturbed shift equals the shift"}
        return ScenarioResult("synthesize", True, {"certificate": cert})
    layers = rescale_for_trace_bound(multiplicity_layers(target), cfg.eps, cfg.q)
    model = PerturbedShiftModel(layers)
    pert = stilde_minus_s_norms(model)
    check = unitary_block_check(model, tol=cfg.tol)
    want = np.concatenate([np.full(k, xi) for xi, k in target])
    eig_err = match_spectra(check.eigenvalues, want)
    mass_bound = 2 * math.fsum(math.sqrt(b.total_mass) for b in layers)
    ts = [t for t in (cfg.t_grid or [0.5, 1.0, 2.0]) if t > 0]
    fitted = fitted_trace_constant(layers, ts, cfg.q)
    max_mult = max(k for _, k in target)
    cert = {
        "blocks": [b.to_dict() for b in layers],
        "eps": cfg.eps, "q": cfg.q, "tol": cfg.tol,
        "rank": pert.rank, "rank_bound": max_mult,
        "trace_norm": pert.trace_norm, "mass_bound": mass_bound,
        "eigenvalues": check.eigenvalues, "target": want,
        "eigenvalue_error": eig_err,
        "gram_error": check.gram_error,
        "semigroup_trace_norms": fitted,
    }
    passed = (pert.rank <= max_mult and pert.trace_norm < cfg.eps and mass_bound < cfg.eps
              and eig_err <= cfg.tol and check.gram_error <= cfg.tol
              and all(math.isfinite(r["trace_norm"]) for r in fitted["rows"]))
    growth = [{"t": r["t"], "trace_norm": r["trace_norm"], "ratio": r["ratio"],
               "fitted_bound": r["bound"]} for r in fitted["rows"]]
    return ScenarioResult("synthesize", bool(passed), {"certificate": cert}, growth=growth)


def reverify_certificate(doc: dict) -> dict:
    """Recompute a stored certificate from its serialized blocks.

    Returns the largest discrepancy per quantity; each must be within the
    stored tolerance for the certificate to stand.
    """
    cert = doc.get("certificate", doc)
    blocks = [CircleMeasure.from_dict(b) for b in cert["blocks"]]
    if not blocks:
        return {"rank": 0.0, "trace_norm": 0.0, "mass_bound": 0.0}
    model = PerturbedShiftModel(blocks)
    pert = stilde_minus_s_norms(model)
    check = unitary_block_check(model, tol=cert["tol"])
    stored = np.array([complex(e["re"], e["im"]) for e in cert["eigenvalues"]])
    return {
        "rank": float(abs(pert.rank - cert["rank"])),
        "trace_norm": abs(pert.trace_norm - cert["trace_norm"]),
        "mass_bound": abs(2 * math.fsum(math.sqrt(b.total_mass) for b in blocks)
                          - cert["mass_bound"]),
        "eigenvalues": match_spectra(check.eigenvalues, stored),
    }


RUNNERS = {
    "analyze": run_analyze,
    "verify": run_verify_hs,
    "sweep": run_sweep,
    "counterexample-integers": run_counterexample_integers,
    "counterexample-sharp3": run_counterexample_sharp3,
    "synthesize": run_synthesize,
}


def run(cfg: ScenarioConfig) -> ScenarioResult:
    result = RUNNERS[cfg.kind](cfg)
    if cfg.out:
        result.write(cfg.out)
    return result

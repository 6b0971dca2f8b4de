"""Finite atomic measures on the unit circle and on the real line.

A :class:`CircleMeasure` is the generator of the whole model: it fixes the
inner function, the Clark basis and the perturbed shift.  Its image under
the Cayley map ``xi -> i(1 + xi)/(1 - xi)`` is a :class:`LineMeasure` with
masses ``m = pi (1 + zeta**2) w``.

All reductions go through :func:`math.fsum`, so results do not depend on
summation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_FLOOR = 1e-9
_UNIT_TOL = 1e-14
_DISTINCT_TOL = 1e-12


class MeasureError(ValueError):
    """Raised for atoms that violate the measure invariants."""


def point_from_angle(angle_over_pi: float) -> complex:
    """Unimodular point ``exp(i pi a)``, exact at multiples of ``pi/2``."""
    a = math.fmod(float(angle_over_pi), 2.0)
    if a < 0:
        a += 2.0
    exact = {0.0: 1 + 0j, 0.5: 1j, 1.0: -1 + 0j, 1.5: -1j, 2.0: 1 + 0j}
    if a in exact:
        return exact[a]
    return complex(math.cos(math.pi * a), math.sin(math.pi * a))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CircleMeasure:
    """Atomic measure ``sum_k w_k delta_{xi_k}`` on the unit circle.

    Points are normalized to modulus one on construction.  Atoms closer to
    ``1`` than ``floor`` are rejected, since the Cayley image blows up like
    ``2/|1 - xi|``.
    """

    points: np.ndarray
    weights: np.ndarray
    floor: float = field(default=DEFAULT_FLOOR, compare=False)

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=complex)).ravel()
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float)).ravel()
        if pts.shape != wts.shape:
            raise MeasureError("points and weights differ in length")
        if pts.size:
            mod = np.abs(pts)
            if np.any(mod == 0) or not np.all(np.isfinite(pts)):
                raise MeasureError("atom points must be finite and nonzero")
            pts = pts / mod
            if np.any(np.abs(np.abs(pts) - 1) > _UNIT_TOL):
                raise MeasureError("could not normalize atom points")
            if np.any(~np.isfinite(wts)) or np.any(wts <= 0):
                raise MeasureError("weights must be finite and strictly positive")
            near_one = np.abs(1 - pts) <= self.floor
            if np.any(near_one):
                raise MeasureError(
                    f"atom within {self.floor:g} of 1: {pts[near_one][0]!r}"
                )
            gaps = np.abs(pts[:, None] - pts[None, :]) + np.eye(pts.size)
            if np.any(gaps <= _DISTINCT_TOL):
                raise MeasureError("atom points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(wts))

    @classmethod
    def from_angles(cls, angles_over_pi: Iterable[float],
                    weights: Iterable[float], floor: float = DEFAULT_FLOOR):
        pts = [point_from_angle(a) for a in angles_over_pi]
        return cls(np.array(pts, dtype=complex), np.array(list(weights), float), floor)

    @classmethod
    def from_dict(cls, doc: dict, floor: float = DEFAULT_FLOOR) -> "CircleMeasure":
        """Build from ``{"atoms": [{"angle_over_pi": a, "weight": w}, ...]}``."""
        atoms = doc.get("atoms", [])
        return cls.from_angles([a["angle_over_pi"] for a in atoms],
                               [a["weight"] for a in atoms], floor)

    def to_dict(self) -> dict:
        return {"atoms": [
            {"angle_over_pi": float(np.angle(p) / math.pi), "weight": float(w),
             "re": float(p.real), "im": float(p.imag)}
            for p, w in zip(self.points, self.weights)
        ]}

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def scaled(self, c: float) -> "CircleMeasure":
        if not c > 0:
            raise MeasureError("scale factor must be positive")
        return CircleMeasure(self.points, self.weights * c, self.floor)


@dataclass(frozen=True)
class LineMeasure:
    """Atomic measure ``sum_k m_k delta_{zeta_k}`` on the real line."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float)).ravel()
        ms = np.atleast_1d(np.asarray(self.masses, dtype=float)).ravel()
        if pts.shape != ms.shape:
            raise MeasureError("points and masses differ in length")
        if np.any(~np.isfinite(pts)) or np.any(~np.isfinite(ms)) or np.any(ms <= 0):
            raise MeasureError("line atoms need finite points and positive masses")
        if pts.size != np.unique(pts).size:
            raise MeasureError("line atom points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "masses", _frozen(ms))

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses)

    def bin_masses(self) -> dict[int, float]:
        """Masses of the nonempty bins ``[n, n + 1)``, keyed by ``n`` in order."""
        groups: dict[int, list[float]] = {}
        for z, m in zip(self.points, self.masses):
            groups.setdefault(int(math.floor(z)), []).append(float(m))
        return {n: math.fsum(groups[n]) for n in sorted(groups)}


def cayley_point(xi):
    """``i (1 + xi)/(1 - xi)``; real for unimodular ``xi != 1``."""
    return 1j * (1 + xi) / (1 - xi)


def inverse_cayley_point(x):
    return (x - 1j) / (x + 1j)


def cayley_measure(mu: CircleMeasure) -> LineMeasure:
    """Transport ``mu`` to the line: ``d mu = d nu / (pi (1 + x^2))``."""
    zeta = cayley_point(mu.points).real
    return LineMeasure(zeta, math.pi * (1 + zeta**2) * mu.weights)


def inverse_cayley_measure(nu: LineMeasure, floor: float = DEFAULT_FLOOR) -> CircleMeasure:
    xi = inverse_cayley_point(nu.points.astype(complex))
    return CircleMeasure(xi, nu.masses / (math.pi * (1 + nu.points**2)), floor)


def moment_integral(mu: CircleMeasure, q: float) -> float:
    """``sum_k w_k / |1 - xi_k|^q``.  ``q = 0`` gives the total mass."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    return math.fsum(mu.weights / np.abs(1 - mu.points) ** q)


def parfenov_sum(nu: LineMeasure, p: float) -> float:
    """``sum_n nu([n, n+1))^(p/2)`` over the nonempty unit bins."""
    if not p > 0:
        raise ValueError("p must be positive")
    return math.fsum(m ** (p / 2) for m in nu.bin_masses().values())


def parfenov_table(nu: LineMeasure, p: float) -> list[dict]:
    """Rows ``n, bin_lo, bin_mass, contribution_p`` for CSV export."""
    return [{"n": n, "bin_lo": float(n), "bin_mass": m, "contribution_p": m ** (p / 2)}
            for n, m in nu.bin_masses().items()]


def arc_index(xi) -> np.ndarray:
    """Signed arc number of unimodular points.

    For angle ``phi`` in ``(0, pi]`` the arc is ``n = floor(pi/phi)``, so that
    ``pi/(n+1) < phi <= pi/n``; negative angles are reflected to ``-n``.
    """
    phi = np.angle(np.atleast_1d(xi))
    phi = np.where(phi == -math.pi, math.pi, phi)
    n = np.floor(math.pi / np.abs(phi)).astype(int)
    return np.where(phi > 0, n, -n)


def arc_binned_sum(mu: CircleMeasure, p: float) -> float:
    """``sum_n (int_{gamma_n} d mu / |1 - xi|^2)^(p/2)`` over the arcs ``gamma_n``."""
    if not p > 0:
        raise ValueError("p must be positive")
    if not len(mu):
        return 0.0
    idx = arc_index(mu.points)
    dens = mu.weights / np.abs(1 - mu.points) ** 2
    groups: dict[int, list[float]] = {}
    for n, d in zip(idx, dens):
        groups.setdefault(int(n), []).append(float(d))
    return math.fsum(math.fsum(groups[n]) ** (p / 2) for n in sorted(groups))


def damping_factors(masses: Sequence[float], eps: float) -> np.ndarray:
    """Geometric factors ``c_n = c_0 4^-n`` with ``2 sum sqrt(c_n m_n) < eps``.

    ``c_0`` is solved in closed form and shrunk by a fixed safety margin so
    the inequality is strict.
    """
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError("eps must be a positive finite number")
    masses = np.asarray(masses, dtype=float)
    if masses.size == 0:
        raise ValueError("need at least one measure")
    n = np.arange(1, masses.size + 1)
    envelope = math.fsum(2.0 ** -n * np.sqrt(masses))
    c0 = (0.9 * eps / (2 * envelope)) ** 2
    return c0 * 4.0 ** -n


def rescale_for_trace_bound(measures: Sequence[CircleMeasure], eps: float,
                            q: float) -> list[CircleMeasure]:
    """Rescale each measure so that ``2 sum_n sqrt(mu_n(T)) < eps``.

    Supports are untouched.  ``q`` must exceed 3; the summed square roots of
    the ``q``-moments stay finite since the list is finite.
    """
    if not q > 3:
        raise ValueError("q must exceed 3")
    if not len(measures):
        raise ValueError("need at least one measure")
    factors = damping_factors([m.total_mass for m in measures], eps)
    return [m.scaled(float(c)) for m, c in zip(measures, factors)]


def moment_envelope(measures: Sequence[CircleMeasure], q: float) -> float:
    """``sum_n moment_integral(mu_n, q)^(1/2)``."""
    return math.fsum(math.sqrt(moment_integral(m, q)) for m in measures)

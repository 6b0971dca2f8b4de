"""Pointwise evaluation of the analytic objects attached to a circle measure.

For an atomic measure the Herglotz integral is a finite sum, so the inner
function ``theta = (R - 1)/(R + 1)`` is a rational function of degree equal
to the number of atoms and is evaluated directly; no Blaschke zeros are ever
computed.  ``1 - theta`` is formed as ``2/(R + 1)``, which stays accurate
next to the atoms where ``R`` blows up.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .measures import CircleMeasure, LineMeasure, cayley_measure, moment_integral
from .quadrature import circle_inner, circle_norm


class AtomEvaluationWarning(UserWarning):
    """A boundary evaluation landed on an atom; the Clark value 1 is used."""


def phi_t(t: float, z):
    """Semigroup symbol ``exp(t (z + 1)/(z - 1))``; singular at ``z = 1``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    z = np.asarray(z, dtype=complex)
    if np.any(z == 1):
        raise ValueError("phi_t has an essential singularity at z = 1")
    return np.exp(t * (z + 1) / (z - 1))


def psi_t(t: float, x):
    """Half-plane symbol ``exp(i t x)``."""
    return np.exp(1j * t * np.asarray(x, dtype=complex))


def phi_taylor(t: float, n: int) -> np.ndarray:
    """First ``n`` Taylor coefficients of ``phi_t``.

    ``phi_t(z) = e^-t exp(-2t z/(1 - z))`` and the generating function of the
    Laguerre polynomials gives ``c_m = e^-t L_m^(-1)(2t)``; the three-term
    recurrence is run forward.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    out = np.zeros(n)
    if n == 0:
        return out
    x = 2.0 * t
    lag = np.zeros(max(n, 2))
    lag[0], lag[1] = 1.0, -x
    for m in range(1, n - 1):
        lag[m + 1] = ((2 * m - x) * lag[m] - (m - 1) * lag[m - 1]) / (m + 1)
    out[:] = math.exp(-t) * lag[:n]
    return out


class InnerFunction:
    """The inner function ``theta`` whose Clark measure is ``mu``."""

    def __init__(self, measure: CircleMeasure):
        self.measure = measure
        self.points = measure.points
        self.weights = measure.weights
        self.degree = len(measure)
        self.mass = measure.total_mass
        self.theta0 = (self.mass - 1) / (self.mass + 1)
        self.theta1 = complex(self.theta(np.array([1.0 + 0j]))[0])
        self._line = cayley_measure(measure)

    @property
    def line_measure(self) -> LineMeasure:
        return self._line

    # -- disk ---------------------------------------------------------------
    def herglotz(self, z):
        """``R(z) = sum_k w_k (xi_k + z)/(xi_k - z)``; infinite at atoms."""
        z = np.asarray(z, dtype=complex)
        xi = self.points
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self.weights * (xi + z[..., None]) / (xi - z[..., None])
        return terms.sum(axis=-1)

    def _at_atom(self, z):
        z = np.asarray(z, dtype=complex)
        if not self.degree:
            return np.zeros(z.shape, dtype=bool)
        return np.any(z[..., None] == self.points, axis=-1)

    def one_minus_theta(self, z):
        z = np.asarray(z, dtype=complex)
        hit = self._at_atom(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 2 / (self.herglotz(z) + 1)
        return np.where(hit, 0j, out)

    def theta(self, z, return_flag: bool = False):
        """``theta(z)`` on the closed disk.

        At an atom the rational formula degenerates (``R = inf``); the
        boundary value 1 is returned and the hit is flagged.
        """
        z = np.asarray(z, dtype=complex)
        hit = self._at_atom(z)
        if np.any(hit) and not return_flag:
            warnings.warn("theta evaluated at an atom", AtomEvaluationWarning, stacklevel=2)
        val = 1 - self.one_minus_theta(z)
        return (val, hit) if return_flag else val

    def theta_at_one(self) -> complex:
        """Nontangential limit ``theta(1)``, finite since no atom sits at 1."""
        return self.theta1

    def theta_prime_zero(self) -> complex:
        return 4 * complex(np.sum(self.weights * self.points.conj())) / (self.mass + 1) ** 2

    def omega_apply(self, u, z):
        """Clark transform ``(1 - theta(z)) sum_k u_k w_k / (1 - conj(xi_k) z)``."""
        z = np.asarray(z, dtype=complex)
        u = np.asarray(u, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (u * self.weights / (1 - self.points.conj() * z[..., None])).sum(axis=-1)
        hit = self._at_atom(z)
        if np.any(hit):
            # boundary value of Omega u at the atom is u there
            k = np.argmax(z[..., None] == self.points, axis=-1)
            return np.where(hit, u[k], self.one_minus_theta(z) * s)
        return self.one_minus_theta(z) * s

    def g(self, z):
        """``g = (theta(z) - theta(0)) / (z (1 - theta(0)))`` with the limit at 0."""
        z = np.asarray(z, dtype=complex)
        small = np.abs(z) < 1e-7
        zz = np.where(small, 1.0, z)
        full = (self.theta(zz) - self.theta0) / (zz * (1 - self.theta0))
        # second order expansion of theta about 0
        M = self.mass
        xb = self.points.conj()
        r1 = 2 * np.sum(self.weights * xb)
        r2 = 2 * np.sum(self.weights * xb**2)
        t1 = 2 * r1 / (M + 1) ** 2
        t2 = 2 * r2 / (M + 1) ** 2 - 2 * r1**2 / (M + 1) ** 3
        series = (t1 + t2 * z) / (1 - self.theta0)
        return np.where(small, series, full)

    def g_omega(self, z):
        """``g`` computed as the Clark image of ``conj(xi)``."""
        return self.omega_apply(self.points.conj(), z)

    def clark_basis(self, z):
        """Orthonormal basis of ``K_theta``: ``sqrt(w_k)(1 - theta)/(1 - conj(xi_k) z)``."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            cauchy = np.sqrt(self.weights) / (1 - self.points.conj() * z[..., None])
            out = self.one_minus_theta(z)[..., None] * cauchy
        hit = z[..., None] == self.points
        if np.any(hit):
            # boundary values at the atoms: 1/sqrt(w_k) on its own atom, 0 elsewhere
            on_atom = np.any(hit, axis=-1, keepdims=True)
            out = np.where(on_atom, np.where(hit, 1 / np.sqrt(self.weights), 0), out)
        return out

    def repkernel_one(self, z):
        """Reproducing kernel of ``K_theta`` at 1: ``(1 - conj(theta(1)) theta)/(1 - z)``."""
        z = np.asarray(z, dtype=complex)
        return (1 - np.conj(self.theta1) * self.theta(z)) / (1 - z)

    def repkernel_one_normsq(self, method: str = "clark") -> float:
        """Squared norm of the kernel at 1.

        ``"clark"``: ``|1 - theta(1)|^2 int d mu/|1 - xi|^2`` through the Clark
        isometry.  ``"quadrature"``: boundary quadrature of the kernel itself
        on a half-step grid that avoids ``z = 1``.
        """
        if method == "clark":
            return abs(1 - self.theta1) ** 2 * moment_integral(self.measure, 2)
        if method == "quadrature":
            return circle_norm(self.repkernel_one, offset=0.5) ** 2
        raise ValueError(f"unknown method {method!r}")

    def hardy_norm_one_minus_theta(self) -> float:
        return circle_norm(self.one_minus_theta)

    # -- upper half-plane ---------------------------------------------------
    def halfplane_herglotz(self, x):
        """``(1/(pi i)) sum_k m_k (1/(zeta_k - x) - zeta_k/(1 + zeta_k^2))``."""
        x = np.asarray(x, dtype=complex)
        zeta, m = self._line.points, self._line.masses
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = m * (1 / (zeta - x[..., None]) - zeta / (1 + zeta**2))
        return terms.sum(axis=-1) / (math.pi * 1j)

    def halfplane_one_minus_theta(self, x):
        x = np.asarray(x, dtype=complex)
        hit = np.any(x[..., None] == self._line.points, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(hit, 0j, 2 / (self.halfplane_herglotz(x) + 1))

    def theta_halfplane(self, x, route: str = "line"):
        """``Theta(x) = theta((x - i)/(x + i))`` in the closed upper half-plane.

        ``route="line"`` evaluates through the line measure, ``"cayley"``
        composes with the disk formula.  The pole region around ``x = -i``
        is refused.
        """
        x = np.asarray(x, dtype=complex)
        if np.any(x.imag < 0):
            raise ValueError("Theta is evaluated on the closed upper half-plane only")
        if route == "cayley":
            return self.theta((x - 1j) / (x + 1j))
        if route == "line":
            return 1 - self.halfplane_one_minus_theta(x)
        raise ValueError(f"unknown route {route!r}")


def hardy_isometry_defect(model: InnerFunction, u) -> float:
    """``| ||Omega u||^2_{H^2} - sum |u_k|^2 w_k |`` via boundary quadrature."""
    u = np.asarray(u, dtype=complex)
    norm2 = circle_norm(lambda z: model.omega_apply(u, z)) ** 2
    return abs(norm2 - math.fsum(np.abs(u) ** 2 * model.weights))


def clark_gram(model: InnerFunction) -> np.ndarray:
    G, _ = circle_inner(model.clark_basis, breakpoints=model.points)
    return G

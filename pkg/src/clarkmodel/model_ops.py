"""The perturbed shift and its finite sections.

``PerturbedShiftModel`` holds a list of circle measures (one per block).
With ``theta_n`` the inner function of block ``n``, ``hat_theta_n`` the
product of the earlier ones, ``g_n`` the Clark image of ``conj(xi)`` and

    a_n = hat_theta_n g_n,      b_n = hat_theta_n (1 - theta_n),

the perturbed shift is ``S~ f = z f + sum_n <f, a_n> b_n``.  Its invariant
subspace ``K_theta`` is spanned by the Clark basis vectors
``hat_theta_n * sqrt(w_k)(1 - theta_n)/(1 - conj(xi_k) z)``, on which it acts
diagonally with eigenvalue ``xi_k``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import quad
from scipy.optimize import linear_sum_assignment

from .analytic import InnerFunction, phi_t, phi_taylor
from .measures import CircleMeasure
from .quadrature import GRID_OFFSET, QuadratureError, circle_inner, circle_nodes

MAX_BLOCKS = 32


class TruncationWarning(UserWarning):
    """Analytic factors carry non-negligible mass beyond the working degree."""


class PerturbedShiftModel:
    """Perturbed shift built from an ordered list of block measures."""

    def __init__(self, blocks: Sequence[CircleMeasure] | CircleMeasure,
                 max_blocks: int = MAX_BLOCKS):
        if isinstance(blocks, CircleMeasure):
            blocks = [blocks]
        blocks = [b for b in blocks]
        if len(blocks) > max_blocks:
            raise ValueError(f"at most {max_blocks} blocks are supported")
        if any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must be nonempty measures")
        self.blocks = blocks
        self.inner = [InnerFunction(b) for b in blocks]
        self.atoms = (np.concatenate([b.points for b in blocks])
                      if blocks else np.zeros(0, complex))
        self.block_of_atom = np.concatenate(
            [np.full(len(b), n) for n, b in enumerate(blocks)]).astype(int) \
            if blocks else np.zeros(0, int)
        self.masses = np.array([b.total_mass for b in blocks])

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def dimension(self) -> int:
        """Dimension of ``K_theta``: the total number of atoms."""
        return int(self.atoms.size)

    def partial_products(self, z) -> np.ndarray:
        """``hat_theta_n(z)`` for every block, shape ``(len(z), N)``."""
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape + (len(self),), dtype=complex)
        acc = np.ones(z.shape, dtype=complex)
        for n, f in enumerate(self.inner):
            out[..., n] = acc
            acc = acc * (1 - f.one_minus_theta(z))
        return out

    def theta(self, z):
        """Product of the block inner functions (no unimodular normalization)."""
        z = np.asarray(z, dtype=complex)
        acc = np.ones(z.shape, dtype=complex)
        for f in self.inner:
            acc = acc * (1 - f.one_minus_theta(z))
        return acc

    def clark_basis(self, z) -> np.ndarray:
        """Orthonormal basis of ``K_theta``, shape ``(len(z), dimension)``."""
        z = np.asarray(z, dtype=complex)
        if not len(self):
            return np.zeros(z.shape + (0,), dtype=complex)
        hat = self.partial_products(z)
        cols = [hat[..., n:n + 1] * f.clark_basis(z) for n, f in enumerate(self.inner)]
        return np.concatenate(cols, axis=-1)

    def factors(self, z) -> tuple[np.ndarray, np.ndarray]:
        """``(a_n(z), b_n(z))``, each of shape ``(len(z), N)``."""
        z = np.asarray(z, dtype=complex)
        hat = self.partial_products(z)
        A = np.empty_like(hat)
        B = np.empty_like(hat)
        for n, f in enumerate(self.inner):
            A[..., n] = hat[..., n] * f.g_omega(z)
            B[..., n] = hat[..., n] * f.one_minus_theta(z)
        return A, B

    def to_dict(self) -> dict:
        return {"blocks": [b.to_dict() for b in self.blocks]}


# -- Taylor coefficients ----------------------------------------------------

def taylor_coefficients(func, n: int, *, tol: float = 1e-13, m_max: int = 2**22):
    """First ``n`` Taylor coefficients of functions analytic across the circle.

    ``func`` maps circle points to shape ``(len(z), k)``.  Samples on ``m``
    shifted roots of unity are transformed by FFT; ``m`` doubles until the
    upper half of the aliased spectrum drops below ``tol`` relative to the
    peak.  Returns ``(coeffs, tail)`` with ``coeffs`` of shape ``(n, k)`` and
    ``tail[k]`` the squared mass of coefficients from ``n`` upward.
    """
    m = 256
    while m < 2 * n:
        m *= 2
    while True:
        z = circle_nodes(m, GRID_OFFSET)
        F = np.asarray(func(z))
        if F.ndim == 1:
            F = F[:, None]
        c = np.fft.fft(F, axis=0) / m
        c *= np.exp(-2j * np.pi * np.arange(m) * GRID_OFFSET / m)[:, None]
        peak = max(float(np.max(np.abs(c), initial=0.0)), 1e-300)
        upper = float(np.max(np.abs(c[m // 2:]), initial=0.0))
        if upper <= tol * peak:
            tail = np.sum(np.abs(c[n:m // 2]) ** 2, axis=0)
            return c[:n], tail
        if m >= m_max:
            raise QuadratureError(f"Taylor coefficients not resolved at m={m}")
        m *= 2


# -- operator actions ---------------------------------------------------------

def apply_stilde(model: PerturbedShiftModel, f, degree: int | None = None,
                 tail_tol: float = 1e-10) -> np.ndarray:
    """Coefficients of ``S~ f`` for a polynomial ``f`` (monomial coefficients)."""
    f = np.asarray(f, dtype=complex)
    L = f.size
    D = L + 1 if degree is None else int(degree)
    out = np.zeros(D, dtype=complex)
    k = min(L, D - 1)
    out[1:k + 1] = f[:k]
    if L >= D:
        warnings.warn("z f does not fit in the requested degree", TruncationWarning,
                      stacklevel=2)
    if not len(model) or L == 0:
        return out
    A, tailA = taylor_coefficients(lambda z: model.factors(z)[0], max(L, D))
    B, tailB = taylor_coefficients(lambda z: model.factors(z)[1], D)
    inner = A[:L].conj().T @ f
    out += B @ inner
    lost = float(np.sum(tailB * np.abs(inner) ** 2))
    if lost > tail_tol**2:
        warnings.warn(f"truncation tail {math.sqrt(lost):.3g} beyond degree {D}",
                      TruncationWarning, stacklevel=2)
    return out


def _convolve_trunc(c, f, D):
    return np.convolve(c, f)[:D] if f.size else np.zeros(D, complex)


def apply_phi_t(model: PerturbedShiftModel, t: float, f, degree: int | None = None,
                perturbed: bool = True) -> np.ndarray:
    """First ``degree`` coefficients of ``phi_t(S~) f`` (or ``phi_t(S) f``).

    On ``K_theta`` the action is diagonal in the Clark basis; on the
    complement it is multiplication by ``phi_t``.
    """
    if t < 0:
        raise ValueError("the semigroup is defined for t >= 0 only")
    f = np.asarray(f, dtype=complex)
    L = f.size
    D = L if degree is None else int(degree)
    c = phi_taylor(t, D).astype(complex)
    fD = np.zeros(D, complex)
    fD[:min(L, D)] = f[:min(L, D)]
    if not perturbed or not model.dimension:
        return _convolve_trunc(c, fD, D)
    E, _ = taylor_coefficients(model.clark_basis, max(L, D))
    coef = E[:L].conj().T @ f
    proj = E[:D] @ coef
    lam = phi_t(t, model.atoms)
    return E[:D] @ (lam * coef) + _convolve_trunc(c, fD - proj, D)


# -- norms of the perturbation ----------------------------------------------

@dataclass
class PerturbationNorms:
    operator_norm: float
    trace_norm: float
    rank: int
    singular_values: np.ndarray
    single_block_product: float | None
    operator_bound: float | None
    trace_bound: float
    operator_bound_holds: bool | None
    trace_bound_holds: bool


def _lowrank_singular_values(GA: np.ndarray, GB: np.ndarray) -> np.ndarray:
    """Singular values of ``sum_n <., a_n> b_n`` from the two Gram matrices."""
    lam, U = np.linalg.eigh((GA + GA.conj().T) / 2)
    lam = np.clip(lam, 0, None)
    root = (U * np.sqrt(lam)) @ U.conj().T
    core = root @ GB @ root
    ev = np.linalg.eigvalsh((core + core.conj().T) / 2)
    ev = np.where(ev < 1e-14 * max(ev.max(initial=0.0), 1e-300), 0.0, ev)
    return np.sort(np.sqrt(ev))[::-1]


def stilde_minus_s_norms(model: PerturbedShiftModel) -> PerturbationNorms:
    """Operator norm, trace norm and rank of ``S~ - S``, with the explicit bounds."""
    if not len(model):
        return PerturbationNorms(0.0, 0.0, 0, np.zeros(0), None, 0.0, 0.0, None, True)
    GA, _ = circle_inner(lambda z: model.factors(z)[0], breakpoints=model.atoms)
    GB, _ = circle_inner(lambda z: model.factors(z)[1], breakpoints=model.atoms)
    s = _lowrank_singular_values(GA, GB)
    rank = int(np.sum(s > 1e-8 * max(s[0], 1e-300)))
    trace_norm = math.fsum(s)
    trace_bound = 2 * math.fsum(np.sqrt(model.masses))
    product = op_bound = None
    op_holds = None
    if len(model) == 1:
        product = math.sqrt(GA[0, 0].real * GB[0, 0].real)
        op_bound = 2 * math.sqrt(model.masses[0])
        op_holds = bool(s[0] < op_bound)
    return PerturbationNorms(float(s[0]), trace_norm, rank, s, product, op_bound,
                             trace_bound, op_holds, bool(trace_norm < trace_bound))


# -- Clark unitarity and spectral placement ---------------------------------

@dataclass
class UnitaryBlockReport:
    gram: np.ndarray
    compression: np.ndarray
    eigenvalues: np.ndarray
    atoms: np.ndarray
    gram_error: float
    compression_error: float
    eigenvalue_error: float
    tol: float
    worst_pair: tuple[int, int] | None = None
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = max(self.gram_error, self.compression_error,
                          self.eigenvalue_error) <= self.tol


def match_spectra(found, target) -> float:
    """Largest distance under the optimal one-to-one matching of two point sets."""
    found = np.asarray(found, complex)
    target = np.asarray(target, complex)
    if found.size != target.size:
        return math.inf
    if not found.size:
        return 0.0
    cost = np.abs(found[:, None] - target[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def unitary_block_check(model: PerturbedShiftModel, tol: float = 1e-8) -> UnitaryBlockReport:
    """Gram matrix of the Clark basis and the compression of ``S~`` onto it."""
    n = model.dimension
    if n == 0:
        empty = np.zeros((0, 0), complex)
        return UnitaryBlockReport(empty, empty, np.zeros(0, complex),
                                  np.zeros(0, complex), 0.0, 0.0, 0.0, tol)
    gram, _ = circle_inner(model.clark_basis, breakpoints=model.atoms)
    cross, _ = circle_inner(model.clark_basis, lambda z: model.factors(z)[0],
                            breakpoints=model.atoms)

    def image(z):
        E = model.clark_basis(z)
        _, B = model.factors(z)
        return z[:, None] * E + B @ cross

    comp, _ = circle_inner(image, model.clark_basis, breakpoints=model.atoms)
    eye_err = np.abs(gram - np.eye(n))
    diag_err = np.abs(comp - np.diag(model.atoms))
    worst = np.unravel_index(np.argmax(np.maximum(eye_err, diag_err)), (n, n))
    eig = np.linalg.eigvals(comp)
    return UnitaryBlockReport(gram, comp, eig, model.atoms.copy(),
                              float(eye_err.max()), float(diag_err.max()),
                              match_spectra(eig, model.atoms), tol,
                              (int(worst[0]), int(worst[1])))


# -- cogenerator ----------------------------------------------------------------

def cogenerator_identity_check(points, epsabs: float = 1e-12) -> tuple[float, np.ndarray]:
    """Errors of ``xi = 1 - 2 int_0^inf e^-t phi_t(xi) dt`` at unimodular points.

    On the circle ``phi_t(xi) = exp(-i t cot(arg(xi)/2))``, so the Laplace
    integral is a Fourier integral of ``e^-t`` and goes to QUADPACK's
    semi-infinite Fourier rule.
    """
    points = np.atleast_1d(np.asarray(points, complex))
    errs = np.zeros(points.size)
    for k, xi in enumerate(points):
        omega = float(((xi + 1) / (xi - 1) * -1j).real)  # phi_t = exp(i t omega)
        decay = lambda s: math.exp(-s)  # noqa: E731
        if omega == 0.0:
            re, re_err = quad(decay, 0, np.inf, epsabs=epsabs / 10, epsrel=1e-13)
            im, im_err = 0.0, 0.0
        else:
            re, re_err = quad(decay, 0, np.inf, weight="cos", wvar=abs(omega),
                              epsabs=epsabs, limlst=200)
            im, im_err = quad(decay, 0, np.inf, weight="sin", wvar=abs(omega),
                              epsabs=epsabs, limlst=200)
            im = math.copysign(im, omega)
        if max(re_err, im_err) > 10 * epsabs:
            raise QuadratureError(f"Laplace quadrature did not converge at {xi!r}")
        errs[k] = abs(xi - (1 - 2 * complex(re, im)))
    return float(errs.max(initial=0.0)), errs


def unitary_semigroup_defect(model: PerturbedShiftModel, t: float, s: float) -> float:
    """``max |phi_t(xi) phi_s(xi) - phi_{t+s}(xi)|`` over the atoms."""
    if not model.dimension:
        return 0.0
    a = model.atoms
    return float(np.max(np.abs(phi_t(t, a) * phi_t(s, a) - phi_t(t + s, a))))


# -- finite sections -----------------------------------------------------------

KINDS = ("shift", "stilde", "phi_shift", "phi_stilde")


@dataclass
class TruncatedOperator:
    kind: str
    degree: int
    matrix: np.ndarray
    tail: float
    t: float | None = None

    def to_rows(self) -> list[dict]:
        """Nonzero entries as ``row, col, re, im`` records."""
        r, c = np.nonzero(self.matrix)
        return [{"row": int(i), "col": int(j), "re": float(self.matrix[i, j].real),
                 "im": float(self.matrix[i, j].imag)} for i, j in zip(r, c)]


def lower_toeplitz(c: np.ndarray) -> np.ndarray:
    return scipy.linalg.toeplitz(c, np.zeros_like(c))


def matrix_truncation(model: PerturbedShiftModel, M: int, kind: str = "stilde",
                      t: float | None = None) -> TruncatedOperator:
    """``M x M`` section, in the monomial basis, of ``S``, ``S~``, ``phi_t(S)`` or ``phi_t(S~)``.

    ``tail`` is the squared coefficient mass of the analytic factors beyond
    degree ``M``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if kind.startswith("phi") and (t is None or t < 0):
        raise ValueError("phi sections need t >= 0")
    shift = np.eye(M, k=-1, dtype=complex)
    if kind == "shift":
        return TruncatedOperator(kind, M, shift, 0.0)
    if kind == "phi_shift":
        return TruncatedOperator(kind, M, lower_toeplitz(phi_taylor(t, M).astype(complex)), 0.0, t)
    if kind == "stilde":
        if not len(model):
            return TruncatedOperator(kind, M, shift, 0.0)
        A, tailA = taylor_coefficients(lambda z: model.factors(z)[0], M)
        B, tailB = taylor_coefficients(lambda z: model.factors(z)[1], M)
        return TruncatedOperator(kind, M, shift + B @ A.conj().T,
                                 float(max(tailA.max(), tailB.max())))
    T = lower_toeplitz(phi_taylor(t, M).astype(complex))
    if not model.dimension:
        return TruncatedOperator(kind, M, T, 0.0, t)
    E, tailE = taylor_coefficients(model.clark_basis, M)
    lam = phi_t(t, model.atoms)
    mat = (E * lam) @ E.conj().T + T - T @ E @ E.conj().T
    return TruncatedOperator(kind, M, mat, float(tailE.max()), t)


def difference_section(model: PerturbedShiftModel, t: float, M: int) -> np.ndarray:
    """Section of ``phi_t(S~) - phi_t(S)``: ``(E diag(phi_t(xi)) - T E) E^H``."""
    if not model.dimension:
        return np.zeros((M, M), complex)
    T = lower_toeplitz(phi_taylor(t, M).astype(complex))
    E, _ = taylor_coefficients(model.clark_basis, M)
    return (E * phi_t(t, model.atoms) - T @ E) @ E.conj().T


def isometry_defect(model: PerturbedShiftModel, M: int) -> float:
    """``max |C^H C - I|`` over the leading ``M/2`` columns of the ``S~`` section."""
    C = matrix_truncation(model, M, "stilde").matrix[:, : M // 2]
    return float(np.max(np.abs(C.conj().T @ C - np.eye(C.shape[1]))))


def section_semigroup_defect(model: PerturbedShiftModel, t: float, s: float, M: int) -> float:
    """Spectral norm of ``C_t C_s - C_{t+s}`` for the sections of ``phi(S~)``."""
    Ct = matrix_truncation(model, M, "phi_stilde", t).matrix
    Cs = matrix_truncation(model, M, "phi_stilde", s).matrix
    Cts = matrix_truncation(model, M, "phi_stilde", t + s).matrix
    return float(np.linalg.norm(Ct @ Cs - Cts, 2))


def wold_defect(model: PerturbedShiftModel, t: float, M: int) -> float:
    """Largest norm of ``(phi_t(S~) - phi_t(S)) theta z^m`` over ``m < M/2`` (sections)."""
    th, _ = taylor_coefficients(model.theta, M)
    th = th[:, 0]
    D = difference_section(model, t, M)
    worst = 0.0
    for m in range(M // 2):
        v = np.zeros(M, complex)
        v[m:] = th[: M - m]
        worst = max(worst, float(np.linalg.norm(D @ v)))
    return worst

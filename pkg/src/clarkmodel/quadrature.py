"""Quadrature on the unit circle and on the real line.

Circle integrals use the trapezoid rule, which converges geometrically for
functions analytic in an annulus around the circle (everything rational with
poles off the circle).  The grid is doubled until two successive values
agree.  When poles crowd the circle (light atoms) the annulus is thin and
the integrands peak at the atoms; past a grid cap the inner products switch
to adaptive Gauss-Legendre panels in the angle, split at the atoms.

Line integrals handle column families of the form

    c_k(x) = P_k(x) * (psi_k - exp(i t x))

where ``P_k`` is rational-like and analytic off a bounded set.  The Gram
matrix ``G[j, k] = int c_k conj(c_j) dx`` is split into a finite window
``[-X, X]`` (adaptive Gauss-Legendre panels) and two tails.  On the tails
the product expands into a non-oscillating part, integrated in the variable
``s = 1/x``, and two parts carrying ``exp(+-i t x)``, integrated along
vertical rays where they decay like ``exp(-t y)``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss


class QuadratureError(RuntimeError):
    """A quadrature did not reach its tolerance within its budget."""


@functools.lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = (b - a) / 2
    return (a + half * (x + 1)).ravel(), (half * w).ravel()


# fraction of a grid step; keeps nodes off "nice" atoms such as -1 or +-i
GRID_OFFSET = (math.sqrt(5) - 1) / 4


def circle_nodes(m: int, offset: float = 0.0) -> np.ndarray:
    return np.exp(2j * np.pi * (np.arange(m) + offset) / m)


def circle_inner(f, g=None, *, rtol: float = 1e-12, atol: float = 1e-14,
                 m0: int = 256, m_max: int = 2**20, offset: float = GRID_OFFSET,
                 breakpoints=None, trapezoid_max: int = 2**15):
    """Matrix of ``H^2`` inner products ``<f_k, g_j>`` on the unit circle.

    ``f`` and ``g`` map a 1-d array of circle points to an array of shape
    ``(len(z), n)``.  Returns ``(G, m)`` with ``G[j, k] = <f_k, g_j>`` (the
    Gram matrix when ``g`` is ``f``) and the number of nodes used.

    With ``breakpoints`` (points on the circle where the integrands peak)
    the trapezoid grid stops at ``trapezoid_max`` and adaptive panels split
    at those points take over.
    """
    if breakpoints is not None:
        m_max = min(m_max, trapezoid_max)
    prev = None
    m = m0
    while True:
        z = circle_nodes(m, offset)
        F = np.asarray(f(z))
        Gv = F if g is None else np.asarray(g(z))
        G = Gv.conj().T @ F / m
        if prev is not None:
            diff = np.max(np.abs(G - prev)) if G.size else 0.0
            if diff <= atol + rtol * max(1.0, np.max(np.abs(G), initial=0.0)):
                return G, m
        if m >= m_max:
            if breakpoints is not None:
                return _adaptive_circle_inner(f, g, np.angle(np.asarray(breakpoints)), rtol)
            raise QuadratureError(f"circle quadrature not converged at m={m}")
        prev = G
        m *= 2


def _adaptive_circle_inner(f, g, angles, rtol: float, order: int = 16, npanel: int = 64,
                           max_nodes: int = 20_000_000):
    """Adaptive panels in the angle ``s``: ``<f_k, g_j> = (1/2 pi) int f_k conj(g_j) ds``."""
    two_pi = 2 * math.pi
    edges = np.unique(np.concatenate([np.linspace(0.0, two_pi, npanel + 1),
                                      np.mod(angles, two_pi)]))
    pending = np.column_stack([edges[:-1], edges[1:]])
    xg, wg = gauss_legendre(order)
    acc_s, acc_w = [], []
    scale = None
    total = 0
    while pending.size:
        a, b = pending[:, :1], pending[:, 1:]
        mid = (a + b) / 2
        s1 = mid + (b - a) / 2 * xg
        sl = (a + mid) / 2 + (mid - a) / 2 * xg
        sr = (mid + b) / 2 + (b - mid) / 2 * xg
        w1 = (b - a) / 2 * wg / two_pi
        wh = (mid - a) / 2 * wg / two_pi
        npan = pending.shape[0]
        alls = np.concatenate([s1, sl, sr], axis=1).ravel()
        total += alls.size
        if total > max_nodes:
            raise QuadratureError("adaptive circle quadrature exceeded its node budget")
        z = np.exp(1j * alls)
        sq = np.abs(np.asarray(f(z))) ** 2
        if g is not None:
            sq = np.concatenate([sq, np.abs(np.asarray(g(z))) ** 2], axis=1)
        sq = sq.reshape(npan, 3 * order, -1)
        q1 = np.einsum("pq,pqk->pk", w1, sq[:, :order])
        q2 = (np.einsum("pq,pqk->pk", wh, sq[:, order:2 * order])
              + np.einsum("pq,pqk->pk", wh, sq[:, 2 * order:]))
        if scale is None:
            scale = max(float(np.max(q2.sum(axis=0), initial=0.0)), 1e-300)
        err = np.max(np.abs(q1 - q2), axis=1, initial=0.0)
        width = (b - a).ravel()
        local = np.max(q2, axis=1, initial=0.0)
        # evaluating 1 - conj(xi) z at distance d from an atom costs eps/d in
        # relative accuracy; panels at that round-off floor are accepted
        gap = np.abs(np.angle(np.exp(1j * (mid.ravel()[:, None] - angles))))
        dist = np.maximum(np.min(gap, axis=1, initial=math.pi), width / 2)
        floor = 16 * np.finfo(float).eps / dist
        ok = ((err <= rtol * scale * width / two_pi)
              | (err <= np.maximum(rtol, floor) * local)
              | (width <= 1e-13))
        if np.any(ok):
            acc_s.append(np.concatenate([sl[ok], sr[ok]], axis=1).ravel())
            acc_w.append(np.concatenate([wh[ok], wh[ok]], axis=1).ravel())
        bad = pending[~ok]
        mids = (bad[:, 0] + bad[:, 1]) / 2
        pending = np.concatenate([np.column_stack([bad[:, 0], mids]),
                                  np.column_stack([mids, bad[:, 1]])])
    z = np.exp(1j * np.concatenate(acc_s))
    w = np.concatenate(acc_w)
    F = np.asarray(f(z))
    Gv = F if g is None else np.asarray(g(z))
    return Gv.conj().T @ (w[:, None] * F), int(w.size)


def circle_norm(f, **kw) -> float:
    """``H^2`` norm of a scalar function on the circle."""
    G, _ = circle_inner(lambda z: np.asarray(f(z))[:, None], **kw)
    return math.sqrt(max(G[0, 0].real, 0.0))


@dataclass
class LineGramInfo:
    window: float
    panels: int
    nodes: int
    window_error: float


class LineColumns:
    """Interface for column families integrated by :func:`line_gram`.

    Subclasses provide

    ``t``       frequency of the oscillating factor;
    ``psi``     constants ``psi_k`` (array of length ``n``);
    ``extent``  bound ``R`` with every singularity of ``envelope`` in
                ``|Re x| <= R``;
    ``breakpoints``  real points where features concentrate;
    ``values(x)``    the columns on real ``x``, shape ``(len(x), n)``;
    ``envelope(x)``  the factors ``P_k`` on complex ``x``.
    """

    t: float
    psi: np.ndarray
    extent: float
    breakpoints: np.ndarray

    def values(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def envelope(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _conj_envelope(cols: LineColumns, x: np.ndarray) -> np.ndarray:
    """Analytic continuation of ``conj(P(x))`` from the real line."""
    return np.conj(cols.envelope(np.conj(x)))


MIN_PANEL = 1e-9


def _window_gram(cols: LineColumns, X: float, rtol: float, order: int,
                 max_nodes: int, diagonal: bool):
    t = cols.t
    width = X / 8
    if t > 0:
        width = min(width, math.pi / (4 * t))
    nbase = max(2, int(math.ceil(2 * X / width)))
    bp = np.asarray(cols.breakpoints, dtype=float)
    bp = bp[np.abs(bp) < X]
    edges = np.unique(np.concatenate([np.linspace(-X, X, nbase + 1), bp]))
    pending = np.column_stack([edges[:-1], edges[1:]])

    xg, wg = gauss_legendre(order)
    acc_x, acc_w, acc_v = [], [], []
    scale = None
    err_total = 0.0
    total_nodes = 0
    while pending.size:
        a, b = pending[:, :1], pending[:, 1:]
        mid = (a + b) / 2
        # one panel rule and two half-panel rules per pending panel
        x1 = mid + (b - a) / 2 * xg
        xl = (a + mid) / 2 + (mid - a) / 2 * xg
        xr = (mid + b) / 2 + (b - mid) / 2 * xg
        w1 = (b - a) / 2 * wg
        wh = (mid - a) / 2 * wg
        npan = pending.shape[0]
        allx = np.concatenate([x1, xl, xr], axis=1).ravel()
        total_nodes += allx.size
        if total_nodes > max_nodes:
            raise QuadratureError("line quadrature exceeded its node budget")
        V = np.asarray(cols.values(allx)).reshape(npan, 3 * order, -1)
        sq = np.abs(V) ** 2
        q1 = np.einsum("pq,pqk->pk", w1, sq[:, :order])
        q2 = (np.einsum("pq,pqk->pk", wh, sq[:, order:2 * order])
              + np.einsum("pq,pqk->pk", wh, sq[:, 2 * order:]))
        if scale is None:
            scale = max(float(np.max(q2.sum(axis=0), initial=0.0)), 1e-300)
        err = np.max(np.abs(q1 - q2), axis=1, initial=0.0)
        width_ok = (b - a).ravel()
        # a panel passes on an absolute budget spread by width or on its own
        # relative accuracy; either way the total stays within rtol * scale.
        # panels at the round-off floor are accepted and their error is reported
        ok = ((err <= rtol * scale * width_ok / (2 * X))
              | (err <= rtol * np.max(q2, axis=1, initial=0.0))
              | (width_ok <= MIN_PANEL * X))
        if np.any(ok):
            err_total += float(np.sum(err[ok]))
            acc_x.append(np.concatenate([xl[ok], xr[ok]], axis=1).ravel())
            acc_w.append(np.concatenate([wh[ok], wh[ok]], axis=1).ravel())
            acc_v.append(V[ok, order:].reshape(-1, V.shape[2]))
        bad = pending[~ok]
        mids = (bad[:, 0] + bad[:, 1]) / 2
        pending = np.concatenate([np.column_stack([bad[:, 0], mids]),
                                  np.column_stack([mids, bad[:, 1]])])
    w = np.concatenate(acc_w)
    V = np.concatenate(acc_v)
    if diagonal:
        G = np.diag(np.einsum("q,qk->k", w, np.abs(V) ** 2)).astype(complex)
    else:
        G = V.conj().T @ (w[:, None] * V)
    return G, w.size, err_total


def _ray_rule(t: float, gap: float, order: int = 24):
    """Nodes and weights for ``int_0^inf f(y) exp(-t y) dy`` (weight included)."""
    ymax = 45.0 / t
    width = min(1.0 / t, gap / 2)
    npan = int(math.ceil(ymax / width))
    y, w = panel_rule(np.linspace(0.0, ymax, npan + 1), order)
    return y, w * np.exp(-t * y)


def _pair(left, right, w, diagonal):
    if diagonal:
        return np.diag(np.einsum("q,qk,qk->k", w, left, right))
    return left.T @ (w[:, None] * right)


def _tail_gram(cols: LineColumns, X: float, diagonal: bool, order: int = 48):
    """Tail contributions ``(T0, Tplus, Tminus)`` over ``|x| > X``.

    ``T0[j,k] = int conj(P_j) P_k``, ``Tplus`` carries ``exp(i t x)`` and
    ``Tminus`` carries ``exp(-i t x)``.
    """
    xs, ws = gauss_legendre(order)
    # s = 1/x on [-1/X, 0) and (0, 1/X]; the integrand is analytic at s = 0
    s = np.concatenate([(xs - 1) / (2 * X), (xs + 1) / (2 * X)])
    w = np.concatenate([ws, ws]) / (2 * X)
    x = 1 / s
    P = cols.envelope(x)
    T0 = _pair(P.conj(), P, w / s**2, diagonal)

    t = cols.t
    gap = X - cols.extent
    y, wy = _ray_rule(t, gap)
    Tp = np.zeros_like(T0)
    Tm = np.zeros_like(T0)
    for sign in (1.0, -1.0):
        # exp(+itx): rays go up from +-X; exp(-itx): rays go down.
        for up, target in ((1.0, "p"), (-1.0, "m")):
            z = sign * X + up * 1j * y
            osc = np.exp(1j * up * t * sign * X)
            contrib = _pair(_conj_envelope(cols, z), cols.envelope(z), wy, diagonal) * osc
            # orientation: right tail +-i, left tail -+i
            factor = 1j * up * sign
            if target == "p":
                Tp = Tp + factor * contrib
            else:
                Tm = Tm + factor * contrib
    return T0, Tp, Tm


def line_gram(cols: LineColumns, *, rtol: float = 1e-12, order: int = 16,
              max_nodes: int = 20_000_000, diagonal: bool = False):
    """Gram matrix ``G[j, k] = int_R c_k(x) conj(c_j(x)) dx`` of a column family.

    With ``diagonal=True`` only the squared norms are computed (off-diagonal
    entries are zero in the returned matrix).
    """
    R = max(float(cols.extent), 1.0)
    X = 2 * R + 2
    Gw, nodes, err = _window_gram(cols, X, rtol, order, max_nodes, diagonal)
    if cols.t == 0:
        return Gw, LineGramInfo(X, 0, nodes, err)
    T0, Tp, Tm = _tail_gram(cols, X, diagonal)
    psi = np.asarray(cols.psi)
    pj = psi.conj()[:, None]
    pk = psi[None, :]
    tail = (pj * pk + 1) * T0 - pk * Tm - pj * Tp
    if diagonal:
        tail = np.diag(np.diag(tail))
    return Gw + tail, LineGramInfo(X, 0, nodes, err)

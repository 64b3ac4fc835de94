"""Transfer matrices for ``-f'' + q f = lambda r f`` with cellwise constant coefficients.

On each mesh cell ``q`` and ``r`` are replaced by their cell averages, so
``f'' = k f`` with constant ``k = qbar - lambda rbar`` and the cell map on
``(f, f')`` is known in closed form.  Averages of ``r`` come from the
antiderivative of the weight whenever one is supplied, which keeps integrable
endpoint singularities exact.  Halving every cell reduces the error by about
four, which the adaptive level selection and Richardson extrapolation use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Expr
from .weights import WeightSpec, integrate_abs

__all__ = [
    "Mesh",
    "build_mesh",
    "cell_functions",
    "cell_matrices",
    "chain_product",
    "chain_product_dd",
    "node_values",
    "interior_values",
    "mesh_for_tolerance",
]

BASE_CELLS = 8
GRADING_LEVELS = 40
GAUSS_POINTS = 8


@dataclass(frozen=True)
class Mesh:
    """Cell nodes with averaged coefficients; ``level`` counts uniform halvings."""

    nodes: np.ndarray
    rbar: np.ndarray
    qbar: np.ndarray
    level: int

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def size(self) -> int:
        return self.rbar.size


def _singular_end(weight: WeightSpec, p: float, side: int, length: float) -> bool:
    """Does ``|r|`` blow up when approaching ``p`` from ``side`` (+1 right, -1 left)?"""
    near = abs(float(weight(np.array([p + side * 1e-10 * length]))[0]))
    far = abs(float(weight(np.array([p + side * 1e-4 * length]))[0]))
    return not np.isfinite(near) or near > 4.0 * max(far, 1e-300)


def _base_nodes(weight: WeightSpec, q: Expr) -> np.ndarray:
    a, b = weight.a, weight.b
    cuts = {a, b, *weight.sign_changes}
    cuts.update(p for p in (*weight.expr.breakpoints(), *q.breakpoints()) if a < p < b)
    cuts = sorted(cuts)
    nodes = []
    for p0, p1 in zip(cuts[:-1], cuts[1:]):
        length = p1 - p0
        seg = list(np.linspace(p0, p1, BASE_CELLS + 1)[:-1])
        first = length / BASE_CELLS
        if _singular_end(weight, p0, +1, length):
            seg += [p0 + first * 2.0**-k for k in range(1, GRADING_LEVELS)]
        if _singular_end(weight, p1, -1, length):
            seg += [p1 - first * 2.0**-k for k in range(1, GRADING_LEVELS)]
        nodes.extend(seg)
    nodes.append(b)
    return np.unique(np.asarray(nodes))


def _gauss(n: int = GAUSS_POINTS):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _signs(weight: WeightSpec, mids: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(np.asarray(weight.sign_changes), mids)
    return weight.first_sign * (-1.0) ** idx


def build_mesh(weight: WeightSpec, q: Expr, level: int = 0) -> Mesh:
    """Mesh at refinement ``level``: every base cell split into ``2**level`` equal cells."""
    base = _base_nodes(weight, q)
    m = 2**level
    frac = np.arange(m) / m
    nodes = np.concatenate([(base[:-1, None] + np.diff(base)[:, None] * frac).ravel(), base[-1:]])
    h = np.diff(nodes)
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    if weight.has_antiderivative:
        mass = np.asarray(integrate_abs(weight, nodes[:-1], nodes[1:]), dtype=float)
    else:
        s, w = _gauss()
        pts = nodes[:-1, None] + h[:, None] * s
        mass = h * (np.abs(weight(pts.ravel())).reshape(pts.shape) @ w)
    rbar = _signs(weight, mids) * mass / h
    s, w = _gauss()
    pts = nodes[:-1, None] + h[:, None] * s
    qbar = q(pts.ravel()).reshape(pts.shape) @ w
    if not (np.all(np.isfinite(rbar)) and np.all(np.isfinite(qbar))):
        raise FloatingPointError("cell averages of r or q are not finite")
    return Mesh(nodes, rbar, qbar, level)


# -- closed-form cell maps ----------------------------------------------------


def cell_functions(z):
    """``C = cosh(sqrt z)``, ``S = sinh(sqrt z)/sqrt z`` and ``dS/dz`` (entire in ``z``)."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    w = np.sqrt(np.where(small, 1.0, z))
    C = np.cosh(np.sqrt(z))
    S = np.sinh(w) / w
    dS = (C - S) / (2.0 * np.where(small, 1.0, z))
    if np.any(small):
        zs = z[small]
        C[small] = 1 + zs / 2 * (1 + zs / 12 * (1 + zs / 30 * (1 + zs / 56)))
        S[small] = 1 + zs / 6 * (1 + zs / 20 * (1 + zs / 42 * (1 + zs / 72)))
        dS[small] = 1 / 6 + zs * (1 / 60 + zs * (1 / 1680 + zs / 90720))
    return C, S, dS


def _maps(k, h, with_derivative: bool):
    """Cell maps for ``f'' = k f`` over length ``h``, and ``d/dk`` of them."""
    C, S, dS = cell_functions(k * h * h)
    T = np.empty(np.broadcast(k, h).shape + (2, 2), dtype=complex)
    T[..., 0, 0] = C
    T[..., 0, 1] = h * S
    T[..., 1, 0] = k * h * S
    T[..., 1, 1] = C
    if not with_derivative:
        return T, None
    h2 = h * h
    dT = np.empty_like(T)
    dT[..., 0, 0] = 0.5 * h2 * S
    dT[..., 0, 1] = h2 * h * dS
    dT[..., 1, 0] = h * S + k * h2 * h * dS
    dT[..., 1, 1] = 0.5 * h2 * S
    return T, dT


def cell_matrices(mesh: Mesh, lam, with_derivative: bool = False):
    """Cell maps for every ``lam`` (shape ``(L, M, 2, 2)``) and optionally ``d/dlambda``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    k = mesh.qbar[None, :] - lam[:, None] * mesh.rbar[None, :]
    T, dTk = _maps(k, mesh.h[None, :], with_derivative)
    if dTk is None:
        return T, None
    return T, -mesh.rbar[None, :, None, None] * dTk


def chain_product(T, dT=None):
    """Ordered product ``T[M-1] ... T[0]`` along axis 1 (and its derivative) by pairwise reduction."""
    while T.shape[1] > 1:
        if T.shape[1] % 2:
            eye = np.broadcast_to(np.eye(2, dtype=complex), (T.shape[0], 1, 2, 2))
            T = np.concatenate([T, eye], axis=1)
            if dT is not None:
                dT = np.concatenate([dT, np.zeros_like(eye)], axis=1)
        lo, hi = T[:, 0::2], T[:, 1::2]
        if dT is not None:
            dT = dT[:, 1::2] @ lo + hi @ dT[:, 0::2]
        T = hi @ lo
    return T[:, 0], None if dT is None else dT[:, 0]


# -- compensated (double-double) product ------------------------------------

_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    ca = _SPLIT * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLIT * b
    bh = cb - (cb - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(x, y):
    s, e = _two_sum(x[0], y[0])
    e = e + x[1] + y[1]
    return _two_sum(s, e)


def _dd_mul(x, y):
    p, e = _two_prod(x[0], y[0])
    e = e + x[0] * y[1] + x[1] * y[0]
    return _two_sum(p, e)


def _dd_neg(x):
    return (-x[0], -x[1])


def _cdd_mul(x, y):
    """Complex double-double product; ``x = (re, im)`` with double-double parts."""
    re = _dd_add(_dd_mul(x[0], y[0]), _dd_neg(_dd_mul(x[1], y[1])))
    im = _dd_add(_dd_mul(x[0], y[1]), _dd_mul(x[1], y[0]))
    return re, im


def _cdd_add(x, y):
    return _dd_add(x[0], y[0]), _dd_add(x[1], y[1])


def _cdd_matmul(A, B):
    """2x2 products of nested ``A[i][j]`` complex double-double arrays."""
    return [[_cdd_add(_cdd_mul(A[i][0], B[0][j]), _cdd_mul(A[i][1], B[1][j])) for j in range(2)] for i in range(2)]


def _lift(T: np.ndarray):
    zero = np.zeros(T.shape[:2])
    return [[((T[..., i, j].real.copy(), zero.copy()), (T[..., i, j].imag.copy(), zero.copy())) for j in range(2)] for i in range(2)]


def _pad_identity(A):
    for i in range(2):
        for j in range(2):
            (rh, rl), (ih, il) = A[i][j]
            col = np.full((rh.shape[0], 1), 1.0 if i == j else 0.0)
            z = np.zeros((rh.shape[0], 1))
            A[i][j] = (
                (np.hstack([rh, col]), np.hstack([rl, z])),
                (np.hstack([ih, z]), np.hstack([il, z])),
            )
    return A


def _reduce_dd(A):
    while A[0][0][0][0].shape[1] > 1:
        if A[0][0][0][0].shape[1] % 2:
            A = _pad_identity(A)

        def take(sl):
            return [[tuple(tuple(part[:, sl] for part in comp) for comp in A[i][j]) for j in range(2)] for i in range(2)]

        A = _cdd_matmul(take(slice(1, None, 2)), take(slice(0, None, 2)))
    return A


def _collapse(x) -> np.ndarray:
    (rh, rl), (ih, il) = x
    return (rh[:, 0] + rl[:, 0]) + 1j * (ih[:, 0] + il[:, 0])


def chain_product_dd(T: np.ndarray):
    """Ordered product as :func:`chain_product`, accumulated in double-double arithmetic.

    Returns the product rounded to double and its Wronskian evaluated before
    rounding.  The Wronskian then equals the product of the cell determinants
    to about ``1e-30 |U|**2``, so exponential growth of the solutions no
    longer swamps it.
    """
    U = _reduce_dd(_lift(T))
    out = np.empty((T.shape[0], 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[:, i, j] = _collapse(U[i][j])
    det = _cdd_add(_cdd_mul(U[0][0], U[1][1]), _neg_c(_cdd_mul(U[0][1], U[1][0])))
    return out, _collapse(det)


def _neg_c(x):
    return _dd_neg(x[0]), _dd_neg(x[1])


# -- solution values --------------------------------------------------------


def node_values(mesh: Mesh, lam, y0, with_derivative: bool = False):
    """``(f, f')`` at every node for initial data ``y0`` (shape ``(L, 2)``).

    With ``with_derivative`` also returns the ``lambda``-derivative of the
    solution that starts from the same (lambda-independent) data.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    T, dT = cell_matrices(mesh, lam, with_derivative)
    L, M = T.shape[:2]
    y = np.empty((L, M + 1, 2), dtype=complex)
    y[:, 0] = np.broadcast_to(np.asarray(y0, dtype=complex), (L, 2))
    dy = None
    if with_derivative:
        dy = np.zeros_like(y)
    for i in range(M):
        y[:, i + 1] = np.einsum("lij,lj->li", T[:, i], y[:, i])
        if with_derivative:
            dy[:, i + 1] = np.einsum("lij,lj->li", T[:, i], dy[:, i]) + np.einsum("lij,lj->li", dT[:, i], y[:, i])
    return y, dy


def interior_values(mesh: Mesh, lam, y_nodes, s_frac, dy_nodes=None):
    """Solution at ``x_i + s_frac * h_i`` inside every cell from node data.

    Returns arrays of shape ``(L, M, len(s_frac))``; with ``dy_nodes`` also
    the ``lambda``-derivative.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    s = mesh.h[:, None] * np.asarray(s_frac)[None, :]
    k = mesh.qbar[None, :, None] - lam[:, None, None] * mesh.rbar[None, :, None]
    T, dTk = _maps(k, s[None], dy_nodes is not None)
    f0 = y_nodes[:, :-1, 0][..., None]
    d0 = y_nodes[:, :-1, 1][..., None]
    f = T[..., 0, 0] * f0 + T[..., 0, 1] * d0
    if dy_nodes is None:
        return f, None
    dT = -mesh.rbar[None, :, None, None, None] * dTk
    df = dT[..., 0, 0] * f0 + dT[..., 0, 1] * d0 + T[..., 0, 0] * dy_nodes[:, :-1, 0][..., None] + T[..., 0, 1] * dy_nodes[:, :-1, 1][..., None]
    return f, df


def mesh_for_tolerance(weight: WeightSpec, q: Expr, lam, tol: float, max_level: int = 10):
    """Coarsest mesh whose products agree with the next refinement to ``tol`` (relative).

    Returns ``(mesh, finer_mesh, achieved)``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    mesh = build_mesh(weight, q, 0)
    U, _ = chain_product(cell_matrices(mesh, lam)[0])
    achieved = math.inf
    for level in range(1, max_level + 1):
        finer = build_mesh(weight, q, level)
        Uf, _ = chain_product(cell_matrices(finer, lam)[0])
        scale = np.maximum(1.0, np.abs(Uf).max(axis=(1, 2)))
        achieved = float(np.max(np.abs(Uf - U).max(axis=(1, 2)) / scale))
        if achieved <= tol:
            return mesh, finer, achieved
        mesh, U = finer, Uf
    return mesh, build_mesh(weight, q, max_level + 1), achieved

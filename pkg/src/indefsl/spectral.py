"""Eigenvalues, root functions and Gram conditioning for ``-f'' + q f = lambda r f``.

Solutions are propagated with the cellwise-constant coefficient maps of
:mod:`indefsl.propagator`.  Eigenvalues are zeros of the characteristic
determinant of the boundary conditions applied to the shooting basis
``u1(a) = 1, u1'(a) = 0`` and ``u2(a) = 0, u2'(a) = 1``.  They are counted
inside rectangles by the argument principle (tracked phase of the
determinant), isolated by subdivision and polished by Newton's method with
the exact lambda-derivative of the cell maps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .bc import BCMatrices, canonicalize, named_bc, row_equivalent
from .expr import Expr
from .propagator import (
    Mesh,
    _gauss,
    cell_matrices,
    chain_product,
    chain_product_dd,
    interior_values,
    mesh_for_tolerance,
)
from .quadrature import integrate_pieces
from .weights import WeightSpec, integrate_abs

__all__ = [
    "ContourError",
    "FundamentalMatrix",
    "RootFunction",
    "Spectrum",
    "SpectralSolver",
    "fundamental_matrix",
    "char_det",
    "eigenvalues",
    "JordanChain",
    "jordan_chain_at_zero",
    "gram_condition",
    "GridFunction",
    "phi_transform",
    "phi_inverse",
    "weighted_norm",
]

CHUNK_CELLS = 1_500_000
SEARCH_TOL = 1e-6
SEARCH_LEVEL = 5
SPLIT_FRACTIONS = (0.5137, 0.4719, 0.5571, 0.4283)


class ContourError(RuntimeError):
    """A counting contour passes too close to a zero of the determinant."""


def _operator(problem):
    """``(weight, q, bc)`` from a problem object or a tuple."""
    if isinstance(problem, tuple):
        return problem
    return problem.weight, problem.q, problem.bc


# -- fundamental matrix -----------------------------------------------------


@dataclass
class FundamentalMatrix:
    """Shooting basis at ``b``: ``U = [[u1, u2], [u1', u2']]``.

    ``wronskian`` is evaluated from the compensated product on the finest
    mesh; ``error_estimate`` compares that mesh with the previous one.
    """

    lam: complex
    U: np.ndarray
    wronskian: complex
    level: int
    cells: int
    error_estimate: float

    @property
    def u1(self) -> complex:
        return complex(self.U[0, 0])

    @property
    def u2(self) -> complex:
        return complex(self.U[0, 1])

    @property
    def du1(self) -> complex:
        return complex(self.U[1, 0])

    @property
    def du2(self) -> complex:
        return complex(self.U[1, 1])

    def to_json(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "u1": [self.u1.real, self.u1.imag],
            "u2": [self.u2.real, self.u2.imag],
            "du1": [self.du1.real, self.du1.imag],
            "du2": [self.du2.real, self.du2.imag],
            "wronskian": [self.wronskian.real, self.wronskian.imag],
            "level": self.level,
            "cells": self.cells,
            "error_estimate": self.error_estimate,
        }


def fundamental_matrix(problem, lam: complex, tol: float = 1e-11, max_level: int = 10) -> FundamentalMatrix:
    """Shooting basis at ``b`` for one ``lam``, refined until successive meshes agree to ``tol``."""
    weight, q, _ = _operator(problem)
    lam = complex(lam)
    if not np.isfinite(lam):
        raise ValueError("lambda must be finite")
    _, fine, achieved = mesh_for_tolerance(weight, q, [lam], tol, max_level)
    U, W = chain_product_dd(cell_matrices(fine, [lam])[0])
    return FundamentalMatrix(lam, U[0], complex(W[0]), fine.level, fine.size, achieved)


# -- characteristic determinant ----------------------------------------------


def _bc_columns(bc: BCMatrices, U, dU=None):
    """``M(lambda)`` with columns ``B(u1), B(u2)`` where ``B(f) = C(f'(a), -f'(b)) - D(f(a), f(b))``."""
    C, D = bc.C, bc.D
    u1, du1, u2, du2 = U[:, 0, 0], U[:, 1, 0], U[:, 0, 1], U[:, 1, 1]
    M = np.empty((U.shape[0], 2, 2), dtype=complex)
    M[:, :, 0] = -C[None, :, 1] * du1[:, None] - D[None, :, 0] - D[None, :, 1] * u1[:, None]
    M[:, :, 1] = C[None, :, 0] - C[None, :, 1] * du2[:, None] - D[None, :, 1] * u2[:, None]
    if dU is None:
        return M, None
    dM = np.empty_like(M)
    dM[:, :, 0] = -C[None, :, 1] * dU[:, 1, 0][:, None] - D[None, :, 1] * dU[:, 0, 0][:, None]
    dM[:, :, 1] = -C[None, :, 1] * dU[:, 1, 1][:, None] - D[None, :, 1] * dU[:, 0, 1][:, None]
    return M, dM


def _cross(x, y):
    return x[0] * y[1] - x[1] * y[0]


def _det_coefficients(bc: BCMatrices) -> np.ndarray:
    """Coefficients of ``Delta`` as an affine function of ``(u1, u1', u2, u2')``.

    Expanding ``det[B(u1), B(u2)]`` leaves one quadratic term, the Wronskian
    ``u1 u2' - u1' u2``, which is identically 1; using it avoids the
    cancellation of the naive determinant when the solutions grow.
    """
    C, D = bc.C, bc.D
    p0, p1, p2, s0 = -D[:, 0], -D[:, 1], -C[:, 1], C[:, 0]
    return np.array(
        [
            _cross(p0, s0) + _cross(p1, p2),
            _cross(p1, s0),
            _cross(p2, s0),
            _cross(p0, p1),
            _cross(p0, p2),
        ]
    )


def _det(k: np.ndarray, U, constant: bool = True):
    out = k[1] * U[:, 0, 0] + k[2] * U[:, 1, 0] + k[3] * U[:, 0, 1] + k[4] * U[:, 1, 1]
    return out + k[0] if constant else out


def _products(mesh: Mesh, lam: np.ndarray, derivative: bool):
    step = max(1, CHUNK_CELLS // max(mesh.size, 1))
    Us, dUs = [], []
    for i in range(0, lam.size, step):
        T, dT = cell_matrices(mesh, lam[i : i + step], derivative)
        U, dU = chain_product(T, dT)
        Us.append(U)
        dUs.append(dU)
    U = np.concatenate(Us)
    return U, (np.concatenate(dUs) if derivative else None)


# -- root functions -------------------------------------------------------------


@dataclass
class RootFunction:
    """Eigenfunction (``order = 0``) or associated function (``order = 1``).

    ``nodes`` holds ``(f, f')`` at the mesh nodes.  For an associated
    function ``source`` holds the eigenfunction it is chained to, which
    enters its values inside the cells.
    """

    lam: complex
    order: int
    nodes: np.ndarray
    source: np.ndarray | None = None
    residual: float = math.nan


@dataclass
class Spectrum:
    """Eigenvalues with multiplicities found in a box, with diagnostics."""

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    box: tuple[float, float, float, float]
    residuals: np.ndarray
    det_residuals: np.ndarray
    mesh_level: int
    mesh_cells: int
    mesh_agreement: float
    root_functions: list[RootFunction] = field(default_factory=list)
    kappa: dict[int, float] = field(default_factory=dict)
    kappa_by_size: dict[int, float] = field(default_factory=dict)

    def eigen_rows(self):
        for lam, m, res in zip(self.eigenvalues, self.multiplicities, self.residuals):
            yield float(lam.real), float(lam.imag), int(m), float(res)

    def to_json(self) -> dict:
        return {
            "box": list(self.box),
            "eigenvalues": [{"re": r, "im": i, "multiplicity": m, "residual": res} for r, i, m, res in self.eigen_rows()],
            "det_residuals": self.det_residuals.tolist(),
            "mesh": {"level": self.mesh_level, "cells": self.mesh_cells, "agreement": self.mesh_agreement},
            "kappa": {str(k): v for k, v in sorted(self.kappa.items())},
        }

    def write_eigenvalues_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "multiplicity", "residual"])
            for row in self.eigen_rows():
                w.writerow([repr(v) for v in row])

    def write_kappa_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "functions", "kappa"])
            for n, k in sorted(self.kappa.items()):
                w.writerow([n, 2 * n, repr(k)])


class SpectralSolver:
    """Characteristic determinant and eigen-solver for one problem.

    Two pairs of meshes are kept.  The accurate pair is chosen so that the
    products at the probe points ``+-scale`` and ``+-scale + i scale/10``
    agree with the next refinement to ``tol``; the search pair only to
    ``SEARCH_TOL``, and is used for counting and locating zeros before they
    are polished on the accurate pair.  Determinants are
    Richardson-extrapolated from the two meshes of a pair.
    """

    def __init__(self, problem, scale: float = 100.0, tol: float = 1e-10, max_level: int = 7):
        weight, q, bc = _operator(problem)
        self.weight: WeightSpec = weight
        self.q: Expr = q
        self.bc = canonicalize(bc)[0].matrices
        self.coef = _det_coefficients(self.bc)
        self.tol = tol
        self.max_level = max_level
        self.scale = 0.0
        self.rescale(scale)

    def rescale(self, scale: float) -> None:
        scale = float(max(scale, 1.0))
        if scale <= self.scale:
            return
        probes = scale * np.array([1.0, -1.0, 1.0 + 0.1j, -1.0 + 0.1j])
        self.coarse, self.fine, self.agreement = mesh_for_tolerance(self.weight, self.q, probes, self.tol, self.max_level)
        search_tol = max(self.tol, SEARCH_TOL)
        if search_tol > self.tol:
            self.search = mesh_for_tolerance(self.weight, self.q, probes, search_tol, min(self.max_level, SEARCH_LEVEL))[:2]
        else:
            self.search = (self.coarse, self.fine)
        self.scale = scale
        self.root_mass = float(np.sum(self.fine.h * np.sqrt(np.abs(self.fine.rbar))))

    # determinant ------------------------------------------------------------
    def delta(self, lam, derivative: bool = False, accurate: bool = True):
        """Richardson-extrapolated determinant (and derivative) at ``lam``."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        coarse, fine = (self.coarse, self.fine) if accurate else self.search
        Uf, dUf = _products(fine, lam, derivative)
        Uc, dUc = _products(coarse, lam, derivative)
        d = (4.0 * _det(self.coef, Uf) - _det(self.coef, Uc)) / 3.0
        if not derivative:
            return d
        return d, (4.0 * _det(self.coef, dUf, False) - _det(self.coef, dUc, False)) / 3.0

    def relative_step(self, lam) -> np.ndarray:
        """Newton correction ``|Delta / Delta'|`` relative to ``max(1, |lambda|)``."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        d, dd = self.delta(lam, derivative=True)
        den = np.abs(dd) * np.maximum(1.0, np.abs(lam))
        return np.divide(np.abs(d), den, out=np.zeros(lam.shape), where=den > 0)

    # counting -----------------------------------------------------------------
    def winding(self, x0: float, x1: float, y0: float, y1: float) -> int:
        """Number of zeros inside the rectangle, by tracking the phase along its boundary."""
        corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        size = max(x1 - x0, y1 - y0)
        total = 0.0
        for z0, z1 in zip(corners, corners[1:] + corners[:1]):
            total += self._edge_phase(z0, z1, size)
        turns = total / (2 * math.pi)
        n = round(turns)
        if abs(turns - n) > 0.05:
            raise ContourError(f"non-integer winding {turns:.3f}")
        return int(n)

    def _edge_phase(self, z0: complex, z1: complex, size: float) -> float:
        # WKB: solutions oscillate with phase about sqrt|lambda| * int sqrt|r|
        turns = self.root_mass * abs(z1 - z0) / (math.sqrt(abs(z0)) + math.sqrt(abs(z1)) + 1e-300) / math.pi
        t = np.linspace(0.0, 1.0, 17 + int(8 * turns))
        vals = self.delta(z0 + (z1 - z0) * t, accurate=False)
        min_gap = 1e-13 * max(1.0, abs(z0), abs(z1))
        previous = None
        for _ in range(60):
            if np.any(vals == 0) or not np.all(np.isfinite(vals)):
                raise ContourError("determinant vanishes or overflows on the contour")
            ratio = vals[1:] / vals[:-1]
            dphi = np.angle(ratio)
            bad = (np.abs(dphi) > math.pi / 5) | (np.abs(np.log(np.abs(ratio))) > 1.0)
            if not np.any(bad):
                total = float(np.sum(dphi))
                # accept once a uniform doubling leaves the phase unchanged
                if previous is not None and abs(total - previous) < 0.1:
                    return total
                previous = total
                bad = np.ones_like(bad)
            gaps = np.diff(t) * abs(z1 - z0)
            if np.any(gaps[bad] < min_gap):
                raise ContourError("contour passes within roundoff of a zero")
            mids = 0.5 * (t[:-1] + t[1:])[bad]
            new = self.delta(z0 + (z1 - z0) * mids, accurate=False)
            order = np.argsort(np.concatenate([t, mids]))
            t = np.concatenate([t, mids])[order]
            vals = np.concatenate([vals, new])[order]
        raise ContourError("phase tracking did not resolve the edge")

    # polishing ----------------------------------------------------------------
    def newton(self, lam0: complex, multiplicity: int = 1, max_iter: int = 60):
        """Newton's method for a zero of the given multiplicity; ``None`` on failure."""
        return self._newton(lam0, multiplicity, max_iter)[0]

    def _newton(self, lam0: complex, multiplicity: int = 1, max_iter: int = 60):
        """``(root, quadratic)``; ``quadratic`` is False when the steps stagnated.

        Steps that stop shrinking below ``1e-5`` (relative) are accepted,
        since a multiple zero is only determined to about the square root
        of the roundoff in the determinant.
        """
        lam = complex(lam0)
        last = math.inf
        for _ in range(max_iter):
            d, dd = self.delta(lam, derivative=True)
            d, dd = complex(d[0]), complex(dd[0])
            if d == 0:
                return lam, True
            if dd == 0 or not np.isfinite(dd):
                return None, False
            step = multiplicity * d / dd
            tiny = max(1.0, abs(lam))
            if abs(step) >= last and last <= 1e-5 * tiny:
                return lam, False
            lam -= step
            if abs(step) <= 1e-14 * tiny:
                return lam, True
            last = abs(step)
        return None, False

    def find(self, box: tuple[float, float, float, float]) -> list[tuple[complex, int]]:
        """All zeros in ``box = (re_min, re_max, im_min, im_max)`` with multiplicities.

        Candidates from minima of ``|Delta|`` along the real axis are polished
        and given multiplicities by small local contours; if they do not
        account for the winding number of the whole box, the box is
        searched by subdivision instead.
        """
        total = self._count(box)
        if total == 0:
            return []
        found = self._scan_real(box) if box[2] < 0 < box[3] else []
        if sum(m for _, m in found) == total:
            return found
        return self._subdivide(box, total)

    def _scan_real(self, box) -> list[tuple[complex, int]]:
        x0, x1 = box[0], box[1]
        span = max(abs(x0), abs(x1))
        # zeros are roughly evenly spaced in sqrt|lambda|, about pi / root_mass apart
        per_zero = 16
        s0, s1 = np.sign(x0) * math.sqrt(abs(x0)), np.sign(x1) * math.sqrt(abs(x1))
        n = 64 + int(per_zero * self.root_mass * (s1 - s0) / math.pi)
        grid = np.linspace(s0, s1, n)
        x = np.sign(grid) * grid**2
        mag = np.abs(self.delta(x, accurate=False))
        interior = (mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])
        roots: list[tuple[complex, bool]] = []
        for start in x[1:-1][interior]:
            root, simple = self._newton(start)
            if root is None or not _inside(root, box, 0.0):
                continue
            if all(abs(root - r) > 1e-8 * max(1.0, abs(r)) for r, _ in roots):
                roots.append((root, simple))
        roots.sort(key=lambda p: (p[0].real, p[0].imag))
        out = []
        for i, (root, simple) in enumerate(roots):
            if simple:
                out.append((root, 1))
                continue
            gap = min([abs(root - r) for j, (r, _) in enumerate(roots) if j != i] + [span])
            half = min(0.3 * gap, 1e-3 * max(1.0, abs(root)))
            rect = (root.real - half, root.real + half, root.imag - half, root.imag + half)
            try:
                m = self._count(rect)
            except ContourError:
                return []
            if m == 0:
                return []
            if m > 1:
                root = self._refine_multiple(root, m)
            out.append((root, m))
        return out

    def _refine_multiple(self, root: complex, m: int) -> complex:
        polished = self.newton(root, multiplicity=m)
        root = root if polished is None else polished
        if m != 2:
            return root
        # a double zero is a simple zero of Delta', located by secant steps
        h = 1e-6 * max(1.0, abs(root))
        z0, z1 = root, root + h
        f0 = complex(self.delta(z0, derivative=True)[1][0])
        f1 = complex(self.delta(z1, derivative=True)[1][0])
        for _ in range(40):
            if f1 == f0:
                break
            z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
            z0, f0 = z1, f1
            z1 = z2
            f1 = complex(self.delta(z1, derivative=True)[1][0])
            if abs(z1 - z0) <= 1e-15 * max(1.0, abs(z1)):
                break
        return z1 if abs(z1 - root) <= 1e-4 * max(1.0, abs(root)) else root

    def _subdivide(self, box, total) -> list[tuple[complex, int]]:
        found: list[tuple[complex, int]] = []
        queue = [(box, total)]
        while queue:
            rect, count = queue.pop()
            if count == 0:
                continue
            x0, x1, y0, y1 = rect
            centre = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
            size = max(x1 - x0, y1 - y0)
            small = size < 1e-4 * max(1.0, abs(centre))
            if count == 1 or small:
                root = self._polish(centre, rect, count)
                if root is not None:
                    found.append((root, count))
                    continue
            try:
                queue.extend(self._split(rect, count))
            except ContourError:
                # a cluster below the resolution of the determinant
                root = self._polish(centre, rect, count) if count > 1 else None
                if root is None:
                    raise
                found.append((root, count))
        return found

    def _polish(self, centre, rect, count):
        size = max(rect[1] - rect[0], rect[3] - rect[2])
        root = self.newton(centre, multiplicity=count)
        if root is not None and count > 1:
            root = self._refine_multiple(root, count)
        if root is not None and _inside(root, rect, 1e-9 * max(1.0, size)):
            return root
        return None

    def _count(self, rect) -> int:
        return self.winding(*rect)

    def _split(self, rect, count):
        x0, x1, y0, y1 = rect
        horizontal = (x1 - x0) >= (y1 - y0)
        for frac in SPLIT_FRACTIONS:
            if horizontal:
                xm = x0 + frac * (x1 - x0)
                parts = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
            else:
                ym = y0 + frac * (y1 - y0)
                parts = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
            try:
                counts = [self._count(p) for p in parts]
            except ContourError:
                continue
            if sum(counts) == count:
                return list(zip(parts, counts))
        raise ContourError(f"could not split {rect} consistently")

    # root functions -----------------------------------------------------------
    def geometric_multiplicity(self, lam: complex) -> int:
        U, _ = _products(self.fine, np.array([lam]), False)
        M, _ = _bc_columns(self.bc, U)
        s = np.linalg.svd(M[0], compute_uv=False)
        return 2 if s[0] <= 1e-8 * max(1.0, np.linalg.norm(self.bc.stacked)) else 1

    def root_functions(self, lam: complex, multiplicity: int, mesh: Mesh | None = None) -> list[RootFunction]:
        """Eigenfunctions, and the associated function of a Jordan chain, as node data on ``mesh``."""
        mesh = mesh or self.fine
        system = _GlobalSystem(mesh, self.bc, lam)
        geometric = min(self.geometric_multiplicity(lam), multiplicity)
        if geometric == 2:
            return [RootFunction(lam, 0, y) for y in system.null_space(2)]
        f = system.null_space(1)[0]
        funcs = [RootFunction(lam, 0, f)]
        if multiplicity == 2:
            funcs.append(RootFunction(lam, 1, system.chain(f), f))
        elif multiplicity > 2:
            raise NotImplementedError("Jordan chains longer than two are not supported")
        return funcs

    def sample(self, funcs: list[RootFunction], s_frac=None):
        """Values at Gauss points of every fine cell, shape ``(len(funcs), M, G)``."""
        s_frac = _gauss()[0] if s_frac is None else s_frac
        out = np.empty((len(funcs), self.fine.size, len(s_frac)), dtype=complex)
        for i, f in enumerate(funcs):
            if f.source is None:
                out[i] = interior_values(self.fine, [f.lam], f.nodes[None], s_frac)[0][0]
            else:
                out[i] = interior_values(self.fine, [f.lam], f.source[None], s_frac, f.nodes[None])[1][0]
        return out

    def gram(self, funcs: list[RootFunction]) -> np.ndarray:
        """Weighted Gram matrix ``<f_j, f_i>`` in ``L^2_{|r|}`` of the normalised functions."""
        vals = self.sample(funcs)
        w = _gauss()[1]
        weights = (np.abs(self.fine.rbar) * self.fine.h)[:, None] * w[None, :]
        G = np.einsum("imk,jmk,mk->ij", vals.conj(), vals, weights)
        d = np.sqrt(np.real(np.diag(G)))
        return G / np.outer(d, d)

    def residual(self, funcs: list[RootFunction]) -> list[float]:
        """A-posteriori errors: boundary mismatch plus the change from the coarser mesh.

        The coarse root functions are fitted to the fine ones in the span of
        the coarse eigenspace (and chain) before comparing at common nodes.
        """
        lam, m = funcs[0].lam, len(funcs)
        coarse = self.root_functions(lam, m, self.coarse)
        step = 2 ** (self.fine.level - self.coarse.level)
        cw = np.abs(self.coarse.rbar) * self.coarse.h
        basis = np.stack([c.nodes[:-1, 0] for c in coarse], axis=1) * np.sqrt(cw)[:, None]
        out = []
        for f in funcs:
            target = f.nodes[::step][:-1, 0] * np.sqrt(cw)
            coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
            norm = float(np.linalg.norm(target))
            diff = float(np.linalg.norm(basis @ coef - target)) / (3.0 * norm)
            out.append(max(diff, self._bc_mismatch(f)))
        return out

    def _bc_mismatch(self, f: RootFunction) -> float:
        y = f.nodes
        ends = np.array([y[0, 0], y[-1, 0], y[0, 1], y[-1, 1]])
        fa, fb, da, db = ends
        mismatch = self.bc.C @ np.array([da, -db]) - self.bc.D @ np.array([fa, fb])
        return float(np.linalg.norm(mismatch)) / max(float(np.max(np.abs(y))), 1e-300)


class _GlobalSystem:
    """Sparse system ``y_{i+1} = T_i y_i`` at every cell plus the boundary conditions.

    Solving it for a null vector avoids shooting across regions where the
    solutions grow exponentially.
    """

    def __init__(self, mesh: Mesh, bc: BCMatrices, lam: complex):
        T, dT = cell_matrices(mesh, [lam], True)
        self.T, self.dT = T[0], dT[0]
        M = mesh.size
        self.n = 2 * (M + 1)
        rows, cols, vals = [], [], []
        C, D = bc.C, bc.D
        for r in range(2):
            rows += [r] * 4
            cols += [1, 2 * M + 1, 0, 2 * M]
            vals += [C[r, 0], -C[r, 1], -D[r, 0], -D[r, 1]]
        i = np.arange(M)
        for k in range(2):
            rows.append(2 * i + 2 + k)
            cols.append(2 * i + 2 + k)
            vals.append(np.ones(M))
            for j in range(2):
                rows.append(2 * i + 2 + k)
                cols.append(2 * i + j)
                vals.append(-self.T[:, k, j])
        self.A = sparse.csc_matrix(
            (np.concatenate([np.atleast_1d(v) for v in vals]), (np.concatenate([np.atleast_1d(r) for r in rows]), np.concatenate([np.atleast_1d(c) for c in cols]))),
            shape=(self.n, self.n),
            dtype=complex,
        )
        self.lu = self._factor(self.A)

    @staticmethod
    def _factor(A):
        try:
            return splu(A)
        except RuntimeError:
            # exactly singular in floating point: nudge the diagonal
            eps = 1e-15 * abs(A).max()
            return splu(A + eps * sparse.identity(A.shape[0], dtype=complex, format="csc"))

    # One solve from a random right-hand side, not repeated inverse iteration:
    # the left and right null vectors are nearly orthogonal when the
    # solutions grow exponentially somewhere, so a second solve starting from
    # the null vector itself amplifies rounding instead of removing it.
    def null_space(self, k: int) -> list[np.ndarray]:
        rng = np.random.default_rng(12345)
        X = self.lu.solve(rng.standard_normal((self.n, k)) + 1j * rng.standard_normal((self.n, k)))
        X, _ = np.linalg.qr(X)
        return [_fix_phase(X[:, j].reshape(-1, 2)) for j in range(k)]

    def left_null(self) -> np.ndarray:
        rng = np.random.default_rng(54321)
        w = self.lu.solve(rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n), trans="H")
        return w / np.linalg.norm(w)

    def chain(self, f: np.ndarray) -> np.ndarray:
        """``g`` with ``g_{i+1} = T_i g_i + dT_i f_i`` and homogeneous conditions, orthogonal to ``f``."""
        rhs = np.zeros(self.n + 1, dtype=complex)
        rhs[2 : self.n] = np.einsum("mkj,mj->mk", self.dT, f[:-1]).ravel()
        w = self.left_null()
        fv = f.ravel()
        B = sparse.bmat([[self.A, sparse.csc_matrix(w[:, None])], [sparse.csc_matrix(fv.conj()[None, :]), None]], format="csc")
        g = splu(B).solve(rhs)[: self.n]
        return g.reshape(-1, 2)


def _fix_phase(y: np.ndarray) -> np.ndarray:
    """Unit-norm node data with its largest value real and positive."""
    k = np.argmax(np.abs(y[:, 0]))
    y = y * (abs(y[k, 0]) / y[k, 0])
    return y / np.linalg.norm(y)


def _inside(z: complex, rect, margin: float) -> bool:
    x0, x1, y0, y1 = rect
    return x0 - margin <= z.real <= x1 + margin and y0 - margin <= z.imag <= y1 + margin


def char_det(problem, lam, bc=None):
    """Characteristic determinant ``Delta(lambda)`` (vectorised over ``lam``)."""
    weight, q, pbc = _operator(problem)
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=complex))
    solver = SpectralSolver((weight, q, bc if bc is not None else pbc), scale=float(np.max(np.abs(lam_arr))))
    out = solver.delta(lam_arr)
    return out if np.ndim(lam) else complex(out[0])


def _default_box(solver: SpectralSolver, needed: int, start: float = 64.0):
    """Thin box ``[-L, L] x [-L/10, L/10]`` holding at least ``needed`` zeros.

    ``L`` starts from the WKB count ``2 sqrt(L) int sqrt|r| / pi`` and is
    doubled until the winding number confirms it.
    """
    mass = float(integrate_pieces(lambda x: np.sqrt(np.abs(solver.weight(x))), [solver.weight.a, *solver.weight.sign_changes, solver.weight.b], rtol=1e-6, atol=1e-12))
    estimate = (math.pi * (needed + 4) / (2.0 * max(mass, 1e-12))) ** 2
    lam_max = max(start, 2.0 ** math.ceil(math.log2(estimate)))
    while True:
        solver.rescale(lam_max)
        box = (-lam_max, lam_max, -lam_max / 10, lam_max / 10)
        if solver.winding(*box) >= needed or lam_max > 2.0**24:
            return box
        lam_max *= 2


def eigenvalues(problem, box=None, max_count: int = 20, *, with_functions: bool = False, tol: float = 1e-10) -> Spectrum:
    """Eigenvalues nearest 0 (sorted by ``|lambda|``, with multiplicity).

    Without ``box`` the square ``[-L, L] x [-L/10, L/10]`` is doubled until it
    holds at least ``max_count + 2`` zeros.
    """
    solver = SpectralSolver(problem, tol=tol)
    if box is None:
        box = _default_box(solver, max_count + 2)
    else:
        solver.rescale(max(abs(box[0]), abs(box[1]), abs(box[2]), abs(box[3])))
    roots = solver.find(box)
    roots.sort(key=lambda p: (abs(p[0]), p[0].real, p[0].imag))
    lams, mults = [], []
    total = 0
    for lam, m in roots:
        if total >= max_count:
            break
        lams.append(lam)
        mults.append(m)
        total += m
    lams_arr = np.array(lams, dtype=complex)
    funcs: list[RootFunction] = []
    residuals = []
    for lam, m in zip(lams, mults):
        rf = solver.root_functions(lam, m)
        for f, res in zip(rf, solver.residual(rf)):
            f.residual = res
        residuals.append(max(f.residual for f in rf))
        funcs.extend(rf)
    det_res = solver.relative_step(lams_arr) if lams else np.array([])
    spec = Spectrum(
        lams_arr,
        np.array(mults, dtype=int),
        tuple(float(v) for v in box),
        np.array(residuals),
        np.asarray(det_res, dtype=float),
        solver.fine.level,
        solver.fine.size,
        solver.agreement,
        funcs if with_functions else [],
    )
    spec.solver = solver  # keeps the mesh for later evaluation
    return spec


# -- Jordan chain at zero -------------------------------------------------


def _signed_integral(weight: WeightSpec, x):
    """``R(x) = int_a^x r`` (vectorised)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros_like(x)
    for p0, p1, sign in weight.pieces():
        hi = np.clip(x, p0, p1)
        live = hi > p0
        if np.any(live):
            total[live] += sign * np.asarray(integrate_abs(weight, np.full(live.sum(), p0), hi[live]), dtype=float)
    return total


@dataclass
class JordanChain:
    """``f0 = 1`` and ``g0`` with ``l[g0] = f0`` for an odd weight under periodic conditions."""

    gamma: float
    x: np.ndarray
    g0: np.ndarray
    boundary_values: tuple[float, float]
    boundary_slopes: tuple[float, float]
    ell_residual: float

    def f0(self, x):
        return np.ones_like(np.asarray(x, dtype=float))


def _is_zero_potential(q: Expr, weight: WeightSpec) -> bool:
    xs = np.linspace(weight.a, weight.b, 1001)
    return bool(np.all(q(xs) == 0))


def jordan_chain_at_zero(problem, x=None) -> JordanChain:
    """Associated function at ``lambda = 0`` for odd ``r``, ``q = 0`` and periodic conditions.

    ``g0(x) = gamma (x - a) - int_a^x R``, ``R = int_a r`` and
    ``gamma = int_a^b R / (b - a)``, so that ``g0(a) = g0(b) = 0`` and
    ``g0' = gamma - R``.
    """
    weight, q, bc = _operator(problem)
    a, b = weight.a, weight.b
    if not math.isclose(a, -b, abs_tol=1e-14):
        raise ValueError("the interval must be symmetric about 0")
    if not _is_zero_potential(q, weight):
        raise ValueError("the potential must vanish")
    if not row_equivalent(bc, named_bc("periodic")):
        raise ValueError("boundary conditions must be periodic")
    probe = np.linspace(a, b, 2003)[1:-1]
    probe = probe[np.abs(probe) > 1e-9]
    rp, rm = weight(probe), weight(-probe)
    if not np.allclose(rp, -rm, rtol=1e-12, atol=0):
        raise ValueError("the weight is not odd")
    mass = float(integrate_abs(weight, a, b))
    total = float(_signed_integral(weight, b)[0])
    if abs(total) > 1e-12 * mass:
        raise ValueError("int r != 0: the eigenvalue 0 is semisimple and has no chain")

    R = lambda s: _signed_integral(weight, s)  # noqa: E731
    cuts = [a, *weight.sign_changes, b]
    mass_R = integrate_pieces(R, cuts, rtol=1e-13, atol=1e-300)
    gamma = mass_R / (b - a)
    if x is None:
        x = np.linspace(a, b, 2**8 + 1)
    x = np.asarray(x, dtype=float)
    order = np.argsort(x)
    xs = x[order]
    running = np.zeros_like(xs)
    acc, prev = 0.0, a
    for i, xi in enumerate(xs):
        pts = [prev, *[c for c in weight.sign_changes if prev < c < xi], xi]
        acc += integrate_pieces(R, pts, rtol=1e-13, atol=1e-300) if xi > prev else 0.0
        running[i] = acc
        prev = xi
    g0 = np.empty_like(x)
    g0[order] = gamma * (xs - a) - running
    ends = (0.0, float(gamma * (b - a) - mass_R))
    slopes = (gamma - float(R(a)[0]), gamma - float(R(b)[0]))
    return JordanChain(gamma, x, g0, ends, slopes, _ell_residual(weight, x, g0))


ELL_CHECK_NODES = 257


def _ell_residual(weight: WeightSpec, x: np.ndarray, g: np.ndarray) -> float:
    """Weak-form check of ``-g'' = r`` on consecutive node triples inside one sign-constant piece.

    With the hat function ``phi`` on ``[x0, x2]`` (peak at ``x1``) the second
    divided difference satisfies ``(h1 + h2)/2 * D2 g = -int phi r`` exactly.
    The right side is integrated directly from ``r``; the mismatch is
    reported relative to ``int phi |r|``.  Unlike pointwise differences this
    stays meaningful next to singular points of the weight.  Rounding in
    ``g`` enters as ``eps / h**2``, so at most ``ELL_CHECK_NODES`` evenly
    subsampled nodes are used.
    """
    if x.size < 3:
        return math.nan
    step = max(1, (x.size - 1) // (ELL_CHECK_NODES - 1))
    keep = np.unique(np.r_[np.arange(0, x.size, step), x.size - 1])
    x, g = x[keep], g[keep]
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    h1, h2 = x1 - x0, x2 - x1
    lhs = (g[2:] - g[1:-1]) / h2 - (g[1:-1] - g[:-2]) / h1
    ok = (h1 > 0) & (h2 > 0)
    for c in weight.sign_changes:
        ok &= ~((x0 < c) & (c < x2))
    worst = 0.0
    for i in np.flatnonzero(ok):
        a, m, b = x0[i], x1[i], x2[i]
        hat = lambda t: np.where(t < m, (t - a) / (m - a), (b - t) / (b - m))  # noqa: E731
        signed = integrate_pieces(lambda t: hat(t) * weight(t), [a, m, b], rtol=1e-12, atol=1e-300)
        mass = integrate_pieces(lambda t: hat(t) * np.abs(weight(t)), [a, m, b], rtol=1e-12, atol=1e-300)
        worst = max(worst, abs(lhs[i] + signed) / mass)
    return float(worst)


# -- Gram diagnostic ----------------------------------------------------------


def _balanced(funcs: list[RootFunction], zero_tol: float) -> list[RootFunction]:
    zero = [f for f in funcs if abs(f.lam) <= zero_tol]
    pos = sorted((f for f in funcs if abs(f.lam) > zero_tol and (f.lam.real > 0 or (f.lam.real == 0 and f.lam.imag > 0))), key=lambda f: abs(f.lam))
    neg = sorted((f for f in funcs if abs(f.lam) > zero_tol and f not in pos), key=lambda f: abs(f.lam))
    out = list(zero)
    while pos or neg:
        if pos:
            out.append(pos.pop(0))
        if neg:
            out.append(neg.pop(0))
    return out


def gram_condition(problem, N, *, tol: float = 1e-10) -> Spectrum:
    """Condition numbers ``kappa(G_n)`` for every ``n`` in ``N``.

    ``G_n`` is the Gram matrix in ``L^2_{|r|}`` of the ``2n`` root functions
    nearest 0, taken outward from 0 alternately from the positive and
    negative half-planes and normalised to unit norm.  ``kappa_by_size``
    also records the condition number of every leading section, so its
    entry for one function is 1.
    """
    ns = sorted({int(n) for n in np.atleast_1d(N)})
    if ns[0] < 1:
        raise ValueError("N must be positive")
    need = 2 * ns[-1]
    spec = eigenvalues(problem, max_count=need + 6, with_functions=True, tol=tol)
    solver = spec.solver
    ordered = _balanced(spec.root_functions, 1e-8 * max(1.0, solver.scale))
    if len(ordered) < need:
        raise ValueError(f"only {len(ordered)} root functions available, need {need}")
    G = solver.gram(ordered[:need])
    for size in range(1, need + 1):
        sv = np.linalg.svd(G[:size, :size], compute_uv=False)
        if sv[-1] <= 1e-14 * sv[0]:
            raise np.linalg.LinAlgError(f"Gram matrix of {size} root functions is numerically singular")
        spec.kappa_by_size[size] = float(sv[0] / sv[-1])
    spec.kappa = {n: spec.kappa_by_size[2 * n] for n in ns}
    return spec


# -- unitary shift ----------------------------------------------------------------


@dataclass(frozen=True)
class GridFunction:
    """Samples ``values`` at cell centres ``x`` with cell widths ``widths``."""

    x: np.ndarray
    values: np.ndarray
    widths: np.ndarray


def weighted_norm(f: GridFunction, weight: WeightSpec) -> float:
    """Midpoint-rule norm in ``L^2_{|r|}``."""
    return math.sqrt(float(np.sum(f.widths * np.abs(weight(f.x)) * np.abs(f.values) ** 2)))


def _check_shift(a: float, b: float, c: complex, eps: float) -> float:
    if c == 0:
        raise ValueError("c must be nonzero")
    if not 0 < eps < b - a:
        raise ValueError("eps must lie in (0, b - a)")
    return abs(c) ** 2


def phi_transform(f: GridFunction, a: float, b: float, c: complex, eps: float) -> GridFunction:
    """Move the part of ``f`` on ``(b - eps, b]`` to ``[a - eps/|c|^2, a)``, scaled by ``1/c``."""
    c2 = _check_shift(a, b, c, eps)
    bt = b - eps
    if np.any(f.x < a) or np.any(f.x > b):
        raise ValueError("grid lies outside [a, b]")
    if np.any((f.x - 0.5 * f.widths < bt) & (f.x + 0.5 * f.widths > bt) & ~np.isclose(f.x + 0.5 * f.widths, bt) & ~np.isclose(f.x - 0.5 * f.widths, bt)):
        raise ValueError("a grid cell straddles b - eps")
    moved = f.x > bt
    x = np.where(moved, a - (b - f.x) / c2, f.x)
    values = np.where(moved, f.values / c, f.values)
    widths = np.where(moved, f.widths / c2, f.widths)
    order = np.argsort(x, kind="stable")
    return GridFunction(x[order], values[order], widths[order])


def phi_inverse(g: GridFunction, a: float, b: float, c: complex, eps: float) -> GridFunction:
    """Inverse of :func:`phi_transform`."""
    c2 = _check_shift(a, b, c, eps)
    at = a - eps / c2
    if np.any(g.x < at) or np.any(g.x > b - eps):
        raise ValueError("grid lies outside the shifted interval")
    moved = g.x < a
    x = np.where(moved, b - c2 * (a - g.x), g.x)
    values = np.where(moved, c * g.values, g.values)
    widths = np.where(moved, g.widths * c2, g.widths)
    order = np.argsort(x, kind="stable")
    return GridFunction(x[order], values[order], widths[order])

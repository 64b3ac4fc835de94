"""Validity of the regular inequality

    (int (1/r)|f'|^2 + q|f|^2)^2 <= K int |f|^2 * int |l[f]|^2,   l[f] = -((1/r) f')' + q f

on ``[a, b]`` with ``r > 0``, decided by Bennewitz' criterion: ``I_a^+`` and
``I_b^-`` must be positively increasing, and the boundary form
``(f'/r)(b) conj f(b) - (f'/r)(a) conj f(a)`` must vanish on every solution
of ``l[f] = 0``.  A Galerkin estimate of the best constant ``K`` is offered
as an independent diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .bc import named_bc
from .criteria import NOT_PI, PI, PIReport, pi_test
from .expr import Expr, const, parse, piecewise
from .propagator import GRADING_LEVELS, _base_nodes, _gauss, cell_functions
from .weights import IntegralFn, WeightSpec, integrate_abs, make_weight

__all__ = [
    "VALID",
    "INVALID",
    "INCONCLUSIVE",
    "HelpSpec",
    "HomogeneousSolutions",
    "BoundaryForm",
    "HelpReport",
    "ConstantEstimate",
    "homogeneous_solutions",
    "bennewitz_condition2",
    "help_verdict",
    "best_constant_estimate",
    "odd_extension",
    "HelpGalerkin",
]

VALID = "Valid"
INVALID = "Invalid"
INCONCLUSIVE = "Inconclusive"

FORM_TOL = 1e-9
TAU_DECADES = 8  # scan tau over 10**[-8, 8]
PLATEAU_RATIO = 1.2
DIVERGENT_RATIO = 2.0


@dataclass(frozen=True)
class HelpSpec:
    """Positive weight on ``[a, b]`` and potential ``q``.

    ``q_antiderivative`` (an antiderivative of ``q``) lets cell integrals of
    a singular ``q`` be evaluated exactly.
    """

    weight: WeightSpec
    q: Expr = field(default_factory=lambda: parse("0"))
    q_text: str = "0"
    q_antiderivative: Expr | None = None
    q_antiderivative_text: str | None = None

    def __post_init__(self):
        if self.weight.n != 0 or self.weight.first_sign != 1:
            raise ValueError("the weight must be positive on the whole interval")

    @classmethod
    def from_json(cls, obj: dict) -> "HelpSpec":
        weight = WeightSpec.from_json(obj["weight"])
        pot = obj.get("potential", obj.get("q", "0"))
        if isinstance(pot, dict):
            text = str(pot.get("expr", "0"))
            anti = pot.get("antiderivative")
        else:
            text, anti = str(pot), None
        return cls(weight, parse(text), text, parse(anti) if anti else None, anti)

    def to_json(self) -> dict:
        pot: dict = {"expr": self.q_text}
        if self.q_antiderivative_text:
            pot["antiderivative"] = self.q_antiderivative_text
        return {"weight": self.weight.to_json(), "potential": pot}

    def q_integral(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """``int_lo^hi q`` cellwise (exact with an antiderivative, else 8-point Gauss)."""
        if self.q_antiderivative is not None:
            return self.q_antiderivative(hi) - self.q_antiderivative(lo)
        s, w = _gauss()
        h = hi - lo
        pts = lo[:, None] + h[:, None] * s
        return h * (self.q(pts.ravel()).reshape(pts.shape) @ w)


# -- homogeneous solutions ------------------------------------------------------


def _nodes(spec: HelpSpec, level: int) -> np.ndarray:
    base = _base_nodes(spec.weight, spec.q)
    m = 2**level
    frac = np.arange(m) / m
    return np.concatenate([(base[:-1, None] + np.diff(base)[:, None] * frac).ravel(), base[-1:]])


@dataclass
class HomogeneousSolutions:
    """Canonical solutions of ``l[f] = 0``: ``(f, f'/r) = (1, 0)`` and ``(0, 1)`` at ``a``.

    ``u[j]`` and ``v[j]`` are the values of ``f_j`` and ``f_j'/r`` at ``x``.
    """

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    level: int
    change: float


def _propagate(spec: HelpSpec, nodes: np.ndarray) -> np.ndarray:
    # in s = int r the system is du/ds = v, dv/ds = (q/r) u; q/r is replaced by its cell mean
    lo, hi = nodes[:-1], nodes[1:]
    theta = np.asarray(integrate_abs(spec.weight, lo, hi), dtype=float)
    Q = spec.q_integral(lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(theta > 0, Q / theta, 0.0)
    C, S, _ = cell_functions(kappa * theta**2)
    C, S = C.real, S.real
    T = np.empty((lo.size, 2, 2))
    T[:, 0, 0] = C
    T[:, 0, 1] = theta * S
    T[:, 1, 0] = kappa * theta * S
    T[:, 1, 1] = C
    # theta is tiny (or zero) on cells with no mass: the map is then exactly the identity
    T[theta == 0] = np.eye(2)
    Y = np.empty((nodes.size, 2, 2))
    Y[0] = np.eye(2)
    for i in range(lo.size):
        Y[i + 1] = T[i] @ Y[i]
    return Y


def homogeneous_solutions(spec: HelpSpec, tol: float = 1e-12, max_level: int = 10) -> HomogeneousSolutions:
    """Integrate ``u' = r v, v' = q u`` from ``a`` for both canonical initial data.

    The mesh is refined until the end values of both solutions change by
    less than ``tol`` (relative).
    """
    nodes = _nodes(spec, 0)
    Y = _propagate(spec, nodes)
    change = math.inf
    level = 0
    for level in range(1, max_level + 1):
        finer = _nodes(spec, level)
        Yf = _propagate(spec, finer)
        change = float(np.max(np.abs(Yf[-1] - Y[-1])) / max(1.0, np.max(np.abs(Yf[-1]))))
        nodes, Y = finer, Yf
        if change <= tol:
            break
    return HomogeneousSolutions(nodes, Y[:, 0, :].T.copy(), Y[:, 1, :].T.copy(), level, change)


# -- boundary form ---------------------------------------------------------------


@dataclass
class BoundaryForm:
    """``M[i, j] = v_i(b) conj f_j(b) - v_i(a) conj f_j(a)`` and its verdict."""

    matrix: np.ndarray
    scale: float
    holds: bool

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.matrix)))

    def to_json(self) -> dict:
        return {
            "matrix": [[float(z.real) for z in row] for row in self.matrix],
            "scale": self.scale,
            "max_entry": self.norm,
            "holds": self.holds,
        }


def _form(sol: HomogeneousSolutions) -> tuple[np.ndarray, float]:
    ub, vb = sol.u[:, -1], sol.v[:, -1]
    ua, va = sol.u[:, 0], sol.v[:, 0]
    M = np.outer(vb, np.conj(ub)) - np.outer(va, np.conj(ua))
    scale = max(float(np.max(np.abs(np.outer(vb, ub)))), float(np.max(np.abs(np.outer(va, ua)))), 1.0)
    return M, scale


def bennewitz_condition2(spec: HelpSpec, tol: float = FORM_TOL) -> BoundaryForm:
    """Boundary form on the canonical solutions; the condition holds iff all entries vanish.

    A sesquilinear form vanishes on every solution exactly when its matrix
    in a basis is zero.
    """
    M, scale = _form(homogeneous_solutions(spec))
    return BoundaryForm(M, scale, bool(np.max(np.abs(M)) <= tol * scale))


# -- verdict -------------------------------------------------------------------


@dataclass
class HelpReport:
    left: PIReport
    right: PIReport
    form: BoundaryForm
    validity: str
    constants: "ConstantEstimate | None" = None

    @property
    def condition1(self) -> str:
        """Joint verdict on ``I_a^+`` and ``I_b^-``."""
        verdicts = {self.left.verdict, self.right.verdict}
        if verdicts == {PI}:
            return PI
        if NOT_PI in verdicts:
            return NOT_PI
        return INCONCLUSIVE

    def to_json(self) -> dict:
        out = {
            "validity": self.validity,
            "condition_i": {"left": self.left.to_json(), "right": self.right.to_json(), "verdict": self.condition1},
            "condition_ii": self.form.to_json(),
        }
        if self.constants is not None:
            out["constants"] = self.constants.to_json()
        return out


def help_verdict(spec: HelpSpec, *, window: float | None = None, estimate_constant: bool = False) -> HelpReport:
    """Combine the two positively-increasing tests with the boundary form."""
    w = spec.weight
    window = window if window is not None else 0.25 * (w.b - w.a)
    left = pi_test(IntegralFn(w, w.a, +1), window)
    right = pi_test(IntegralFn(w, w.b, -1), window)
    form = bennewitz_condition2(spec)
    verdicts = (left.verdict, right.verdict)
    if NOT_PI in verdicts or not form.holds:
        validity = INVALID
    elif verdicts == (PI, PI):
        validity = VALID
    else:
        validity = INCONCLUSIVE
    constants = best_constant_estimate(spec) if estimate_constant else None
    return HelpReport(left, right, form, validity, constants)


def odd_extension(weight: WeightSpec) -> WeightSpec:
    """``r`` on ``[a, b]`` extended to ``[2a - b, b]`` by ``r(x) = -r(2a - x)`` for ``x < a``."""
    a, b = weight.a, weight.b
    mirrored = weight.expr.substitute(-1.0, 2 * a)
    expr = piecewise([const(-1.0) * mirrored, weight.expr], [a])
    anti: tuple[Expr, ...] = ()
    if weight.has_antiderivative:
        P = weight.antiderivatives[0]
        anti = (const(-1.0) * P.substitute(-1.0, 2 * a), P)
    return make_weight(
        expr,
        (2 * a - b, b),
        (a,),
        anti,
        text=str(expr),
        antiderivative_text=tuple(str(p) for p in anti),
        first_sign=-1,
    )


def periodic_extension_problem(spec: HelpSpec, bc: str = "periodic"):
    """Odd extension of the weight with periodic (or antiperiodic) conditions."""
    from .verdict import ProblemSpec

    return ProblemSpec(odd_extension(spec.weight), named_bc(bc))


# -- best constant ------------------------------------------------------------


class HelpGalerkin:
    """Quadratic forms of the inequality on a Galerkin space.

    The unknowns are ``c = (u(a), v_0, ..., v_N)``: ``v = f'/r`` is
    piecewise linear on the mesh and ``u = f`` is its exact integral
    ``u(a) + int_a^x r v``.  Cell integrals of ``r`` (and of ``q`` when an
    antiderivative is supplied) are scaled to their exact values.
    """

    def __init__(self, spec: HelpSpec, nodes: np.ndarray, points: int = 8):
        self.spec = spec
        self.nodes = np.asarray(nodes, dtype=float)
        N = self.nodes.size - 1
        s, w = np.polynomial.legendre.leggauss(points)
        s, w = 0.5 * (s + 1), 0.5 * w
        lo, h = self.nodes[:-1], np.diff(self.nodes)
        x = lo[:, None] + h[:, None] * s
        W = h[:, None] * w
        r = spec.weight(x.ravel()).reshape(x.shape)
        mass = np.asarray(integrate_abs(spec.weight, lo, self.nodes[1:]), dtype=float)
        rW = r * W
        rW *= (mass / np.where(rW.sum(axis=1) > 0, rW.sum(axis=1), 1.0))[:, None]
        q = spec.q(x.ravel()).reshape(x.shape)
        qW = q * W
        if spec.q_antiderivative is not None:
            exact = spec.q_integral(lo, self.nodes[1:])
            tot = qW.sum(axis=1)
            qW *= np.where(tot != 0, exact / np.where(tot != 0, tot, 1.0), 1.0)[:, None]

        n = N + 2
        G = s.size
        # v at Gauss points
        V = np.zeros((N, G, n))
        cells = np.arange(N)
        V[cells, :, 1 + cells] = 1 - s
        V[cells, :, 2 + cells] = s
        # u at Gauss points: u(a) + mass of r v over completed cells + partial cell
        m0 = rW.sum(axis=1)
        m1 = (rW * s).sum(axis=1)
        full = np.zeros((N + 1, n))
        full[:, 0] = 1.0
        for i in range(N):
            full[i + 1] = full[i]
            full[i + 1, 1 + i] += m0[i] - m1[i]
            full[i + 1, 2 + i] += m1[i]
        # partial integrals inside a cell with a nested Gauss rule on [0, s_g]
        U = np.repeat(full[:-1, None, :], G, axis=1)
        for g in range(G):
            sub = s * s[g]
            xs = lo[:, None] + h[:, None] * sub
            rs = spec.weight(xs.ravel()).reshape(xs.shape) * (h[:, None] * w * s[g])
            part = np.asarray(integrate_abs(spec.weight, lo, lo + h * s[g]), dtype=float)
            tot = rs.sum(axis=1)
            rs *= (part / np.where(tot > 0, tot, 1.0))[:, None]
            U[cells, g, 1 + cells] += (rs * (1 - sub)).sum(axis=1)
            U[cells, g, 2 + cells] += (rs * sub).sum(axis=1)
        dV = np.zeros((N, G, n))
        dV[cells, :, 1 + cells] = -1.0 / h[:, None]
        dV[cells, :, 2 + cells] = 1.0 / h[:, None]
        L = -dV + q[..., None] * U

        Vf, Uf, Lf = V.reshape(-1, n), U.reshape(-1, n), L.reshape(-1, n)
        Wf, rWf, qWf = W.ravel(), rW.ravel(), qW.ravel()
        self.A = Vf.T @ (rWf[:, None] * Vf) + Uf.T @ (qWf[:, None] * Uf)
        self.B = Uf.T @ (Wf[:, None] * Uf)
        self.C = Lf.T @ (Wf[:, None] * Lf)
        for M in (self.A, self.B, self.C):
            M[:] = 0.5 * (M + M.T)

    def functionals(self, c) -> tuple[float, float, float]:
        c = np.asarray(c)
        return tuple(float(np.real(np.vdot(c, M @ c))) for M in (self.A, self.B, self.C))

    def ratio(self, c) -> float:
        """``A(c)^2 / (B(c) C(c))``; ``inf`` when ``C`` vanishes but ``A`` does not."""
        A, B, C = self.functionals(c)
        scale = np.linalg.norm(self.C, 2) * float(np.vdot(c, c).real)
        if C <= 1e-13 * scale:
            return math.inf if abs(A) > 1e-13 * abs(np.linalg.norm(self.A, 2)) * float(np.vdot(c, c).real) else 0.0
        return A * A / (B * C)

    def best_constant(self, rtol: float = 1e-10) -> tuple[float, bool]:
        """``sup_c A^2/(B C)`` as ``max_tau 4 mu(tau)^2``.

        ``mu(tau)`` is the largest eigenvalue in modulus of ``A`` relative to
        ``tau B + C/tau``.  Since ``tau B + C/tau >= 2 sqrt(B C)`` with equality
        at ``tau = sqrt(C/B)``, the supremum over ``c`` equals the maximum over
        ``tau`` of ``4 mu^2``.  The second flag reports whether the maximiser
        is interior to the scanned range.
        """
        # ratios vanishing in C signal an admissible direction with l[f] = 0
        evals, vecs = linalg.eigh(self.C)
        kernel = vecs[:, evals <= 1e-12 * max(evals[-1], 1e-300)]
        if kernel.shape[1]:
            Ak = kernel.T @ self.A @ kernel
            if np.max(np.abs(np.linalg.eigvalsh(0.5 * (Ak + Ak.T)))) > 1e-10 * np.linalg.norm(self.A, 2):
                return math.inf, True
        logs = np.linspace(-TAU_DECADES, TAU_DECADES, 8 * TAU_DECADES + 1) * math.log(10.0)
        vals = np.array([self._top(math.exp(u))[0] for u in logs])
        k = int(np.argmax(vals))
        interior = 0 < k < logs.size - 1
        lo, hi = logs[max(k - 1, 0)], logs[min(k + 1, logs.size - 1)]
        res = optimize.minimize_scalar(
            lambda u: -self._top(math.exp(u))[0], bounds=(lo, hi), method="bounded", options={"xatol": rtol}
        )
        mu = max(float(-res.fun), float(vals[k]))
        return 4.0 * mu * mu, bool(interior and res.success)

    def _top(self, tau: float):
        P = tau * self.B + self.C / tau
        mu, vec = linalg.eigh(self.A, P)
        k = int(np.argmax(np.abs(mu)))
        return float(abs(mu[k])), vec[:, k]


def galerkin_nodes(spec: HelpSpec, N: int) -> np.ndarray:
    """``N`` cells: half uniform, half geometrically graded toward ends where ``r`` is singular."""
    w = spec.weight
    a, b = w.a, w.b
    probe = lambda x: not np.isfinite(w(np.array([x]))[0])  # noqa: E731
    ends = [e for e, inner in ((a, a + 1e-300), (b, b - 1e-16 * max(1.0, abs(b)))) if probe(inner) or probe(e)]
    graded = N // 2 if ends else 0
    uniform = N - graded
    nodes = list(np.linspace(a, b, uniform + 1))
    per_end = graded // max(len(ends), 1)
    for e in ends:
        h = (b - a) / uniform
        depth = min(per_end, GRADING_LEVELS)
        sign = 1 if e == a else -1
        nodes += [e + sign * h * 2.0**-k for k in range(1, depth + 1)]
    return np.unique(np.asarray(nodes))


@dataclass
class ConstantEstimate:
    N: list[int]
    K: list[float]
    converged: bool
    classification: str

    def to_json(self) -> dict:
        return {"N": self.N, "K": [k if math.isfinite(k) else "inf" for k in self.K], "converged": self.converged, "classification": self.classification}

    def rows(self):
        return list(zip(self.N, self.K))


def best_constant_estimate(spec: HelpSpec, N: int = 16) -> ConstantEstimate:
    """``K_N, K_2N, K_4N`` and their classification as bounded or divergent."""
    if N < 8:
        raise ValueError("N must be at least 8")
    sizes = [N, 2 * N, 4 * N]
    values, converged = [], True
    for n in sizes:
        K, ok = HelpGalerkin(spec, galerkin_nodes(spec, n)).best_constant()
        values.append(K)
        converged &= ok
    if not math.isfinite(values[-1]):
        label = "divergent"
    else:
        ratio = values[-1] / values[0]
        label = "bounded" if ratio < PLATEAU_RATIO else "divergent" if ratio > DIVERGENT_RATIO else "undecided"
    return ConstantEstimate(sizes, values, converged, label)

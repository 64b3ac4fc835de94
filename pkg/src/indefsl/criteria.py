"""Numerical tests of the positively-increasing property and the local
Riesz-basis criteria at a turning point.

Every test reduces a ``limsup`` as ``x -> 0`` to a sampled geometric grid.
Tail ratios that increase monotonically are extrapolated in ``1/log2(1/x)``
so that slowly varying behaviour (ratios creeping up to 1) is recognised
within double precision.  ``Inconclusive`` is returned whenever neither side
can be certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .weights import IntegralFn, WeightSpec, domination_profile, integral_I

__all__ = [
    "DegenerateFunctionError",
    "PIReport",
    "Outcome",
    "CriteriaBundle",
    "pi_test",
    "lemma_conditions",
    "api_plus",
    "ap_suf",
    "ap_nec",
    "volkmer_test",
    "volkmer_search",
    "turning_point_criteria",
]

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

PI = "PositivelyIncreasing"
NOT_PI = "NotPositivelyIncreasing"
PI_INCONCLUSIVE = "Inconclusive"

GRID_DEPTH = 48
PI_T_GRID = (0.5, 0.25, 0.125, 0.0625)
PI_DELTA = 0.05
LEMMA_T_DEPTH = 64
SLOW_TOL = 1e-3
APNEC_DELTA = 0.01
MONOTONE_JITTER = 1e-12


class DegenerateFunctionError(ValueError):
    """The tested function vanishes at a positive grid point."""


# -- tail analysis -----------------------------------------------------------


@dataclass
class TailStats:
    sup: float
    limit: float
    monotone: bool

    @property
    def effective(self) -> float:
        """Sampled sup, raised to the extrapolated limit for increasing tails."""
        if self.monotone and np.isfinite(self.limit):
            return max(self.sup, self.limit)
        return self.sup


def _tail_stats(ratios: np.ndarray, x: np.ndarray) -> TailStats:
    sup = float(np.max(ratios))
    scale = max(float(np.max(np.abs(ratios))), 1e-300)
    monotone = bool(np.all(np.diff(ratios) >= -MONOTONE_JITTER * scale))
    limit = math.nan
    if monotone and ratios.size >= 6:
        u = 1.0 / np.maximum(-np.log2(x), 1.0)
        limit = float(np.polyfit(u, ratios, 3)[-1])
    return TailStats(sup, limit, monotone)


def _grid(x_max: float, depth: int = GRID_DEPTH) -> np.ndarray:
    return x_max * 2.0 ** -np.arange(depth + 1)


def _values(F, x: np.ndarray, log_f) -> np.ndarray:
    """F on ``x`` (or log F when ``log_f`` is given), with sanity checks."""
    if log_f is not None:
        v = np.asarray(log_f(x), dtype=float)
        if np.any(np.isnan(v)):
            raise ValueError("log F is nan on the grid")
        return v
    v = np.asarray(F(x), dtype=float)
    if np.any(~np.isfinite(v)):
        raise ValueError("F is not finite on the grid")
    if np.any(v <= 0):
        bad = float(x[np.argmax(v <= 0)])
        raise DegenerateFunctionError(f"F vanishes at x={bad:.3e}; the weight is degenerate there")
    return v


def _ratio(F, log_f, x: np.ndarray, t: float) -> np.ndarray:
    if log_f is not None:
        return np.exp(_values(F, x * t, log_f) - _values(F, x, log_f))
    return _values(F, x * t, None) / _values(F, x, None)


def _check_monotone(F, log_f, x: np.ndarray) -> None:
    v = _values(F, x, log_f)
    # x decreases along the grid, so F must not increase
    step = np.diff(v)
    tol = 1e-9 * np.max(np.abs(v)) if log_f is None else 1e-9 * (1 + np.max(np.abs(v)))
    if np.any(step > tol):
        raise ValueError("F is not nondecreasing on the sample grid")


# -- positively increasing -------------------------------------------------


@dataclass
class PIReport:
    """Ratio table and verdict of :func:`pi_test`.

    ``ratios[i, j] = F(x_j t_i) / F(x_j)`` with ``x_j = x_max 2**-j``.
    """

    t_grid: tuple[float, ...]
    x: np.ndarray
    ratios: np.ndarray
    tail_sup: np.ndarray
    tail_limit: np.ndarray
    effective_sup: np.ndarray
    verdict: str
    witness: tuple[float, float] | None = None

    def observed_sup(self, t: float) -> float:
        return float(self.tail_sup[self.t_grid.index(t)])

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": None if self.witness is None else {"t": self.witness[0], "C": self.witness[1]},
            "t_grid": list(self.t_grid),
            "x": self.x.tolist(),
            "ratios": self.ratios.tolist(),
            "tail_sup": self.tail_sup.tolist(),
            "tail_limit": [None if not np.isfinite(v) else float(v) for v in self.tail_limit],
            "effective_sup": self.effective_sup.tolist(),
        }

    def rows(self):
        """Flat ``(t, x, ratio)`` rows for CSV export."""
        for i, t in enumerate(self.t_grid):
            for j, x in enumerate(self.x):
                yield t, float(x), float(self.ratios[i, j])


def pi_test(
    F: Callable,
    x_max: float,
    *,
    log_f: Callable | None = None,
    t_grid: tuple[float, ...] = PI_T_GRID,
    depth: int = GRID_DEPTH,
) -> PIReport:
    """Decide whether the nondecreasing ``F`` (``F(0+) = 0``) is positively increasing.

    Only the tail half of the geometric grid decides.  Supplying ``log_f``
    (``log F``) avoids underflow for rapidly varying functions.
    """
    x = _grid(x_max, depth)
    _check_monotone(F, log_f, x)
    ratios = np.array([_ratio(F, log_f, x, t) for t in t_grid])
    tail = slice(depth // 2, None)
    stats = [_tail_stats(row[tail], x[tail]) for row in ratios]
    eff = np.array([s.effective for s in stats])
    verdict = PI_INCONCLUSIVE
    witness = None
    best = int(np.argmin(eff))
    if eff[best] <= 1.0 - PI_DELTA:
        verdict = PI
        witness = (t_grid[best], float(stats[best].sup))
    elif all(s.monotone and s.effective >= 1.0 - SLOW_TOL for s in stats):
        verdict = NOT_PI
    return PIReport(
        tuple(t_grid),
        x,
        ratios,
        np.array([s.sup for s in stats]),
        np.array([s.limit for s in stats]),
        eff,
        verdict,
        witness,
    )


def lemma_conditions(F: Callable, x_max: float, *, log_f: Callable | None = None) -> dict[str, str]:
    """Three equivalent characterisations of positive increase, scanned separately.

    ``ii``: some ``C < 1`` and ``t`` with ``F(xt) <= C F(x)``;
    ``iii``: for each ``C`` in ``{1/2, 1/4, 1/8}`` some ``t`` works;
    ``iv``: ``F(xt) <= C t**beta F(x)`` for all ``t`` with fixed ``C, beta``.
    """
    x = _grid(x_max)
    tail = slice(GRID_DEPTH // 2, None)

    def stats_for(t):
        return _tail_stats(_ratio(F, log_f, x, t)[tail], x[tail])

    # (ii)
    ii_stats = [stats_for(2.0**-k) for k in range(1, 5)]
    if min(s.effective for s in ii_stats) <= 1 - PI_DELTA:
        ii = HOLDS
    elif all(s.monotone and s.effective >= 1 - SLOW_TOL for s in ii_stats):
        ii = FAILS
    else:
        ii = INCONCLUSIVE

    # (iii): small exponents need t down to C**(1/beta), hence the long scan
    iii_stats = [stats_for(2.0**-k) for k in range(1, LEMMA_T_DEPTH + 1)]
    eff = np.array([s.effective for s in iii_stats])
    found = [bool(np.any(eff <= C)) for C in (0.5, 0.25, 0.125)]
    if all(found):
        iii = HOLDS
    elif all(s.monotone and s.effective >= 1 - SLOW_TOL for s in iii_stats[:4]):
        iii = FAILS
    else:
        iii = INCONCLUSIVE

    # (iv): the best constant for each beta must stay bounded as t -> 0
    ks = np.arange(1, 17)
    eff_t = np.array([stats_for(2.0 ** -float(k)).effective for k in ks])
    verdicts = []
    for beta in 2.0 ** np.arange(-6, 3):
        c = eff_t / (2.0 ** -ks) ** beta
        growth = _growth(float(np.max(c[:8])), float(np.max(c)))
        if growth <= 1.05:
            verdicts.append(HOLDS)
        elif growth >= 2.0 ** (4 * beta):
            verdicts.append(FAILS)
        else:
            verdicts.append(INCONCLUSIVE)
    if HOLDS in verdicts:
        iv = HOLDS
    elif all(v == FAILS for v in verdicts):
        iv = FAILS
    else:
        iv = INCONCLUSIVE
    return {"ii": ii, "iii": iii, "iv": iv}


# -- criteria at a turning point ------------------------------------------


@dataclass
class Outcome:
    """Result of one criterion: ``holds``, ``fails`` or ``inconclusive``."""

    name: str
    status: str
    witness: dict = field(default_factory=dict)
    note: str = ""

    def to_json(self) -> dict:
        out = {"name": self.name, "status": self.status}
        if self.witness:
            out["witness"] = self.witness
        if self.note:
            out["note"] = self.note
        return out


def local_window(spec: WeightSpec, x_k: float, neighbours: tuple[float, float] | None = None) -> float:
    """Largest dyadic ``eps`` at most half the distance to the nearest sign change or end."""
    if neighbours is None:
        pts = [spec.a, *spec.sign_changes, spec.b]
        i = pts.index(x_k)
        lo, hi = pts[i - 1], pts[i + 1]
    else:
        lo, hi = neighbours
    half = 0.5 * min(x_k - lo, hi - x_k)
    return 2.0 ** math.floor(math.log2(half))


def api_plus(spec: WeightSpec, x_k: float, window: float | None = None) -> Outcome:
    """Does ``I^+_{x_k}(xt) <= I^+_{x_k}(x) / 2`` hold for some ``t``?"""
    window = window or local_window(spec, x_k)
    F = IntegralFn(spec, x_k, +1)
    report = pi_test(F, window)
    if report.verdict == PI:
        x = _grid(window)
        tail = slice(GRID_DEPTH // 2, None)
        for k in range(1, 17):
            st = _tail_stats(_ratio(F, None, x, 2.0**-k)[tail], x[tail])
            if st.effective <= 0.5 + 1e-12:
                return Outcome("API+", HOLDS, {"t": 2.0**-k, "sup": st.sup})
        return Outcome("API+", INCONCLUSIVE, note="positively increasing but no t <= 2**-16 reaches 1/2")
    if report.verdict == NOT_PI:
        return Outcome("API+", FAILS, {"tail_limits": report.tail_limit.tolist()})
    return Outcome("API+", INCONCLUSIVE, {"effective_sup": report.effective_sup.tolist()})


def ap_suf(spec: WeightSpec, x_k: float, window: float | None = None) -> Outcome:
    """Fit ``min{I^-(xt), I^+(xt)} <= C t**beta I(x)`` on a 64x64 (t, x) log-grid.

    For every ``beta`` the best constant over ``t >= 2**-8`` is compared with
    the one over ``t >= 2**-16``; the extrapolated tail sup in ``x`` is used
    for each ``t``.  The largest ``beta`` with a stable constant is reported.
    """
    window = window or local_window(spec, x_k)
    x = window * 2.0 ** -np.linspace(0, GRID_DEPTH, 64)
    tail = slice(32, None)
    total_x = integral_I(spec, x_k, +1, x) + integral_I(spec, x_k, -1, x)
    ts = 2.0 ** -np.linspace(0, 16, 64)
    coarse = ts >= 2.0**-8
    eff = np.empty(ts.size)
    for i, t in enumerate(ts):
        lo = np.minimum(integral_I(spec, x_k, +1, x * t), integral_I(spec, x_k, -1, x * t))
        eff[i] = _tail_stats((lo / total_x)[tail], x[tail]).effective
    witness = None
    statuses = []
    for beta in 2.0 ** np.arange(-6, 3):
        c = eff / ts**beta
        growth = _growth(float(np.max(c[coarse])), float(np.max(c)))
        if growth <= 1.05:
            statuses.append(HOLDS)
            witness = {"C": float(np.max(c)), "beta": float(beta)}
        elif growth >= 2.0 ** (4 * beta):
            statuses.append(FAILS)
        else:
            statuses.append(INCONCLUSIVE)
    if witness is not None:
        return Outcome("APsuf", HOLDS, witness)
    if all(st == FAILS for st in statuses):
        return Outcome("APsuf", FAILS, note="fitted constant diverges for every beta")
    return Outcome("APsuf", INCONCLUSIVE)


def _growth(c_half: float, c_full: float) -> float:
    if c_full == 0.0:
        return 1.0
    if c_half == 0.0 or not np.isfinite(c_full):
        return math.inf
    return c_full / c_half


def ap_nec(spec: WeightSpec, x_k: float, window: float | None = None) -> Outcome:
    """Scan ``I^-(xt) I^+(xt) <= C I(xt) I(x)`` for ``C < 1/4``."""
    window = window or local_window(spec, x_k)
    x = _grid(window)
    tail = slice(GRID_DEPTH // 2, None)
    ip_x = integral_I(spec, x_k, +1, x)
    im_x = integral_I(spec, x_k, -1, x)
    sups = []
    for k in range(0, 5):
        t = 2.0**-k
        ip_t = integral_I(spec, x_k, +1, x * t)
        im_t = integral_I(spec, x_k, -1, x * t)
        ratio = ip_t * im_t / ((ip_t + im_t) * (ip_x + im_x))
        sups.append((t, _tail_stats(ratio[tail], x[tail]).effective))
    t_best, c_best = min(sups, key=lambda p: p[1])
    witness = {"t": t_best, "C": c_best}
    if c_best < 0.25 - APNEC_DELTA:
        return Outcome("APnec", HOLDS, witness)
    if c_best >= 0.25 - SLOW_TOL:
        return Outcome("APnec", FAILS, witness)
    return Outcome("APnec", INCONCLUSIVE, witness, note="constant within the margin below 1/4")


# -- Volkmer's ratio condition ---------------------------------------------


VOLKMER_LEVELS = 30


def volkmer_test(spec: WeightSpec, x_k: float, t: float, eps: float, *, reflect: bool = False) -> Outcome:
    """Check that ``g(s) = r(s) / r(ts)`` extends C^1 to ``s = 0-`` with ``g(0) != t``.

    ``r`` is taken in local coordinates about ``x_k`` and oriented so that
    ``s r(s) > 0``; ``reflect`` applies the test to ``-r(-s)`` instead.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    sigma = spec.sign_at(x_k + 0.5 * eps)

    def r_loc(s):
        if reflect:
            return -sigma * spec(x_k - s)
        return sigma * spec(x_k + s)

    s = -eps * 2.0 ** -np.arange(VOLKMER_LEVELS + 1)
    num = r_loc(s)
    den = r_loc(t * s)
    if np.any(den == 0):
        raise ValueError(f"r(t s) vanishes at s={float(s[np.argmax(den == 0)]):.3e}")
    g = num / den
    name = f"Volkmer(t={t:g}{', reflected' if reflect else ''})"
    if not np.all(np.isfinite(g)):
        return Outcome(name, INCONCLUSIVE, note="non-finite ratio samples")
    rich = 2.0 * g[1:] - g[:-1]
    g0 = float(rich[-1])
    scale = max(1.0, abs(g0))
    noise = 64 * np.finfo(float).eps * scale * (1.0 + abs(x_k) / np.abs(s[1:]))
    converged = abs(rich[-1] - rich[-2]) <= 1e-8 * scale + noise[-1]
    dq = np.diff(g) / np.diff(s)
    dq_noise = noise / np.abs(np.diff(s))
    half = dq.size // 2
    head = float(np.max(np.abs(dq[:half])))
    bounded = bool(np.all(np.abs(dq[half:]) <= 4.0 * head + 1e-6 * scale / eps + 4 * dq_noise[half:]))
    witness = {"t": t, "g0": g0}
    if not (converged and bounded):
        return Outcome(name, INCONCLUSIVE, witness, note="ratio has no C^1 extension on the sample grid")
    if abs(g0 - t) <= 1e-6:
        return Outcome(name, INCONCLUSIVE, witness, note="limit equals t")
    return Outcome(name, HOLDS, witness, note="certified (numeric)")


def _volkmer_candidates():
    neg = [-(2.0 ** (i / 4)) for i in range(-8, 9)]
    pos = [2.0 ** (-i / 4) for i in range(1, 9)]
    return neg + pos


def volkmer_search(spec: WeightSpec, x_k: float, window: float | None = None) -> Outcome:
    """Try Volkmer's condition for a fixed list of ``t`` in both orientations."""
    window = window or local_window(spec, x_k)
    for reflect in (False, True):
        for t in _volkmer_candidates():
            eps = window / max(1.0, abs(t))
            out = volkmer_test(spec, x_k, t, eps, reflect=reflect)
            if out.status == HOLDS:
                return out
    return Outcome("Volkmer", INCONCLUSIVE, note="no candidate t certified")


# -- bundle ----------------------------------------------------------------


@dataclass
class CriteriaBundle:
    """All criteria evaluated at one turning point."""

    x_k: float
    window: float
    pi_plus: PIReport
    pi_minus: PIReport
    api_plus: Outcome
    ap_suf: Outcome
    ap_nec: Outcome
    volkmer: Outcome
    domination: object

    def to_json(self) -> dict:
        return {
            "x_k": self.x_k,
            "window": self.window,
            "pi_plus": self.pi_plus.to_json(),
            "pi_minus": self.pi_minus.to_json(),
            "API+": self.api_plus.to_json(),
            "APsuf": self.ap_suf.to_json(),
            "APnec": self.ap_nec.to_json(),
            "volkmer": self.volkmer.to_json(),
            "domination": self.domination.to_json(),
        }


def domination_eps_grid(window: float, levels: int = 16) -> np.ndarray:
    return window * 2.0 ** -np.arange(levels - 1, -1, -1.0)


def turning_point_criteria(spec: WeightSpec, x_k: float, window: float | None = None) -> CriteriaBundle:
    window = window or local_window(spec, x_k)
    return CriteriaBundle(
        x_k,
        window,
        pi_test(IntegralFn(spec, x_k, +1), window),
        pi_test(IntegralFn(spec, x_k, -1), window),
        api_plus(spec, x_k, window),
        ap_suf(spec, x_k, window),
        ap_nec(spec, x_k, window),
        volkmer_search(spec, x_k, window),
        domination_profile(spec, x_k, domination_eps_grid(window)),
    )

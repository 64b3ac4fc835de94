"""Sign-indefinite weights: representation, integrals and local transforms.

A :class:`WeightSpec` couples an expression for ``r`` on ``[a, b]`` with the
declared points where ``r`` changes sign and, optionally, closed-form
antiderivatives of ``|r|`` on each sign-constant piece.  Everything that
needs ``int |r|`` goes through :func:`integrate_abs`, which prefers the
closed form and falls back to tanh-sinh quadrature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expr, parse, piecewise
from .quadrature import integrate_pieces

__all__ = [
    "SignPatternError",
    "WeightSpec",
    "IntegralFn",
    "DominationProfile",
    "parse_weight",
    "integrate_abs",
    "integral_I",
    "even_odd_parts",
    "domination_profile",
    "locally_odd_at_boundary",
    "scaling_perturbation",
    "shift_scale_weight",
]

log = logging.getLogger(__name__)

SAMPLES_PER_PIECE = 10_000
QUAD_RTOL = 1e-12
QUAD_ATOL = 1e-300
# relative size below which a difference of antiderivative values is untrusted
CANCELLATION_TOL = 1e-6


class SignPatternError(ValueError):
    """The sampled sign of ``r`` contradicts the declared sign changes."""


@dataclass(frozen=True)
class WeightSpec:
    """A weight ``r`` on ``[a, b]`` with declared simple sign changes.

    ``antiderivatives`` holds one expression per sign-constant piece (or is
    empty); each must be an antiderivative of ``|r|`` that is continuous on
    the closed piece, so that it can be evaluated at the piece ends.
    """

    a: float
    b: float
    expr: Expr
    sign_changes: tuple[float, ...] = ()
    antiderivatives: tuple[Expr, ...] = ()
    first_sign: int = 1
    text: str = ""
    antiderivative_text: tuple[str, ...] = ()

    def __call__(self, x):
        return self.expr(x)

    @property
    def n(self) -> int:
        return len(self.sign_changes)

    @property
    def has_antiderivative(self) -> bool:
        return bool(self.antiderivatives)

    def pieces(self) -> list[tuple[float, float, int]]:
        """Sign-constant pieces ``(lo, hi, sign)``."""
        pts = [self.a, *self.sign_changes, self.b]
        return [(lo, hi, self.first_sign * (-1) ** k) for k, (lo, hi) in enumerate(zip(pts[:-1], pts[1:]))]

    def sign_at(self, x: float) -> int:
        k = int(np.searchsorted(np.asarray(self.sign_changes), x, side="right"))
        return self.first_sign * (-1) ** k

    def to_json(self) -> dict:
        out = {
            "interval": [self.a, self.b],
            "expr": self.text or str(self.expr),
            "sign_changes": list(self.sign_changes),
        }
        if self.antiderivatives:
            out["antiderivative"] = list(self.antiderivative_text) or [str(e) for e in self.antiderivatives]
        return out

    @classmethod
    def from_json(cls, data: dict, validate: bool = True) -> "WeightSpec":
        return parse_weight(
            data["expr"],
            tuple(data["interval"]),
            data.get("sign_changes", ()),
            antiderivative=data.get("antiderivative"),
            validate=validate,
        )


def _check_declaration(a: float, b: float, sign_changes: Sequence[float]) -> tuple[float, ...]:
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
    pts = tuple(float(s) for s in sign_changes)
    if any(not (a < s < b) for s in pts):
        raise ValueError(f"sign changes must lie strictly inside ({a}, {b}): {pts}")
    if any(s2 <= s1 for s1, s2 in zip(pts, pts[1:])):
        raise ValueError(f"sign changes must be strictly increasing: {pts}")
    return pts


def _piece_samples(lo: float, hi: float, m: int) -> np.ndarray:
    # cell midpoints avoid the piece ends, where r may be singular or zero
    return lo + (hi - lo) * (np.arange(m) + 0.5) / m


def _sampled_first_sign(expr: Expr, a: float, b: float, pts: tuple[float, ...], m: int) -> int:
    edges = [a, *pts, b]
    votes = []
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        v = expr(_piece_samples(lo, hi, m))
        v = v[np.isfinite(v) & (v != 0)]
        if v.size:
            votes.append(int(np.sign(np.median(np.sign(v)))) * (-1) ** k)
    if not votes:
        raise SignPatternError("r vanishes or is non-finite at every sample point")
    return 1 if sum(votes) >= 0 else -1


def _validate_signs(spec: WeightSpec, m: int = SAMPLES_PER_PIECE) -> None:
    for lo, hi, sign in spec.pieces():
        x = _piece_samples(lo, hi, m)
        v = spec.expr(x)
        finite = np.isfinite(v)
        bad = finite & (np.sign(v) == -sign)
        if np.any(bad):
            where = float(x[np.argmax(bad)])
            raise SignPatternError(
                f"r has sign {-sign:+d} at x={where:.6g}, but the declared sign changes imply {sign:+d} on ({lo}, {hi})"
            )
        if np.count_nonzero(finite & (v != 0)) == 0:
            raise SignPatternError(f"r vanishes identically on the piece ({lo}, {hi})")


def make_weight(
    expr: Expr,
    interval: tuple[float, float],
    sign_changes: Sequence[float] = (),
    antiderivatives: Sequence[Expr] = (),
    *,
    text: str = "",
    antiderivative_text: Sequence[str] = (),
    first_sign: int | None = None,
    validate: bool = True,
) -> WeightSpec:
    """Build a :class:`WeightSpec` from already-parsed expressions."""
    a, b = float(interval[0]), float(interval[1])
    pts = _check_declaration(a, b, sign_changes)
    if antiderivatives and len(antiderivatives) not in (1, len(pts) + 1):
        raise ValueError(f"need 1 or {len(pts) + 1} antiderivatives, got {len(antiderivatives)}")
    anti = tuple(antiderivatives)
    if len(anti) == 1:
        anti = anti * (len(pts) + 1)
    if first_sign is None:
        first_sign = _sampled_first_sign(expr, a, b, pts, 257)
    spec = WeightSpec(a, b, expr, pts, anti, first_sign, text, tuple(antiderivative_text))
    if validate:
        _validate_signs(spec)
    return spec


def parse_weight(
    text: str,
    interval: tuple[float, float],
    sign_changes: Sequence[float] = (),
    antiderivative: str | Sequence[str] | None = None,
    validate: bool = True,
) -> WeightSpec:
    """Parse a weight expression and check its declared sign pattern.

    ``antiderivative`` is either a single expression used on every
    sign-constant piece or a list with one expression per piece.
    """
    expr = parse(text)
    anti_text: tuple[str, ...] = ()
    if antiderivative is not None:
        anti_text = (antiderivative,) if isinstance(antiderivative, str) else tuple(antiderivative)
    anti = tuple(parse(t) for t in anti_text)
    return make_weight(
        expr, interval, sign_changes, anti, text=text, antiderivative_text=anti_text, validate=validate
    )


# -- integrals of |r| -------------------------------------------------------


def _split_points(spec: WeightSpec, lo: float, hi: float) -> list[float]:
    inner = [p for p in (*spec.sign_changes, *spec.expr.breakpoints()) if lo < p < hi]
    return [lo, *sorted(set(inner)), hi]


def _exact_with_scale(spec: WeightSpec, lo, hi):
    """Closed-form integral and the magnitude of the antiderivative values used."""
    lo_b, hi_b = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    total = np.zeros(lo_b.shape)
    scale = np.zeros(lo_b.shape)
    for (p0, p1, _), anti in zip(spec.pieces(), spec.antiderivatives):
        u = np.clip(lo_b, p0, p1)
        v = np.clip(hi_b, p0, p1)
        live = v > u
        if np.any(live):
            fv, fu = anti(v[live]), anti(u[live])
            total[live] += fv - fu
            scale[live] = np.maximum(scale[live], np.maximum(np.abs(fv), np.abs(fu)))
    return total, scale


def integrate_abs(spec: WeightSpec, lo, hi, *, method: str = "auto"):
    """``int_lo^hi |r|`` for scalar or array endpoints (``lo <= hi``).

    ``method`` is ``"auto"`` (closed form when available), ``"exact"`` or
    ``"quadrature"``.
    """
    lo_arr = np.asarray(lo, dtype=float)
    hi_arr = np.asarray(hi, dtype=float)
    use_exact = method == "exact" or (method == "auto" and spec.has_antiderivative)
    if use_exact:
        if not spec.has_antiderivative:
            raise ValueError("no antiderivative supplied for this weight")
        total, _ = _exact_with_scale(spec, lo_arr, hi_arr)
        return total if total.ndim else float(total)
    f = lambda t: np.abs(spec.expr(t))  # noqa: E731
    lo_b, hi_b = np.broadcast_arrays(lo_arr, hi_arr)
    out = np.empty(lo_b.shape)
    for idx in np.ndindex(lo_b.shape):
        u, v = float(lo_b[idx]), float(hi_b[idx])
        out[idx] = integrate_pieces(f, _split_points(spec, u, v), rtol=QUAD_RTOL, atol=QUAD_ATOL) if v > u else 0.0
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class IntegralFn:
    """``mu -> int |r|`` over ``[x, x + mu]`` (direction +1) or ``[x - mu, x]`` (-1)."""

    spec: WeightSpec
    base: float
    direction: int
    method: str = "auto"

    @property
    def rule(self) -> str:
        if self.method == "quadrature" or not self.spec.has_antiderivative:
            return "quadrature"
        return "antiderivative"

    @property
    def reach(self) -> float:
        """Largest admissible ``mu``."""
        return self.spec.b - self.base if self.direction > 0 else self.base - self.spec.a

    def __call__(self, mu):
        return integral_I(self.spec, self.base, self.direction, mu, method=self.method)


def integral_I(spec: WeightSpec, x: float, direction: int, mu, *, method: str = "auto"):
    """``I^+_x(mu)`` (``direction=+1``) or ``I^-_x(mu)`` (``direction=-1``)."""
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr < 0):
        raise ValueError("mu must be nonnegative")
    slack = 1e-14 * (spec.b - spec.a)
    if direction > 0:
        lo, hi = np.full_like(mu_arr, x), x + mu_arr
    elif direction < 0:
        lo, hi = x - mu_arr, np.full_like(mu_arr, x)
    else:
        raise ValueError("direction must be +1 or -1")
    if np.any(lo < spec.a - slack) or np.any(hi > spec.b + slack):
        raise ValueError(f"segment leaves [{spec.a}, {spec.b}]")
    lo = np.maximum(lo, spec.a)
    hi = np.minimum(hi, spec.b)
    if method == "quadrature" or not spec.has_antiderivative:
        # nodes in the local variable s = |t - x| keep their relative spacing
        reach = spec.b - x if direction > 0 else x - spec.a
        mus = np.broadcast_to(np.minimum(mu_arr, reach), np.shape(lo))
        out = np.array([_local_quadrature(spec, x, direction, float(m), exact=False) for m in mus.reshape(-1)])
        out = out.reshape(mus.shape)
    else:
        out, scale = _exact_with_scale(spec, lo, hi)
        out = out + _rounding_correction(spec, x, direction, mu_arr, lo, hi)
        # short segments lose every digit to cancellation (or collapse when
        # x -+ mu rounds to x); integrate those in the local variable s = |t - x|
        lossy = (mu_arr > 0) & ((out == 0) | (np.abs(out) < CANCELLATION_TOL * scale))
        if np.any(lossy):
            out = np.array(out, dtype=float).reshape(-1)
            mus = np.broadcast_to(mu_arr, lossy.shape).reshape(-1)
            for i in np.flatnonzero(lossy.reshape(-1)):
                out[i] = _local_quadrature(spec, x, direction, float(mus[i]))
            out = out.reshape(lossy.shape)
    return float(out) if np.ndim(out) == 0 else out


def _rounding_correction(spec: WeightSpec, x: float, direction: int, mu, lo, hi):
    """First-order term for the rounded far end ``x -+ mu``.

    The rounding error of the far end is exact by Sterbenz' lemma once the
    segment is short, so ``|r(end)| * error`` restores the lost mass.
    """
    end = hi if direction > 0 else lo
    with np.errstate(all="ignore"):
        err = ((end - x) - direction * mu) * direction
        fix = -np.abs(spec.expr(end)) * err
    return np.where(np.isfinite(fix) & (np.abs(mu) <= 0.5 * max(abs(x), 1e-300)), fix, 0.0)


def _local_quadrature(spec: WeightSpec, x: float, direction: int, mu: float, exact: bool = True) -> float:
    if mu == 0.0:
        return 0.0
    inner = sorted(abs(p - x) for p in (*spec.sign_changes, *spec.expr.breakpoints()) if 0 < direction * (p - x) < mu)
    if exact and spec.has_antiderivative and not inner:
        # antiderivative in the local variable: exact when P(x) carries no digits
        piece = next(
            k for k, (p0, p1, _) in enumerate(spec.pieces()) if p0 <= x + 0.5 * direction * mu <= p1
        )
        local_p = spec.antiderivatives[piece].substitute(float(direction), float(x)).fold_affine()
        end, start = local_p(np.array([mu, 0.0]))
        val = direction * (end - start)
        if np.isfinite(val) and val > 0 and val >= CANCELLATION_TOL * max(abs(end), abs(start)):
            return float(val)
    # r(x + direction*s) with affine parts folded, so x -+ s never rounds to x
    local = spec.expr.substitute(float(direction), float(x)).fold_affine()
    f = lambda s: np.abs(local(s))  # noqa: E731
    return integrate_pieces(f, [0.0, *inner, mu], rtol=QUAD_RTOL, atol=QUAD_ATOL)


# -- odd / even decomposition --------------------------------------------------


def even_odd_parts(spec: WeightSpec, center: float = 0.0) -> tuple[Expr, Expr]:
    """Even and odd parts of ``r`` about ``center`` as expressions in ``x``.

    The interval must be symmetric about ``center``.
    """
    half = 0.5 * (spec.b - spec.a)
    if not math.isclose(spec.a + half, center, rel_tol=0.0, abs_tol=1e-12 * max(1.0, half)):
        raise ValueError(f"interval [{spec.a}, {spec.b}] is not symmetric about {center}")
    mirrored = spec.expr.substitute(-1.0, 2.0 * center)
    return 0.5 * (spec.expr + mirrored), 0.5 * (spec.expr - mirrored)


@dataclass
class DominationProfile:
    """Sampled domination factor ``rho(eps)`` at one turning point."""

    center: float
    eps: np.ndarray
    rho: np.ndarray
    classification: str
    slope: float
    inconclusive: bool = False
    note: str = ""

    @property
    def odd_dominated(self) -> bool:
        return not self.inconclusive and self.classification in ("odd", "strongly odd")

    def to_json(self) -> dict:
        return {
            "center": self.center,
            "eps": self.eps.tolist(),
            "rho": self.rho.tolist(),
            "classification": self.classification,
            "slope": self.slope,
            "inconclusive": self.inconclusive,
            "note": self.note,
        }


RHO_GRID_POINTS = 200
RHO_GRID_DEPTH = 1e-12


def _local_parts(spec: WeightSpec, center: float, x: np.ndarray, reach: float):
    """``int_0^x |r^e|`` and ``int_0^x r^o`` about ``center`` (oriented so r^o > 0)."""
    ip = integral_I(spec, center, +1, x)
    im = integral_I(spec, center, -1, x)
    odd = 0.5 * (ip + im)
    # |r(c+s)| - |r(c-s)| has constant sign -> closed form, else quadrature
    probe = np.concatenate([np.geomspace(reach * RHO_GRID_DEPTH, reach, 400), np.linspace(0, reach, 401)[1:]])
    diff = np.abs(spec(center + probe)) - np.abs(spec(center - probe))
    diff = diff[np.isfinite(diff)]
    if np.all(diff >= 0) or np.all(diff <= 0):
        return 0.5 * np.abs(ip - im), odd

    def even_abs(s):
        return 0.5 * np.abs(np.abs(spec(center + s)) - np.abs(spec(center - s)))

    pts = sorted({0.0, *[p - center for p in spec.expr.breakpoints() if 0 < p - center < reach]})
    even = np.empty_like(x)
    for i, xi in enumerate(x):
        cuts = [p for p in pts if p < xi] + [xi]
        even[i] = integrate_pieces(even_abs, cuts, rtol=1e-10)
    return even, odd


def domination_profile(spec: WeightSpec, center: float, eps_grid) -> DominationProfile:
    """``rho(eps) = sup_{x <= eps} int_0^x |r^e| / int_0^x r^o`` on ``eps_grid``.

    Classification is ``"strongly odd"``, ``"odd"``, ``"weakly"`` or ``"not
    weakly"`` odd-dominated; ``inconclusive`` is set when the decay test
    cannot separate the cases.
    """
    if center not in spec.sign_changes:
        raise ValueError(f"{center} is not a declared sign change")
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
        raise ValueError("eps_grid must be positive and strictly increasing")
    reach = min(center - spec.a, spec.b - center)
    if eps[-1] > reach:
        raise ValueError(f"eps up to {eps[-1]} exceeds the distance {reach} to the boundary")
    rho = np.empty_like(eps)
    for i, e in enumerate(eps):
        x = np.geomspace(e * RHO_GRID_DEPTH, e, RHO_GRID_POINTS)
        even, odd = _local_parts(spec, center, x, e)
        if np.any(odd <= 0):
            raise ValueError(f"odd part has nonpositive integral near {center}; r does not change sign there")
        rho[i] = float(np.max(even / odd))
    cls, slope, inconclusive, note = _classify_rho(eps, rho)
    return DominationProfile(center, eps, rho, cls, slope, inconclusive, note)


def _classify_rho(eps: np.ndarray, rho: np.ndarray) -> tuple[str, float, bool, str]:
    weak = "weakly" if np.max(rho) < 1.0 else "not weakly"
    if np.max(rho) <= 1e-12:
        return "strongly odd", math.inf, False, "even part vanishes"
    k = max(3, eps.size // 2)
    head_e, head_r = eps[:k], rho[:k]
    if head_e.size < 3:
        return weak, math.nan, True, "eps grid too short for a decay fit"
    if np.any(head_r <= 0):
        # rho hits zero at small eps: the even part vanishes locally
        return "strongly odd", math.inf, False, "even part vanishes near the turning point"
    slope = float(np.polyfit(np.log(head_e), np.log(head_r), 1)[0])
    spread = float(np.ptp(head_r) / np.max(head_r))
    if slope >= 0.6:
        return "strongly odd", slope, False, ""
    if slope >= 0.1:
        return "odd", slope, False, "strong domination not certified"
    if abs(slope) < 0.02 and spread < 1e-3:
        return weak, slope, False, "rho is flat near the turning point"
    return weak, slope, True, "decay of rho too slow to classify"


def locally_odd_at_boundary(spec: WeightSpec, eps: float, rtol: float = 1e-10) -> bool:
    """Check ``r(a + x) = -r(b - x)`` on a dense grid of ``x`` in ``(0, eps)``."""
    if not 0 < eps < 0.5 * (spec.b - spec.a):
        raise ValueError("eps must lie in (0, (b-a)/2)")
    x = np.unique(np.concatenate([np.geomspace(eps * 1e-12, eps, 2000, endpoint=False), _piece_samples(0.0, eps, 2000)]))
    left = spec(spec.a + x)
    right = spec(spec.b - x)
    finite = np.isfinite(left) & np.isfinite(right)
    if not np.all(finite):
        log.debug("locally_odd_at_boundary: non-finite samples at %d points", int(np.count_nonzero(~finite)))
        return False
    scale = np.maximum(np.abs(left), np.abs(right))
    ok = np.abs(left + right) <= rtol * scale
    if not np.all(ok):
        log.debug("locally_odd_at_boundary: mismatch at x=%g", float(x[np.argmin(ok)]))
    return bool(np.all(ok))


# -- weight transforms ----------------------------------------------------------


def scaling_perturbation(r: WeightSpec, A: float, B: float) -> WeightSpec:
    """``r~(x) = r(x)`` on ``(0, b)``, ``-A r(-B x)`` on ``(-b, 0)``, ``b = min(1, 1/B)``."""
    if not (A > 0 and B > 0):
        raise ValueError("A and B must be positive")
    if r.a != 0.0 or r.b < 1.0 or r.n:
        raise ValueError("input weight must be given on [0, 1] without sign changes")
    probe = r(_piece_samples(0.0, 1.0, SAMPLES_PER_PIECE))
    if np.any(probe[np.isfinite(probe)] <= 0):
        raise ValueError("input weight must be positive on (0, 1)")
    b = min(1.0, 1.0 / B)
    left = -A * r.expr.substitute(-B, 0.0)
    expr = piecewise([left, r.expr], [0.0])
    anti: tuple[Expr, ...] = ()
    if r.has_antiderivative:
        P = r.antiderivatives[0]
        anti = (-(A / B) * P.substitute(-B, 0.0), P)
    return make_weight(expr, (-b, b), (0.0,), anti, first_sign=-1)


def shift_scale_weight(spec: WeightSpec, c: complex, eps: float) -> WeightSpec:
    """Move a copy of the right end of ``r`` in front of ``a``.

    On ``[a - eps/|c|^2, a)`` the new weight is ``|c|^4 r(b - |c|^2 (a - x))``;
    on ``[a, b - eps]`` it equals ``r``.  With an odd number of sign changes
    ``a`` becomes an extra sign change.
    """
    if c == 0:
        raise ValueError("c must be nonzero")
    if spec.n == 0:
        raise ValueError("weight has no turning points")
    limit = 0.5 * min(spec.sign_changes[0] - spec.a, spec.b - spec.sign_changes[-1])
    if not 0 < eps < limit:
        raise ValueError(f"eps must lie in (0, {limit})")
    m2 = abs(c) ** 2
    a_new = spec.a - eps / m2
    b_new = spec.b - eps
    moved = spec.expr.substitute(m2, spec.b - m2 * spec.a)
    expr = piecewise([m2 * m2 * moved, spec.expr], [spec.a])
    last_sign = spec.pieces()[-1][2]
    extra = last_sign != spec.first_sign
    changes = ((spec.a,) if extra else ()) + spec.sign_changes
    anti: tuple[Expr, ...] = ()
    if spec.has_antiderivative:
        P_last = spec.antiderivatives[-1]
        left_anti = m2 * P_last.substitute(m2, spec.b - m2 * spec.a)
        if extra:
            anti = (left_anti, *spec.antiderivatives)
        else:
            # merge with the first piece, keeping the antiderivative continuous at a
            P_first = spec.antiderivatives[0]
            jump = float(P_first(np.array([spec.a]))[0] - m2 * P_last(np.array([spec.b]))[0])
            merged = piecewise([left_anti + jump, P_first], [spec.a])
            anti = (merged, *spec.antiderivatives[1:])
    return make_weight(expr, (a_new, b_new), changes, anti, first_sign=last_sign)

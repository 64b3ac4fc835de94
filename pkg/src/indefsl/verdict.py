"""Riesz-basis-property decision for ``-f'' + q f = lambda r f`` with self-adjoint boundary conditions.

The decision only reads the weight near its turning points and near the
endpoints, the boundary-condition family and, for coupled conditions, whether
``|c| = 1``.  The potential ``q`` and the Robin parameter ``d`` never enter.
Each applied rule is recorded in a trail whose entries carry exactly the
inputs the rule consumed, so :func:`replay_trail` can recompute the outcome.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import criteria
from .bc import COUPLED, FULL_RANK, BCMatrices, CanonicalBC, bc_from_json, canonicalize
from .criteria import CriteriaBundle, pi_test, turning_point_criteria
from .expr import Expr, parse
from .weights import IntegralFn, WeightSpec, locally_odd_at_boundary

__all__ = [
    "HAS_RBP",
    "NO_RBP",
    "INCONCLUSIVE",
    "ProblemSpec",
    "LocalVerdict",
    "RbpVerdict",
    "subintervals",
    "decide_local",
    "decide_rbp",
    "replay_trail",
]

HAS_RBP = "HasRBP"
NO_RBP = "NoRBP"
INCONCLUSIVE = "Inconclusive"

INTERVAL_RULES = {"midpoint": (0.5, 0.5), "thirds": (1.0 / 3.0, 2.0 / 3.0)}


@dataclass(frozen=True)
class ProblemSpec:
    """Weight, potential, boundary conditions and decision options."""

    weight: WeightSpec
    bc: BCMatrices
    q: Expr = field(default_factory=lambda: parse("0"))
    q_text: str = "0"
    interval_rule: str = "midpoint"

    def __post_init__(self):
        if self.weight.n < 1:
            raise ValueError("the weight must have at least one declared sign change")
        if self.interval_rule not in INTERVAL_RULES:
            raise ValueError(f"interval_rule must be one of {sorted(INTERVAL_RULES)}")

    @classmethod
    def from_json(cls, obj: dict) -> "ProblemSpec":
        weight = WeightSpec.from_json(obj["weight"])
        q_text = str(obj.get("q", "0"))
        options = obj.get("options", {})
        return cls(
            weight,
            bc_from_json(obj.get("bc", "dirichlet")),
            parse(q_text),
            q_text,
            options.get("interval_rule", "midpoint"),
        )

    def to_json(self) -> dict:
        return {
            "weight": self.weight.to_json(),
            "q": self.q_text,
            "bc": self.bc.to_json(),
            "options": {"interval_rule": self.interval_rule},
        }


def _dyadic_floor(x: float) -> float:
    return 2.0 ** math.floor(math.log2(x))


def subintervals(spec: WeightSpec, rule: str = "midpoint") -> list[tuple[float, float]]:
    """One sub-interval ``[a_k, b_k]`` per turning point, split between neighbours by ``rule``.

    ``midpoint`` splits every gap in half; ``thirds`` puts the split a third
    of the way into each gap.  Both choices are valid and must give the same
    verdicts.
    """
    left_frac, _ = INTERVAL_RULES[rule]
    xs = list(spec.sign_changes)
    cuts = [spec.a]
    for lo, hi in zip(xs[:-1], xs[1:]):
        cuts.append(lo + left_frac * (hi - lo))
    cuts.append(spec.b)
    return list(zip(cuts[:-1], cuts[1:]))


def _local_windows(spec: WeightSpec, rule: str) -> list[float]:
    out = []
    n = spec.n
    for k, (x_k, (lo, hi)) in enumerate(zip(spec.sign_changes, subintervals(spec, rule))):
        # a boundary gap is split like an interior one
        left = 0.5 * (x_k - lo) if k == 0 else x_k - lo
        right = 0.5 * (hi - x_k) if k == n - 1 else hi - x_k
        if rule == "midpoint":
            out.append(_dyadic_floor(min(left, right)))
        else:
            out.append(_dyadic_floor(0.5 * min(left, right)))
    return out


# -- local decision ---------------------------------------------------------


@dataclass
class LocalVerdict:
    x_k: float
    outcome: str
    rule: str
    inputs: dict
    bundle: CriteriaBundle

    def trail_entry(self) -> dict:
        return {
            "rule": self.rule,
            "cites": LOCAL_RULES[self.rule],
            "inputs": {"x_k": self.x_k, **self.inputs},
            "outcome": self.outcome,
        }


LOCAL_RULES = {
    "odd-dominated": "for a locally odd-dominated weight the local problem has a Riesz basis iff I+ is positively increasing",
    "parfenov-sufficient": "the sufficient integral condition (API+ on I+ or I-, or APsuf) holds",
    "volkmer": "the ratio r(x)/r(tx) extends smoothly to 0 with limit different from t",
    "parfenov-necessary": "the necessary integral condition APnec fails",
    "local-undecided": "no local criterion could be certified",
}


def _local_rule(inputs: dict) -> tuple[str, str]:
    """Map certified local hypotheses to ``(outcome, rule)``."""
    if inputs["odd_dominated"]:
        pi = inputs["pi_plus"]
        if pi == criteria.PI:
            return HAS_RBP, "odd-dominated"
        if pi == criteria.NOT_PI:
            return NO_RBP, "odd-dominated"
        return INCONCLUSIVE, "odd-dominated"
    if (
        inputs["api_plus"] == criteria.HOLDS
        or inputs["pi_minus_half"] == criteria.HOLDS
        or inputs["ap_suf"] == criteria.HOLDS
    ):
        return HAS_RBP, "parfenov-sufficient"
    if inputs["volkmer"] == criteria.HOLDS:
        return HAS_RBP, "volkmer"
    if inputs["ap_nec"] == criteria.FAILS:
        return NO_RBP, "parfenov-necessary"
    return INCONCLUSIVE, "local-undecided"


def decide_local(spec: WeightSpec, x_k: float, window: float | None = None) -> LocalVerdict:
    """Riesz basis property of the Dirichlet problem on a neighbourhood of ``x_k``."""
    if x_k not in spec.sign_changes:
        raise ValueError(f"{x_k} is not a declared sign change")
    bundle = turning_point_criteria(spec, x_k, window)
    pi_minus_half = criteria.HOLDS if bundle.pi_minus.verdict == criteria.PI else criteria.INCONCLUSIVE
    if pi_minus_half == criteria.HOLDS:
        # API+ for I- is API+ for the reflected weight; demand the same 1/2 witness
        pi_minus_half = _reflected_api(spec, x_k, bundle.window)
    inputs = {
        "odd_dominated": bundle.domination.odd_dominated,
        "pi_plus": bundle.pi_plus.verdict,
        "api_plus": bundle.api_plus.status,
        "pi_minus_half": pi_minus_half,
        "ap_suf": bundle.ap_suf.status,
        "volkmer": bundle.volkmer.status,
        "ap_nec": bundle.ap_nec.status,
    }
    outcome, rule = _local_rule(inputs)
    return LocalVerdict(x_k, outcome, rule, inputs, bundle)


def _reflected_api(spec: WeightSpec, x_k: float, window: float) -> str:
    report = pi_test(IntegralFn(spec, x_k, -1), window, t_grid=tuple(2.0**-k for k in range(1, 17)))
    return criteria.HOLDS if report.effective_sup.min() <= 0.5 + 1e-12 else criteria.INCONCLUSIVE


# -- global decision --------------------------------------------------------


@dataclass
class RbpVerdict:
    outcome: str
    trail: list[dict]
    family: CanonicalBC
    locals: list[LocalVerdict]
    boundary: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        fam = self.family
        bc = {"family": fam.family, "separated": fam.separated}
        if fam.family == COUPLED:
            bc["unimodular"] = fam.unimodular
            bc["boundary_sensitive"] = fam.boundary_sensitive
        return {
            "outcome": self.outcome,
            "boundary_condition": bc,
            "trail": self.trail,
            "criteria": [lv.bundle.to_json() for lv in self.locals],
            "boundary_pi": self.boundary,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, allow_nan=True)


GLOBAL_RULES = {
    "local-criteria": "separated conditions, an even number of turning points or C invertible: "
    "the Riesz basis property is the conjunction of the local properties",
    "boundary-positively-increasing": "coupled conditions with I_a+ or I_b- positively increasing: "
    "the conjunction of the local properties decides",
    "coupled-non-unimodular": "coupled conditions with |c| != 1, weight locally odd at the boundary "
    "and locally odd-dominated: the conjunction of the local properties decides",
    "coupled-unimodular": "coupled conditions with |c| = 1, weight locally odd at the boundary "
    "and locally odd-dominated: local properties and I_a+ positively increasing are required",
    "coupled-undecided": "coupled conditions with an odd number of turning points outside every known criterion",
}


def _conjunction(outcomes: list[str]) -> str:
    if NO_RBP in outcomes:
        return NO_RBP
    if INCONCLUSIVE in outcomes:
        return INCONCLUSIVE
    return HAS_RBP


def _global_rule(rule: str, local_outcomes: list[str], inputs: dict) -> str:
    """Outcome of a global rule from its recorded inputs."""
    conj = _conjunction(local_outcomes)
    if rule in ("local-criteria", "boundary-positively-increasing", "coupled-non-unimodular"):
        return conj
    if rule == "coupled-unimodular":
        pa = inputs["pi_a_plus"]
        if conj == NO_RBP or pa == criteria.NOT_PI and conj == HAS_RBP:
            return NO_RBP
        if conj == HAS_RBP and pa == criteria.PI:
            return HAS_RBP
        return INCONCLUSIVE
    return INCONCLUSIVE


def _boundary_window(spec: WeightSpec) -> float:
    gap = min(spec.sign_changes[0] - spec.a, spec.b - spec.sign_changes[-1])
    return _dyadic_floor(0.5 * gap)


def decide_rbp(problem: ProblemSpec) -> RbpVerdict:
    """Decide the Riesz basis property of ``problem``."""
    spec = problem.weight
    canon, _ = canonicalize(problem.bc)
    windows = _local_windows(spec, problem.interval_rule)
    locs = [decide_local(spec, x_k, w) for x_k, w in zip(spec.sign_changes, windows)]
    trail = [lv.trail_entry() for lv in locs]
    outcomes = [lv.outcome for lv in locs]
    n = spec.n
    boundary: dict = {}

    def finish(rule: str, inputs: dict) -> RbpVerdict:
        outcome = _global_rule(rule, outcomes, inputs)
        trail.append(
            {
                "rule": rule,
                "cites": GLOBAL_RULES[rule],
                "inputs": {"family": canon.family, "turning_points": n, "local_outcomes": outcomes, **inputs},
                "outcome": outcome,
            }
        )
        return RbpVerdict(outcome, trail, canon, locs, boundary)

    if canon.separated or n % 2 == 0 or canon.family == FULL_RANK:
        return finish("local-criteria", {"separated": canon.separated})

    # coupled conditions, odd number of turning points
    eps = _boundary_window(spec)
    pa = pi_test(IntegralFn(spec, spec.a, +1), eps)
    pb = pi_test(IntegralFn(spec, spec.b, -1), eps)
    boundary.update({"window": eps, "I_a_plus": pa.to_json(), "I_b_minus": pb.to_json()})
    if pa.verdict == criteria.PI or pb.verdict == criteria.PI:
        return finish("boundary-positively-increasing", {"pi_a_plus": pa.verdict, "pi_b_minus": pb.verdict})

    odd_boundary = locally_odd_at_boundary(spec, eps)
    all_dominated = all(lv.inputs["odd_dominated"] for lv in locs)
    hyp = {
        "pi_a_plus": pa.verdict,
        "pi_b_minus": pb.verdict,
        "locally_odd_at_boundary": odd_boundary,
        "locally_odd_dominated": all_dominated,
    }
    if odd_boundary and all_dominated:
        return finish("coupled-unimodular" if canon.unimodular else "coupled-non-unimodular", hyp)
    if not odd_boundary:
        hyp["first_uncertified"] = "locally odd at the boundary"
    else:
        hyp["first_uncertified"] = "locally odd-dominated at every turning point"
    return finish("coupled-undecided", hyp)


def replay_trail(trail: list[dict]) -> str:
    """Recompute the final outcome from the recorded rule inputs alone."""
    local_outcomes = []
    for entry in trail[:-1]:
        inputs = {k: v for k, v in entry["inputs"].items() if k != "x_k"}
        outcome, rule = _local_rule(inputs)
        if rule != entry["rule"] or outcome != entry["outcome"]:
            raise ValueError(f"trail entry at x={entry['inputs']['x_k']} does not replay")
        local_outcomes.append(outcome)
    last = trail[-1]
    if local_outcomes != last["inputs"]["local_outcomes"]:
        raise ValueError("global entry disagrees with the local entries")
    return _global_rule(last["rule"], local_outcomes, last["inputs"])

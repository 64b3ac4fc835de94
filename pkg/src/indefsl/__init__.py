"""Riesz basis diagnostics for indefinite Sturm-Liouville problems.

``-f'' + q f = lambda r f`` on ``[a, b]`` with a sign-changing weight ``r``
and self-adjoint boundary conditions.  Submodules:

``weights``
    Weight specifications and the one-sided integrals ``I^+-_x``.
``criteria``
    Positive-increase tests and the turning-point criteria.
``bc``
    Admissibility and normal forms of boundary conditions.
``verdict``
    The Riesz-basis decision with an auditable trail.
``spectral``
    Characteristic determinant, eigenvalues, root functions, Gram conditioning.
``helpineq``
    HELP-inequality validity and best-constant estimates.
``cli``
    Batch front end.
"""

__version__ = "0.1.0"

from .bc import BCMatrices, CanonicalBC, canonicalize, named_bc
from .criteria import lemma_conditions, pi_test, turning_point_criteria
from .expr import parse
from .helpineq import HelpSpec, best_constant_estimate, help_verdict
from .spectral import eigenvalues, gram_condition, jordan_chain_at_zero
from .verdict import ProblemSpec, decide_rbp
from .weights import IntegralFn, WeightSpec, parse_weight

__all__ = [
    "__version__",
    "BCMatrices",
    "CanonicalBC",
    "canonicalize",
    "named_bc",
    "pi_test",
    "lemma_conditions",
    "turning_point_criteria",
    "parse",
    "HelpSpec",
    "help_verdict",
    "best_constant_estimate",
    "eigenvalues",
    "gram_condition",
    "jordan_chain_at_zero",
    "ProblemSpec",
    "decide_rbp",
    "IntegralFn",
    "WeightSpec",
    "parse_weight",
]

"""Self-adjoint boundary conditions ``C (f'(a), -f'(b))^T = D (f(a), f(b))^T``.

A pair ``(C, D)`` is admissible when ``rank(C|D) = 2`` and ``C D^* = D C^*``.
Row-equivalent pairs define the same operator, and every admissible pair is
row-equivalent to exactly one of five normal forms:

=======================  ==========================  ==========================
family                   C                           D
=======================  ==========================  ==========================
``FullRank``             ``I``                       ``B = B^*``
``Dirichlet``            ``0``                       ``I``
``LeftDirichletRobin``   ``[[0, 1], [0, 0]]``        ``[[0, d], [1, 0]]``
``RobinRightDirichlet``  ``[[1, 0], [0, 0]]``        ``[[d, 0], [0, 1]]``
``Coupled``              ``[[1, conj(c)], [0, 0]]``  ``[[d, 0], [-c, 1]]``
=======================  ==========================  ==========================

with ``d`` real and ``c != 0``.  Periodic conditions are ``Coupled`` with
``c = 1, d = 0``; antiperiodic ones have ``c = -1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BCError",
    "BCMatrices",
    "CanonicalBC",
    "validate_bc",
    "canonicalize",
    "row_equivalent",
    "named_bc",
    "coupled",
    "bc_from_json",
]

RANK_TOL = 1e-10
FULL_RANK = "FullRank"
DIRICHLET = "Dirichlet"
LEFT_DIRICHLET_ROBIN = "LeftDirichletRobin"
ROBIN_RIGHT_DIRICHLET = "RobinRightDirichlet"
COUPLED = "Coupled"
SEPARATED_FAMILIES = {DIRICHLET, LEFT_DIRICHLET_ROBIN, ROBIN_RIGHT_DIRICHLET}


class BCError(ValueError):
    """Boundary matrices that do not define a self-adjoint realisation."""


@dataclass(frozen=True)
class BCMatrices:
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=complex).reshape(2, 2)
        D = np.asarray(self.D, dtype=complex).reshape(2, 2)
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(D))):
            raise BCError("boundary matrices must be finite")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def stacked(self) -> np.ndarray:
        return np.hstack([self.C, self.D])

    def transformed(self, M) -> "BCMatrices":
        M = np.asarray(M, dtype=complex)
        return BCMatrices(M @ self.C, M @ self.D)

    def to_json(self) -> dict:
        return {"C": _complex_to_json(self.C), "D": _complex_to_json(self.D)}


@dataclass(frozen=True)
class CanonicalBC:
    """Normal form of an admissible pair.

    ``c`` and ``d`` are set for the rank-one families, ``B`` for ``FullRank``.
    ``unimodular`` marks ``Coupled`` with ``|c| = 1`` (within tolerance);
    ``boundary_sensitive`` marks ``|c|`` within ``1e-6`` of 1.
    """

    family: str
    matrices: BCMatrices
    c: complex | None = None
    d: float | None = None
    B: np.ndarray | None = field(default=None, compare=False)

    @property
    def separated(self) -> bool:
        if self.family == FULL_RANK:
            return abs(self.B[0, 1]) <= RANK_TOL * max(1.0, np.linalg.norm(self.B))
        return self.family in SEPARATED_FAMILIES

    @property
    def unimodular(self) -> bool:
        return self.family == COUPLED and abs(abs(self.c) - 1.0) <= RANK_TOL

    @property
    def boundary_sensitive(self) -> bool:
        return self.family == COUPLED and abs(abs(self.c) - 1.0) <= 1e-6

    def parameters(self) -> dict:
        out: dict = {}
        if self.c is not None:
            out["c"] = [self.c.real + 0.0, self.c.imag + 0.0]
        if self.d is not None:
            out["d"] = self.d
        if self.B is not None:
            out["B"] = _complex_to_json(self.B)
        return out

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "parameters": self.parameters(),
            "separated": self.separated,
            "unimodular": self.unimodular,
            "boundary_sensitive": self.boundary_sensitive,
            **self.matrices.to_json(),
        }


def _complex_to_json(A) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A, dtype=complex)]


def _as_pair(C, D=None) -> BCMatrices:
    if isinstance(C, BCMatrices):
        return C
    if isinstance(C, CanonicalBC):
        return C.matrices
    return BCMatrices(C, D)


def _rank(A: np.ndarray, scale: float) -> int:
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > RANK_TOL * max(scale, 1e-300)))


def validate_bc(C, D=None) -> BCMatrices:
    """Return the validated pair or raise :class:`BCError` describing the violation."""
    pair = _as_pair(C, D)
    S = pair.stacked
    norm = np.linalg.norm(S)
    if norm == 0 or _rank(S, norm) < 2:
        raise BCError("rank(C|D) < 2: the conditions are not independent")
    defect = np.linalg.norm(pair.C @ pair.D.conj().T - pair.D @ pair.C.conj().T)
    if defect > RANK_TOL * norm**2:
        raise BCError(f"CD* != DC*: symmetry defect {defect:.3e}")
    return pair


def _normal_form(pair: BCMatrices) -> CanonicalBC:
    C, D = pair.C, pair.D
    norm = np.linalg.norm(pair.stacked)
    rank_c = _rank(C, norm)
    if rank_c == 2:
        B = np.linalg.solve(C, D)
        B = 0.5 * (B + B.conj().T)
        return CanonicalBC(FULL_RANK, BCMatrices(np.eye(2), B), B=B)
    if rank_c == 0:
        return CanonicalBC(DIRICHLET, BCMatrices(np.zeros((2, 2)), np.eye(2)))

    # rank one: the left null vector of C picks the Dirichlet-type row
    _, _, vh = np.linalg.svd(C.T)
    w = vh[-1].conj()
    p, s = w @ D
    scale = max(abs(p), abs(s))
    rest = (np.linalg.svd(C)[0][:, 0]).conj()
    c1, c2 = rest @ C
    d1 = rest @ D
    if abs(s) <= RANK_TOL * scale:
        # f(a) = 0 and a Robin condition at b
        d = float((d1[1] / c2).real)
        return CanonicalBC(
            LEFT_DIRICHLET_ROBIN,
            BCMatrices([[0, 1], [0, 0]], [[0, d], [1, 0]]),
            d=d,
        )
    if abs(p) <= RANK_TOL * scale:
        d = float((d1[0] / c1).real)
        return CanonicalBC(
            ROBIN_RIGHT_DIRICHLET,
            BCMatrices([[1, 0], [0, 0]], [[d, 0], [0, 1]]),
            d=d,
        )
    c = complex(-p / s)
    # first row scaled to C1 = (1, conj c); subtract the multiple of (-c, 1) that clears D1[1]
    row = d1 / c1
    d = float((row[0] + c * row[1]).real)
    return CanonicalBC(
        COUPLED,
        BCMatrices([[1, np.conj(c)], [0, 0]], [[d, 0], [-c, 1]]),
        c=c,
        d=d,
    )


def canonicalize(C, D=None) -> tuple[CanonicalBC, np.ndarray]:
    """Normal form and the invertible ``M`` with ``(M C, M D)`` equal to it."""
    pair = validate_bc(C, D)
    canon = _normal_form(pair)
    M = canon.matrices.stacked @ np.linalg.pinv(pair.stacked)
    residual = np.linalg.norm(M @ pair.stacked - canon.matrices.stacked)
    if residual > 1e-8 * max(1.0, np.linalg.norm(canon.matrices.stacked)):
        raise BCError(f"normal form is not row-equivalent to the input (residual {residual:.3e})")
    return canon, M


def row_equivalent(first, second) -> bool:
    """True iff an invertible ``M`` maps ``second`` onto ``first``."""
    a = _as_pair(first).stacked
    b = _as_pair(second).stacked
    M = a @ np.linalg.pinv(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if np.linalg.norm(M @ b - a) > 1e-10 * scale:
        return False
    return _rank(M, np.linalg.norm(M)) == 2


# -- constructors ----------------------------------------------------------


def coupled(c: complex, d: float = 0.0) -> BCMatrices:
    """Pair for ``f(b) = c f(a)``, ``f'(a) - conj(c) f'(b) = d f(a)``."""
    c = complex(c)
    if c == 0:
        raise BCError("coupled conditions need c != 0")
    return BCMatrices([[1, np.conj(c)], [0, 0]], [[d, 0], [-c, 1]])


def named_bc(name: str, **params) -> BCMatrices:
    """Pair for ``dirichlet``, ``neumann``, ``periodic``, ``antiperiodic``, ``robin`` or ``coupled``.

    ``robin`` takes ``d_a`` and ``d_b`` for ``f'(a) = d_a f(a)`` and ``-f'(b) = d_b f(b)``;
    ``coupled`` takes ``c`` and ``d``.
    """
    key = name.lower()
    if key == "dirichlet":
        return BCMatrices(np.zeros((2, 2)), np.eye(2))
    if key == "neumann":
        return BCMatrices(np.eye(2), np.zeros((2, 2)))
    if key == "periodic":
        return coupled(1.0)
    if key == "antiperiodic":
        return coupled(-1.0)
    if key == "robin":
        return BCMatrices(np.eye(2), np.diag([float(params.get("d_a", 0.0)), float(params.get("d_b", 0.0))]))
    if key == "coupled":
        return coupled(_complex(params.get("c", 1.0)), float(params.get("d", 0.0)))
    raise BCError(f"unknown boundary condition {name!r}")


def _complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise BCError(f"complex entries are [re, im] pairs, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _matrix(rows) -> np.ndarray:
    return np.array([[_complex(z) for z in row] for row in rows], dtype=complex)


def bc_from_json(obj) -> BCMatrices:
    """Parse ``"periodic"``, ``{"name": "robin", "d_a": 1}`` or ``{"C": [[..]], "D": [[..]]}``."""
    if isinstance(obj, str):
        return named_bc(obj)
    if "C" in obj and "D" in obj:
        return BCMatrices(_matrix(obj["C"]), _matrix(obj["D"]))
    if "name" in obj:
        params = {k: v for k, v in obj.items() if k != "name"}
        return named_bc(obj["name"], **params)
    raise BCError("boundary condition must be a name or an object with C and D")

"""Independent reference computations used by the tests."""

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import eigsh


def fd_sgn_dirichlet(n_cells: int, k: int) -> np.ndarray:
    """Smallest ``k`` positive eigenvalues of ``-f'' = lam sgn(x) f``, ``f(+-1) = 0``.

    Second-order central differences on ``n_cells`` uniform cells.  With
    ``A`` the (positive definite) Dirichlet Laplacian and ``R = diag(sgn x)``,
    the pencil is inverted: ``R f = mu A f`` with ``mu = 1/lam``, so the
    largest ``mu`` give the smallest positive ``lam``.
    """
    h = 2.0 / n_cells
    x = -1.0 + h * np.arange(1, n_cells)
    m = x.size
    A = sparse.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1], format="csc") / h**2
    R = sparse.diags(np.sign(x), format="csc")
    mu = eigsh(R, k=k, M=A, which="LA", return_eigenvectors=False, tol=1e-14)
    return np.sort(1.0 / mu)


def fd_richardson(n_cells: int, k: int) -> np.ndarray:
    return (4.0 * fd_sgn_dirichlet(2 * n_cells, k) - fd_sgn_dirichlet(n_cells, k)) / 3.0


def sgn_dirichlet_exact(k: int) -> np.ndarray:
    """Roots of ``tan s = -tanh s`` squared: the positive eigenvalues in closed form.

    With ``f = sin(s(1 - x))`` on ``(0, 1)`` and ``sinh(s(1 + x))`` on
    ``(-1, 0)``, matching values and slopes at 0 gives ``tan s + tanh s = 0``.
    """
    out = []
    for j in range(1, k + 1):
        lo, hi = (j - 0.5) * np.pi + 1e-12, j * np.pi
        out.append(optimize.brentq(lambda s: np.sin(s) * np.cosh(s) + np.cos(s) * np.sinh(s), lo, hi, xtol=1e-15) ** 2)
    return np.array(out)


def fd_indefinite(weight, q, n_cells: int, targets) -> np.ndarray:
    """Eigenvalues of ``-f'' + q f = lam r f`` with Dirichlet ends nearest each target.

    An odd cell count keeps grid nodes off a turning point at 0, so
    ``diag(r)`` is invertible and the pencil becomes the ordinary sparse
    problem ``R^{-1}(A + Q)``; shift-invert picks the eigenvalue near a target.
    """
    from scipy.sparse.linalg import eigs

    a, b = weight.a, weight.b
    h = (b - a) / n_cells
    x = a + h * np.arange(1, n_cells)
    m = x.size
    A = sparse.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1]) / h**2
    op = (sparse.diags(1.0 / weight(x)) @ (A + sparse.diags(q(x)))).tocsc().astype(complex)
    out = []
    for z in targets:
        vals = eigs(op, k=1, sigma=z, return_eigenvectors=False)
        out.append(vals[0])
    return np.array(out)

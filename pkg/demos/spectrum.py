"""Eigenvalues of -f'' + q f = lambda sgn(x) f on [-1, 1] with Dirichlet ends.

With q = 0 the spectrum is real and symmetric and matches the roots of
tan s = -tanh s.  A sufficiently negative constant potential pushes the
lowest pair off the real axis into a conjugate quadruple.
"""

import numpy as np

from indefsl.bc import named_bc
from indefsl.expr import parse
from indefsl.spectral import eigenvalues
from indefsl.weights import parse_weight
from scipy.optimize import brentq


def closed_form(k):
    g = lambda s: np.sin(s) * np.cosh(s) + np.cos(s) * np.sinh(s)  # noqa: E731
    return np.array([brentq(g, (j - 0.5) * np.pi, j * np.pi) ** 2 for j in range(1, k + 1)])


def main():
    sgn = parse_weight("sgn(x)", (-1.0, 1.0), [0.0], ["x", "x"])
    spec = eigenvalues((sgn, parse("0"), named_bc("dirichlet")), max_count=10)
    pos = np.sort(spec.eigenvalues.real[spec.eigenvalues.real > 0])
    print("q = 0, positive half against the closed form")
    for lam, ref in zip(pos, closed_form(pos.size)):
        print(f"  {lam:18.10f}  {abs(lam - ref) / ref:.1e}")
    print(f"  largest residual {spec.residuals.max():.1e}")

    for level in (-20.0, -40.0):
        spec = eigenvalues((sgn, parse(repr(level)), named_bc("dirichlet")), max_count=8)
        print(f"q = {level:g}")
        for lam in spec.eigenvalues:
            print(f"  {lam.real:+12.6f} {lam.imag:+12.6f}i")


if __name__ == "__main__":
    main()

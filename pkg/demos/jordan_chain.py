"""The non-semisimple eigenvalue 0 of the periodic problem with r = sgn.

The eigenfunction is constant and the associated function solves
-g'' = sgn(x) with periodic ends; in closed form g = x (1 - |x|) / 2.
"""

import numpy as np

from indefsl.bc import named_bc
from indefsl.expr import parse
from indefsl.spectral import jordan_chain_at_zero
from indefsl.weights import parse_weight


def main():
    sgn = parse_weight("sgn(x)", (-1.0, 1.0), [0.0], ["x", "x"])
    x = np.linspace(-1.0, 1.0, 9)
    ch = jordan_chain_at_zero((sgn, parse("0"), named_bc("periodic")), x)
    print(f"gamma = {ch.gamma}")
    for xi, g in zip(x, ch.g0):
        print(f"  x = {xi:+.3f}  g0 = {g:+.12f}  closed form {xi * (1 - abs(xi)) / 2:+.12f}")
    print(f"ends {ch.boundary_values}, slopes {ch.boundary_slopes}, weak residual {ch.ell_residual:.1e}")


if __name__ == "__main__":
    main()

"""Condition numbers of Gram matrices of normalised root functions.

For r = sgn with periodic conditions they level off; for the logarithmic
weight, whose periodic problem lacks the basis property, they keep growing.
The logarithmic case takes about a minute.
"""

import time

from indefsl.schema import load_fixture, validate_problem
from indefsl.spectral import gram_condition


def main():
    for name in ("sgn_periodic", "log_periodic"):
        doc = validate_problem(load_fixture(name))
        start = time.perf_counter()
        spec = gram_condition((doc.weight, doc.q, doc.bc), [10, 20, 30])
        k = spec.kappa
        print(f"{name}: " + "  ".join(f"N={n}: {k[n]:.3f}" for n in sorted(k)) + f"  ({time.perf_counter() - start:.0f} s)")


if __name__ == "__main__":
    main()

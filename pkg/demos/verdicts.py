"""Riesz basis verdicts across the shipped fixtures, with the rule that decided each one.

The weight alone does not settle the question: the same weight can have the
property under Dirichlet conditions and lose it under periodic ones, while a
coupling with |c| != 1 restores it.
"""

from indefsl.schema import fixture_names, load_fixture, validate_problem
from indefsl.verdict import ProblemSpec, decide_rbp


def main():
    for name in fixture_names():
        doc = validate_problem(load_fixture(name))
        if doc.weight is None or doc.weight.n == 0 or doc.bc is None:
            continue
        v = decide_rbp(ProblemSpec(doc.weight, doc.bc, doc.q))
        rule = v.trail[-1].get("rule", "") if v.trail else ""
        print(f"{name:20s} {v.family.family:12s} {v.outcome:14s} {rule}")


if __name__ == "__main__":
    main()

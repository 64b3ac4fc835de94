"""Validity of the HELP inequality on three regular problems.

The Galerkin estimates of the best constant level off exactly when the
inequality is valid.
"""

from indefsl.helpineq import HelpSpec, best_constant_estimate, help_verdict
from indefsl.schema import load_fixture, validate_problem


def main():
    for name in ("bennewitz_pi", "help_q0", "final_example"):
        doc = validate_problem(load_fixture(name))
        spec = HelpSpec(doc.weight, doc.q, doc.q_text, doc.q_antiderivative, doc.q_antiderivative_text)
        rep = help_verdict(spec)
        est = best_constant_estimate(spec)
        ks = ", ".join(f"{k:.3f}" for k in est.K)
        print(f"{name:14s} {rep.validity:8s} ends {rep.left.verdict}/{rep.right.verdict}  form {rep.form.norm:.1e}")
        print(f"{'':14s} K_N for N = {est.N}: {ks} ({est.classification})")


if __name__ == "__main__":
    main()

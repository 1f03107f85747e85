"""Entropy-energy, Fisher decay, entropy creation and HWI on the reference spaces.

Each functional check is gated on the equivalence suite for the same space
and parameters. The HWI regularization constant C is calibrated on a sweep
of bumps and compared with an analytic admissible value.

    python3 demos/05_functional_inequalities.py
"""

from cdlab.funcineq import (
    calibrate_hwi_constant,
    check_entropy_creation,
    check_entropy_energy,
    check_fisher_decay,
    check_hwi,
    check_hwi_regularization,
    peaked_density,
    require_gate,
    HWI_C_ANALYTIC,
)
from cdlab.harness import reference_space


def main():
    iv = reference_space("interval", 256)
    require_gate(iv, (0.7, 2))
    f = peaked_density(iv, 0.3, 0.05)
    print("interval with V = x^2/2, (R, m) = (0.7, 2), peaked f")
    print("  " + check_entropy_energy(iv, (0.7, 2), f).line())
    for r in check_fisher_decay(iv, (0.7, 2), f, (0.1, 0.5)) + check_entropy_creation(iv, (0.7, 2), f, (0.05, 0.5)):
        print("  " + r.line())
    print("  with m shrunk to 0.2: " + check_entropy_energy(iv, (0.7, 0.2), peaked_density(iv, 0.3, 0.01)).line())

    ci = reference_space("circle", 256)
    require_gate(ci, (0.0, 1.0))
    g = peaked_density(ci, 1.0, 0.05)
    print("\nflat circle, m = 1")
    print("  " + check_hwi(ci, 1.0, g).line())
    print("  m = 0.1:  " + check_hwi(ci, 0.1, g).line())
    C, needs = calibrate_hwi_constant(ci, 1.0)
    print(f"  calibrated C = {C:.4f} (analytic admissible value {HWI_C_ANALYTIC:.4f})")
    for r in check_hwi_regularization(ci, 1.0, g, (0.01, 0.1, 1.0)):
        print(f"  {r.line()}  log regime: {r.metadata['log_regime']}")


if __name__ == "__main__":
    main()

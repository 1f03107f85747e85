"""Dimensional Wasserstein contraction of the heat flow, and what breaks it.

On the flat circle, CD(0, 1) holds. The heat flow then contracts W2 with an
extra entropy-gap term. Claiming a smaller dimension m, or a positive
curvature, is detected by some density pair.

    python3 demos/02_contraction_and_falsification.py
"""

import numpy as np

from cdlab.harness import ContractionExperiment, check_contraction_ii, check_contraction_iii, density_family, reference_space

TIMES = (0.1, 0.5, 1.0)


def show(title, exp):
    print(title)
    for r in check_contraction_ii(exp) + check_contraction_iii(exp):
        print("  " + r.line())


def main():
    sp = reference_space("circle", 256)
    fam = density_family(sp)
    show("sin vs cos at the true parameters (0, 1)", ContractionExperiment(sp, fam["sin"], fam["cos"], (0, 1), TIMES))
    show("uniform vs peak with m shrunk to 0.1", ContractionExperiment(sp, fam["uniform"], fam["peak"], (0, 0.1), TIMES))

    # equal entropies along the flow isolate the curvature term
    x = sp.grid.nodes
    bump = np.exp(-np.angle(np.exp(1j * (x - 1.0))) ** 2 / (2 * 0.02**2)) + 1e-6
    show("narrow bump vs its quarter rotation, claiming R = 0.5", ContractionExperiment(sp, bump, np.roll(bump, 64), (0.5, 1), TIMES))


if __name__ == "__main__":
    main()

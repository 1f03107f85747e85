"""Euclidean gradient flows: (R, m)-convexity and contraction of trajectories.

F(x) = |x|^2 / 2 is (0.5, 2)-convex on the box [-1/2, 1/2]^2 but not
(1, 0.1)-convex. The convexity test, the flow contraction and the Taylor
converse agree on both claims.

    python3 demos/04_gradient_flows.py
"""

import math

import numpy as np

from cdlab.gradflow import check_cd_convexity, check_converse_taylor, check_flow_contraction, quadratic

BOX = [[-0.5, 0.5], [-0.5, 0.5]]


def main():
    pot = quadratic()
    print("linear flow, (R, m) = (1, inf): equality")
    for r in check_flow_contraction(pot, 1.0, math.inf, [0.4, 0.3], [-0.2, 0.1], 1.0):
        print("  " + r.line())
    for R, m in ((0.5, 2.0), (1.0, 0.1)):
        print(f"\nclaim (R, m) = ({R}, {m})")
        conv = check_cd_convexity(pot, R, m, BOX)
        print("  " + conv.line())
        for r in check_flow_contraction(pot, R, m, [0.5, 0.5], [-0.05, 0.0], 1.0, du=2e-3, box=BOX):
            print("  " + r.line())
        print("  " + check_converse_taylor(pot, R, m, conv.metadata["x"], np.asarray(conv.metadata["h"])).line())


if __name__ == "__main__":
    main()

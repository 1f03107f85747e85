import math

import numpy as np
import pytest

from cdlab.functionals import BranchError
from cdlab.grid import gamma, integrate
from cdlab.harness import (
    ContractionExperiment,
    check_contraction_ii,
    check_contraction_iii,
    check_evi,
    check_evi_integrated,
    check_two_time_eks,
    converse_estimates,
    eks_coefficient,
    equivalence_report,
    perturbed_density,
    geodesic_refinement,
    richardson,
    tilted_generator,
)
from cdlab.transport import w2

TIMES = (0.1, 0.5, 1.0)


@pytest.fixture(scope="module")
def sin_cos(circle256):
    x = circle256.grid.nodes
    return 1 + 0.5 * np.sin(x), 1 + 0.5 * np.cos(x)


def test_identical_pair_zero_margin(circle64):
    f = 1 + 0.3 * np.cos(circle64.grid.nodes)
    exp = ContractionExperiment(circle64, f, f, (0, 1), TIMES)
    for r in check_contraction_ii(exp) + check_contraction_iii(exp):
        assert abs(r.margin) < 1e-12


def test_zero_time_margins_exact(circle64):
    x = circle64.grid.nodes
    exp = ContractionExperiment(circle64, 1 + 0.5 * np.sin(x), 1 + 0.5 * np.cos(x), (0, 1), (0.0, 0.5))
    for r in check_contraction_ii(exp)[:1] + check_contraction_iii(exp)[:1]:
        assert r.margin == 0.0


def test_circle_pair_passes(circle256, sin_cos):
    exp = ContractionExperiment(circle256, *sin_cos, (0, 1), TIMES)
    reps = check_contraction_ii(exp) + check_contraction_iii(exp)
    assert all(r.passed for r in reps)
    assert reps[0].tol == pytest.approx(5 * circle256.dx + 5 * 0.1 / 64)


def test_dimension_inflation_fails(circle256):
    x = circle256.grid.nodes
    peak = np.exp(-np.angle(np.exp(1j * (x - 4.0))) ** 2 / 0.1) + 0.02
    exp = ContractionExperiment(circle256, np.ones_like(x), peak, (0, 0.1), TIMES)
    assert any(not r.passed for r in check_contraction_iii(exp))


def test_ii_iii_integrand_consistency(interval256, interval_family):
    exp = ContractionExperiment(interval256, interval_family["left"], interval_family["peak"], (0.7, 2), TIMES)
    for a, b in zip(check_contraction_ii(exp), check_contraction_iii(exp)):
        # 4 * 2m sinh^2(x / 2m) >= (2/m) x^2 on the same Simpson nodes
        assert 4 * a.metadata["integral"] >= 2 / 2.0 * b.metadata["integral"] - 1e-12


def test_weakening_never_breaks(interval256, interval_family):
    f, g = interval_family["cos"], interval_family["peak"]
    strong = ContractionExperiment(interval256, f, g, (0.7, 2), TIMES)
    weak = ContractionExperiment(interval256, f, g, (0.3, 6), TIMES)
    for s, w in zip(check_contraction_iii(strong), check_contraction_iii(weak)):
        assert w.margin >= s.margin - 1e-12


def test_branch_violation_named(circle64):
    x = circle64.grid.nodes
    f = np.exp(-np.angle(np.exp(1j * (x - 1))) ** 2 / 0.01)
    g = np.exp(-np.angle(np.exp(1j * (x - 4))) ** 2 / 0.01)
    exp = ContractionExperiment(circle64, f, g, (10, 1), (0.1,))
    with pytest.raises(BranchError, match="W2="):
        check_contraction_ii(exp)


def test_eks(circle256, sin_cos):
    f, _ = sin_cos
    g = np.ones_like(f)
    assert check_two_time_eks(circle256, f, g, 0.1, 0.4, (0, 1)).passed
    same = check_two_time_eks(circle256, f, g, 0.3, 0.3, (0, 1))
    w_t = w2(circle256.grid, circle256.evolve(f, 0.3), circle256.evolve(g, 0.3))
    assert same.lhs == pytest.approx(0.25 * w_t**2, rel=1e-12)
    assert same.rhs == pytest.approx(0.25 * w2(circle256.grid, circle256.density(f), g) ** 2, rel=1e-12)
    a = check_two_time_eks(circle256, f, g, 0.1, 0.4, (1e-9, 1))
    b = check_two_time_eks(circle256, f, g, 0.1, 0.4, (0.0, 1))
    assert abs(a.margin - b.margin) <= 1e-6
    assert eks_coefficient(0.0, 2.0, 3.0) == 6.0
    assert eks_coefficient(1e-10, 2.0, 3.0) == pytest.approx(6.0, rel=1e-9)


def test_evi_uniform_probe(circle256, sin_cos):
    exp = ContractionExperiment(circle256, sin_cos[0], np.ones_like(sin_cos[0]), (0, 1), TIMES)
    reps = check_evi(exp)
    assert all(r.passed for r in reps)
    assert reps[0].tol == pytest.approx(5 * circle256.dx + 10 * 1e-3)


def test_evi_integrated_matches_contraction_margin(circle256, sin_cos):
    exp = ContractionExperiment(circle256, *sin_cos, (0, 1), TIMES)
    rep = check_evi_integrated(exp, 0.5)
    assert rep.passed
    assert rep.metadata["gap"] < 1e-5
    assert rep.metadata["same_sign"]


def test_refinement(circle256, sin_cos):
    f, g = sin_cos
    reps = geodesic_refinement(circle256, f, g, 0.5, (0, 1), (1, 2, 4))
    assert all(r.passed and r.metadata["chain_holds"] for r in reps)
    exp = ContractionExperiment(circle256, f, g, (0, 1), (0.5,), du=0.5 / 64)
    ii = check_contraction_ii(exp)[0]
    assert reps[0].lhs == ii.lhs and reps[0].rhs == ii.rhs
    assert reps[2].rhs <= reps[0].rhs + reps[0].tol


def test_tilted_generator(circle64, interval64):
    for sp in (circle64, interval64):
        assert np.array_equal(tilted_generator(sp.gen, np.ones(sp.grid.n)).matrix, sp.gen.matrix)
        g = sp.density(1 + 0.5 * np.cos(3 * sp.grid.nodes))
        Lg = tilted_generator(sp.gen, g)
        h = np.sin(sp.grid.nodes)
        expected = sp.gen.matrix @ h + gamma(sp.gen, np.log(g), h)
        np.testing.assert_allclose(Lg.matrix @ h, expected, atol=1e-8)
        assert Lg.row_sum_residual() < 1e-8


def test_perturbed_density(circle64):
    x = circle64.grid.nodes
    g = circle64.density(1 + 0.5 * np.cos(x))
    assert np.array_equal(perturbed_density(circle64, g, np.sin(x), 0.0), g)
    np.testing.assert_allclose(perturbed_density(circle64, g, np.full(64, 2.0), 0.3), g, atol=1e-12)
    gs = perturbed_density(circle64, g, np.sin(x), 0.01)
    assert abs(integrate(circle64.grid, gs) - 1) < 1e-12
    with pytest.raises(ValueError, match="1/N"):
        perturbed_density(circle64, g, np.sin(x), 10.0)


def test_richardson():
    vals = [1 + 0.2 * s for s in (0.04, 0.02, 0.01)]
    v, spread = richardson(vals)
    assert v == pytest.approx(1.0, abs=1e-14) and spread < 1e-14


def test_converse_constant_f(circle64):
    g = circle64.density(1 + 0.5 * np.cos(circle64.grid.nodes))
    for r in converse_estimates(circle64, g, np.ones(64), 0.3):
        assert abs(r.lhs) < 1e-10 and abs(r.rhs) < 1e-10


def test_converse_circle(circle256):
    x = circle256.grid.nodes
    g = 1 + 0.5 * np.cos(x)
    for f in (np.sin(x), np.cos(x)):
        reps = converse_estimates(circle256, g, f, 0.3)
        assert all(r.passed and not r.inconclusive for r in reps)
        assert reps[1].metadata["ratio"] == pytest.approx(1.0, abs=0.15)


def test_equivalence_circle_and_interval(circle256, circle_family, interval256, interval_family):
    assert equivalence_report(circle256, (0, 1), circle_family, TIMES).passed
    assert equivalence_report(interval256, (0.7, 2), interval_family, TIMES).passed


def test_equivalence_rejects_inflated_claim(circle256, circle_family):
    # a narrow bump and its quarter rotation have equal entropies at all times,
    # so only the curvature term acts and R > 0 shows up at small t
    x = circle256.grid.nodes
    bump = np.exp(-np.angle(np.exp(1j * (x - 1.0))) ** 2 / (2 * 0.02**2)) + 1e-6
    family = {**circle_family, "bump": bump, "bump_rot": np.roll(bump, 64)}
    rep = equivalence_report(circle256, (0.5, 1), family, TIMES)
    assert not rep.passed
    forward = rep.metadata["forward"]
    assert not forward[0].passed  # pointwise CD
    assert any(not r.passed for r in forward[1:])

import math

import numpy as np
import pytest

from cdlab.grid import (
    CurvatureParams,
    GridError,
    StabilityError,
    apply_L,
    build_generator,
    build_grid,
    check_pointwise_cd,
    check_weak_cd,
    default_test_family,
    estimate_best_R,
    gamma,
    gamma2,
    integrate,
    stencil_interior,
)


def circle(n, normalize=True):
    return build_grid("circle", n, (0.0, 2 * math.pi), None, normalize)


def test_circle_weights_uniform():
    g = circle(8)
    np.testing.assert_allclose(g.weights, np.full(8, 1 / 8), rtol=0, atol=1e-15)


def test_interval_weights_gaussian():
    g = build_grid("interval", 16, (-0.5, 0.5), lambda x: 0.5 * x**2)
    x = -0.5 + (np.arange(16) + 0.5) / 16
    expected = np.exp(-0.5 * x**2)
    np.testing.assert_allclose(g.weights, expected / expected.sum(), rtol=1e-13)
    assert abs(g.weights.sum() - 1) < 1e-14


def test_raw_circle_mass():
    assert abs(circle(64, normalize=False).weights.sum() - 2 * math.pi) < 1e-12


def test_grid_errors():
    with pytest.raises(GridError, match="at least"):
        circle(4)
    with pytest.raises(GridError, match="not finite at node"):
        build_grid("interval", 16, (-0.5, 0.5), lambda x: np.where(x > 0.2, np.inf, 0.0))


def test_stability_error_names_node():
    with pytest.raises(StabilityError, match="node"):
        build_generator(build_grid("interval", 16, (-0.5, 0.5), lambda x: 100.0 * x**2))


def test_flat_circle_stencil():
    g = circle(8)
    L = build_generator(g).matrix
    dx2 = g.dx**2
    for i in range(8):
        assert L[i, (i + 1) % 8] == pytest.approx(1 / dx2, rel=1e-14)
        assert L[i, (i - 1) % 8] == pytest.approx(1 / dx2, rel=1e-14)
        assert L[i, i] == pytest.approx(-2 / dx2, rel=1e-14)


@pytest.mark.parametrize("kind", ["circle", "interval"])
def test_generator_invariants(kind):
    dom = (0.0, 2 * math.pi) if kind == "circle" else (-0.5, 0.5)
    gen = build_generator(build_grid(kind, 40, dom, lambda x: 0.3 * np.cos(x) + 0.5 * x**2))
    M = gen.matrix
    assert gen.row_sum_residual() < 1e-9
    assert gen.symmetry_residual() < 1e-12 * np.abs(gen.grid.weights[:, None] * M).max()
    off = M - np.diag(np.diag(M))
    assert off.min() >= 0


def test_apply_L_constant_and_sin():
    errs = []
    for n in (64, 128):
        g = circle(n)
        gen = build_generator(g)
        assert np.abs(apply_L(gen, np.full(n, 3.0))).max() < 1e-9
        errs.append(np.abs(apply_L(gen, np.sin(g.nodes)) + np.sin(g.nodes)).max())
    # second order: error ratio near 4 under halving
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert errs[1] < 1e-3


def test_gamma_and_gamma2_sin_converge():
    eg, e2 = [], []
    for n in (64, 128, 256):
        g = circle(n)
        gen = build_generator(g)
        s = np.sin(g.nodes)
        eg.append(np.abs(gamma(gen, s) - np.cos(g.nodes) ** 2).max())
        e2.append(np.abs(gamma2(gen, s) - np.sin(g.nodes) ** 2).max())
    for errs in (eg, e2):
        assert errs[-1] < errs[0]
        assert errs[-1] < 2 * (2 * math.pi / 256)


def test_gamma_bilinear_symmetric_nonnegative(rng):
    gen = build_generator(build_grid("interval", 32, (-0.5, 0.5), lambda x: 0.5 * x**2))
    f, h = rng.normal(size=32), rng.normal(size=32)
    assert gamma(gen, f).min() >= -1e-9
    np.testing.assert_allclose(gamma(gen, f, h), gamma(gen, h, f), atol=1e-9)
    np.testing.assert_allclose(gamma(gen, f + h), gamma(gen, f) + 2 * gamma(gen, f, h) + gamma(gen, h), atol=1e-6)


def test_interval_gamma2_matches_bakry_emery_formula():
    # continuum: Gamma_2(f) = (f'')^2 + V'' (f')^2 with V = x^2/2
    errs = []
    for n in (128, 256):
        g = build_grid("interval", n, (-0.5, 0.5), lambda x: 0.5 * x**2)
        gen = build_generator(g)
        x = g.nodes
        f = np.sin(2 * x)
        exact = (4 * np.sin(2 * x)) ** 2 + (2 * np.cos(2 * x)) ** 2
        mask = stencil_interior(g)
        errs.append(np.abs(gamma2(gen, f) - exact)[mask].max())
    assert errs[1] < errs[0]
    assert errs[1] < 5 * (1 / 256)


def test_integrate_sin_squared():
    g = circle(64, normalize=False)
    assert abs(integrate(g, np.sin(g.nodes) ** 2) - math.pi) < g.dx**2


def test_integration_by_parts(rng):
    gen = build_generator(build_grid("interval", 48, (-0.5, 0.5), lambda x: 0.5 * x**2))
    f, h = rng.normal(size=48), rng.normal(size=48)
    lhs = integrate(gen.grid, f * apply_L(gen, h))
    rhs = -integrate(gen.grid, gamma(gen, f, h))
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_pointwise_cd_circle_family(circle256):
    rep = check_pointwise_cd(circle256.gen, (0, 1), default_test_family(circle256.grid, 1.0))
    assert rep.passed
    assert rep.tol == pytest.approx(5 * circle256.dx)


def test_pointwise_cd_constant_trivial(circle64):
    rep = check_pointwise_cd(circle64.gen, CurvatureParams(-1e6, math.inf), [np.ones(64)], tol=0.0)
    assert rep.margin == 0.0 and rep.passed


def test_pointwise_cd_interval_threshold(interval256):
    fam = default_test_family(interval256.grid, 2.0)
    assert check_pointwise_cd(interval256.gen, (0.7, 2), fam).passed
    assert not check_pointwise_cd(interval256.gen, (1.1, 2), fam).passed


def test_pointwise_cd_monotone(interval256):
    fam = default_test_family(interval256.grid, 2.0)
    base = check_pointwise_cd(interval256.gen, (0.7, 2), fam, tol=0.0)
    weaker = check_pointwise_cd(interval256.gen, (0.5, 4), fam, tol=0.0)
    assert weaker.margin >= base.margin - 1e-12


def test_weak_cd(circle256):
    x = circle256.grid.nodes
    assert check_weak_cd(circle256.gen, (0, 1), np.ones_like(x), 1 + 0.5 * np.cos(x)).margin == pytest.approx(0, abs=1e-12)
    assert check_weak_cd(circle256.gen, (0, 1), np.sin(x), 1 + 0.5 * np.cos(x)).passed


def test_weak_cd_dirac_reproduces_pointwise(circle256):
    gen, grid = circle256.gen, circle256.grid
    f = np.sin(grid.nodes)
    i = 40
    g = np.zeros(grid.n)
    g[i] = 1.0 / grid.weights[i]
    weak = check_weak_cd(gen, (0, 1), f, g, tol=0.0)
    point = gamma2(gen, f)[i] - apply_L(gen, f)[i] ** 2
    # integrated Gamma_2 against a one-node weight equals the pointwise value up to O(1) stencil spread
    assert weak.margin == pytest.approx(point, abs=5 * grid.dx)


def test_best_R_errors():
    gen = build_generator(circle(16))
    with pytest.raises(ValueError, match="undefined R"):
        estimate_best_R(gen, 1.0, [np.ones(16), 2 * np.ones(16)])


@pytest.mark.parametrize("kind,m,target", [("circle", 1.0, 0.0), ("interval", 2.0, 0.75)])
def test_best_R_limits(kind, m, target):
    from cdlab.harness import reference_space

    sp = reference_space(kind, 256)
    r = estimate_best_R(sp.gen, m, default_test_family(sp.grid, m, max_mode=1))
    assert abs(r - target) < 3 * sp.dx

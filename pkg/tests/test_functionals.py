import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdlab.functionals import BranchError, de_bruijn_residual, entropy, entropy_path, fisher, s_r, simpson_nodes, u_m
from cdlab.grid import build_generator, build_grid


def test_s_r_values():
    assert s_r(0.0, 2.0) == 2.0
    assert s_r(1.0, math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    # sinh(1) from its series
    series = sum(1.0 / math.factorial(2 * k + 1) for k in range(12))
    assert s_r(-1.0, 1.0) == pytest.approx(series, abs=1e-12)
    assert s_r(-1.0, 1.0) == pytest.approx(1.175201, abs=1e-6)


def test_s_r_branch_guard():
    with pytest.raises(BranchError):
        s_r(1.0, math.pi)
    with pytest.raises(ValueError):
        s_r(1.0, -0.1)


def test_s_r_continuous_at_zero():
    for x in (0.1, 1.0, 2.0):
        assert abs(s_r(1e-9, x) - x) < 1e-8
        assert abs(s_r(-1e-9, x) - x) < 1e-8


def test_s_r_small_x_expansion():
    # (s_r(x)^2 - x^2) / x^4 -> -r / 3; Richardson in x^2
    r = 0.7
    q = [(s_r(r, x) ** 2 - x**2) / x**4 for x in (0.2, 0.1)]
    limit = (4 * q[1] - q[0]) / 3
    assert limit == pytest.approx(-r / 3, abs=1e-4)


@given(st.floats(0, 20))
def test_sinh_sq_dominates_square(x):
    assert math.sinh(x) ** 2 >= x**2


def test_entropy_uniform_and_two_node():
    g = build_grid("circle", 16, (0.0, 2 * math.pi))
    assert entropy(g, np.ones(16)) == 0.0
    w = g.weights[0]
    f = np.zeros(16)
    f[3] = 0.5 / w
    f[9] = 0.5 / w
    assert entropy(g, f) == pytest.approx(math.log(1 / (2 * w)), rel=1e-14)
    assert u_m(g, f, 1.0) == pytest.approx(2 * w, rel=1e-13)
    assert u_m(g, np.ones(16), 3.0) == 1.0
    assert u_m(g, f, math.inf) == 1.0


def test_entropy_decreasing_along_flow(interval64):
    f = interval64.density(np.exp(-((interval64.grid.nodes - 0.3) ** 2) / 0.01))
    ents = entropy_path(interval64.spec, interval64.grid, f, np.linspace(0, 1, 21))
    assert np.all(np.diff(ents) <= 1e-14)


def test_fisher_uniform_zero(circle64):
    assert fisher(circle64.gen, np.ones(64)) == 0.0


def test_fisher_oracle():
    # I(1 + sin/2) = int cos^2 / (4 (1 + sin/2)) dmu, by fine trapezoid quadrature
    th = np.linspace(0, 2 * math.pi, 200001)[:-1]
    exact = np.mean(np.cos(th) ** 2 / (4 * (1 + 0.5 * np.sin(th))))
    errs = []
    for n in (64, 128, 256):
        g = build_grid("circle", n, (0.0, 2 * math.pi))
        gen = build_generator(g)
        errs.append(abs(fisher(gen, 1 + 0.5 * np.sin(g.nodes)) - exact))
    assert errs[-1] < errs[0]
    assert errs[-1] < 2 * math.pi / 256


def test_fisher_infinite_convention(circle64):
    f = np.zeros(64)
    f[:10] = 1.0
    assert math.isinf(fisher(circle64.gen, f))


def test_fisher_decreases_under_cd(circle64):
    f = circle64.density(1 + 0.9 * np.cos(3 * circle64.grid.nodes))
    vals = [fisher(circle64.gen, circle64.evolve(f, t)) for t in (0, 0.05, 0.2, 1.0)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_simpson_nodes_even():
    us = simpson_nodes(1.0, 0.3)
    assert (us.size - 1) % 2 == 0 and us[-1] == 1.0
    assert np.diff(us).max() <= 0.3 + 1e-12


def test_de_bruijn_smooth(circle256):
    f = circle256.density(1 + 0.5 * np.sin(circle256.grid.nodes))
    assert de_bruijn_residual(circle256.gen, circle256.spec, f, 0.5, 0.5 / 64) < 5 * circle256.dx

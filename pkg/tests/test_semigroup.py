import math

import numpy as np
import pytest

from cdlab.grid import build_generator, build_grid, integrate
from cdlab.semigroup import InconsistentGeneratorError, evolve, evolve_path, spectral


def test_circulant_eigenvalues():
    g = build_grid("circle", 8, (0.0, 2 * math.pi))
    spec = spectral(build_generator(g))
    expected = np.sort(2 * (np.cos(2 * math.pi * np.arange(8) / 8) - 1) / g.dx**2)
    np.testing.assert_allclose(np.sort(spec.eigenvalues), expected, rtol=1e-12, atol=1e-10)


def test_inconsistent_generator():
    g = build_grid("circle", 8, (0.0, 2 * math.pi))
    gen = build_generator(g)
    M = gen.matrix.copy()
    M[0, 1] += 1.0
    M[0, 0] -= 1.0
    bad = type(gen)(M, g)
    with pytest.raises(InconsistentGeneratorError):
        spectral(bad)


def test_sin_mode_propagation(circle64):
    x = circle64.grid.nodes
    lam = 2 * (math.cos(circle64.dx) - 1) / circle64.dx**2
    for t in (0.0, 0.3, 1.7):
        np.testing.assert_allclose(evolve(circle64.spec, 1 + 0.5 * np.sin(x), t), 1 + 0.5 * math.exp(lam * t) * np.sin(x), atol=1e-12)


def test_semigroup_law_and_mass(interval64, rng):
    f = rng.random(64) + 0.1
    a = evolve(interval64.spec, evolve(interval64.spec, f, 0.2), 0.3)
    b = evolve(interval64.spec, f, 0.5)
    np.testing.assert_allclose(a, b, atol=1e-11)
    assert abs(integrate(interval64.grid, b) - integrate(interval64.grid, f)) < 1e-12


def test_path_and_ergodicity(interval64, rng):
    f = interval64.density(rng.random(64) + 0.1)
    assert np.array_equal(evolve_path(interval64.spec, f, [0.0])[0], f)
    T = 10 / interval64.spec.gap
    assert np.abs(evolve(interval64.spec, f, T) - 1).max() < 1e-6 * np.abs(f - 1).max() * 100


def test_eigenfunction_and_gap(circle64):
    spec = circle64.spec
    assert spec.gap == pytest.approx(-2 * (math.cos(circle64.dx) - 1) / circle64.dx**2, rel=1e-10)

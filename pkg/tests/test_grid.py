import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from relaxgpe.grid import (
    SpectralGrid,
    WaveField,
    apply_heat_semigroup,
    inner_product,
    kinetic_integral,
    norms,
)

TWO_PI = (0.0, 2 * np.pi)


def periodic(n=64):
    return SpectralGrid((TWO_PI,), (n,))


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return WaveField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


# -- grid construction --------------------------------------------------------


def test_grid_basic_properties():
    g = SpectralGrid(((-16.0, 16.0),), (4096,))
    assert g.dim == 1
    assert g.h == (1 / 128,)
    assert g.volume == 32.0
    k = g.wavenumbers[0]
    assert len(k) == 4096
    assert np.count_nonzero(k == 0) == 1
    assert k[1] == pytest.approx(2 * np.pi / 32)


def test_grid_2d_shapes():
    g = SpectralGrid.square(-8, 8, 16, dim=2)
    assert g.shape == (16, 16)
    assert g.weight == pytest.approx(1.0)
    x, y = g.coords
    assert x[3, 0] == x[3, 5]
    assert y[0, 3] == y[5, 3]
    assert g.ksq.shape == (16, 16)


@pytest.mark.parametrize("n", [3, 6, 2, 100])
def test_grid_rejects_bad_counts(n):
    with pytest.raises(ValueError):
        SpectralGrid((TWO_PI,), (n,))


def test_grid_rejects_bad_dims_and_intervals():
    with pytest.raises(ValueError):
        SpectralGrid(((0, 1),) * 3, (4,) * 3)
    with pytest.raises(ValueError):
        SpectralGrid(((1.0, 1.0),), (8,))


def test_wavefield_validation():
    g = periodic(8)
    with pytest.raises(ValueError):
        WaveField(g, np.ones(7))
    bad = np.ones(8)
    bad[2] = np.nan
    with pytest.raises(ValueError):
        WaveField(g, bad)
    f = WaveField(g, np.ones(8))
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(ValueError):
        WaveField.constant(g, 0.0).normalized()


# -- heat semigroup -----------------------------------------------------------


def test_heat_single_mode():
    g = periodic()
    f = WaveField.from_function(g, lambda x: np.exp(1j * x))
    out = apply_heat_semigroup(f, 0.5)
    np.testing.assert_allclose(out.values, 0.6065306597126334 * f.values, atol=1e-14)


def test_heat_fixes_constants():
    g = periodic()
    f = WaveField.constant(g, 0.3 - 0.2j)
    np.testing.assert_allclose(apply_heat_semigroup(f, 3.7).values, f.values, atol=1e-15)


def test_heat_zero_time_is_identity():
    f = random_field(periodic(), 1)
    np.testing.assert_array_equal(apply_heat_semigroup(f, 0.0).values, f.values)


def test_heat_rejects_negative_time():
    with pytest.raises(ValueError):
        apply_heat_semigroup(random_field(periodic(), 0), -1e-3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 1), t=st.floats(0, 1))
def test_heat_semigroup_law(seed, s, t):
    f = random_field(SpectralGrid.square(-4, 4, 16, dim=2), seed)
    lhs = apply_heat_semigroup(apply_heat_semigroup(f, s), t).values
    rhs = apply_heat_semigroup(f, s + t).values
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1e-300) + 1e-14


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 5))
def test_heat_contraction(seed, s):
    f = random_field(periodic(32), seed)
    assert norms(apply_heat_semigroup(f, s))[0] <= norms(f)[0] * (1 + 1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 2))
def test_heat_self_adjoint(seed, s):
    grid = periodic(32)
    f, g = random_field(grid, seed), random_field(grid, seed + 1)
    a = inner_product(apply_heat_semigroup(f, s), g)
    b = inner_product(f, apply_heat_semigroup(g, s))
    scale = norms(f)[0] * norms(g)[0]
    assert abs(a - b) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(
    vals=arrays(np.float64, 256, elements=st.floats(0, 10)),
    s=st.floats(0.1, 2.0),
)
def test_heat_preserves_nonnegativity(vals, s):
    # h = 1/8: the discrete kernel is positive once s * k_max^2 is large
    grid = SpectralGrid(((-16.0, 16.0),), (256,))
    out = apply_heat_semigroup(WaveField(grid, vals), s)
    assert out.values.real.min() >= -1e-12 * max(1.0, vals.max())


# -- inner products and norms -------------------------------------------------


def test_inner_product_normalized_constant():
    g = SpectralGrid.square(-8, 8, 32, dim=2)
    c = WaveField.constant(g, 1 / np.sqrt(g.volume))
    assert inner_product(c, c) == pytest.approx(1.0, abs=1e-14)
    assert norms(c)[0] == pytest.approx(1.0, abs=1e-14)


def test_inner_product_imaginary_phase_vanishes():
    f = random_field(periodic(), 3)
    assert abs(inner_product(f * 1j, f)) < 1e-12


def test_inner_product_orthogonal_modes():
    g = periodic(64)
    f = WaveField.from_function(g, lambda x: np.exp(1j * x))
    h = WaveField.from_function(g, lambda x: np.exp(2j * x))
    assert abs(inner_product(f, h)) < 1e-13


def test_inner_product_grid_mismatch():
    with pytest.raises(ValueError):
        inner_product(random_field(periodic(16), 0), random_field(periodic(32), 0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_inner_product_symmetric_and_consistent(seed):
    grid = periodic(16)
    f, g = random_field(grid, seed), random_field(grid, seed + 7)
    assert inner_product(f, g) == pytest.approx(inner_product(g, f), rel=1e-13, abs=1e-13)
    assert inner_product(f, f) == pytest.approx(norms(f)[0] ** 2, rel=1e-13)


def test_norms_zero_and_gaussian():
    assert norms(WaveField.constant(periodic(8), 0.0)) == (0.0, 0.0)
    g = SpectralGrid(((-16.0, 16.0),), (4096,))
    f = WaveField.from_function(g, lambda x: np.exp(-x * x / 2) / np.pi**0.25)
    l2, linf = norms(f)
    assert abs(l2 - 1) < 1e-10
    assert linf == pytest.approx(np.pi**-0.25)


# -- kinetic integral ---------------------------------------------------------


def test_kinetic_constant_is_zero():
    assert kinetic_integral(WaveField.constant(periodic(), 2.0)) == pytest.approx(0.0, abs=1e-13)


def test_kinetic_plane_wave():
    g = periodic()
    f = WaveField.from_function(g, lambda x: np.exp(1j * x)).normalized()
    assert kinetic_integral(f) == pytest.approx(0.5, rel=1e-13)


@pytest.mark.parametrize("k", [1, 3, 7, 20])
def test_kinetic_pure_modes_exact(k):
    g = periodic()
    f = WaveField.from_function(g, lambda x: 0.7 * np.exp(1j * k * x))
    assert kinetic_integral(f) == pytest.approx(k * k / 2 * norms(f)[0] ** 2, rel=1e-13)


def test_kinetic_gaussian():
    g = SpectralGrid(((-16.0, 16.0),), (4096,))
    f = WaveField.from_function(g, lambda x: np.exp(-x * x / 2) / np.pi**0.25)
    assert kinetic_integral(f) == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_kinetic_nonnegative(seed):
    assert kinetic_integral(random_field(SpectralGrid.square(-2, 2, 8, dim=2), seed)) >= 0

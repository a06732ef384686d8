import numpy as np
import pytest

from battarb.cheb import radial_collocation
from battarb.errors import ConfigError

R = 1.25e-5


@pytest.fixture(scope="module")
def disc():
    return radial_collocation(5, R)


def test_requires_three_nodes():
    with pytest.raises(ConfigError):
        radial_collocation(2, R)


def test_nodes_span_radius(disc):
    assert disc.r[0] == 0.0
    assert disc.r[-1] == R
    assert np.all(np.diff(disc.r) > 0)


def test_derivative_of_constant_is_zero(disc):
    out = disc.gradient(np.full(5, 3.14))
    assert np.max(np.abs(out)) < 1e-10 * 3.14 / R
    # equivalent statement: rows of d1 sum to zero
    assert np.max(np.abs(disc.d1.sum(axis=1))) < 1e-10 / R


def test_exact_on_linear_profile(disc):
    a, b = 2.0, 4.0e5
    out = disc.gradient(a + b * disc.r)
    np.testing.assert_allclose(out, b, rtol=1e-10)


def test_exact_on_quadratic_even_with_three_nodes():
    disc3 = radial_collocation(3, R)
    out = disc3.gradient(disc3.r**2)
    np.testing.assert_allclose(out, 2 * disc3.r, rtol=1e-10, atol=1e-10 * R)


def test_exact_up_to_degree_four(disc):
    coeffs = np.array([1.0, -2.0, 3.0, -4.0, 5.0])
    rn = disc.r / R  # normalized to avoid huge powers
    values = sum(c * rn**k for k, c in enumerate(coeffs))
    exact = sum(k * c * rn ** (k - 1) for k, c in enumerate(coeffs) if k > 0) / R
    np.testing.assert_allclose(disc.gradient(values), exact, rtol=1e-9, atol=1e-9 / R)


def test_uniform_concentration_zero_flux_equilibrium(disc):
    c = np.full(5, 2.5e4)
    rhs = disc.diffusion_rhs(c.copy(), 0.0, 1e-14)
    scale = 1e-14 * 2.5e4 / R**2
    assert np.max(np.abs(rhs)) <= 1e-10 * scale


def test_batched_matches_single(disc):
    rng = np.random.default_rng(0)
    c = rng.uniform(1e4, 3e4, size=(7, 5))
    flux = rng.uniform(-1e-4, 1e-4, size=7)
    d = np.full(7, 3e-14)
    batch = disc.diffusion_rhs(c.copy(), flux, d)
    for i in range(7):
        single = disc.diffusion_rhs(c[i].copy(), flux[i], 3e-14)
        np.testing.assert_allclose(batch[i], single, rtol=1e-13)


def test_volume_weights_integrate_polynomials_exactly(disc):
    # integral of r^2 * r^k dr over [0, R] = R^(k+3)/(k+3) for k <= 4
    for k in range(5):
        exact = R ** (k + 3) / (k + 3)
        assert disc.weighted_content(disc.r**k) == pytest.approx(exact, rel=1e-12)


def test_diffusion_conserves_weighted_content_without_flux(disc):
    rng = np.random.default_rng(3)
    c = rng.uniform(1e4, 3e4, size=5)
    content = disc.weighted_content(c)
    rhs = disc.diffusion_rhs(c.copy(), 0.0, 3e-14)
    # d/dt of the content functional is the surface flux term, here zero
    assert abs(disc.weighted_content(rhs)) <= 1e-12 * abs(content) * 3e-14 / R**2 * 1e5

"""Tests for grids, fields and the spectral fractional operators."""

import math

import numpy as np
import pytest
from scipy.special import gamma

from src.modules.spectral_ops import (
    Grid,
    GridField,
    SpectralMultiplier,
    VectorGridField,
    band_limited_field,
    frac_laplacian,
    interpolation_multiplier,
    mu_constant,
    oracle_deviation,
    quadrature_oracle_dsu,
    riesz_divergence,
    riesz_gradient,
    riesz_potential,
    verify_operator_identities,
)
from src.utils.errors import ConfigurationError, DomainError, MeanZeroError, OracleValidityError


def _sine(grid, k=1):
    return GridField.from_function(grid, lambda x: np.sin(k * x))


# -- grids and fields ---------------------------------------------------------------

@pytest.mark.parametrize('d, n, length', [(3, 16, 1.0), (1, 12, 1.0), (1, 4, 1.0), (2, 16, 0.0)])
def test_invalid_grids_are_rejected(d, n, length):
    with pytest.raises(ConfigurationError):
        Grid(d, n, length)


def test_grid_geometry(grid1, grid2):
    assert grid1.axis()[0] == pytest.approx(-math.pi)
    assert grid1.spacing == pytest.approx(2.0 * math.pi / 64)
    assert grid2.wavenumbers().shape == (2, 16, 16)
    half = grid1.central_half()
    assert half.sum() == 31
    assert np.all(np.abs(grid1.axis()[half]) < 0.5 * math.pi)


def test_fields_are_immutable_and_grid_checked(grid1, grid2):
    u = _sine(grid1)
    with pytest.raises(ValueError):
        u.samples[0] = 1.0
    with pytest.raises(ConfigurationError):
        u + GridField.zeros(Grid(1, 32, 2.0 * math.pi))
    with pytest.raises(DomainError):
        GridField(grid1, np.full(grid1.shape, np.nan))
    with pytest.raises(ConfigurationError):
        VectorGridField.from_components([GridField.zeros(grid2)])


def test_band_limited_field_is_normalised_and_seeded(grid1):
    u = band_limited_field(grid1, seed=3)
    assert u.max_abs() == pytest.approx(1.0)
    assert abs(u.mean()) < 1e-14
    np.testing.assert_array_equal(u.samples, band_limited_field(grid1, seed=3).samples)
    assert not np.array_equal(u.samples, band_limited_field(grid1, seed=4).samples)


# -- normalising constant -----------------------------------------------------------

@pytest.mark.parametrize('d, s', [(1, 0.5), (2, 0.3), (3, -0.5)])
def test_mu_constant_matches_gamma_formula(d, s):
    expected = 2.0 ** s * gamma((d + s + 1) / 2) / (math.pi ** (d / 2) * gamma((1 - s) / 2))
    assert mu_constant(d, s) == pytest.approx(expected, rel=1e-12)


def test_mu_constant_endpoint_and_domain():
    assert mu_constant(2, 1.0) == 0.0
    with pytest.raises(DomainError):
        mu_constant(1, 1.5)
    with pytest.raises(DomainError):
        mu_constant(0, 0.5)


# -- multipliers ---------------------------------------------------------------------

def test_multiplier_domains():
    with pytest.raises(DomainError):
        SpectralMultiplier('riesz-gradient', s=1.5)
    with pytest.raises(DomainError):
        SpectralMultiplier('frac-laplacian', sigma=0.0)
    with pytest.raises(DomainError):
        SpectralMultiplier('interpolation-symbol', s=0.3, sigma=0.5)
    with pytest.raises(ConfigurationError):
        SpectralMultiplier('hilbert')


def test_rank_mismatch_is_a_configuration_error(grid1):
    with pytest.raises(ConfigurationError):
        riesz_divergence(_sine(grid1), 0.5)


def test_eigenfunctions(grid1):
    """sin(kx) on [-π, π) has |ξ| = k."""
    u = _sine(grid1, 2)
    np.testing.assert_allclose(frac_laplacian(u, 0.3).samples, 2.0 ** 0.6 * u.samples, atol=1e-13)
    grad = riesz_gradient(u, 1.0).samples[0]
    np.testing.assert_allclose(grad, 2.0 * np.cos(2.0 * grid1.axis()), atol=1e-12)
    np.testing.assert_allclose(riesz_potential(u, 0.5).samples, 2.0 ** -0.5 * u.samples, atol=1e-13)
    symbol = 2.0 ** 0.5 / (1.0 + 2.0 ** 0.75)
    np.testing.assert_allclose(interpolation_multiplier(u, 0.75, 0.5).samples, symbol * u.samples, atol=1e-13)


def test_riesz_potential_rejects_a_mean(grid1):
    u = GridField.from_function(grid1, lambda x: 1.0 + np.sin(x))
    with pytest.raises(MeanZeroError):
        riesz_potential(u, 0.5)
    preserved = riesz_potential(u, 0.5, zero_mode='preserve')
    assert preserved.mean() == pytest.approx(1.0)


@pytest.mark.parametrize('fixture', ['grid1', 'grid2'])
def test_operator_identities_hold(fixture, request):
    grid = request.getfixturevalue(fixture)
    records = verify_operator_identities(grid, seed=7)
    identities = {r['identity'] for r in records}
    assert {'fractional-laplacian', 'fundamental-theorem', 'semigroup', 'riesz-factorisation',
            'integration-by-parts', 'linearity', 'endpoint-one', 'endpoint-zero', 'reality'} <= identities
    failing = [r for r in records if not r['pass']]
    assert not failing, failing


def test_integration_by_parts_sign(grid2):
    u = band_limited_field(grid2, seed=1, max_mode=3)
    psi = VectorGridField.from_components([band_limited_field(grid2, seed=2 + j, max_mode=3) for j in range(2)])
    lhs = riesz_gradient(u, 0.4).inner(psi)
    rhs = -u.inner(riesz_divergence(psi, 0.4))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


# -- quadrature oracle -----------------------------------------------------------------

def _odd_bump(grid):
    x = grid.axis()
    radius = grid.length / 8.0
    inside = np.abs(x) < radius
    samples = np.zeros(grid.shape)
    samples[inside] = x[inside] * np.exp(1.0 - 1.0 / (1.0 - (x[inside] / radius) ** 2))
    return GridField(grid, samples)


def test_oracle_agrees_with_spectral_path():
    grid = Grid(1, 256, 2.0 * math.pi)
    assert oracle_deviation(_odd_bump(grid), 0.5) < 2e-2


@pytest.mark.parametrize('s', [0.3, 0.5, 0.7])
def test_oracle_gap_shrinks_under_refinement(s):
    deviations = [oracle_deviation(_odd_bump(Grid(1, n, 2.0 * math.pi)), s) for n in (64, 128, 256)]
    assert deviations[1] < deviations[0]
    assert deviations[2] < deviations[1]


def test_oracle_validity_limits(grid1):
    with pytest.raises(OracleValidityError):
        quadrature_oracle_dsu(_odd_bump(Grid(1, 2048, 2.0 * math.pi)), 0.5)
    with pytest.raises(OracleValidityError):
        quadrature_oracle_dsu(_sine(grid1), 0.5)
    with pytest.raises(DomainError):
        quadrature_oracle_dsu(_odd_bump(grid1), 1.0)

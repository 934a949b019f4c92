"""Tests for Φ-function evaluation, audits and the Sobolev companion."""

import numpy as np
import pytest

from src.modules.phi_functions import (
    CALCULUS_TOLERANCES,
    GrowthExponents,
    PhiFunction,
    SamplingPlan,
    audit_family,
    build_sobolev_companion,
    calculus_report,
    check_condition,
    conjugate_phi,
    eval_density,
    eval_phi,
    left_inverse,
)
from src.utils.errors import ConfigurationError, DomainError


# -- construction ---------------------------------------------------------------

@pytest.mark.parametrize('p, q', [(1.0, 2.0), (2.0, 1.5), (2.0, np.inf)])
def test_growth_exponents_reject_invalid_pairs(p, q):
    with pytest.raises(DomainError):
        GrowthExponents(p, q)


def test_constant_parameter_fields_collapse_to_scalars(grid1):
    phi = PhiFunction.variable_exponent(np.full(grid1.shape, 2.5))
    assert phi.param_shape == ()
    assert phi.growth == GrowthExponents(2.5, 2.5)


def test_negative_double_phase_weight_is_rejected():
    with pytest.raises(DomainError):
        PhiFunction.double_phase(2.0, 3.0, -0.1)


# -- pointwise evaluation ----------------------------------------------------------

def test_power_family_values():
    phi = PhiFunction.power(3.0)
    assert eval_phi(phi, None, 0.0) == 0.0
    assert eval_phi(phi, None, 2.0) == pytest.approx(8.0)
    assert eval_density(phi, None, 2.0) == pytest.approx(6.0)


def test_eval_phi_rejects_negative_arguments():
    phi = PhiFunction.power(2.0)
    with pytest.raises(DomainError):
        eval_phi(phi, None, -1.0)
    with pytest.raises(DomainError):
        eval_density(phi, None, 0.0)
    with pytest.raises(DomainError):
        left_inverse(phi, None, -1.0)


def test_quadratic_conjugate_closed_form():
    """For A(ℓ) = ℓ², A′(ℓ) = ℓ²/4."""
    phi = PhiFunction.power(2.0)
    assert conjugate_phi(phi, None, 2.0) == pytest.approx(1.0, rel=1e-12)
    assert conjugate_phi(phi, None, 0.0) == 0.0


def test_numeric_conjugate_matches_closed_form():
    """A double-phase function with zero weight is ℓ² again, through the bisection path."""
    phi = PhiFunction.double_phase(2.0, 3.0, 0.0)
    assert conjugate_phi(phi, None, 2.0) == pytest.approx(1.0, rel=1e-8)
    assert float(phi.conjugate(2.0)) == pytest.approx(1.0, rel=1e-10)


def test_left_inverse_solves_the_equation():
    phi = PhiFunction.double_phase(2.0, 3.0, 1.0)
    assert left_inverse(phi, None, 2.0) == pytest.approx(1.0, abs=1e-9)
    assert left_inverse(PhiFunction.power(2.0), None, 4.0) == pytest.approx(2.0)
    assert left_inverse(phi, None, 0.0) == 0.0


def test_vectorized_inverse_of_log_perturbed_family():
    phi = PhiFunction.log_perturbed(2.0)
    t = np.array([0.0, 1e-6, 1.0, 100.0])
    ell = phi.inverse(t)
    assert ell[0] == 0.0
    np.testing.assert_allclose(phi.value(ell[1:]), t[1:], rtol=1e-10)


def test_variable_exponent_evaluates_pointwise(grid1):
    x = grid1.coordinates()[0]
    p = 2.0 + 0.5 * np.cos(x)
    phi = PhiFunction.variable_exponent(p)
    assert phi.param_shape == grid1.shape
    assert eval_phi(phi, 5, 2.0) == pytest.approx(2.0 ** p[5])
    np.testing.assert_allclose(phi.value(2.0), 2.0 ** p)


# -- condition audits ------------------------------------------------------------------

def test_cubic_satisfies_inc2_but_not_dec2():
    phi = PhiFunction.power(3.0)
    plan = SamplingPlan.for_phi(phi, exponent=2.0)
    assert check_condition(phi, 'inc', plan).passed

    report = check_condition(phi, 'dec', plan)
    assert not report.passed
    assert report.witness is not None
    assert report.witness['violation'] > 0.0
    assert report.to_record()['condition'] == 'dec'


@pytest.mark.parametrize('builder', [
    lambda g: PhiFunction.power(2.5),
    lambda g: PhiFunction.variable_exponent(2.0 + 0.5 * np.cos(g.coordinates()[0])),
    lambda g: PhiFunction.log_perturbed(1.5 + 0.5 * np.cos(g.coordinates()[0]) ** 2),
    lambda g: PhiFunction.double_phase(2.0, 4.0, 0.5 * (1.0 + np.sin(g.coordinates()[0]))),
])
def test_families_pass_their_declared_growth(grid1, builder):
    phi = builder(grid1)
    reports = audit_family(phi)
    assert [r.condition for r in reports] == ['inc', 'dec', 'a0']
    assert all(r.passed for r in reports), [r.to_record() for r in reports if not r.passed]


def test_a0_beta_for_a_scaled_quadratic():
    """4β² ≤ 1 ≤ 4/β² holds exactly for β ≤ 1/2."""
    phi = PhiFunction.power(2.0, scale=4.0)
    report = check_condition(phi, 'a0', SamplingPlan.for_phi(phi))
    assert report.passed
    assert report.detail['beta'] == pytest.approx(0.5, abs=1e-9)
    assert check_condition(PhiFunction.power(2.0), 'a0', SamplingPlan()).detail['beta'] == 1.0


def test_double_phase_structure_conditions(double_phase):
    plan = SamplingPlan.for_phi(double_phase)
    for condition in ('hypothesis-on-a', 'pointwise-bounds', 'delta2', 'definition', 'a0'):
        assert check_condition(double_phase, condition, plan).passed, condition


def test_definition_detects_a_concave_function():
    phi = PhiFunction.custom(lambda x, ell: np.sqrt(ell), GrowthExponents(1.5, 2.0), name='sqrt')
    report = check_condition(phi, 'definition', SamplingPlan())
    assert not report.passed
    assert report.witness['violation'] > 0.0


def test_a1_and_a2_are_labelled_sampled():
    phi = PhiFunction.power(2.0)
    plan = SamplingPlan(balls=(((None,), 0.5),), points=(None,), h=0.0, sigma=1.0)
    for condition in ('a1', 'a2'):
        report = check_condition(phi, condition, plan)
        assert report.passed
        assert report.label == 'sampled'
        assert report.detail['beta'] == pytest.approx(1.0)


def test_sampling_plan_errors():
    phi = PhiFunction.power(2.0)
    with pytest.raises(ConfigurationError):
        check_condition(phi, 'a1', SamplingPlan())
    with pytest.raises(ConfigurationError):
        check_condition(phi, 'inc', SamplingPlan(x_samples=()))
    with pytest.raises(ConfigurationError):
        check_condition(phi, 'convexity', SamplingPlan())


# -- calculus audits --------------------------------------------------------------------

@pytest.mark.parametrize('phi', [
    PhiFunction.power(2.5),
    PhiFunction.double_phase(2.0, 3.0, 1.0),
    PhiFunction.log_perturbed(2.0),
])
def test_calculus_identities(phi):
    gaps = calculus_report(phi)
    for name, gap in gaps.items():
        assert gap <= CALCULUS_TOLERANCES[name], (name, gap)


# -- Sobolev companion -------------------------------------------------------------------

def test_companion_of_a_power_is_the_sobolev_power():
    """A = ℓ², γ = 1/4: 1/p* = 1/2 − 1/4, so B = ℓ⁴."""
    companion = build_sobolev_companion(PhiFunction.power(2.0), 0.25)
    assert companion.family == 'tabulated'
    assert companion.growth.p == pytest.approx(4.0)
    assert companion.growth.q == pytest.approx(4.0)
    ell = np.array([1e-3, 0.5, 2.0, 30.0])
    np.testing.assert_allclose(companion.value(ell), ell ** 4, rtol=1e-9)
    assert float(companion.inverse(16.0)) == pytest.approx(2.0, rel=1e-12)


def test_companion_keeps_spatial_dependence(grid1):
    p = 2.0 + 0.25 * np.cos(grid1.coordinates()[0])
    companion = build_sobolev_companion(PhiFunction.variable_exponent(p), 0.2)
    assert companion.param_shape == grid1.shape
    expected = 3.0 ** (1.0 / (1.0 / p[7] - 0.2))
    assert float(companion.value(3.0, 7)) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize('gamma', [0.0, 0.5, 1.0])
def test_companion_rejects_out_of_range_gamma(gamma):
    with pytest.raises(DomainError):
        build_sobolev_companion(PhiFunction.power(2.0), gamma)

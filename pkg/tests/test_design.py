import math

import numpy as np
import pytest
from scipy import stats

from avstats.design import (
    ExpFamilySpec,
    PriorSpec,
    TruncationSet,
    asymptotic_power_constants,
    expected_runtime_leading,
    fixed_horizon_sample_size,
    msprt_truncation_horizon,
    normal_unit_variance_family,
    optimal_mixture_general,
    optimal_tau_normal,
)
from avstats.errors import InvalidInputError


def _unit_b_truncation():
    # boundary_delta = sqrt(2 log(1/alpha) / n) = 1 when alpha = e^-2, n = 4
    return TruncationSet(alpha=math.exp(-2.0), horizon_n=4)


class TestOptimalTau:
    def test_unit_boundary_hand_value(self):
        # b = 1: Phi(-1) / (phi(1) - Phi(-1))
        prior = PriorSpec(variance=1.0)
        expected = stats.norm.cdf(-1.0) / (stats.norm.pdf(1.0) - stats.norm.cdf(-1.0))
        got = optimal_tau_normal(prior, _unit_b_truncation())
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(1.90427, abs=1e-5)

    def test_scale_invariance(self):
        # tau_sq* scales with prior variance at fixed b = delta / sigma_G
        base = optimal_tau_normal(PriorSpec(variance=1.0), _unit_b_truncation())
        # delta = 2 with prior sd 2 gives b = 1 again: alpha=e^-2, n=1
        scaled = optimal_tau_normal(PriorSpec(variance=4.0), TruncationSet(alpha=math.exp(-2.0), horizon_n=1))
        assert scaled == pytest.approx(4.0 * base, rel=1e-12)

    def test_monotone_in_horizon(self):
        # longer horizons shrink the boundary effect b, and tau_sq* grows
        # like b^2 for large b, so it must fall as the horizon stretches
        prior = PriorSpec(variance=1.0)
        values = [
            optimal_tau_normal(prior, TruncationSet(alpha=0.05, horizon_n=n))
            for n in (10, 100, 1000, 10000)
        ]
        assert values == sorted(values, reverse=True)
        assert all(v > 0 for v in values)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            PriorSpec(variance=0.0)
        with pytest.raises(InvalidInputError):
            TruncationSet(alpha=1.5, horizon_n=10)
        with pytest.raises(InvalidInputError):
            TruncationSet(alpha=0.05, horizon_n=0)

    def test_truncation_formulas(self):
        trunc = TruncationSet(alpha=0.05, horizon_n=200)
        assert trunc.kl_threshold == pytest.approx(math.log(20.0) / 200.0, rel=1e-14)
        assert trunc.boundary_delta == pytest.approx(math.sqrt(2.0 * math.log(20.0) / 200.0), rel=1e-14)


class TestGeneralOptimizer:
    def test_recovers_closed_form_for_normal_prior(self):
        prior_sd = 1.0
        trunc = _unit_b_truncation()
        closed = optimal_tau_normal(PriorSpec(variance=prior_sd**2), trunc)
        grid = list(np.geomspace(0.05, 40.0, 60))
        got = optimal_mixture_general(
            prior=lambda t: stats.norm.pdf(t, scale=prior_sd),
            family=normal_unit_variance_family(),
            mixture_density=lambda gamma, t: stats.norm.pdf(t, scale=math.sqrt(gamma)),
            trunc=trunc,
            gamma_grid=grid,
            prior_sd=prior_sd,
        )
        assert got == pytest.approx(closed, rel=2e-3)

    def test_atom_prior_peaks_mixture_at_atom(self):
        # single atom at theta=1: the normal mixture density at 1 is maximized
        # by gamma = 1, so the optimizer should land there
        grid = list(np.geomspace(0.1, 10.0, 41))
        got = optimal_mixture_general(
            prior=[(1.0, 1.0)],
            family=normal_unit_variance_family(),
            mixture_density=lambda gamma, t: stats.norm.pdf(t, scale=math.sqrt(gamma)),
            trunc=TruncationSet(alpha=0.05, horizon_n=100_000),
            gamma_grid=grid,
        )
        assert got == pytest.approx(1.0, rel=1e-4)

    def test_undetectable_atoms_are_ignored(self):
        # the tiny atom sits below the KL threshold so only theta=2 matters
        trunc = TruncationSet(alpha=0.05, horizon_n=50)  # threshold ~ 0.0599
        grid = list(np.geomspace(0.2, 20.0, 41))
        got = optimal_mixture_general(
            prior=[(0.01, 5.0), (2.0, 1.0)],
            family=normal_unit_variance_family(),
            mixture_density=lambda gamma, t: stats.norm.pdf(t, scale=math.sqrt(gamma)),
            trunc=trunc,
            gamma_grid=grid,
        )
        assert got == pytest.approx(4.0, rel=1e-3)  # maximizes density at theta=2

    def test_grid_validation(self):
        family = normal_unit_variance_family()
        density = lambda gamma, t: stats.norm.pdf(t, scale=math.sqrt(gamma))
        trunc = TruncationSet(alpha=0.05, horizon_n=100)
        with pytest.raises(InvalidInputError):
            optimal_mixture_general([(1.0, 1.0)], family, density, trunc, gamma_grid=[])
        with pytest.raises(InvalidInputError):
            optimal_mixture_general([(1.0, 1.0)], family, density, trunc, gamma_grid=[2.0, 1.0])
        with pytest.raises(InvalidInputError):
            optimal_mixture_general(
                lambda t: stats.norm.pdf(t), family, density, trunc, gamma_grid=[0.5, 1.0]
            )  # density prior without prior_sd
        with pytest.raises(InvalidInputError):
            optimal_mixture_general([(1.0, -1.0)], family, density, trunc, gamma_grid=[0.5, 1.0])


class TestSampleSizeAndHorizon:
    def test_classical_sample_size(self):
        # mde 0.5, alpha 0.05, power 0.8, unit variance -> 32
        assert fixed_horizon_sample_size(0.5, 0.05, 0.2, 1.0) == 32

    def test_sample_size_scales(self):
        n1 = fixed_horizon_sample_size(0.5, 0.05, 0.2, 1.0)
        n2 = fixed_horizon_sample_size(0.25, 0.05, 0.2, 1.0)
        assert 4 * n1 - 4 < n2 <= 4 * n1  # quadruples up to ceiling

    def test_sample_size_validation(self):
        with pytest.raises(InvalidInputError):
            fixed_horizon_sample_size(0.0, 0.05, 0.2, 1.0)
        with pytest.raises(InvalidInputError):
            fixed_horizon_sample_size(0.5, 0.05, 0.2, -1.0)

    def test_power_constants_against_dense_trapezoid(self):
        # independent evaluation of both integrals on a dense uniform grid
        for alpha in (0.01, 0.05, 0.2):
            c_f, c_s = asymptotic_power_constants(alpha)
            x = np.linspace(0.0, 1.0, 400_001)
            log_inv = math.log(1.0 / alpha)
            tail = lambda z: 0.5 * math.erfc(z / math.sqrt(2.0))
            ref_f = np.trapezoid([tail(math.sqrt(log_inv) * (xi - 1.0)) for xi in x], x)
            ref_s = np.trapezoid([tail(math.sqrt(log_inv / 2.0) * (xi * xi - 1.0)) for xi in x], x)
            assert c_f == pytest.approx(ref_f, abs=1e-8)
            assert c_s == pytest.approx(ref_s, abs=1e-8)

    def test_power_constants_decreasing_in_alpha(self):
        values = [asymptotic_power_constants(a) for a in (0.01, 0.05, 0.2, 0.5)]
        fs = [v[0] for v in values]
        ss = [v[1] for v in values]
        assert fs == sorted(fs, reverse=True)
        assert ss == sorted(ss, reverse=True)
        for c_f, c_s in values:
            assert 0.5 < c_f < 1.0
            assert 0.5 < c_s < 1.0

    def test_known_constant_value(self):
        c_f, _ = asymptotic_power_constants(0.05)
        assert c_f == pytest.approx(0.7793, abs=5e-4)

    def test_truncation_horizon(self):
        c_f, c_s = asymptotic_power_constants(0.05)
        n = msprt_truncation_horizon(1000, 0.05)
        assert n == math.ceil((c_s / c_f) ** 2 * 1000)
        assert msprt_truncation_horizon(1, 0.05) >= 1


class TestExpectedRuntime:
    def test_unit_effect_hand_value(self):
        # 2 log 20 + log log 20
        expected = 2.0 * math.log(20.0) + math.log(math.log(20.0))
        assert expected_runtime_leading(1.0, 0.05) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(7.0886, abs=5e-4)

    def test_inverse_square_scaling(self):
        assert expected_runtime_leading(0.5, 0.05) == pytest.approx(
            4.0 * expected_runtime_leading(1.0, 0.05), rel=1e-12
        )

    def test_domain(self):
        with pytest.raises(InvalidInputError):
            expected_runtime_leading(0.0, 0.05)
        with pytest.raises(InvalidInputError):
            expected_runtime_leading(1.0, 0.5)  # needs alpha < 1/e


def test_exp_family_spec_is_plain_container():
    fam = ExpFamilySpec(log_partition=lambda t: t, kl_to_null=lambda t: abs(t))
    assert fam.kl_to_null(-2.0) == 2.0

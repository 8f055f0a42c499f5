import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avstats import engine
from avstats.engine import (
    AvState,
    BernoulliTwoStream,
    Interval,
    MixtureSpec,
    NormalKnownVariance,
    av_ci_half_width,
    av_ci_interval,
    chance_to_beat,
    decide,
    fixed_horizon_p_normal,
    initial_state,
    log_mixture_lr_normal,
    log_mixture_lr_normal_path,
    log_mixture_lr_quadrature,
    mixture_lr_normal,
    mixture_lr_quadrature,
    p_value_path,
    pvalue_from_ci_family,
    update_state,
)
from avstats.errors import InvalidInputError, InvalidStateError


class TestMixtureLr:
    def test_null_effect_unit_everything(self):
        # sqrt(v / (v + tau^2)) with v = tau^2 = 1
        m = MixtureSpec(tau_sq=1.0)
        assert mixture_lr_normal(0.0, 1.0, m) == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_effect_two(self):
        m = MixtureSpec(tau_sq=1.0)
        expected = math.sqrt(0.5) * math.e  # exp(4 / (2*1*2))
        assert mixture_lr_normal(2.0, 1.0, m) == pytest.approx(expected, rel=1e-12)

    def test_point_mass_mixture_is_unit(self):
        m = MixtureSpec(tau_sq=0.0)
        for effect in (-3.0, 0.0, 0.5, 100.0):
            assert mixture_lr_normal(effect, 2.0, m) == 1.0
            assert log_mixture_lr_normal(effect, 2.0, m) == 0.0

    def test_lower_bound(self):
        m = MixtureSpec(tau_sq=0.7)
        for effect in (-2.0, -0.1, 0.0, 1.3):
            value = mixture_lr_normal(effect, 0.4, m)
            assert value >= math.sqrt(0.4 / 1.1) - 1e-15

    def test_center_shifts_null(self):
        m = MixtureSpec(tau_sq=1.0, center=2.0)
        assert mixture_lr_normal(2.0, 1.0, m) == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_nonfinite_inputs_rejected(self):
        m = MixtureSpec(tau_sq=1.0)
        with pytest.raises(InvalidInputError):
            mixture_lr_normal(math.nan, 1.0, m)
        with pytest.raises(InvalidInputError):
            mixture_lr_normal(0.0, math.inf, m)
        with pytest.raises(InvalidInputError):
            mixture_lr_normal(0.0, 0.0, m)
        with pytest.raises(InvalidInputError):
            MixtureSpec(tau_sq=-1.0)

    def test_overflow_goes_to_inf_not_error(self):
        m = MixtureSpec(tau_sq=1.0)
        assert mixture_lr_normal(1e6, 1e-6, m) == math.inf
        assert math.isfinite(log_mixture_lr_normal(1e6, 1e-6, m))


class TestQuadratureOracle:
    """The oracle locates the integrand peak numerically and never reuses the
    closed form's completed-square algebra, so agreement is evidence the
    closed form is right."""

    def test_spec_examples(self):
        m = MixtureSpec(tau_sq=1.0)
        assert mixture_lr_quadrature(0.0, 1.0, m) == pytest.approx(math.sqrt(0.5), abs=1e-6)
        assert mixture_lr_quadrature(2.0, 1.0, m) == pytest.approx(
            math.sqrt(0.5) * math.e, abs=1e-6
        )
        assert mixture_lr_quadrature(5.0, 1.0, MixtureSpec(tau_sq=0.0)) == 1.0

    def test_agreement_small_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            effect = float(rng.normal(0, 3))
            variance = float(np.exp(rng.uniform(-6, 3)))
            tau_sq = float(np.exp(rng.uniform(-6, 3)))
            a = log_mixture_lr_normal(effect, variance, MixtureSpec(tau_sq=tau_sq))
            b = log_mixture_lr_quadrature(effect, variance, MixtureSpec(tau_sq=tau_sq))
            # compare in log space; expm1 of the log difference is the relative error
            assert abs(math.expm1(b - a)) < 1e-8

    def test_rel_tol_validation(self):
        m = MixtureSpec(tau_sq=1.0)
        with pytest.raises(InvalidInputError):
            log_mixture_lr_quadrature(0.0, 1.0, m, rel_tol=0.0)
        with pytest.raises(InvalidInputError):
            log_mixture_lr_quadrature(0.0, 1.0, m, rel_tol=1e-2)


class TestVectorPaths:
    def test_path_matches_scalar(self):
        rng = np.random.default_rng(3)
        effects = rng.normal(size=40)
        variances = 1.0 / np.arange(1, 41)
        m = MixtureSpec(tau_sq=0.6)
        path = log_mixture_lr_normal_path(effects, variances, m)
        for i in range(40):
            scalar = log_mixture_lr_normal(float(effects[i]), float(variances[i]), m)
            assert path[i] == pytest.approx(scalar, rel=1e-13, abs=1e-13)

    def test_p_value_path_is_running_min(self):
        log_lr = np.array([0.0, 1.0, 0.5, 3.0, 2.0])
        p = p_value_path(log_lr)
        expected = np.minimum.accumulate(np.minimum(np.exp(-log_lr), 1.0))
        assert np.allclose(p, expected)
        assert (np.diff(p) <= 0).all()

    def test_p_value_path_huge_log_lr_underflows_to_zero(self):
        p = p_value_path(np.array([0.0, 2000.0]))
        assert p[1] == 0.0


class TestConfidenceInterval:
    def test_half_width_example(self):
        # alpha=0.05, v=1, tau^2=1 -> sqrt(4 ln(20 sqrt(2)))
        expected = math.sqrt(4.0 * math.log(20.0 * math.sqrt(2.0)))
        assert av_ci_half_width(1.0, 1.0, 0.05) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(3.6564, abs=5e-4)

    def test_width_positive_even_for_alpha_near_one(self):
        w = av_ci_half_width(1.0, 1.0, 0.999999)
        assert w > 0

    def test_boundary_duality_exact(self):
        # at either endpoint the likelihood ratio against that null is 1/alpha
        m = MixtureSpec(tau_sq=0.8)
        effect, variance, alpha = 0.37, 0.05, 0.07
        interval = av_ci_interval(effect, variance, m, alpha)
        for endpoint in (interval.lo, interval.hi):
            lr = mixture_lr_normal(effect, variance, MixtureSpec(tau_sq=0.8, center=endpoint))
            assert lr == pytest.approx(1.0 / alpha, rel=1e-10)

    def test_root_finding_cross_check(self):
        from scipy.optimize import brentq

        m = MixtureSpec(tau_sq=1.0)
        alpha = 0.05

        def excess(theta0):
            return log_mixture_lr_normal(0.0, 1.0, MixtureSpec(tau_sq=1.0, center=theta0)) - math.log(
                1.0 / alpha
            )

        root = brentq(excess, 0.1, 20.0)
        assert av_ci_half_width(1.0, 1.0, alpha) == pytest.approx(root, rel=1e-9)

    def test_tau_zero_unsupported(self):
        with pytest.raises(InvalidInputError):
            av_ci_interval(0.0, 1.0, MixtureSpec(tau_sq=0.0), 0.05)

    def test_interval_semantics(self):
        iv = Interval(-1.0, 1.0)
        assert iv.contains(0.0)
        assert not iv.contains(1.0)  # open at endpoints, matching strict LR duality
        assert not iv.contains(-1.0)
        assert Interval(2.0, 1.0).is_empty
        joined = Interval(0.0, 3.0).intersect(Interval(1.0, 5.0))
        assert (joined.lo, joined.hi) == (1.0, 3.0)


class TestUpdateState:
    def test_empty_batch_identity(self):
        state = initial_state()
        updated = update_state(state, [], BernoulliTwoStream(), MixtureSpec(tau_sq=1.0))
        assert updated is state

    def test_degenerate_variance_freezes_inference(self):
        state = initial_state()
        batch = [("control", 0.0)] * 5 + [("treatment", 0.0)] * 5
        updated = update_state(state, batch, BernoulliTwoStream(), MixtureSpec(tau_sq=1.0))
        assert updated.p_value == 1.0
        assert updated.stats.total == 10
        assert updated.updated_at == 10
        assert all(iv.lo == -math.inf and iv.hi == math.inf for iv in updated.ci_by_level.values())

    def test_normal_update_example(self):
        # pooled mean 0.5 over 100 obs, sigma^2=1, tau^2=1:
        # log LR = 0.5 ln(0.01/1.01) + 0.25/(2*0.01*1.01), p = 1/LR < 1e-4
        state = initial_state()
        batch = [("control", 0.5)] * 50 + [("treatment", 0.5)] * 50
        updated = update_state(state, batch, NormalKnownVariance(sigma_sq=1.0), MixtureSpec(tau_sq=1.0))
        expected_log = 0.5 * math.log(0.01 / 1.01) + 0.25 / (2 * 0.01 * 1.01)
        assert updated.log_lambda == pytest.approx(expected_log, rel=1e-12)
        assert updated.p_value == pytest.approx(math.exp(-expected_log), rel=1e-12)
        assert updated.p_value < 1e-4

    def test_bernoulli_rejects_nonbinary(self):
        state = initial_state()
        with pytest.raises(InvalidInputError):
            update_state(state, [("control", 0.5)], BernoulliTwoStream(), MixtureSpec(tau_sq=1.0))

    def test_bad_tag_rejected_atomically(self):
        state = initial_state()
        with pytest.raises(InvalidInputError):
            update_state(
                state,
                [("control", 1.0), ("both", 0.0)],
                BernoulliTwoStream(),
                MixtureSpec(tau_sq=1.0),
            )
        assert state.stats.total == 0  # untouched

    def test_monotone_p_and_nested_cis(self):
        rng = np.random.default_rng(11)
        state = initial_state()
        model = BernoulliTwoStream()
        mixture = MixtureSpec(tau_sq=0.5)
        prev = state
        for _ in range(40):
            batch = [
                ("control" if rng.random() < 0.5 else "treatment", float(rng.random() < 0.4))
                for _ in range(5)
            ]
            state = update_state(state, batch, model, mixture)
            assert state.p_value <= prev.p_value + 1e-15
            for level, iv in state.ci_by_level.items():
                assert iv.lo >= prev.ci_by_level[level].lo - 1e-15
                assert iv.hi <= prev.ci_by_level[level].hi + 1e-15
            prev = state

    def test_p_equals_min_inverse_lambda(self):
        rng = np.random.default_rng(23)
        state = initial_state()
        model = NormalKnownVariance(sigma_sq=1.0)
        mixture = MixtureSpec(tau_sq=1.0)
        log_lambdas = []
        for _ in range(60):
            batch = [("control", float(rng.normal(0.3, 1.0)))]
            state = update_state(state, batch, model, mixture)
            log_lambdas.append(state.log_lambda)
        expected = min(1.0, min(math.exp(-ll) for ll in log_lambdas))
        assert state.p_value == pytest.approx(expected, rel=1e-12)

    def test_tau_zero_keeps_cis_full(self):
        state = initial_state()
        batch = [("control", 1.0), ("control", 0.0), ("treatment", 1.0), ("treatment", 0.0)]
        updated = update_state(state, batch, BernoulliTwoStream(), MixtureSpec(tau_sq=0.0))
        assert updated.p_value == 1.0  # LR identically 1
        assert all(iv.hi == math.inf for iv in updated.ci_by_level.values())

    def test_empty_intersection_is_flagged_not_error(self):
        # two wildly different effect estimates at tight variance force an
        # empty running intersection; that is a legitimate flagged state
        state = initial_state(levels=(0.9,))
        model = NormalKnownVariance(sigma_sq=0.0001)
        mixture = MixtureSpec(tau_sq=10.0)
        state = update_state(state, [("control", 100.0)] * 50, model, mixture)
        state = update_state(state, [("control", -100.0)] * 5000, model, mixture)
        assert state.ci_by_level[0.9].is_empty


class TestDualityOnGrid:
    def test_ci_membership_matches_lr_crossing(self):
        # independent reconstruction: recompute per-step effect and variance
        # from raw data, then compare CI membership with the LR trajectory
        rng = np.random.default_rng(5)
        data = rng.normal(0.2, 1.0, size=80)
        mixture_var = 0.9
        alpha_grid = (0.1, 0.05, 0.01)
        theta_grid = np.linspace(-1.5, 2.0, 29)

        state = initial_state(levels=tuple(1 - a for a in alpha_grid))
        model = NormalKnownVariance(sigma_sq=1.0)
        states = []
        for value in data:
            state = update_state(state, [("control", float(value))], model, MixtureSpec(tau_sq=mixture_var))
            states.append(state)

        running_mean = np.cumsum(data) / np.arange(1, 81)
        for alpha in alpha_grid:
            for theta0 in theta_grid:
                log_lrs = [
                    log_mixture_lr_normal(
                        float(running_mean[k]),
                        1.0 / (k + 1),
                        MixtureSpec(tau_sq=mixture_var, center=float(theta0)),
                    )
                    for k in range(80)
                ]
                for n in (9, 39, 79):
                    crossed = max(log_lrs[: n + 1]) >= math.log(1.0 / alpha)
                    inside = states[n].ci_by_level[1 - alpha].contains(float(theta0))
                    assert inside == (not crossed)


class TestDecision:
    def test_first_crossing(self):
        outcome = decide([1.0, 0.5, 0.04, 0.04], alpha=0.05)
        assert outcome.stopped_at == 3
        assert outcome.rejected

    def test_never_stopped(self):
        outcome = decide([1.0, 1.0, 1.0], alpha=0.05)
        assert outcome.stopped_at is None
        assert not outcome.rejected

    def test_boundary_inclusive(self):
        assert decide([1.0, 0.5, 0.04, 0.04], alpha=0.04).stopped_at == 3

    def test_accepts_states(self):
        s = initial_state()
        assert decide([s], alpha=0.5).stopped_at is None

    def test_chance_to_beat(self):
        assert chance_to_beat(1.0) == 0.0
        assert chance_to_beat(0.0) == 1.0
        assert chance_to_beat(0.25) == 0.75


class TestPvalueFromCiFamily:
    def _family(self, containing: dict) -> dict:
        # build intervals around 0 that contain theta0=0 iff requested
        return {
            level: Interval(-1.0, 1.0) if inside else Interval(2.0, 3.0)
            for level, inside in containing.items()
        }

    def test_inside_all_levels(self):
        family = self._family({0.9: True, 0.95: True, 0.99: True})
        assert pvalue_from_ci_family(family, 0.0) == pytest.approx(0.1)

    def test_outside_all_levels(self):
        family = self._family({0.9: False, 0.95: False, 0.99: False})
        assert pvalue_from_ci_family(family, 0.0) == 1.0

    def test_partial_containment(self):
        # contained only at 0.95 and 0.99 -> p = 0.05
        family = self._family({0.9: False, 0.95: True, 0.99: True})
        assert pvalue_from_ci_family(family, 0.0) == pytest.approx(0.05)

    def test_empty_family_invalid(self):
        with pytest.raises(InvalidStateError):
            pvalue_from_ci_family({}, 0.0)

    def test_consistency_with_live_state(self):
        # reconstruction equals the true shifted-null p-value rounded down to
        # the stored alpha grid, or 1.0 when rejection happened at every level
        rng = np.random.default_rng(17)
        model = NormalKnownVariance(sigma_sq=1.0)
        mixture = MixtureSpec(tau_sq=1.0)
        alphas = (0.1, 0.05, 0.01)
        for theta0 in (0.0, 0.8, 1.0, 2.5):
            state = initial_state(levels=tuple(1 - a for a in alphas))
            values = []
            for _ in range(30):
                values.append(float(rng.normal(1.0)))
                state = update_state(state, [("treatment", values[-1])], model, mixture)
            running_mean = np.cumsum(values) / np.arange(1, 31)
            shifted = MixtureSpec(tau_sq=1.0, center=theta0)
            p_true = min(
                1.0,
                min(
                    math.exp(-log_mixture_lr_normal(float(running_mean[k]), 1.0 / (k + 1), shifted))
                    for k in range(30)
                ),
            )
            below = [a for a in alphas if p_true > a]
            expected = max(below) if below else 1.0
            assert pvalue_from_ci_family(state.ci_by_level, theta0) == pytest.approx(expected)


class TestFixedHorizonP:
    def test_null_mean_gives_one(self):
        assert fixed_horizon_p_normal(0.0, 10, 1.0) == 1.0

    def test_z_critical(self):
        n = 400
        assert fixed_horizon_p_normal(1.959963984540054 / math.sqrt(n), n, 1.0) == pytest.approx(
            0.05, abs=1e-9
        )

    def test_large_mean_tiny_p(self):
        assert fixed_horizon_p_normal(50.0, 100, 1.0) < 1e-200

    def test_zero_n_rejected(self):
        with pytest.raises(InvalidInputError):
            fixed_horizon_p_normal(0.0, 0, 1.0)


@settings(derandomize=True, max_examples=60)
@given(
    effect=st.floats(-5, 5),
    variance=st.floats(1e-4, 10),
    tau_sq=st.floats(1e-4, 10),
)
def test_log_lr_finite_and_bounded_below(effect, variance, tau_sq):
    m = MixtureSpec(tau_sq=tau_sq)
    value = log_mixture_lr_normal(effect, variance, m)
    assert math.isfinite(value)
    assert value >= 0.5 * math.log(variance / (variance + tau_sq)) - 1e-12


@settings(derandomize=True, max_examples=40)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_decide_consistent_with_min(p_history):
    outcome = decide(p_history, alpha=0.05)
    if min(p_history) <= 0.05:
        assert outcome.rejected
        assert p_history[outcome.stopped_at - 1] <= 0.05
        assert all(p > 0.05 for p in p_history[: outcome.stopped_at - 1])
    else:
        assert not outcome.rejected

import math

import numpy as np
import pytest

from avstats.allocation import (
    CONTROL,
    TREATMENT,
    Alternating,
    ExactLrProcess,
    GreedyMean,
    GridMixture,
    IidRandom,
    PairedStreams,
    allocate_next,
    atom_arm_probabilities,
    exact_mixture_lr_bernoulli,
    gaussian_grid_mixture,
    log_exact_mixture_lr_bernoulli,
    plugin_mixture_lr,
)
from avstats.errors import InvalidInputError, InvalidStateError


def _streams(pairs):
    s = PairedStreams()
    for arm, value in pairs:
        s = s.append(arm, value)
    return s


class TestPairedStreams:
    def test_append_and_counts(self):
        s = _streams([(CONTROL, 1.0), (TREATMENT, 0.0), (CONTROL, 0.0), (TREATMENT, 1.0)])
        assert s.total == 4
        assert s.prefix_counts(0) == (0, 0, 0.0, 0.0)
        assert s.prefix_counts(2) == (1, 1, 1.0, 0.0)
        assert s.prefix_counts(4) == (2, 2, 1.0, 1.0)

    def test_prefix_bounds(self):
        s = _streams([(CONTROL, 1.0)])
        with pytest.raises(InvalidInputError):
            s.prefix_counts(2)
        with pytest.raises(InvalidInputError):
            s.prefix_counts(-1)

    def test_inconsistent_construction_rejected(self):
        with pytest.raises(InvalidInputError):
            PairedStreams(x=(1.0,), y=(), order=(TREATMENT,))
        with pytest.raises(InvalidInputError):
            PairedStreams(x=(1.0,), y=(), order=("middle",))
        with pytest.raises(InvalidInputError):
            PairedStreams(x=(0.5,), y=(), order=(CONTROL,))

    def test_append_unknown_arm(self):
        with pytest.raises(InvalidInputError):
            PairedStreams().append("both", 1.0)


class TestGridMixture:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            GridMixture(atoms=())
        with pytest.raises(InvalidInputError):
            GridMixture(atoms=((0.1, -0.5),))
        with pytest.raises(InvalidInputError):
            GridMixture(atoms=((0.1, 0.7), (0.2, 0.7)))  # mass 1.4
        with pytest.raises(InvalidInputError):
            GridMixture(atoms=((math.nan, 1.0),))

    def test_subprobability_allowed(self):
        m = GridMixture(atoms=((0.2, 0.25), (-0.2, 0.25)))
        assert m.total_weight == pytest.approx(0.5)

    def test_gaussian_grid(self):
        m = gaussian_grid_mixture(tau_sq=0.04, p_bar=0.5, n_atoms=101)
        assert m.total_weight <= 1.0 + 1e-12
        thetas = [t for t, _ in m.atoms]
        assert max(abs(t) for t in thetas) <= 6 * 0.2 + 1e-12
        # symmetric grid about zero keeps paired weights
        weights = {round(t, 12): w for t, w in m.atoms}
        for t, w in m.atoms:
            assert weights[round(-t, 12)] == pytest.approx(w)

    def test_gaussian_grid_drops_invalid_atoms(self):
        # p_bar near the edge invalidates large thetas; mass just disappears
        wide = gaussian_grid_mixture(tau_sq=1.0, p_bar=0.05, n_atoms=401)
        assert wide.total_weight < 0.5
        for theta, _ in wide.atoms:
            assert 0.0 < 0.05 - theta / 2.0 < 1.0
            assert 0.0 < 0.05 + theta / 2.0 < 1.0

    def test_gaussian_grid_validation(self):
        with pytest.raises(InvalidInputError):
            gaussian_grid_mixture(tau_sq=0.0, p_bar=0.5)
        with pytest.raises(InvalidInputError):
            gaussian_grid_mixture(tau_sq=1.0, p_bar=1.0)

    def test_atom_arm_probabilities_rejects_invalid(self):
        m = GridMixture(atoms=((1.5, 1.0),))
        with pytest.raises(InvalidInputError):
            atom_arm_probabilities(m, 0.5)


class TestExactMixtureLr:
    def test_single_atom_hand_value(self):
        # theta=0.4, p_bar=0.5: arms are (0.3, 0.7); one control success
        mixture = GridMixture(atoms=((0.4, 1.0),))
        s = _streams([(CONTROL, 1.0)])
        assert exact_mixture_lr_bernoulli(s, 1, 0.5, mixture) == pytest.approx(0.6, rel=1e-12)

    def test_two_atom_hand_value(self):
        # control success then treatment failure
        mixture = GridMixture(atoms=((0.4, 0.5), (-0.4, 0.5)))
        s = _streams([(CONTROL, 1.0), (TREATMENT, 0.0)])
        # theta=+0.4: (0.3/0.5)*(0.3/0.5) = 0.36 ; theta=-0.4: (0.7/0.5)^2 = 1.96
        assert exact_mixture_lr_bernoulli(s, 2, 0.5, mixture) == pytest.approx(
            0.5 * 0.36 + 0.5 * 1.96, rel=1e-12
        )

    def test_null_atom_is_identity(self):
        mixture = GridMixture(atoms=((0.0, 1.0),))
        s = _streams([(CONTROL, 1.0), (TREATMENT, 0.0), (TREATMENT, 1.0)])
        for t in range(4):
            assert exact_mixture_lr_bernoulli(s, t, 0.5, mixture) == pytest.approx(1.0)

    def test_t_zero_is_total_weight(self):
        mixture = GridMixture(atoms=((0.2, 0.25), (-0.2, 0.25)))
        assert exact_mixture_lr_bernoulli(PairedStreams(), 0, 0.5, mixture) == pytest.approx(0.5)

    def test_log_form_agrees(self):
        mixture = gaussian_grid_mixture(tau_sq=0.09, p_bar=0.4, n_atoms=51)
        rng = np.random.default_rng(2)
        s = PairedStreams()
        for _ in range(30):
            arm = CONTROL if rng.random() < 0.5 else TREATMENT
            s = s.append(arm, float(rng.random() < 0.4))
        for t in (0, 7, 30):
            lin = exact_mixture_lr_bernoulli(s, t, 0.4, mixture)
            assert math.log(lin) == pytest.approx(
                log_exact_mixture_lr_bernoulli(s, t, 0.4, mixture), rel=1e-12
            )

    def test_depends_only_on_prefix_counts(self):
        # the exact LR is a function of (m, n, sx, sy), so reshuffling the
        # arrival order with the same per-arm values leaves it unchanged
        mixture = GridMixture(atoms=((0.4, 0.5), (-0.2, 0.3)))
        a = _streams([(CONTROL, 1.0), (CONTROL, 0.0), (TREATMENT, 1.0), (TREATMENT, 1.0)])
        b = _streams([(TREATMENT, 1.0), (CONTROL, 0.0), (TREATMENT, 1.0), (CONTROL, 1.0)])
        va = exact_mixture_lr_bernoulli(a, 4, 0.5, mixture)
        vb = exact_mixture_lr_bernoulli(b, 4, 0.5, mixture)
        assert va == pytest.approx(vb, rel=1e-12)

    def test_one_step_martingale_identity(self):
        # under the pooled null the expected one-step factor is exactly 1,
        # so averaging the post-observation LR over the outcome returns the
        # pre-observation value, whichever arm was chosen
        mixture = GridMixture(atoms=((0.3, 0.55), (-0.1, 0.4)))
        p_bar = 0.35
        for arm in (CONTROL, TREATMENT):
            before = exact_mixture_lr_bernoulli(PairedStreams(), 0, p_bar, mixture)
            success = exact_mixture_lr_bernoulli(_streams([(arm, 1.0)]), 1, p_bar, mixture)
            failure = exact_mixture_lr_bernoulli(_streams([(arm, 0.0)]), 1, p_bar, mixture)
            assert p_bar * success + (1 - p_bar) * failure == pytest.approx(before, rel=1e-12)


class TestStreamingProcess:
    def test_matches_batch_at_every_prefix(self):
        mixture = gaussian_grid_mixture(tau_sq=0.04, p_bar=0.45, n_atoms=41)
        rng = np.random.default_rng(8)
        process = ExactLrProcess(p_bar=0.45, mixture=mixture)
        s = PairedStreams()
        assert process.value == pytest.approx(mixture.total_weight)
        for _ in range(60):
            arm = CONTROL if rng.random() < 0.5 else TREATMENT
            value = float(rng.random() < 0.45)
            streamed = process.observe(arm, value)
            s = s.append(arm, value)
            batch = exact_mixture_lr_bernoulli(s, s.total, 0.45, mixture)
            assert streamed == pytest.approx(batch, rel=1e-10)
        assert process.t == 60

    def test_observe_validation(self):
        process = ExactLrProcess(p_bar=0.5, mixture=GridMixture(atoms=((0.2, 1.0),)))
        with pytest.raises(InvalidInputError):
            process.observe("neither", 1.0)
        with pytest.raises(InvalidInputError):
            process.observe(CONTROL, 0.5)


class TestPluginLr:
    def test_estimate_and_flag(self):
        mixture = GridMixture(atoms=((0.2, 0.5), (-0.2, 0.5)))
        s = _streams([(CONTROL, 1.0), (CONTROL, 0.0), (TREATMENT, 1.0)])
        result = plugin_mixture_lr(s, 3, mixture)
        assert result.p_bar_estimate == pytest.approx((0.5 + 1.0) / 2.0)
        assert not result.type1_guaranteed
        expected = exact_mixture_lr_bernoulli(s, 3, 0.75, mixture)
        assert result.value == pytest.approx(expected, rel=1e-12)

    def test_needs_both_streams(self):
        s = _streams([(CONTROL, 1.0), (CONTROL, 0.0)])
        with pytest.raises(InvalidStateError):
            plugin_mixture_lr(s, 2, GridMixture(atoms=((0.2, 1.0),)))

    def test_drops_atoms_invalid_at_estimate(self):
        # estimated pooled rate 0.75 invalidates theta=0.6 (p1 would be
        # 1.05) but keeps theta=-0.1; no renormalization happens
        mixture = GridMixture(atoms=((0.6, 0.5), (-0.1, 0.5)))
        s = _streams([(CONTROL, 1.0), (CONTROL, 0.0), (TREATMENT, 1.0)])
        result = plugin_mixture_lr(s, 3, mixture)
        kept = GridMixture(atoms=((-0.1, 0.5),))
        expected = exact_mixture_lr_bernoulli(s, 3, 0.75, kept)
        assert result.value == pytest.approx(expected, rel=1e-12)

    def test_all_atoms_invalid_yields_zero(self):
        mixture = GridMixture(atoms=((0.9, 1.0),))
        s = _streams([(CONTROL, 1.0), (TREATMENT, 1.0)])
        result = plugin_mixture_lr(s, 2, mixture)
        assert result.value == 0.0
        assert result.p_bar_estimate == pytest.approx(1.0)


class TestPolicies:
    def test_alternating_parity(self):
        rng = np.random.default_rng(0)
        s = PairedStreams()
        seen = []
        for _ in range(6):
            arm = allocate_next(Alternating(), s, rng)
            seen.append(arm)
            s = s.append(arm, 0.0)
        assert seen == [CONTROL, TREATMENT] * 3

    def test_iid_random_uses_weight(self):
        rng = np.random.default_rng(123)
        picks = [allocate_next(IidRandom(weight=0.8), PairedStreams(), rng) for _ in range(4000)]
        frac_control = picks.count(CONTROL) / len(picks)
        assert abs(frac_control - 0.8) < 0.02

    def test_iid_random_consumes_one_uniform(self):
        seed_rng = np.random.default_rng(55)
        replay = np.random.default_rng(55)
        arm = allocate_next(IidRandom(weight=0.3), PairedStreams(), seed_rng)
        expected = CONTROL if replay.random() < 0.3 else TREATMENT
        assert arm == expected
        # both generators are now one draw deep
        assert seed_rng.random() == replay.random()

    def test_greedy_exploits_larger_mean(self):
        rng = np.random.default_rng(1)
        s = _streams([(CONTROL, 0.0), (TREATMENT, 1.0)])
        assert allocate_next(GreedyMean(epsilon=0.0), s, rng) == TREATMENT
        s2 = _streams([(CONTROL, 1.0), (TREATMENT, 0.0)])
        assert allocate_next(GreedyMean(epsilon=0.0), s2, rng) == CONTROL

    def test_greedy_ties_go_to_control(self):
        rng = np.random.default_rng(1)
        assert allocate_next(GreedyMean(epsilon=0.0), PairedStreams(), rng) == CONTROL
        s = _streams([(CONTROL, 1.0), (TREATMENT, 1.0)])
        assert allocate_next(GreedyMean(epsilon=0.0), s, rng) == CONTROL

    def test_greedy_epsilon_one_is_uniform(self):
        rng = np.random.default_rng(77)
        s = _streams([(CONTROL, 0.0), (TREATMENT, 1.0)])
        picks = [allocate_next(GreedyMean(epsilon=1.0), s, rng) for _ in range(2000)]
        frac = picks.count(CONTROL) / len(picks)
        assert abs(frac - 0.5) < 0.05

    def test_policy_validation(self):
        with pytest.raises(InvalidInputError):
            IidRandom(weight=0.0)
        with pytest.raises(InvalidInputError):
            GreedyMean(epsilon=1.5)

"""Streaming always-valid inference engine.

The engine maintains, for a stream of observations, a mixture likelihood
ratio against a point null, the always-valid p-value process (the running
minimum of the inverted ratio), and one confidence sequence per requested
confidence level.  The p-value process is super-uniform at any data-dependent
stopping time, so the stream may be inspected and stopped at will without
inflating the false-positive rate.

Two observation models are supported:

* a single normal stream with known variance ``sigma_sq`` (observations from
  both arrival tags are pooled; the null hypothesis is that the stream mean
  equals the mixture center), and
* two Bernoulli streams (control / treatment) compared through a normal
  approximation of the difference in means, with variance estimated by
  ``xbar*(1-xbar)/m + ybar*(1-ybar)/n``.

All likelihood ratios are computed in log space.  ``1/lr`` is obtained as
``exp(-log_lr)`` so that astronomically large ratios underflow cleanly to a
zero p-value instead of overflowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidInputError, InvalidStateError, NumericError

__all__ = [
    "MixtureSpec",
    "NormalKnownVariance",
    "BernoulliTwoStream",
    "StreamModel",
    "Interval",
    "FULL_LINE",
    "TwoStreamStats",
    "AvState",
    "DecisionOutcome",
    "CONTROL",
    "TREATMENT",
    "log_mixture_lr_normal",
    "mixture_lr_normal",
    "log_mixture_lr_normal_path",
    "log_mixture_lr_quadrature",
    "mixture_lr_quadrature",
    "av_ci_interval",
    "av_ci_half_width",
    "initial_state",
    "update_state",
    "decide",
    "chance_to_beat",
    "pvalue_from_ci_family",
    "fixed_horizon_p_normal",
    "p_value_path",
]

CONTROL = "control"
TREATMENT = "treatment"

_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


def _require_finite(**named: float) -> None:
    for name, value in named.items():
        if not math.isfinite(value):
            raise InvalidInputError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MixtureSpec:
    """Normal mixing distribution N(center, tau_sq) placed over the effect size.

    ``center`` is the null value of the effect; ``tau_sq`` is the mixture
    variance.  ``tau_sq == 0`` degenerates to a point mass at the null, for
    which the mixture likelihood ratio is identically 1.
    """

    tau_sq: float
    center: float = 0.0

    def __post_init__(self) -> None:
        _require_finite(tau_sq=self.tau_sq, center=self.center)
        if self.tau_sq < 0:
            raise InvalidInputError(f"tau_sq must be >= 0, got {self.tau_sq}")


@dataclass(frozen=True)
class NormalKnownVariance:
    """Single normal stream with known per-observation variance."""

    sigma_sq: float

    def __post_init__(self) -> None:
        _require_finite(sigma_sq=self.sigma_sq)
        if self.sigma_sq <= 0:
            raise InvalidInputError(f"sigma_sq must be > 0, got {self.sigma_sq}")


@dataclass(frozen=True)
class BernoulliTwoStream:
    """Control and treatment Bernoulli streams compared via the CLT approximation."""


StreamModel = Union[NormalKnownVariance, BernoulliTwoStream]


@dataclass(frozen=True)
class Interval:
    """Closed-endpoint representation of an effect interval.

    Membership uses open-set semantics (``lo < x < hi``) so that a point at
    which the mixture likelihood ratio exactly hits ``1/alpha`` counts as
    rejected; this keeps the interval exactly dual to the p-value process.
    An interval with ``lo > hi`` is empty, which is a legitimate flagged
    state for a running intersection (the observed stream is inconsistent
    with every effect value at that level).
    """

    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))


FULL_LINE = Interval(-math.inf, math.inf)


@dataclass(frozen=True)
class TwoStreamStats:
    """Sufficient statistics for the two arrival tags.

    ``m``/``sum_x``/``sum_sq_x`` accumulate the control stream and
    ``n``/``sum_y``/``sum_sq_y`` the treatment stream.  The squared sums are
    kept for reporting; known-variance inference does not consume them.
    """

    m: int = 0
    n: int = 0
    sum_x: float = 0.0
    sum_y: float = 0.0
    sum_sq_x: float = 0.0
    sum_sq_y: float = 0.0

    @property
    def mean_x(self) -> float:
        if self.m == 0:
            raise InvalidStateError("control stream is empty")
        return self.sum_x / self.m

    @property
    def mean_y(self) -> float:
        if self.n == 0:
            raise InvalidStateError("treatment stream is empty")
        return self.sum_y / self.n

    @property
    def total(self) -> int:
        return self.m + self.n


@dataclass(frozen=True)
class AvState:
    """Snapshot of the always-valid inference process after some number of batches.

    ``log_lambda`` is the log mixture likelihood ratio recomputed from the
    current sufficient statistics; ``p_value`` is the running minimum of
    ``min(1, 1/lambda)`` across all past batch boundaries; ``ci_by_level``
    maps each confidence level ``1 - alpha`` to the running intersection of
    the per-batch intervals at that level.  ``updated_at`` counts ingested
    observations.
    """

    stats: TwoStreamStats
    log_lambda: float
    p_value: float
    ci_by_level: Mapping[float, Interval]
    updated_at: int

    @property
    def mixture_lr(self) -> float:
        if self.log_lambda > _LOG_FLOAT_MAX:
            return math.inf
        return math.exp(self.log_lambda)


@dataclass(frozen=True)
class DecisionOutcome:
    """Result of scanning a p-value history for the first level-alpha rejection.

    ``stopped_at`` is the 1-based index of the first update whose p-value is
    at or below ``level``; ``None`` encodes "never stopped".
    """

    stopped_at: int | None
    rejected: bool
    level: float


def log_mixture_lr_normal(
    effect_estimate: float, variance_estimate: float, mixture: MixtureSpec
) -> float:
    """Log of the normal mixture likelihood ratio in closed form.

    For an effect estimate ``theta_hat`` with variance ``v`` and a
    N(theta0, tau_sq) mixture over the alternative,

        log LR = 0.5*log(v / (v + tau_sq))
                 + tau_sq * (theta_hat - theta0)**2 / (2 * v * (v + tau_sq))

    which is the result of integrating the Gaussian likelihood ratio against
    the mixing density.  ``tau_sq == 0`` yields exactly 0 (ratio 1).
    """
    _require_finite(effect_estimate=effect_estimate)
    if not math.isfinite(variance_estimate) or variance_estimate <= 0:
        raise InvalidInputError(
            f"variance_estimate must be finite and > 0, got {variance_estimate!r}"
        )
    if mixture.tau_sq == 0:
        return 0.0
    v = variance_estimate
    t2 = mixture.tau_sq
    dev = effect_estimate - mixture.center
    return 0.5 * math.log(v / (v + t2)) + t2 * dev * dev / (2.0 * v * (v + t2))


def mixture_lr_normal(
    effect_estimate: float, variance_estimate: float, mixture: MixtureSpec
) -> float:
    """Normal mixture likelihood ratio; ``inf`` if it exceeds float range."""
    log_lr = log_mixture_lr_normal(effect_estimate, variance_estimate, mixture)
    if log_lr > _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(log_lr)


def log_mixture_lr_normal_path(
    effect_estimates: np.ndarray, variance_estimates: np.ndarray, mixture: MixtureSpec
) -> np.ndarray:
    """Vectorized :func:`log_mixture_lr_normal` over aligned numpy arrays.

    Used by the simulation lab to evaluate whole sample paths at once; agrees
    with the scalar form elementwise (tested).
    """
    v = np.asarray(variance_estimates, dtype=float)
    if np.any(v <= 0):
        raise InvalidInputError("variance estimates must be > 0")
    if mixture.tau_sq == 0:
        return np.zeros(np.broadcast(effect_estimates, v).shape)
    t2 = mixture.tau_sq
    dev = np.asarray(effect_estimates, dtype=float) - mixture.center
    return 0.5 * np.log(v / (v + t2)) + t2 * dev * dev / (2.0 * v * (v + t2))


def p_value_path(log_lr_path: np.ndarray, axis: int = -1) -> np.ndarray:
    """Always-valid p-value process from a log likelihood-ratio path.

    ``p_n = min(1, min_{k<=n} 1/LR_k)`` computed along ``axis``.  Underflow of
    ``exp(-log_lr)`` to zero is the intended behaviour for huge ratios.
    """
    with np.errstate(under="ignore"):
        inv = np.exp(-np.asarray(log_lr_path, dtype=float))
    return np.minimum.accumulate(np.minimum(inv, 1.0), axis=axis)


def _log_mixing_pdf(theta: float, center: float, tau_sq: float) -> float:
    return -0.5 * math.log(2.0 * math.pi * tau_sq) - (theta - center) ** 2 / (2.0 * tau_sq)


def log_mixture_lr_quadrature(
    effect_estimate: float,
    variance_estimate: float,
    mixture: MixtureSpec,
    rel_tol: float = 1e-9,
) -> float:
    """Log mixture likelihood ratio by direct numerical integration.

    Integrates ``exp(g(theta))`` where ``g`` is the log of (Gaussian
    likelihood ratio at theta) times (mixing density at theta), without using
    the closed-form simplification.  The integrand's peak is located
    numerically and factored out so that ratios far beyond float range are
    still representable through their logarithm.  Serves as the independent
    oracle for the closed form.
    """
    _require_finite(effect_estimate=effect_estimate)
    if not math.isfinite(variance_estimate) or variance_estimate <= 0:
        raise InvalidInputError(
            f"variance_estimate must be finite and > 0, got {variance_estimate!r}"
        )
    if not 0 < rel_tol <= 1e-3:
        raise InvalidInputError(f"rel_tol must be in (0, 1e-3], got {rel_tol}")
    if mixture.tau_sq == 0:
        return 0.0

    v = variance_estimate
    c = mixture.center
    tau = math.sqrt(mixture.tau_sq)
    x = effect_estimate

    def g(theta: float) -> float:
        log_ratio = ((x - c) ** 2 - (x - theta) ** 2) / (2.0 * v)
        return log_ratio + _log_mixing_pdf(theta, c, mixture.tau_sq)

    # The tilted density concentrates between the mixture center and the
    # estimate, with standard deviation at most tau.
    lo = min(c, x) - 12.0 * tau
    hi = max(c, x) + 12.0 * tau
    grid = np.linspace(lo, hi, 1025)
    g_grid = np.array([g(t) for t in grid])
    peak_idx = int(np.argmax(g_grid))
    bracket_lo = grid[max(peak_idx - 1, 0)]
    bracket_hi = grid[min(peak_idx + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(
        lambda t: -g(t), bounds=(bracket_lo, bracket_hi), method="bounded"
    )
    peak_theta = float(res.x)
    log_peak = max(g(peak_theta), float(g_grid[peak_idx]))

    value, abserr = integrate.quad(
        lambda t: math.exp(g(t) - log_peak),
        lo,
        hi,
        points=[peak_theta],
        epsabs=0.0,
        epsrel=min(rel_tol / 10.0, 1e-10),
        limit=200,
    )
    if not math.isfinite(value) or value <= 0:
        raise NumericError(f"quadrature produced non-positive mass {value!r}")
    if abserr / value > rel_tol:
        raise NumericError(
            f"quadrature did not reach rel_tol={rel_tol}: estimated error {abserr / value:.3g}"
        )
    return log_peak + math.log(value)


def mixture_lr_quadrature(
    effect_estimate: float,
    variance_estimate: float,
    mixture: MixtureSpec,
    rel_tol: float = 1e-9,
) -> float:
    """Mixture likelihood ratio via quadrature; ``inf`` beyond float range."""
    log_lr = log_mixture_lr_quadrature(effect_estimate, variance_estimate, mixture, rel_tol)
    if log_lr > _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(log_lr)


def av_ci_half_width(variance_estimate: float, tau_sq: float, alpha: float) -> float:
    """Half-width of the per-step always-valid interval.

        w = sqrt( (2 v (v + tau_sq) / tau_sq) * log( (1/alpha) * sqrt((v + tau_sq)/v) ) )

    obtained by inverting ``mixture LR(theta0) < 1/alpha`` in theta0.  The log
    term is positive for every alpha < 1, so w > 0 always.
    """
    if not math.isfinite(variance_estimate) or variance_estimate <= 0:
        raise InvalidInputError(
            f"variance_estimate must be finite and > 0, got {variance_estimate!r}"
        )
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    if tau_sq <= 0:
        raise InvalidInputError(
            "tau_sq must be > 0: a point-mass mixture cannot exclude any effect value,"
            " so its interval is the whole line"
        )
    v = variance_estimate
    log_term = math.log(1.0 / alpha) + 0.5 * math.log((v + tau_sq) / v)
    return math.sqrt(2.0 * v * (v + tau_sq) / tau_sq * log_term)


def av_ci_interval(
    effect_estimate: float, variance_estimate: float, mixture: MixtureSpec, alpha: float
) -> Interval:
    """Per-step always-valid interval: exactly the set where the mixture LR stays below 1/alpha."""
    _require_finite(effect_estimate=effect_estimate)
    w = av_ci_half_width(variance_estimate, mixture.tau_sq, alpha)
    return Interval(effect_estimate - w, effect_estimate + w)


_DEFAULT_LEVELS = (0.9, 0.95, 0.99)


def initial_state(levels: Sequence[float] = _DEFAULT_LEVELS) -> AvState:
    """Fresh state: p = 1, unit likelihood ratio, full-line intervals."""
    levels = tuple(levels)
    if not levels:
        raise InvalidInputError("at least one confidence level is required")
    for level in levels:
        if not 0 < level < 1:
            raise InvalidInputError(f"confidence levels must be in (0, 1), got {level}")
    return AvState(
        stats=TwoStreamStats(),
        log_lambda=0.0,
        p_value=1.0,
        ci_by_level={level: FULL_LINE for level in levels},
        updated_at=0,
    )


def _validated_batch(
    batch: Iterable[tuple[str, float]], model: StreamModel
) -> list[tuple[str, float]]:
    rows = []
    for i, (tag, value) in enumerate(batch):
        if tag not in (CONTROL, TREATMENT):
            raise InvalidInputError(
                f"batch item {i}: variation must be '{CONTROL}' or '{TREATMENT}', got {tag!r}"
            )
        value = float(value)
        if not math.isfinite(value):
            raise InvalidInputError(f"batch item {i}: value must be finite, got {value!r}")
        if isinstance(model, BernoulliTwoStream) and value not in (0.0, 1.0):
            raise InvalidInputError(
                f"batch item {i}: Bernoulli observations must be 0 or 1, got {value!r}"
            )
        rows.append((tag, value))
    return rows


def _accumulate(stats: TwoStreamStats, rows: list[tuple[str, float]]) -> TwoStreamStats:
    m, n = stats.m, stats.n
    sum_x, sum_y = stats.sum_x, stats.sum_y
    sum_sq_x, sum_sq_y = stats.sum_sq_x, stats.sum_sq_y
    for tag, value in rows:
        if tag == CONTROL:
            m += 1
            sum_x += value
            sum_sq_x += value * value
        else:
            n += 1
            sum_y += value
            sum_sq_y += value * value
    return TwoStreamStats(m=m, n=n, sum_x=sum_x, sum_y=sum_y, sum_sq_x=sum_sq_x, sum_sq_y=sum_sq_y)


def effect_and_variance(stats: TwoStreamStats, model: StreamModel) -> tuple[float, float]:
    """Effect estimate and its variance under the given observation model.

    Returns ``(nan, 0.0)`` when the data cannot yet identify the effect
    (empty streams, or a degenerate Bernoulli variance estimate); callers
    treat zero variance as "inference frozen".
    """
    if isinstance(model, NormalKnownVariance):
        total = stats.total
        if total == 0:
            return math.nan, 0.0
        pooled_mean = (stats.sum_x + stats.sum_y) / total
        return pooled_mean, model.sigma_sq / total
    if stats.m == 0 or stats.n == 0:
        return math.nan, 0.0
    xbar = stats.mean_x
    ybar = stats.mean_y
    variance = xbar * (1.0 - xbar) / stats.m + ybar * (1.0 - ybar) / stats.n
    return ybar - xbar, variance


def update_state(
    state: AvState,
    batch: Iterable[tuple[str, float]],
    model: StreamModel,
    mixture: MixtureSpec,
) -> AvState:
    """Fold one batch of ``(variation, value)`` pairs into the state.

    The batch is atomic: the likelihood ratio, p-value, and intervals are
    recomputed once after the whole batch is absorbed, and validation happens
    before any mutation so a bad row leaves the state untouched.  The p-value
    is the running minimum across batch boundaries and each interval is the
    previous one intersected with the new per-step interval at its level.
    A zero variance estimate (no data yet, or both Bernoulli streams still
    degenerate) freezes inference: statistics accumulate but p and the
    intervals stay where they were.
    """
    rows = _validated_batch(batch, model)
    if not rows:
        return state
    stats = _accumulate(state.stats, rows)
    effect, variance = effect_and_variance(stats, model)
    updated_at = state.updated_at + len(rows)
    if variance == 0.0:
        return replace(state, stats=stats, updated_at=updated_at)

    log_lambda = log_mixture_lr_normal(effect, variance, mixture)
    with np.errstate(under="ignore"):
        inv_lambda = math.exp(-min(log_lambda, _LOG_FLOAT_MAX))
    p_value = min(state.p_value, inv_lambda, 1.0)

    if mixture.tau_sq == 0:
        ci_by_level = dict(state.ci_by_level)
    else:
        ci_by_level = {
            level: state.ci_by_level[level].intersect(
                av_ci_interval(effect, variance, mixture, 1.0 - level)
            )
            for level in state.ci_by_level
        }
    return AvState(
        stats=stats,
        log_lambda=log_lambda,
        p_value=p_value,
        ci_by_level=ci_by_level,
        updated_at=updated_at,
    )


def decide(history: Sequence["AvState | float"], alpha: float) -> DecisionOutcome:
    """First time the p-value history crosses ``alpha``, as a decision record.

    Accepts a sequence of states or of raw p-values; indices are 1-based.
    """
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    for idx, item in enumerate(history, start=1):
        p = item.p_value if isinstance(item, AvState) else float(item)
        if p <= alpha:
            return DecisionOutcome(stopped_at=idx, rejected=True, level=alpha)
    return DecisionOutcome(stopped_at=None, rejected=False, level=alpha)


def chance_to_beat(p_value: float) -> float:
    """Display complement ``1 - p``; a presentation of evidence, not a posterior."""
    if not 0 <= p_value <= 1:
        raise InvalidInputError(f"p_value must be in [0, 1], got {p_value}")
    return 1.0 - p_value


def pvalue_from_ci_family(ci_by_level: Mapping[float, Interval], theta0: float) -> float:
    """Grid-granular p-value reconstructed from a family of stored intervals.

    Returns the alpha of the narrowest stored interval still containing
    ``theta0`` (the largest such alpha), which matches the exact duality
    ``p = sup{alpha : theta0 in CI(1-alpha)}`` up to the resolution of the
    stored grid.  When no stored interval contains ``theta0`` the result is
    capped at 1: the caller only learns that rejection occurred at every
    stored level, and the cap can never manufacture a rejection.
    """
    if not ci_by_level:
        raise InvalidStateError("no stored confidence levels")
    _require_finite(theta0=theta0)
    containing = [
        1.0 - level
        for level, interval in ci_by_level.items()
        if not interval.is_empty and interval.contains(theta0)
    ]
    if not containing:
        return 1.0
    return max(containing)


def fixed_horizon_p_normal(mean: float, n: int, sigma_sq: float) -> float:
    """Two-sided fixed-sample z-test p-value ``2 * Phi_bar(|mean| * sqrt(n / sigma_sq))``.

    This is the naive quantity a dashboard recomputes at every peek; the
    simulation lab uses it to demonstrate how badly continuous monitoring of
    a fixed-horizon test inflates the false-positive rate.
    """
    _require_finite(mean=mean)
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    if not math.isfinite(sigma_sq) or sigma_sq <= 0:
        raise InvalidInputError(f"sigma_sq must be finite and > 0, got {sigma_sq!r}")
    z = abs(mean) * math.sqrt(n / sigma_sq)
    return math.erfc(z / math.sqrt(2.0))

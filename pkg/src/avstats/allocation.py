"""Exact Bernoulli mixture likelihood ratios under adaptive allocation.

When the pooled success probability ``p_bar`` is known, the mixture of exact
Bernoulli likelihood ratios with per-atom arms ``p0 = p_bar - theta/2`` and
``p1 = p_bar + theta/2`` is a supermartingale under the null for *any*
allocation rule that chooses the next arm from past data and fresh
randomness only.  That makes the optional-stopping Type I bound survive
bandit-style allocation, where the CLT-based engine approximation breaks.

The plug-in variant substitutes the estimated pooled rate and carries no
guarantee; it is returned under an explicit experimental wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidStateError

__all__ = [
    "Alternating",
    "IidRandom",
    "GreedyMean",
    "AllocationPolicy",
    "PairedStreams",
    "GridMixture",
    "PluginLr",
    "gaussian_grid_mixture",
    "atom_arm_probabilities",
    "exact_mixture_lr_bernoulli",
    "log_exact_mixture_lr_bernoulli",
    "plugin_mixture_lr",
    "allocate_next",
    "ExactLrProcess",
    "CONTROL",
    "TREATMENT",
]

CONTROL = "control"
TREATMENT = "treatment"


@dataclass(frozen=True)
class Alternating:
    """Deterministic round-robin, control first."""


@dataclass(frozen=True)
class IidRandom:
    """Independent coin flips; ``weight`` is the probability of control."""

    weight: float

    def __post_init__(self) -> None:
        if not 0 < self.weight < 1:
            raise InvalidInputError(f"weight must be in (0, 1), got {self.weight}")


@dataclass(frozen=True)
class GreedyMean:
    """Exploit the arm with the larger observed mean, explore uniformly with probability epsilon.

    Ties resolve to control; an arm with no observations counts as mean 0.
    The choice never looks at the value about to be observed, which is the
    only property the martingale argument needs.
    """

    epsilon: float

    def __post_init__(self) -> None:
        if not 0 <= self.epsilon <= 1:
            raise InvalidInputError(f"epsilon must be in [0, 1], got {self.epsilon}")


AllocationPolicy = Alternating | IidRandom | GreedyMean


@dataclass(frozen=True)
class PairedStreams:
    """Observed control (``x``) and treatment (``y``) values plus the arrival order."""

    x: tuple[float, ...] = ()
    y: tuple[float, ...] = ()
    order: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n_control = sum(1 for tag in self.order if tag == CONTROL)
        n_treatment = len(self.order) - n_control
        if any(tag not in (CONTROL, TREATMENT) for tag in self.order):
            raise InvalidInputError("arrival order tags must be 'control' or 'treatment'")
        if n_control != len(self.x) or n_treatment != len(self.y):
            raise InvalidInputError(
                "arrival order is inconsistent with stream lengths: "
                f"{n_control} control / {n_treatment} treatment arrivals vs "
                f"len(x)={len(self.x)}, len(y)={len(self.y)}"
            )
        for name, values in (("x", self.x), ("y", self.y)):
            if any(v not in (0.0, 1.0, 0, 1) for v in values):
                raise InvalidInputError(f"stream {name} must contain only 0/1 values")

    @property
    def total(self) -> int:
        return len(self.order)

    def append(self, arm: str, value: float) -> "PairedStreams":
        if arm == CONTROL:
            return PairedStreams(self.x + (value,), self.y, self.order + (arm,))
        if arm == TREATMENT:
            return PairedStreams(self.x, self.y + (value,), self.order + (arm,))
        raise InvalidInputError(f"unknown arm {arm!r}")

    def prefix_counts(self, t: int) -> tuple[int, int, float, float]:
        """Counts and success sums (m, n, sx, sy) over the first ``t`` arrivals."""
        if not 0 <= t <= self.total:
            raise InvalidInputError(f"t must be in [0, {self.total}], got {t}")
        m = n = 0
        sx = sy = 0.0
        for tag in self.order[:t]:
            if tag == CONTROL:
                sx += self.x[m]
                m += 1
            else:
                sy += self.y[n]
                n += 1
        return m, n, sx, sy


@dataclass(frozen=True)
class GridMixture:
    """Discrete mixing distribution over effect sizes; weights may sum to less than 1.

    A sub-probability mixture only lowers the starting value of the
    likelihood-ratio process, which keeps the optional-stopping bound intact.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise InvalidInputError("mixture must have at least one atom")
        total = 0.0
        for theta, weight in self.atoms:
            if not math.isfinite(theta) or not math.isfinite(weight) or weight < 0:
                raise InvalidInputError(f"bad atom ({theta!r}, {weight!r})")
            total += weight
        if total > 1.0 + 1e-12:
            raise InvalidInputError(f"atom weights must sum to at most 1, got {total}")

    @property
    def total_weight(self) -> float:
        return sum(w for _, w in self.atoms)


@dataclass(frozen=True)
class PluginLr:
    """Likelihood ratio computed with an estimated pooled rate.

    ``type1_guaranteed`` is always ``False``: substituting the estimate for
    the true pooled rate voids the supermartingale argument, so the value
    may inflate the false-positive rate.
    """

    value: float
    p_bar_estimate: float
    type1_guaranteed: bool = False


def gaussian_grid_mixture(
    tau_sq: float, p_bar: float, n_atoms: int = 201, span: float = 6.0
) -> GridMixture:
    """Discretize N(0, tau_sq) onto an evenly spaced atom grid over +-span*tau.

    Weights are the normalized density over the full grid; atoms whose
    implied arm probabilities leave (0,1) for the given ``p_bar`` are then
    dropped without renormalizing, leaving a sub-probability mixture.
    """
    if not math.isfinite(tau_sq) or tau_sq <= 0:
        raise InvalidInputError(f"tau_sq must be finite and > 0, got {tau_sq!r}")
    if not 0 < p_bar < 1:
        raise InvalidInputError(f"p_bar must be in (0, 1), got {p_bar}")
    if n_atoms < 1:
        raise InvalidInputError(f"n_atoms must be >= 1, got {n_atoms}")
    tau = math.sqrt(tau_sq)
    thetas = np.linspace(-span * tau, span * tau, n_atoms)
    density = np.exp(-0.5 * (thetas / tau) ** 2)
    weights = density / density.sum()
    atoms = tuple(
        (float(theta), float(weight))
        for theta, weight in zip(thetas, weights)
        if 0.0 < p_bar - theta / 2.0 < 1.0 and 0.0 < p_bar + theta / 2.0 < 1.0
    )
    if not atoms:
        raise InvalidInputError("every atom is invalid for the given p_bar")
    return GridMixture(atoms=atoms)


def atom_arm_probabilities(
    mixture: GridMixture, p_bar: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-atom arm probabilities ``(p0, p1, weights)``; errors on an invalid atom."""
    if not 0 < p_bar < 1:
        raise InvalidInputError(f"p_bar must be in (0, 1), got {p_bar}")
    thetas = np.array([theta for theta, _ in mixture.atoms])
    weights = np.array([weight for _, weight in mixture.atoms])
    p0 = p_bar - thetas / 2.0
    p1 = p_bar + thetas / 2.0
    bad = (p0 <= 0.0) | (p0 >= 1.0) | (p1 <= 0.0) | (p1 >= 1.0)
    if np.any(bad):
        theta_bad = thetas[bad][0]
        raise InvalidInputError(
            f"atom theta={theta_bad} implies an arm probability outside (0,1) for p_bar={p_bar}"
        )
    return p0, p1, weights


def _log_lr_from_counts(
    m: int, n: int, sx: float, sy: float, p_bar: float, mixture: GridMixture
) -> tuple[np.ndarray, np.ndarray]:
    """Per-atom log LR of the observed counts against the pooled null, plus weights."""
    p0, p1, weights = atom_arm_probabilities(mixture, p_bar)
    log_lr = (
        sx * np.log(p0 / p_bar)
        + (m - sx) * np.log((1.0 - p0) / (1.0 - p_bar))
        + sy * np.log(p1 / p_bar)
        + (n - sy) * np.log((1.0 - p1) / (1.0 - p_bar))
    )
    return log_lr, weights


_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


def _log_mix(log_lr: np.ndarray, weights: np.ndarray) -> float:
    # Factor out the largest atom so a single dominant atom cannot overflow.
    peak = float(np.max(log_lr))
    with np.errstate(under="ignore"):
        mass = float(np.sum(weights * np.exp(log_lr - peak)))
    if mass <= 0.0:
        return -math.inf
    return peak + math.log(mass)


def _mix(log_lr: np.ndarray, weights: np.ndarray) -> float:
    log_value = _log_mix(log_lr, weights)
    if log_value == -math.inf:
        return 0.0
    if log_value > _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(log_value)


def log_exact_mixture_lr_bernoulli(
    streams: PairedStreams, t: int, p_bar: float, mixture: GridMixture
) -> float:
    """Log of :func:`exact_mixture_lr_bernoulli` (never overflows)."""
    m, n, sx, sy = streams.prefix_counts(t)
    log_lr, weights = _log_lr_from_counts(m, n, sx, sy, p_bar, mixture)
    return _log_mix(log_lr, weights)


def exact_mixture_lr_bernoulli(
    streams: PairedStreams, t: int, p_bar: float, mixture: GridMixture
) -> float:
    """Mixture of exact Bernoulli likelihood ratios over the first ``t`` arrivals.

    Each atom theta contributes the likelihood of the data under arms
    ``(p_bar - theta/2, p_bar + theta/2)`` divided by its likelihood under
    the pooled null where both arms are Bernoulli(p_bar).  At ``t == 0`` the
    value is the total mixture weight.
    """
    m, n, sx, sy = streams.prefix_counts(t)
    log_lr, weights = _log_lr_from_counts(m, n, sx, sy, p_bar, mixture)
    return _mix(log_lr, weights)


def plugin_mixture_lr(streams: PairedStreams, t: int, mixture: GridMixture) -> PluginLr:
    """Exact-form mixture LR with the pooled rate replaced by its estimate.

    ``p_bar`` is estimated as the average of the two stream means over the
    first ``t`` arrivals, so both streams must be nonempty by then.  Atoms
    invalid at the *estimated* rate are dropped without renormalizing for
    this evaluation, mirroring the construction-time convention.
    """
    m, n, sx, sy = streams.prefix_counts(t)
    if m == 0 or n == 0:
        raise InvalidStateError(f"both streams must be nonempty at t={t} (m={m}, n={n})")
    p_bar_hat = (sx / m + sy / n) / 2.0
    kept = tuple(
        (theta, weight)
        for theta, weight in mixture.atoms
        if 0.0 < p_bar_hat - theta / 2.0 < 1.0 and 0.0 < p_bar_hat + theta / 2.0 < 1.0
    )
    if not kept:
        return PluginLr(value=0.0, p_bar_estimate=p_bar_hat)
    log_lr, weights = _log_lr_from_counts(m, n, sx, sy, p_bar_hat, GridMixture(kept))
    return PluginLr(value=_mix(log_lr, weights), p_bar_estimate=p_bar_hat)


def allocate_next(
    policy: AllocationPolicy, history: PairedStreams, rng: np.random.Generator
) -> str:
    """Choose the next arm from past observations and fresh randomness only."""
    if isinstance(policy, Alternating):
        return CONTROL if history.total % 2 == 0 else TREATMENT
    if isinstance(policy, IidRandom):
        return CONTROL if rng.random() < policy.weight else TREATMENT
    if isinstance(policy, GreedyMean):
        if policy.epsilon > 0 and rng.random() < policy.epsilon:
            return CONTROL if rng.random() < 0.5 else TREATMENT
        mean_x = sum(history.x) / len(history.x) if history.x else 0.0
        mean_y = sum(history.y) / len(history.y) if history.y else 0.0
        return TREATMENT if mean_y > mean_x else CONTROL
    raise InvalidInputError(f"unknown policy {policy!r}")


class ExactLrProcess:
    """Incremental per-arrival accumulation of the exact mixture likelihood ratio.

    Maintains per-atom log likelihood ratios so each arrival costs one
    vectorized update; agrees with the from-scratch computation at every
    prefix (tested).
    """

    def __init__(self, p_bar: float, mixture: GridMixture) -> None:
        p0, p1, weights = atom_arm_probabilities(mixture, p_bar)
        self._weights = weights
        # log-factor lookup: [arm][observed value] -> per-atom increment
        self._factors = {
            CONTROL: (np.log((1.0 - p0) / (1.0 - p_bar)), np.log(p0 / p_bar)),
            TREATMENT: (np.log((1.0 - p1) / (1.0 - p_bar)), np.log(p1 / p_bar)),
        }
        self._log_lr = np.zeros(len(weights))
        self.t = 0

    def observe(self, arm: str, value: float) -> float:
        """Fold in one observation and return the updated mixture LR."""
        if arm not in self._factors:
            raise InvalidInputError(f"unknown arm {arm!r}")
        if value not in (0.0, 1.0, 0, 1):
            raise InvalidInputError(f"Bernoulli observations must be 0 or 1, got {value!r}")
        self._log_lr = self._log_lr + self._factors[arm][int(value)]
        self.t += 1
        return self.value

    @property
    def value(self) -> float:
        return _mix(self._log_lr, self._weights)

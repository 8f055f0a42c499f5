"""Experiment design helpers: mixture tuning, sample sizing, asymptotic constants.

The mixture variance controls how quickly the sequential test accumulates
evidence.  Against a normal prior over effect sizes the optimal variance has
a closed form; for general exponential families and mixture families a
numerically optimized form is provided.  The module also carries the
fixed-horizon sample-size calculator and the asymptotic relative-efficiency
constants used to translate a fixed-horizon design into a sequential
truncation horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, optimize, stats

from .errors import InvalidInputError, NumericError

__all__ = [
    "PriorSpec",
    "ExpFamilySpec",
    "TruncationSet",
    "normal_unit_variance_family",
    "optimal_tau_normal",
    "optimal_mixture_general",
    "fixed_horizon_sample_size",
    "asymptotic_power_constants",
    "msprt_truncation_horizon",
    "expected_runtime_leading",
]


@dataclass(frozen=True)
class PriorSpec:
    """Zero-mean normal prior over the true effect size."""

    variance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.variance) or self.variance <= 0:
            raise InvalidInputError(f"prior variance must be finite and > 0, got {self.variance!r}")


@dataclass(frozen=True)
class ExpFamilySpec:
    """One-parameter exponential family in its natural parameterization.

    ``log_partition`` is psi(theta); ``kl_to_null`` is the KL divergence of
    the theta model from the null, ``I(theta) = theta * psi'(theta) - psi(theta)``.
    """

    log_partition: Callable[[float], float]
    kl_to_null: Callable[[float], float]


def normal_unit_variance_family() -> ExpFamilySpec:
    """Normal location family with unit variance: psi(theta) = theta^2 / 2 = I(theta)."""
    return ExpFamilySpec(
        log_partition=lambda theta: 0.5 * theta * theta,
        kl_to_null=lambda theta: 0.5 * theta * theta,
    )


@dataclass(frozen=True)
class TruncationSet:
    """Effect sizes detectable within a truncated horizon at level alpha.

    The boundary effect ``delta = sqrt(2 * log(1/alpha) / horizon_n)`` marks,
    for the unit-variance normal family, the edge of the region
    ``{theta : I(theta) >= log(1/alpha) / horizon_n}`` whose members the test
    can reject before the horizon runs out.
    """

    alpha: float
    horizon_n: int

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.horizon_n < 1:
            raise InvalidInputError(f"horizon_n must be >= 1, got {self.horizon_n}")

    @property
    def kl_threshold(self) -> float:
        return math.log(1.0 / self.alpha) / self.horizon_n

    @property
    def boundary_delta(self) -> float:
        return math.sqrt(2.0 * math.log(1.0 / self.alpha) / self.horizon_n)


def optimal_tau_normal(prior: PriorSpec, trunc: TruncationSet) -> float:
    """Closed-form mixture variance minimizing expected runtime against a normal prior.

    With ``b = delta / sigma_G`` (boundary effect in prior standard
    deviations),

        tau_sq* = sigma_G^2 * Phi(-b) / ( phi(b)/b - Phi(-b) )

    The denominator is positive for every b > 0 (the standard Mills-ratio
    inequality), tends to +inf as b -> 0 and to 0 as b -> inf, so tau_sq*
    sweeps (0, inf) monotonically in b.
    """
    sigma_g = math.sqrt(prior.variance)
    b = trunc.boundary_delta / sigma_g
    if b <= 0:
        raise InvalidInputError(f"boundary effect must be > 0, got b={b}")
    numerator = stats.norm.cdf(-b)
    denominator = stats.norm.pdf(b) / b - numerator
    if denominator <= 0 or not math.isfinite(denominator):
        raise NumericError(f"degenerate denominator {denominator!r} at b={b}")
    return prior.variance * numerator / denominator


PriorLike = Union[Callable[[float], float], Sequence[tuple[float, float]]]


def _detectable_boundaries(
    family: ExpFamilySpec, threshold: float, lo: float, hi: float
) -> list[float]:
    """Crossing points of I(theta) = threshold inside [lo, hi], found numerically."""
    grid = np.linspace(lo, hi, 4097)
    values = np.array([family.kl_to_null(t) - threshold for t in grid])
    crossings = []
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            crossings.append(float(grid[i]))
        elif a * b < 0:
            crossings.append(
                float(
                    optimize.brentq(
                        lambda t: family.kl_to_null(t) - threshold, grid[i], grid[i + 1]
                    )
                )
            )
    if values[-1] == 0.0:
        crossings.append(float(grid[-1]))
    return crossings


def optimal_mixture_general(
    prior: PriorLike,
    family: ExpFamilySpec,
    mixture_density: Callable[[float, float], float],
    trunc: TruncationSet,
    gamma_grid: Sequence[float],
    prior_sd: float | None = None,
    refine: bool = True,
) -> float:
    """Mixture parameter minimizing the expected-runtime proxy over a grid.

    The objective is

        J(gamma) = - E_prior[ 1{I(theta) >= log(1/alpha)/n} * log h_gamma(theta) / I(theta) ]

    i.e. the leading term of the expected runtime, restricted to the set of
    effects detectable before the truncation horizon.  ``prior`` is either a
    density callable (integrated by adaptive quadrature over +-8 prior
    standard deviations, which then requires ``prior_sd``) or a sequence of
    ``(theta, weight)`` atoms.  Grid ties resolve to the smaller gamma; with
    ``refine`` a golden-section pass sharpens an interior grid minimum.
    """
    gamma_grid = [float(g) for g in gamma_grid]
    if not gamma_grid or sorted(gamma_grid) != gamma_grid:
        raise InvalidInputError("gamma_grid must be a nonempty ascending sequence")
    threshold = trunc.kl_threshold

    if callable(prior):
        if prior_sd is None or not math.isfinite(prior_sd) or prior_sd <= 0:
            raise InvalidInputError("a density prior requires a positive prior_sd")
        lo, hi = -8.0 * prior_sd, 8.0 * prior_sd
        boundaries = _detectable_boundaries(family, threshold, lo, hi)

        def objective(gamma: float) -> float:
            def integrand(theta: float) -> float:
                kl = family.kl_to_null(theta)
                if kl < threshold:
                    return 0.0
                h = mixture_density(gamma, theta)
                if h <= 0:
                    return math.inf
                return -prior(theta) * math.log(h) / kl

            value, _ = integrate.quad(
                integrand, lo, hi, points=sorted(boundaries) or None, limit=400
            )
            return value

    else:
        atoms = [(float(t), float(w)) for t, w in prior]
        if not atoms or any(w < 0 for _, w in atoms):
            raise InvalidInputError("atom prior must be nonempty with nonnegative weights")

        def objective(gamma: float) -> float:
            total = 0.0
            for theta, weight in atoms:
                kl = family.kl_to_null(theta)
                if kl < threshold or weight == 0.0:
                    continue
                h = mixture_density(gamma, theta)
                if h <= 0:
                    return math.inf
                total -= weight * math.log(h) / kl
            return total

    values = [objective(g) for g in gamma_grid]
    if all(not math.isfinite(v) for v in values):
        raise NumericError("objective is non-finite on the whole gamma grid")
    best = min(range(len(gamma_grid)), key=lambda i: (values[i], gamma_grid[i]))
    best_gamma = gamma_grid[best]

    if refine and 0 < best < len(gamma_grid) - 1 and math.isfinite(values[best]):
        res = optimize.minimize_scalar(
            objective,
            bracket=None,
            bounds=(gamma_grid[best - 1], gamma_grid[best + 1]),
            method="bounded",
            options={"xatol": 1e-10 * max(1.0, best_gamma)},
        )
        if res.success and math.isfinite(res.fun) and res.fun <= values[best]:
            best_gamma = float(res.x)
    return best_gamma


def fixed_horizon_sample_size(
    mde: float, alpha: float, beta: float, variance_per_obs: float
) -> int:
    """Classical two-sided fixed-horizon sample size.

        n = ceil( (z_{1-alpha/2} + z_{1-beta})^2 * variance / mde^2 )
    """
    if not math.isfinite(mde) or mde == 0:
        raise InvalidInputError(f"mde must be finite and nonzero, got {mde!r}")
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    if not 0 < beta < 1:
        raise InvalidInputError(f"beta must be in (0, 1), got {beta}")
    if not math.isfinite(variance_per_obs) or variance_per_obs <= 0:
        raise InvalidInputError(
            f"variance_per_obs must be finite and > 0, got {variance_per_obs!r}"
        )
    z_alpha = stats.norm.ppf(1.0 - alpha / 2.0)
    z_beta = stats.norm.ppf(1.0 - beta)
    return int(math.ceil((z_alpha + z_beta) ** 2 * variance_per_obs / (mde * mde)))


def asymptotic_power_constants(alpha: float, abs_tol: float = 1e-10) -> tuple[float, float]:
    """Relative-efficiency constants of the fixed-horizon and sequential tests.

        C_f(alpha) = int_0^1 Phi_bar( sqrt(log(1/alpha)) * (x - 1) ) dx
        C_S(alpha) = int_0^1 Phi_bar( sqrt(log(1/alpha)/2) * (x^2 - 1) ) dx

    Both lie strictly inside (0, 1), tend to 1/2 as alpha -> 1 and to 1 as
    alpha -> 0 (so they are decreasing in alpha).  Evaluated by adaptive
    quadrature with a convergence check.
    """
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    if not 0 < abs_tol <= 1e-6:
        raise InvalidInputError(f"abs_tol must be in (0, 1e-6], got {abs_tol}")
    log_inv = math.log(1.0 / alpha)
    scale_f = math.sqrt(log_inv)
    scale_s = math.sqrt(log_inv / 2.0)

    def upper_tail(z: float) -> float:
        return 0.5 * math.erfc(z / math.sqrt(2.0))

    c_f, err_f = integrate.quad(lambda x: upper_tail(scale_f * (x - 1.0)), 0.0, 1.0, epsabs=abs_tol / 10.0)
    c_s, err_s = integrate.quad(lambda x: upper_tail(scale_s * (x * x - 1.0)), 0.0, 1.0, epsabs=abs_tol / 10.0)
    if err_f > abs_tol or err_s > abs_tol:
        raise NumericError(f"power-constant quadrature above abs_tol: {err_f:.3g}, {err_s:.3g}")
    return c_f, c_s


def msprt_truncation_horizon(n_fixed: int, alpha: float) -> int:
    """Sequential truncation horizon matching a fixed-horizon design's asymptotic power.

        n_S = ceil( (C_S / C_f)^2 * n_fixed )
    """
    if n_fixed < 1:
        raise InvalidInputError(f"n_fixed must be >= 1, got {n_fixed}")
    c_f, c_s = asymptotic_power_constants(alpha)
    return int(math.ceil((c_s / c_f) ** 2 * n_fixed))


def expected_runtime_leading(theta: float, alpha: float) -> float:
    """Leading terms of the expected stopping time at a fixed alternative.

        E[T] ~ ( 2*log(1/alpha) + log(log(1/alpha)) ) / theta^2

    Requires alpha < 1/e so the iterated logarithm is positive.
    """
    if not math.isfinite(theta) or theta == 0:
        raise InvalidInputError(f"theta must be finite and nonzero, got {theta!r}")
    if not 0 < alpha < 1.0 / math.e:
        raise InvalidInputError(f"alpha must be in (0, 1/e) for the iterated log, got {alpha}")
    log_inv = math.log(1.0 / alpha)
    return (2.0 * log_inv + math.log(log_inv)) / (theta * theta)

"""Scenario and stopping-rule definitions plus the built-in scenario registry.

A scenario pins every knob a simulation needs (seed, replication count,
horizon, level, model parameters) so that the same scenario always produces
the same report.  Stopping rules describe the data-dependent times at which
a monitoring analyst acts: crossing a p-value threshold, a fixed sample
size, post-hoc power gating, or conditions on a family of hypotheses.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from ..allocation import AllocationPolicy, Alternating, GreedyMean, IidRandom
from ..errors import InvalidInputError

__all__ = [
    "FirstCrossing",
    "FixedN",
    "PostHocPower",
    "AtXRejections",
    "OnHypothesis",
    "AnyOfSet",
    "AllOfSet",
    "StoppingRuleSpec",
    "SimScenario",
    "rep_rng",
    "builtin_scenarios",
    "scenario_from_dict",
]


@dataclass(frozen=True)
class FirstCrossing:
    """Stop the first time the monitored p-value is at or below ``alpha``."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise InvalidInputError(f"alpha must be in (0, 1], got {self.alpha}")


@dataclass(frozen=True)
class FixedN:
    """Act at a deterministic sample size."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class PostHocPower:
    """Reject when the naive p-value clears ``alpha`` and the sample size
    already exceeds the fixed-horizon requirement at the observed effect."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise InvalidInputError(f"beta must be in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class AtXRejections:
    """Stop the first time at least ``x`` hypotheses are rejected by the monitor."""

    x: int

    def __post_init__(self) -> None:
        if self.x < 1:
            raise InvalidInputError(f"x must be >= 1, got {self.x}")


@dataclass(frozen=True)
class OnHypothesis:
    """Stop when hypothesis ``k`` (0-based) first crosses the monitoring level."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise InvalidInputError(f"k must be >= 0, got {self.k}")


@dataclass(frozen=True)
class AnyOfSet:
    """Stop when any hypothesis in the set crosses the monitoring level."""

    hypotheses: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.hypotheses or any(k < 0 for k in self.hypotheses):
            raise InvalidInputError("hypotheses must be a nonempty tuple of indices >= 0")


@dataclass(frozen=True)
class AllOfSet:
    """Stop when every hypothesis in the set has crossed the monitoring level."""

    hypotheses: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.hypotheses or any(k < 0 for k in self.hypotheses):
            raise InvalidInputError("hypotheses must be a nonempty tuple of indices >= 0")


StoppingRuleSpec = Union[
    FirstCrossing, FixedN, PostHocPower, AtXRejections, OnHypothesis, AnyOfSet, AllOfSet
]

_RULE_TYPES = {
    "first-crossing": FirstCrossing,
    "fixed-n": FixedN,
    "post-hoc-power": PostHocPower,
    "at-x-rejections": AtXRejections,
    "on-hypothesis": OnHypothesis,
    "any-of-set": AnyOfSet,
    "all-of-set": AllOfSet,
}

_POLICY_TYPES = {
    "alternating": Alternating,
    "iid-random": IidRandom,
    "greedy-mean": GreedyMean,
}


def _variant_name(obj, table: dict) -> str:
    for name, cls in table.items():
        if isinstance(obj, cls):
            return name
    raise InvalidInputError(f"unknown variant {obj!r}")


def _rule_to_dict(rule: StoppingRuleSpec) -> dict:
    name = _variant_name(rule, _RULE_TYPES)
    payload = {"variant": name}
    for key, value in vars(rule).items():
        payload[key] = list(value) if isinstance(value, tuple) else value
    return payload


def _rule_from_dict(payload: Mapping) -> StoppingRuleSpec:
    kind = payload.get("variant")
    if kind not in _RULE_TYPES:
        raise InvalidInputError(f"unknown stopping rule variant {kind!r}")
    kwargs = {k: v for k, v in payload.items() if k != "variant"}
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
    return _RULE_TYPES[kind](**kwargs)


def _policy_to_dict(policy: AllocationPolicy) -> dict:
    name = _variant_name(policy, _POLICY_TYPES)
    payload = {"variant": name}
    payload.update(vars(policy))
    return payload


def _policy_from_dict(payload: Mapping) -> AllocationPolicy:
    kind = payload.get("variant")
    if kind not in _POLICY_TYPES:
        raise InvalidInputError(f"unknown policy variant {kind!r}")
    kwargs = {k: v for k, v in payload.items() if k != "variant"}
    return _POLICY_TYPES[kind](**kwargs)


@dataclass(frozen=True)
class SimScenario:
    """Fully pinned simulation configuration.

    ``params`` carries simulation-specific knobs (checkpoint grids, s grids,
    selection sets, ...) and must stay JSON-serializable; ``kind`` selects
    which simulation consumes the scenario.
    """

    name: str
    kind: str
    seed: int
    reps: int
    horizon: int
    alpha: float = 0.05
    theta: float = 0.0
    sigma_sq: float = 1.0
    tau_sq: float = 1.0
    prior_variance: float | None = None
    m: int | None = None
    m0: int | None = None
    policy: AllocationPolicy | None = None
    stopping_rule: StoppingRuleSpec | None = None
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidInputError("scenario name must be nonempty")
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidInputError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.reps < 1:
            raise InvalidInputError(f"reps must be >= 1, got {self.reps}")
        if self.horizon < 1:
            raise InvalidInputError(f"horizon must be >= 1, got {self.horizon}")
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if not math.isfinite(self.theta):
            raise InvalidInputError(f"theta must be finite, got {self.theta!r}")
        if self.sigma_sq <= 0 or self.tau_sq < 0:
            raise InvalidInputError("sigma_sq must be > 0 and tau_sq >= 0")
        if self.m is not None and self.m < 1:
            raise InvalidInputError(f"m must be >= 1, got {self.m}")
        if self.m0 is not None and (self.m is None or not 0 <= self.m0 <= self.m):
            raise InvalidInputError("m0 requires 0 <= m0 <= m")
        if (
            isinstance(self.stopping_rule, AtXRejections)
            and self.m is not None
            and self.stopping_rule.x > self.m
        ):
            raise InvalidInputError("AtXRejections.x must be <= m")

    def to_dict(self) -> dict:
        payload = {
            "name": self.name,
            "kind": self.kind,
            "seed": self.seed,
            "reps": self.reps,
            "horizon": self.horizon,
            "alpha": self.alpha,
            "theta": self.theta,
            "sigma_sq": self.sigma_sq,
            "tau_sq": self.tau_sq,
            "prior_variance": self.prior_variance,
            "m": self.m,
            "m0": self.m0,
            "policy": _policy_to_dict(self.policy) if self.policy else None,
            "stopping_rule": _rule_to_dict(self.stopping_rule) if self.stopping_rule else None,
            "params": dict(self.params),
        }
        return payload


def scenario_from_dict(payload: Mapping) -> SimScenario:
    data = dict(payload)
    policy = data.get("policy")
    rule = data.get("stopping_rule")
    known = {
        "name", "kind", "seed", "reps", "horizon", "alpha", "theta", "sigma_sq",
        "tau_sq", "prior_variance", "m", "m0", "policy", "stopping_rule", "params",
    }
    unknown = set(data) - known
    if unknown:
        raise InvalidInputError(f"unknown scenario fields: {sorted(unknown)}")
    for required in ("name", "kind", "seed", "reps", "horizon"):
        if required not in data:
            raise InvalidInputError(f"scenario is missing required field {required!r}")
    return SimScenario(
        name=data["name"],
        kind=data["kind"],
        seed=int(data["seed"]),
        reps=int(data["reps"]),
        horizon=int(data["horizon"]),
        alpha=float(data.get("alpha", 0.05)),
        theta=float(data.get("theta", 0.0)),
        sigma_sq=float(data.get("sigma_sq", 1.0)),
        tau_sq=float(data.get("tau_sq", 1.0)),
        prior_variance=data.get("prior_variance"),
        m=data.get("m"),
        m0=data.get("m0"),
        policy=_policy_from_dict(policy) if policy else None,
        stopping_rule=_rule_from_dict(rule) if rule else None,
        params=dict(data.get("params", {})),
    )


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def rep_rng(seed: int, scenario_name: str, rep: int) -> np.random.Generator:
    """Counter-based per-replication generator.

    Seeding with ``(seed, hash(scenario name), rep index)`` makes every
    replication's stream independent of execution order and worker layout:
    rep 17 draws the same numbers whether it runs first, last, or on another
    worker.
    """
    return np.random.default_rng(np.random.SeedSequence((seed, _name_key(scenario_name), rep)))


def builtin_scenarios() -> dict[str, SimScenario]:
    """Named default scenarios, addressable from the command line."""
    scenarios = [
        SimScenario(
            name="peeking-naive", kind="peeking", seed=20260814, reps=2000,
            horizon=10_000, alpha=0.05,
            params={"policy": "naive", "checkpoints": [10, 100, 1000, 10_000]},
        ),
        SimScenario(
            name="peeking-posthoc", kind="peeking", seed=20260814, reps=2000,
            horizon=10_000, alpha=0.05,
            stopping_rule=PostHocPower(alpha=0.05, beta=0.2),
            params={"policy": "posthoc", "checkpoints": [10, 100, 1000, 10_000]},
        ),
        SimScenario(
            name="always-valid", kind="av-validity", seed=20260814, reps=5000,
            horizon=10_000, alpha=0.05, tau_sq=1.0,
            params={"s_grid": [0.01, 0.05, 0.1]},
        ),
        SimScenario(
            name="power-one", kind="power", seed=20260814, reps=2000,
            horizon=10_000, alpha=0.05, theta=0.5, tau_sq=1.0,
        ),
        SimScenario(
            name="power-null", kind="power", seed=20260814, reps=2000,
            horizon=10_000, alpha=0.05, theta=0.0, tau_sq=1.0,
        ),
        SimScenario(
            name="runtime-vs-fixed", kind="runtime-vs-fixed", seed=20260814,
            reps=2000, horizon=10_000, alpha=0.1, tau_sq=1.0,
            params={"assumed_mde": 0.3, "misspec_factor": 1.0, "beta": 0.2},
        ),
        SimScenario(
            name="runtime-vs-fixed-misspec", kind="runtime-vs-fixed", seed=20260814,
            reps=2000, horizon=10_000, alpha=0.1, tau_sq=1.0,
            params={"assumed_mde": 0.3, "misspec_factor": 2.0, "beta": 0.2},
        ),
        SimScenario(
            name="runtime-vs-fixed-null", kind="runtime-vs-fixed", seed=20260814,
            reps=2000, horizon=10_000, alpha=0.1, tau_sq=1.0,
            params={"assumed_mde": 0.3, "misspec_factor": 0.0, "beta": 0.2},
        ),
        SimScenario(
            name="tau-robustness", kind="tau-robustness", seed=20260814, reps=2000,
            horizon=10_000, alpha=0.05, prior_variance=1.0,
            params={"r_grid": [1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0]},
        ),
        SimScenario(
            name="seq-fdr", kind="seq-fdr", seed=20260814, reps=2000, horizon=1000,
            alpha=0.1, m=20, m0=10, stopping_rule=AtXRejections(x=5),
            params={"theta_alt": 0.5},
        ),
        SimScenario(
            name="seq-fdr-fixed-n", kind="seq-fdr", seed=20260814, reps=2000,
            horizon=1000, alpha=0.1, m=20, m0=10, stopping_rule=FixedN(n=300),
            params={"theta_alt": 0.5},
        ),
        SimScenario(
            name="seq-fcr", kind="seq-fcr", seed=20260814, reps=2000, horizon=1000,
            alpha=0.1, m=20, m0=10, stopping_rule=AtXRejections(x=5),
            params={"theta_alt": 0.5, "selection": [0, 10]},
        ),
        SimScenario(
            name="bandit-martingale", kind="bandit", seed=20260814, reps=5000,
            horizon=500, alpha=0.05, theta=0.0, policy=GreedyMean(epsilon=0.1),
            # mixture_tau_sq * horizon < 1 keeps the LR's second moment finite,
            # so the Monte Carlo mean at the last checkpoint concentrates and
            # the martingale-mean band check is well powered
            params={"p_bar": 0.5, "mixture_tau_sq": 0.0015, "checkpoints": [100, 500]},
        ),
    ]
    return {scenario.name: scenario for scenario in scenarios}

"""Streaming A/B-test inference with always-valid p-values.

The engine maintains a p-value process and confidence sequences that remain
valid under continuous monitoring and optional stopping; design helps pick
the mixture variance and compare runtimes against fixed-horizon tests;
multitest corrects families of streaming experiments; allocation extends the
likelihood-ratio martingale to adaptive (bandit) designs; simlab validates
all of the guarantees by seeded Monte Carlo; service and cli expose the
engine as a durable HTTP service and a command-line tool.
"""

from . import allocation, design, engine, multitest, simlab
from .engine import (
    CONTROL,
    TREATMENT,
    AvState,
    BernoulliTwoStream,
    DecisionOutcome,
    Interval,
    MixtureSpec,
    NormalKnownVariance,
    TwoStreamStats,
    av_ci_half_width,
    av_ci_interval,
    chance_to_beat,
    decide,
    initial_state,
    log_mixture_lr_normal,
    mixture_lr_normal,
    pvalue_from_ci_family,
    update_state,
)
from .errors import (
    ConflictError,
    InvalidInputError,
    InvalidStateError,
    NotFoundError,
    NumericError,
)

__version__ = "0.1.0"

__all__ = [
    "allocation",
    "design",
    "engine",
    "multitest",
    "simlab",
    "CONTROL",
    "TREATMENT",
    "AvState",
    "BernoulliTwoStream",
    "DecisionOutcome",
    "Interval",
    "MixtureSpec",
    "NormalKnownVariance",
    "TwoStreamStats",
    "av_ci_half_width",
    "av_ci_interval",
    "chance_to_beat",
    "decide",
    "initial_state",
    "log_mixture_lr_normal",
    "mixture_lr_normal",
    "pvalue_from_ci_family",
    "update_state",
    "ConflictError",
    "InvalidInputError",
    "InvalidStateError",
    "NotFoundError",
    "NumericError",
    "__version__",
]

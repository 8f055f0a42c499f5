"""Multiple-testing corrections over a vector of always-valid p-values.

Because each always-valid p-value is super-uniform at any stopping time, the
classical corrections below keep their guarantees when applied at a
data-dependent stopping time: Bonferroni controls family-wise error for
arbitrary dependence, step-up BH controls FDR when the streams are
independent and the stopping rule does not peek across hypotheses in
pathological ways, and the harmonically-penalized BH variant controls FDR
under arbitrary dependence and arbitrary stopping.  Rejection sets use
0-based indices into the input vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "CorrectionProcedure",
    "RejectionSet",
    "AdjustedCiLevels",
    "bonferroni",
    "bh_independent",
    "bh_general",
    "qvalues",
    "fcr_adjusted_levels",
    "harmonic_number",
]


class CorrectionProcedure(str, enum.Enum):
    BONFERRONI = "bonferroni"
    BH_INDEPENDENT = "bh-independent"
    BH_GENERAL = "bh-general"


@dataclass(frozen=True)
class RejectionSet:
    """Indices of rejected hypotheses (0-based) out of ``m`` tested."""

    indices: frozenset[int]
    m: int

    @property
    def count(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AdjustedCiLevels:
    """Per-hypothesis confidence levels adjusted for selection.

    ``selected`` holds the indices the step-up procedure rejected; their
    intervals are reported at ``selected_level``, all others at the slightly
    stricter ``unselected_level``.  ``clamped`` flags that an adjusted level
    fell outside (0, 1) and was pulled back into the open interval.
    """

    levels: tuple[float, ...]
    selected: frozenset[int]
    selected_level: float
    unselected_level: float
    clamped: bool


def _as_pvector(p_values: Sequence[float]) -> np.ndarray:
    p = np.asarray(list(p_values), dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError("p_values must be a nonempty 1-d sequence")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("p_values must lie in [0, 1]")
    return p


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")


def harmonic_number(m: int) -> float:
    return float(np.sum(1.0 / np.arange(1, m + 1)))


def bonferroni(p_values: Sequence[float], alpha: float) -> RejectionSet:
    """Reject every hypothesis with ``p_i <= alpha / m``; FWER <= alpha always."""
    p = _as_pvector(p_values)
    _check_alpha(alpha)
    m = p.size
    indices = frozenset(int(i) for i in np.flatnonzero(p <= alpha / m))
    return RejectionSet(indices=indices, m=m)


def _step_up(p: np.ndarray, thresholds: np.ndarray) -> frozenset[int]:
    # Stable sort: equal p-values keep input order, making rejection sets
    # reproducible for tied inputs.
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    satisfied = np.flatnonzero(sorted_p <= thresholds)
    if satisfied.size == 0:
        return frozenset()
    j_max = int(satisfied[-1])
    return frozenset(int(i) for i in order[: j_max + 1])


def bh_independent(p_values: Sequence[float], alpha: float) -> RejectionSet:
    """Benjamini-Hochberg step-up: largest j with ``p_(j) <= alpha * j / m``."""
    p = _as_pvector(p_values)
    _check_alpha(alpha)
    m = p.size
    thresholds = alpha * np.arange(1, m + 1) / m
    return RejectionSet(indices=_step_up(p, thresholds), m=m)


def bh_general(p_values: Sequence[float], alpha: float) -> RejectionSet:
    """BH with harmonic penalty: thresholds ``alpha * j / (m * H_m)``.

    Valid under arbitrary dependence between the p-values, at the price of a
    rejection set never larger than plain BH.
    """
    p = _as_pvector(p_values)
    _check_alpha(alpha)
    m = p.size
    thresholds = alpha * np.arange(1, m + 1) / (m * harmonic_number(m))
    return RejectionSet(indices=_step_up(p, thresholds), m=m)


def qvalues(
    p_values: Sequence[float], procedure: CorrectionProcedure | str
) -> tuple[float, ...]:
    """Smallest alpha at which each hypothesis would be rejected by ``procedure``.

    Thresholding the result at any alpha reproduces the procedure's rejection
    set exactly.  Bonferroni: ``min(p_i * m, 1)``; the BH variants use the
    reverse cumulative minimum of ``p_(j) * m / j`` over the sorted vector
    (times ``H_m`` for the general-dependence variant), all capped at 1.
    """
    p = _as_pvector(p_values)
    procedure = CorrectionProcedure(procedure)
    m = p.size
    if procedure is CorrectionProcedure.BONFERRONI:
        return tuple(float(q) for q in np.minimum(p * m, 1.0))
    factor = 1.0 if procedure is CorrectionProcedure.BH_INDEPENDENT else harmonic_number(m)
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, m + 1)
    scaled = p[order] * m * factor / ranks
    q_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    q = np.empty(m)
    q[order] = q_sorted
    return tuple(float(v) for v in q)


def fcr_adjusted_levels(
    p_values: Sequence[float], alpha: float, extra_selected: Iterable[int] = ()
) -> AdjustedCiLevels:
    """Selection-adjusted confidence levels for reporting intervals alongside BH.

    With ``R`` selected hypotheses out of ``m``, a selected hypothesis reports
    its interval at level ``1 - R * alpha / m`` and an unselected one at
    ``1 - (R + 1) * alpha / m``; the extra rejection charged to unselected
    hypotheses accounts for the selection the analyst might still make by
    looking at them.  Selection is the step-up rejection set united with
    ``extra_selected`` (hypotheses the caller always reports).  Levels are
    clamped into (0, 1) when alpha and R are large enough to push them out,
    and the clamping is flagged.
    """
    p = _as_pvector(p_values)
    _check_alpha(alpha)
    m = p.size
    extra = frozenset(int(i) for i in extra_selected)
    if any(not 0 <= i < m for i in extra):
        raise InvalidInputError("extra_selected indices out of range")
    selected = bh_independent(p, alpha).indices | extra
    r = len(selected)
    eps = 1e-12
    clamped = False

    def clamp(level: float) -> float:
        # Only the low side is reachable for alpha < 1 (all m selected and
        # alpha*(m+1) >= m pushes the unselected level to or below zero).
        # A selected level of exactly 1.0 with zero rejections is vacuous and
        # never assigned, so it is left alone.
        nonlocal clamped
        if level <= 0.0:
            clamped = True
            return eps
        return level

    level_selected = clamp(1.0 - r * alpha / m)
    level_unselected = clamp(1.0 - (r + 1) * alpha / m)
    levels = tuple(level_selected if i in selected else level_unselected for i in range(m))
    return AdjustedCiLevels(
        levels=levels,
        selected=selected,
        selected_level=level_selected,
        unselected_level=level_unselected,
        clamped=clamped,
    )

"""Durable experiment store: write-ahead event log, snapshots, and replay.

Each experiment owns a directory under the store's data directory holding an
append-only JSONL event log (``wal.jsonl``) and a periodically refreshed
``snapshot.json`` used to shorten recovery.  Every mutation validates first,
appends its event (with an fsync) second, and only then updates the
in-memory state, so a snapshot can never reflect an event that is absent
from the log.  Replaying the log therefore reproduces the live state
bit-for-bit; a torn final line (crash mid-write) is truncated with a
warning, while corruption earlier in the log is an error that names the
offending line.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .. import multitest
from ..engine import (
    AvState,
    BernoulliTwoStream,
    Interval,
    MixtureSpec,
    NormalKnownVariance,
    StreamModel,
    TwoStreamStats,
    chance_to_beat,
    initial_state,
    update_state,
)
from ..errors import ConflictError, InvalidInputError, InvalidStateError, NotFoundError

__all__ = [
    "ExperimentConfig",
    "ExperimentStore",
    "OVERVIEW_WARNING",
    "canonical_json",
    "model_from_dict",
    "model_to_dict",
    "parse_csv_observations",
]

log = logging.getLogger(__name__)

_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")
_SNAPSHOT_VERSION = 1

OVERVIEW_WARNING = (
    "q-values and rejections are recomputed from the p-values current at "
    "request time; the family-level guarantees assume the stopping rule for "
    "the family was fixed in advance, so corrections requested at "
    "data-dependent times across experiments that stop heterogeneously "
    "should be read as descriptive."
)


def canonical_json(payload: object) -> str:
    """Stable JSON encoding: sorted keys, no whitespace, unicode passthrough."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Serialization helpers


def model_to_dict(model: StreamModel) -> dict:
    if isinstance(model, NormalKnownVariance):
        return {"kind": "normal", "sigma_sq": model.sigma_sq}
    if isinstance(model, BernoulliTwoStream):
        return {"kind": "bernoulli"}
    raise InvalidInputError(f"unknown model {model!r}")


def model_from_dict(payload: Mapping) -> StreamModel:
    kind = payload.get("kind")
    if kind == "normal":
        if "sigma_sq" not in payload:
            raise InvalidInputError("normal model requires sigma_sq")
        return NormalKnownVariance(sigma_sq=float(payload["sigma_sq"]))
    if kind == "bernoulli":
        return BernoulliTwoStream()
    raise InvalidInputError(f"model kind must be 'normal' or 'bernoulli', got {kind!r}")


def _interval_to_json(interval: Interval) -> list:
    lo = None if interval.lo == float("-inf") else interval.lo
    hi = None if interval.hi == float("inf") else interval.hi
    return [lo, hi]


def _interval_from_json(pair: Sequence) -> Interval:
    lo = float("-inf") if pair[0] is None else float(pair[0])
    hi = float("inf") if pair[1] is None else float(pair[1])
    return Interval(lo, hi)


def _level_key(level: float) -> str:
    return f"{level:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable per-experiment configuration persisted in the Created event."""

    id: str
    model: StreamModel
    mixture: MixtureSpec
    levels: tuple[float, ...]
    created_at: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not _ID_PATTERN.match(self.id):
            raise InvalidInputError(
                "experiment id must be 1-64 chars of [A-Za-z0-9._-] starting alphanumeric"
            )
        if not self.levels:
            raise InvalidInputError("levels must be nonempty")
        keys = set()
        for level in self.levels:
            if not 0 < level < 1:
                raise InvalidInputError(f"confidence levels must be in (0, 1), got {level}")
            keys.add(_level_key(level))
        if len(keys) != len(self.levels):
            raise InvalidInputError("confidence levels must be distinct")
        for key, value in dict(self.metadata).items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise InvalidInputError("metadata must map strings to strings")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "model": model_to_dict(self.model),
            "mixture": {"tau_sq": self.mixture.tau_sq, "center": self.mixture.center},
            "levels": list(self.levels),
            "created_at": self.created_at,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ExperimentConfig":
        unknown = set(payload) - {"id", "model", "mixture", "levels", "created_at", "metadata"}
        if unknown:
            raise InvalidInputError(f"unknown config fields: {sorted(unknown)}")
        if "id" not in payload or "model" not in payload or "mixture" not in payload:
            raise InvalidInputError("config requires id, model, and mixture")
        mixture = payload["mixture"]
        if "tau_sq" not in mixture:
            raise InvalidInputError("mixture requires tau_sq")
        return cls(
            id=str(payload["id"]),
            model=model_from_dict(payload["model"]),
            mixture=MixtureSpec(
                tau_sq=float(mixture["tau_sq"]), center=float(mixture.get("center", 0.0))
            ),
            levels=tuple(float(v) for v in payload.get("levels", (0.9, 0.95, 0.99))),
            created_at=str(payload.get("created_at", "")),
            metadata={str(k): str(v) for k, v in dict(payload.get("metadata", {})).items()},
        )


def parse_csv_observations(text: str) -> list[tuple[str, str, float]]:
    """Parse the ingestion CSV: header ``timestamp,variation,value``.

    Returns (timestamp, variation, value) rows; errors name the 1-based line.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != "timestamp,variation,value":
        raise InvalidInputError("line 1: header must be exactly 'timestamp,variation,value'")
    rows: list[tuple[str, str, float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InvalidInputError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        timestamp, variation, raw_value = (part.strip() for part in parts)
        try:
            value = float(raw_value)
        except ValueError as exc:
            raise InvalidInputError(f"line {lineno}: bad value {raw_value!r}") from exc
        rows.append((timestamp, variation, value))
    return rows


# ---------------------------------------------------------------------------
# In-memory experiment


class _Experiment:
    __slots__ = (
        "config",
        "state",
        "status",
        "last_seq",
        "decision",
        "history",
        "lock",
        "dirty_events",
        "dir",
    )

    def __init__(self, config: ExperimentConfig, directory: Path):
        self.config = config
        self.state: AvState = initial_state(config.levels)
        self.status = "running"
        self.last_seq = 0
        self.decision: dict | None = None
        self.history: list[dict] = []
        self.lock = threading.Lock()
        self.dirty_events = 0
        self.dir = directory

    @property
    def wal_path(self) -> Path:
        return self.dir / "wal.jsonl"

    @property
    def snapshot_path(self) -> Path:
        return self.dir / "snapshot.json"


# ---------------------------------------------------------------------------
# The store


class ExperimentStore:
    """Registry of experiments persisted under ``data_dir``, one per directory."""

    def __init__(self, data_dir: str | Path, snapshot_every: int = 64):
        if snapshot_every < 1:
            raise InvalidInputError("snapshot_every must be >= 1")
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self._experiments: dict[str, _Experiment] = {}
        for child in sorted(self._dir.iterdir()):
            if child.is_dir() and (child / "wal.jsonl").exists():
                exp = self._recover(child)
                self._experiments[exp.config.id] = exp

    # -- public API ---------------------------------------------------------

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._experiments)

    def create_experiment(self, config: ExperimentConfig) -> str:
        directory = self._dir / config.id
        with self._lock:
            if config.id in self._experiments or directory.exists():
                raise ConflictError(f"experiment {config.id!r} already exists")
            directory.mkdir(parents=True)
            exp = _Experiment(config, directory)
            self._experiments[config.id] = exp
        with exp.lock:
            self._append_and_apply(exp, "created", config.to_dict())
        return config.id

    def ingest_batch(self, experiment_id: str, rows: Sequence[tuple[str, str, float]]) -> dict:
        """Fold (timestamp, variation, value) rows into the experiment.

        Validation runs against a scratch state before anything is persisted,
        so a malformed row leaves both the log and the state untouched.
        """
        exp = self._get(experiment_id)
        with exp.lock:
            if exp.status != "running":
                raise ConflictError(f"experiment {experiment_id!r} is stopped")
            batch = [(variation, value) for _, variation, value in rows]
            update_state(exp.state, batch, exp.config.model, exp.config.mixture)
            payload = {"rows": [[ts, variation, value] for ts, variation, value in rows]}
            self._append_and_apply(exp, "observations", payload)
            return self._snapshot_locked(exp)

    def get_snapshot(self, experiment_id: str) -> dict:
        exp = self._get(experiment_id)
        with exp.lock:
            return self._snapshot_locked(exp)

    def get_history(self, experiment_id: str, after: int = 0) -> dict:
        exp = self._get(experiment_id)
        if after < 0:
            raise InvalidInputError("after must be >= 0")
        with exp.lock:
            events = [dict(row) for row in exp.history if row["seq"] > after]
            return {
                "experiment_id": experiment_id,
                "after": after,
                "as_of": exp.last_seq,
                "events": events,
            }

    def stop_experiment(
        self, experiment_id: str, alpha: float, actor: str = "", reason: str = ""
    ) -> dict:
        if not 0 < alpha < 1:
            raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
        exp = self._get(experiment_id)
        with exp.lock:
            if exp.status != "running":
                raise ConflictError(f"experiment {experiment_id!r} is already stopped")
            stop_seq = exp.last_seq + 1
            frozen = self._snapshot_locked(exp)
            frozen["status"] = "stopped"
            frozen["as_of"] = stop_seq
            decision = {
                "experiment_id": experiment_id,
                "stopped_at": stop_seq,
                "alpha": alpha,
                "rejected": exp.state.p_value <= alpha,
                "actor": str(actor),
                "reason": str(reason),
                "snapshot": frozen,
            }
            self._append_and_apply(exp, "stopped", decision)
            return dict(exp.decision or {})

    def overview(
        self,
        alpha: float,
        procedure: str = "bh-independent",
        fcr: bool = False,
        selection: Iterable[str] = (),
    ) -> dict:
        """Corrected cross-experiment table over the current p-values.

        Rows are ordered by experiment id.  With ``fcr`` set, each row also
        carries a selection-adjusted confidence level and the interval read
        from the experiment's stored level grid at the nearest level at or
        above the requirement (conservative); when even the highest stored
        level falls short the row is flagged ``ci_level_capped``.
        """
        if not 0 < alpha < 1:
            raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
        procedure = multitest.CorrectionProcedure(procedure)
        with self._lock:
            items = sorted(self._experiments.items())
        if not items:
            raise InvalidInputError("overview requires at least one experiment")
        ids = [experiment_id for experiment_id, _ in items]
        selection_ids = list(selection)
        unknown = [s for s in selection_ids if s not in ids]
        if unknown:
            raise NotFoundError(f"selection names unknown experiments: {unknown}")

        snapshots = []
        for _, exp in items:
            with exp.lock:
                snapshots.append(self._snapshot_locked(exp))
        p_vector = [snap["p_value"] for snap in snapshots]
        reject_fn = {
            multitest.CorrectionProcedure.BONFERRONI: multitest.bonferroni,
            multitest.CorrectionProcedure.BH_INDEPENDENT: multitest.bh_independent,
            multitest.CorrectionProcedure.BH_GENERAL: multitest.bh_general,
        }[procedure]
        rejected = reject_fn(p_vector, alpha).indices
        q_values = multitest.qvalues(p_vector, procedure)

        adjusted = None
        if fcr:
            extra = [ids.index(s) for s in selection_ids]
            adjusted = multitest.fcr_adjusted_levels(p_vector, alpha, extra_selected=extra)

        rows = []
        for i, snap in enumerate(snapshots):
            row = {
                "id": snap["id"],
                "status": snap["status"],
                "p_value": p_vector[i],
                "chance_to_beat": snap["chance_to_beat"],
                "q_value": q_values[i],
                "rejected": i in rejected,
                "ci_level": None,
                "ci": None,
                "ci_level_requested": None,
                "ci_level_capped": False,
                "selected": None,
            }
            if adjusted is not None:
                required = adjusted.levels[i]
                stored_levels = sorted(float(k) for k in snap["ci_by_level"])
                at_or_above = [lvl for lvl in stored_levels if lvl >= required - 1e-12]
                if at_or_above:
                    chosen = at_or_above[0]
                else:
                    chosen = stored_levels[-1]
                    row["ci_level_capped"] = True
                row["ci_level"] = chosen
                row["ci"] = snap["ci_by_level"][_level_key(chosen)]
                row["ci_level_requested"] = required
                row["selected"] = i in adjusted.selected
            rows.append(row)
        return {
            "alpha": alpha,
            "procedure": procedure.value,
            "fcr": fcr,
            "selection": selection_ids,
            "rows": rows,
            "warning": OVERVIEW_WARNING,
        }

    def flush(self) -> None:
        """Write a fresh snapshot file for every experiment."""
        with self._lock:
            experiments = list(self._experiments.values())
        for exp in experiments:
            with exp.lock:
                self._write_snapshot_locked(exp)

    # -- internals ----------------------------------------------------------

    def _get(self, experiment_id: str) -> _Experiment:
        with self._lock:
            exp = self._experiments.get(experiment_id)
        if exp is None:
            raise NotFoundError(f"unknown experiment {experiment_id!r}")
        return exp

    def _append_and_apply(self, exp: _Experiment, kind: str, payload: dict) -> None:
        seq = exp.last_seq + 1
        line = canonical_json({"seq": seq, "kind": kind, "payload": payload}) + "\n"
        with open(exp.wal_path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self._apply(exp, seq, kind, payload)
        exp.dirty_events += 1
        if exp.dirty_events >= self._snapshot_every:
            self._write_snapshot_locked(exp)

    def _apply(self, exp: _Experiment, seq: int, kind: str, payload: dict) -> None:
        if seq != exp.last_seq + 1:
            raise InvalidStateError(f"event seq {seq} does not follow {exp.last_seq}")
        if kind == "created":
            exp.state = initial_state(exp.config.levels)
        elif kind == "observations":
            if exp.status != "running":
                raise InvalidStateError("observations event after stop")
            batch = [(row[1], row[2]) for row in payload["rows"]]
            exp.state = update_state(exp.state, batch, exp.config.model, exp.config.mixture)
        elif kind == "stopped":
            if exp.status != "running":
                raise InvalidStateError("second stop event")
            exp.status = "stopped"
            exp.decision = dict(payload)
        else:
            raise InvalidStateError(f"unknown event kind {kind!r}")
        exp.last_seq = seq
        exp.history.append(self._history_row(exp))

    def _history_row(self, exp: _Experiment) -> dict:
        return {
            "seq": exp.last_seq,
            "p_value": exp.state.p_value,
            "chance_to_beat": chance_to_beat(exp.state.p_value),
            "ci_by_level": {
                _level_key(level): _interval_to_json(interval)
                for level, interval in sorted(exp.state.ci_by_level.items())
            },
            "total_observations": exp.state.updated_at,
        }

    def _snapshot_locked(self, exp: _Experiment) -> dict:
        stats = exp.state.stats
        ci = {
            _level_key(level): _interval_to_json(interval)
            for level, interval in sorted(exp.state.ci_by_level.items())
        }
        return {
            "id": exp.config.id,
            "status": exp.status,
            "as_of": exp.last_seq,
            "m": stats.m,
            "n": stats.n,
            "mean_control": stats.mean_x if stats.m else None,
            "mean_treatment": stats.mean_y if stats.n else None,
            "p_value": exp.state.p_value,
            "chance_to_beat": chance_to_beat(exp.state.p_value),
            "ci_by_level": ci,
            "empty_ci": any(iv.is_empty for iv in exp.state.ci_by_level.values()),
            "total_observations": exp.state.updated_at,
            "decision": dict(exp.decision) if exp.decision else None,
        }

    # -- persistence --------------------------------------------------------

    def _write_snapshot_locked(self, exp: _Experiment) -> None:
        stats = exp.state.stats
        payload = {
            "version": _SNAPSHOT_VERSION,
            "as_of": exp.last_seq,
            "status": exp.status,
            "config": exp.config.to_dict(),
            "stats": {
                "m": stats.m,
                "n": stats.n,
                "sum_x": stats.sum_x,
                "sum_y": stats.sum_y,
                "sum_sq_x": stats.sum_sq_x,
                "sum_sq_y": stats.sum_sq_y,
            },
            "log_lambda": exp.state.log_lambda,
            "p_value": exp.state.p_value,
            "updated_at": exp.state.updated_at,
            "ci_by_level": {
                _level_key(level): _interval_to_json(interval)
                for level, interval in sorted(exp.state.ci_by_level.items())
            },
            "decision": exp.decision,
            "history": exp.history,
        }
        tmp = exp.snapshot_path.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(payload), encoding="utf-8")
        os.replace(tmp, exp.snapshot_path)
        exp.dirty_events = 0

    def _load_snapshot(self, exp: _Experiment) -> int:
        """Restore state from snapshot.json if usable; returns the seq restored to."""
        path = exp.snapshot_path
        if not path.exists():
            return 0
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            if payload.get("version") != _SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {payload.get('version')!r}")
            config = ExperimentConfig.from_dict(payload["config"])
            stats_d = payload["stats"]
            state = AvState(
                stats=TwoStreamStats(
                    m=int(stats_d["m"]),
                    n=int(stats_d["n"]),
                    sum_x=float(stats_d["sum_x"]),
                    sum_y=float(stats_d["sum_y"]),
                    sum_sq_x=float(stats_d["sum_sq_x"]),
                    sum_sq_y=float(stats_d["sum_sq_y"]),
                ),
                log_lambda=float(payload["log_lambda"]),
                p_value=float(payload["p_value"]),
                ci_by_level={
                    level: _interval_from_json(payload["ci_by_level"][_level_key(level)])
                    for level in config.levels
                },
                updated_at=int(payload["updated_at"]),
            )
        except (KeyError, ValueError, TypeError, InvalidInputError) as exc:
            log.warning("ignoring unusable snapshot %s: %s", path, exc)
            return 0
        exp.config = config
        exp.state = state
        exp.status = str(payload["status"])
        exp.decision = payload.get("decision")
        exp.history = list(payload.get("history", []))
        exp.last_seq = int(payload["as_of"])
        return exp.last_seq

    def _read_events(self, wal_path: Path) -> list[dict]:
        """Parse the event log, truncating a torn final line.

        Corruption before the final line raises with the line number; the
        valid prefix stays on disk untouched.
        """
        raw = wal_path.read_bytes()
        events: list[dict] = []
        offset = 0
        lineno = 0
        while offset < len(raw):
            end = raw.find(b"\n", offset)
            torn = end < 0
            line = raw[offset:] if torn else raw[offset:end]
            lineno += 1
            try:
                if torn:
                    raise ValueError("no trailing newline")
                record = json.loads(line.decode("utf-8"))
                if (
                    not isinstance(record, dict)
                    or record.get("seq") != len(events) + 1
                    or "kind" not in record
                    or "payload" not in record
                ):
                    raise ValueError("bad event structure")
            except (ValueError, UnicodeDecodeError) as exc:
                rest = raw[offset if torn else end + 1 :]
                if torn or not rest.strip():
                    log.warning(
                        "truncating torn event at %s line %d (%s)", wal_path, lineno, exc
                    )
                    with open(wal_path, "r+b") as fh:
                        fh.truncate(offset)
                    break
                raise InvalidStateError(
                    f"corrupt event at {wal_path} line {lineno}: {exc}"
                ) from exc
            events.append(record)
            offset = end + 1
        return events

    def _recover(self, directory: Path) -> _Experiment:
        events = self._read_events(directory / "wal.jsonl")
        if not events:
            raise InvalidStateError(f"empty event log in {directory}")
        first = events[0]
        if first["kind"] != "created":
            raise InvalidStateError(f"first event in {directory} is not 'created'")
        config = ExperimentConfig.from_dict(first["payload"])
        if config.id != directory.name:
            raise InvalidStateError(
                f"directory {directory.name!r} holds experiment {config.id!r}"
            )
        exp = _Experiment(config, directory)
        restored = self._load_snapshot(exp)
        if restored > len(events):
            # Snapshot is ahead of the log (log truncated after snapshot);
            # the log is the source of truth, so rebuild from scratch.
            log.warning("snapshot for %s ahead of log; replaying from scratch", config.id)
            exp = _Experiment(config, directory)
            restored = 0
        for record in events[restored:]:
            self._apply(exp, record["seq"], record["kind"], record["payload"])
        exp.dirty_events = 0
        return exp

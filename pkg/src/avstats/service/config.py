"""Plain-text configuration for the experiment service.

Format: one ``KEY=VALUE`` per line, ``#`` starts a comment, blank lines are
ignored.  Recognized keys::

    host            listen address (default 127.0.0.1)
    port            listen port (default 8767)
    data_dir        directory holding per-experiment logs (default ./avstats-data)
    default_levels  comma-separated confidence levels (default 0.9,0.95,0.99)
    default_tau_sq  mixture variance used when an experiment omits one (default 1.0)

Environment variables ``AVSTATS_HOST``, ``AVSTATS_PORT``, and
``AVSTATS_DATA_DIR`` override the file values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import InvalidInputError

__all__ = ["ServiceConfig", "load_config"]


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8767
    data_dir: str = "./avstats-data"
    default_levels: tuple[float, ...] = (0.9, 0.95, 0.99)
    default_tau_sq: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.port < 65536:
            raise InvalidInputError(f"port must be in (0, 65536), got {self.port}")
        if not self.default_levels:
            raise InvalidInputError("default_levels must be nonempty")
        for level in self.default_levels:
            if not 0 < level < 1:
                raise InvalidInputError(f"confidence levels must be in (0, 1), got {level}")
        if self.default_tau_sq < 0:
            raise InvalidInputError("default_tau_sq must be >= 0")


def _parse_levels(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise InvalidInputError(f"bad default_levels value {raw!r}") from exc


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Read a config file (optional) and apply environment overrides."""
    values: dict[str, object] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key == "host":
                values["host"] = raw
            elif key == "port":
                try:
                    values["port"] = int(raw)
                except ValueError as exc:
                    raise InvalidInputError(f"{path}:{lineno}: bad port {raw!r}") from exc
            elif key == "data_dir":
                values["data_dir"] = raw
            elif key == "default_levels":
                values["default_levels"] = _parse_levels(raw)
            elif key == "default_tau_sq":
                try:
                    values["default_tau_sq"] = float(raw)
                except ValueError as exc:
                    raise InvalidInputError(f"{path}:{lineno}: bad default_tau_sq {raw!r}") from exc
            else:
                raise InvalidInputError(f"{path}:{lineno}: unknown key {key!r}")

    if "AVSTATS_HOST" in os.environ:
        values["host"] = os.environ["AVSTATS_HOST"]
    if "AVSTATS_PORT" in os.environ:
        try:
            values["port"] = int(os.environ["AVSTATS_PORT"])
        except ValueError as exc:
            raise InvalidInputError("AVSTATS_PORT must be an integer") from exc
    if "AVSTATS_DATA_DIR" in os.environ:
        values["data_dir"] = os.environ["AVSTATS_DATA_DIR"]
    return ServiceConfig(**values)  # type: ignore[arg-type]

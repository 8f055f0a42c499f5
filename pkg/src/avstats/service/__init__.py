"""Durable experiment service: store, HTTP app, and configuration."""

from .app import create_app, serve
from .config import ServiceConfig, load_config
from .store import (
    OVERVIEW_WARNING,
    ExperimentConfig,
    ExperimentStore,
    canonical_json,
    model_from_dict,
    model_to_dict,
    parse_csv_observations,
)

__all__ = [
    "create_app",
    "serve",
    "ServiceConfig",
    "load_config",
    "OVERVIEW_WARNING",
    "ExperimentConfig",
    "ExperimentStore",
    "canonical_json",
    "model_from_dict",
    "model_to_dict",
    "parse_csv_observations",
]

"""HTTP layer over the experiment store.

Endpoints:

* ``POST /experiments``: create from a JSON config; 201 with the initial snapshot.
* ``POST /experiments/{id}/observations``: JSON ``{"observations": [...]}`` or
  a ``text/csv`` body (``timestamp,variation,value``); returns the new snapshot.
* ``GET /experiments/{id}/snapshot``
* ``GET /experiments/{id}/history?after={seq}``: (seq, p, 1-p, CI) rows after a cursor.
* ``POST /experiments/{id}/stop``: JSON ``{"alpha": ..., "actor": ..., "reason": ...}``.
* ``GET /overview?alpha=&procedure=&fcr=&selection=``: corrected cross-experiment table.

All responses are canonical JSON (sorted keys, compact separators) so that
identical states produce identical bytes.  Validation problems map to 400,
unknown experiments to 404, and mutations of stopped experiments or duplicate
creations to 409.
"""

from __future__ import annotations

import json
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware

from ..errors import ConflictError, InvalidInputError, InvalidStateError, NotFoundError
from .config import ServiceConfig
from .store import ExperimentConfig, ExperimentStore, canonical_json, parse_csv_observations

__all__ = ["create_app", "serve"]

_TRUE_WORDS = {"true", "1", "yes", "on"}
_FALSE_WORDS = {"false", "0", "no", "off", ""}


def _json_response(payload: object, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(payload) + "\n",
        status_code=status_code,
        media_type="application/json",
    )


def _parse_bool(raw: str, name: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in _TRUE_WORDS:
        return True
    if lowered in _FALSE_WORDS:
        return False
    raise InvalidInputError(f"{name} must be a boolean, got {raw!r}")


async def _json_body(request: Request) -> dict:
    try:
        payload = json.loads(await request.body() or b"{}")
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"body must be valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise InvalidInputError("body must be a JSON object")
    return payload


def create_app(store: ExperimentStore) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        store.flush()

    app = FastAPI(title="avstats experiment service", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.store = store

    # monitoring UIs are typically served from a different origin than the API
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["content-type"],
    )

    def _error(status: int, exc: Exception) -> Response:
        return _json_response({"error": str(exc)}, status_code=status)

    @app.exception_handler(InvalidInputError)
    async def _bad_input(_req, exc):
        return _error(400, exc)

    @app.exception_handler(NotFoundError)
    async def _not_found(_req, exc):
        return _error(404, exc)

    @app.exception_handler(ConflictError)
    async def _conflict(_req, exc):
        return _error(409, exc)

    @app.exception_handler(InvalidStateError)
    async def _bad_state(_req, exc):
        return _error(409, exc)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_req, exc):
        return _error(400, exc)

    @app.post("/experiments")
    async def create_experiment(request: Request) -> Response:
        config = ExperimentConfig.from_dict(await _json_body(request))
        store.create_experiment(config)
        return _json_response(store.get_snapshot(config.id), status_code=201)

    @app.post("/experiments/{experiment_id}/observations")
    async def ingest(experiment_id: str, request: Request) -> Response:
        content_type = request.headers.get("content-type", "").split(";")[0].strip().lower()
        if content_type == "text/csv":
            try:
                text = (await request.body()).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise InvalidInputError(f"CSV body must be UTF-8: {exc}") from exc
            rows = parse_csv_observations(text)
        else:
            payload = await _json_body(request)
            observations = payload.get("observations")
            if not isinstance(observations, list):
                raise InvalidInputError("body must hold an 'observations' list")
            rows = []
            for i, item in enumerate(observations):
                if not isinstance(item, dict) or "variation" not in item or "value" not in item:
                    raise InvalidInputError(
                        f"observation {i}: expected an object with variation and value"
                    )
                try:
                    value = float(item["value"])
                except (TypeError, ValueError) as exc:
                    raise InvalidInputError(f"observation {i}: bad value") from exc
                rows.append((str(item.get("timestamp", "")), str(item["variation"]), value))
        return _json_response(store.ingest_batch(experiment_id, rows))

    @app.get("/experiments/{experiment_id}/snapshot")
    async def snapshot(experiment_id: str) -> Response:
        return _json_response(store.get_snapshot(experiment_id))

    @app.get("/experiments/{experiment_id}/history")
    async def history(experiment_id: str, after: int = 0) -> Response:
        return _json_response(store.get_history(experiment_id, after))

    @app.post("/experiments/{experiment_id}/stop")
    async def stop(experiment_id: str, request: Request) -> Response:
        payload = await _json_body(request)
        if "alpha" not in payload:
            raise InvalidInputError("stop requires an alpha")
        try:
            alpha = float(payload["alpha"])
        except (TypeError, ValueError) as exc:
            raise InvalidInputError("alpha must be a number") from exc
        decision = store.stop_experiment(
            experiment_id,
            alpha,
            actor=str(payload.get("actor", "")),
            reason=str(payload.get("reason", "")),
        )
        return _json_response(decision)

    @app.get("/overview")
    async def overview(
        alpha: float = 0.05,
        procedure: str = "bh-independent",
        fcr: str = "false",
        selection: str = "",
    ) -> Response:
        selected = [part.strip() for part in selection.split(",") if part.strip()]
        try:
            result = store.overview(alpha, procedure, fcr=_parse_bool(fcr, "fcr"), selection=selected)
        except ValueError as exc:
            # Covers bad procedure names from the enum constructor.
            raise InvalidInputError(str(exc)) from exc
        return _json_response(result)

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until terminated; shutdown flushes snapshot files."""
    import uvicorn

    store = ExperimentStore(config.data_dir)
    app = create_app(store)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")

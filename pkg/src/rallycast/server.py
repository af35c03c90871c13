"""HTTP service for prediction, what-if analysis and memory traces.

Every endpoint is read-only with respect to model and memory state: /predict
and /whatif run in query mode, and /replay-preview works on a throwaway clone
of the registry.  Responses embed generated maps as base64 PNG.

Error shape: 400 for schema violations (with the offending field path), 404
for unknown players, 409 for replay-order violations.
"""

from __future__ import annotations

import base64
import itertools
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .court import to_png_bytes
from .features import DirectoryFullError, override_context
from .registry import ModelRegistry, OrderViolation, PredictionResult
from .synth import SCHEMA_FIELDS, DatasetError, ShotRecord, load_dataset

API_PREFIX = "/v1"


class RecordPayload(BaseModel):
    match_id: str
    rally_id: int
    ts: int
    hitter: str
    receiver: str
    ball_xyz_t: list[list[float]]
    hitter_feet: list[list[float]]
    receiver_feet: list[list[float]]
    speed_mps: float
    angle_deg: float
    score: str
    shot_type: str = "return"
    next_ball_xyz_t: list[list[float]] = Field(default_factory=list)

    def to_record(self) -> ShotRecord:
        return ShotRecord(**{name: getattr(self, name) for name in SCHEMA_FIELDS})


class PredictRequest(BaseModel):
    player: str
    record: RecordPayload | None = None
    record_index: int | None = None
    noise_seed: int | None = None


class OverrideSet(BaseModel):
    opponents: list[str] | None = None
    scores: list[str] | None = None
    speed_bins: list[int] | None = None
    angle_bins: list[int] | None = None

    def combinations(self) -> list[dict]:
        axes = []
        for name, values in (("opponent", self.opponents), ("score", self.scores),
                             ("speed_bin", self.speed_bins), ("angle_bin", self.angle_bins)):
            axes.append([(name, v) for v in values] if values else [(name, None)])
        combos = []
        for combo in itertools.product(*axes):
            combos.append({name: value for name, value in combo if value is not None})
        return combos

    def empty(self) -> bool:
        return not any([self.opponents, self.scores, self.speed_bins, self.angle_bins])


class WhatIfRequest(BaseModel):
    player: str
    record: RecordPayload | None = None
    record_index: int | None = None
    overrides: OverrideSet = Field(default_factory=OverrideSet)
    no_overrides: bool = False
    noise_seed: int = 0
    samples: int = 1


class ReplayPreviewRequest(BaseModel):
    player: str
    records: list[RecordPayload]


def _prediction_json(result: PredictionResult) -> dict:
    payload = result.to_json()
    payload["response_png_base64"] = base64.b64encode(
        to_png_bytes(result.response_map)).decode("ascii")
    return payload


def build_app(checkpoint_path=None, dataset_path=None, registry: ModelRegistry | None = None,
              records: list[ShotRecord] | None = None) -> FastAPI:
    if registry is None:
        if checkpoint_path is None:
            raise ValueError("need a checkpoint path or a registry instance")
        registry = ModelRegistry.load_checkpoint(checkpoint_path)
    if records is None and dataset_path is not None:
        records = load_dataset(dataset_path)
    records = records or []
    by_player_records: dict[str, list[int]] = {}
    for i, record in enumerate(records):
        by_player_records.setdefault(record.receiver, []).append(i)

    app = FastAPI(title="rallycast", version="1.0")
    app.state.registry = registry
    app.state.records = records
    app.state.reload_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        details = [{"field": ".".join(str(p) for p in err["loc"]),
                    "message": err["msg"]} for err in exc.errors()]
        return JSONResponse(status_code=400, content={"errors": details})

    def resolve_context(player: str, payload, record_index, with_target=False):
        if payload is None and record_index is None:
            raise HTTPException(status_code=400, detail={
                "field": "record", "message": "provide record or record_index"})
        if payload is not None:
            record = payload.to_record()
        else:
            if not 0 <= record_index < len(records):
                raise HTTPException(status_code=400, detail={
                    "field": "record_index",
                    "message": f"index {record_index} outside 0..{len(records) - 1}"})
            record = records[record_index]
        if not registry.has_player(player):
            raise HTTPException(status_code=404, detail=f"unknown player {player!r}")
        try:
            return registry.context_from_record(record, with_target=with_target,
                                                create_players=False)
        except (KeyError, DirectoryFullError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except (DatasetError, ValueError) as exc:
            raise HTTPException(status_code=400, detail={
                "field": "record", "message": str(exc)}) from exc

    @app.get(f"{API_PREFIX}/health")
    def health():
        return {"status": "ok", "players": len(registry.player_ids()),
                "records": len(records)}

    @app.get(f"{API_PREFIX}/frame")
    def frame():
        return registry.frame.meta()

    @app.get(f"{API_PREFIX}/players")
    def players():
        out = []
        for player_id in registry.player_ids():
            model = registry.players[player_id]
            out.append({"id": player_id, "shots": model.shot_count,
                        "memory_len": len(model.em) if model.em else 0})
        return out

    @app.get(f"{API_PREFIX}/opponents")
    def opponents():
        return {"ids": list(registry.directory.ids)}

    @app.get(f"{API_PREFIX}/records")
    def list_records(player: str | None = None, limit: int = Query(20, ge=1, le=200)):
        idxs = (by_player_records.get(player, []) if player
                else list(range(len(records))))
        out = []
        for i in idxs[-limit:]:
            r = records[i]
            out.append({"index": i, "receiver": r.receiver, "hitter": r.hitter,
                        "ts": r.ts, "score": r.score, "shot_type": r.shot_type})
        return out

    @app.get(f"{API_PREFIX}/record-geometry")
    def record_geometry(index: int):
        from .features import normalized_geometry

        if not 0 <= index < len(records):
            raise HTTPException(status_code=400, detail={
                "field": "index",
                "message": f"index {index} outside 0..{len(records) - 1}"})
        geo = normalized_geometry(records[index])
        reception = geo["ball"][-1]
        return {"ball": [[p[0], p[1]] for p in geo["ball"]],
                "hitter_feet": [[p[0], p[1]] for p in geo["hitter_feet"]],
                "receiver_feet": [[p[0], p[1]] for p in geo["receiver_feet"]],
                "reception": [reception[0], reception[1]]}

    @app.get(f"{API_PREFIX}/state-hash")
    def state_hash():
        return {"memory": registry.memory_state_hash(),
                "full": registry.full_state_hash()}

    @app.post(f"{API_PREFIX}/predict")
    def predict(request: PredictRequest):
        ctx = resolve_context(request.player, request.record, request.record_index)
        result = registry.predict_next_shot(request.player, ctx, mode="query",
                                            noise_seed=request.noise_seed)
        return {"player": request.player, "prediction": _prediction_json(result)}

    @app.post(f"{API_PREFIX}/whatif")
    def whatif(request: WhatIfRequest):
        if request.overrides.empty() and not request.no_overrides:
            raise HTTPException(status_code=400, detail={
                "field": "overrides",
                "message": "provide at least one override list or set no_overrides"})
        base_ctx = resolve_context(request.player, request.record, request.record_index)
        results = []
        for combo in request.overrides.combinations():
            try:
                ctx = override_context(base_ctx, registry.directory, **combo)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except ValueError as exc:
                raise HTTPException(status_code=400, detail={
                    "field": "overrides", "message": str(exc)}) from exc
            predictions = []
            for sample in range(max(1, request.samples)):
                result = registry.predict_next_shot(
                    request.player, ctx, mode="query",
                    noise_seed=request.noise_seed + sample)
                predictions.append(_prediction_json(result))
            results.append({"overrides": combo, "predictions": predictions})
        return {"player": request.player, "results": results,
                "frame": registry.frame.meta()}

    @app.get(f"{API_PREFIX}/trace")
    def trace(player: str, level: str = "leaf", record_index: int | None = None):
        from .evaluate import memory_activation_trace

        if not registry.has_player(player):
            raise HTTPException(status_code=404, detail=f"unknown player {player!r}")
        if level not in ("leaf", "top"):
            raise HTTPException(status_code=400, detail={
                "field": "level", "message": "level must be 'leaf' or 'top'"})
        if record_index is None:
            candidates = by_player_records.get(player, [])
            if not candidates:
                raise HTTPException(status_code=400, detail={
                    "field": "record_index",
                    "message": "no dataset records for this player; pass record_index"})
            record_index = candidates[-1]
        ctx = resolve_context(player, None, record_index)
        try:
            rows = memory_activation_trace(registry, player, ctx, level=level)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail={
                "field": "player", "message": str(exc)}) from exc
        return {"player": player, "level": level,
                "rows": [{"slot": r.slot, "level": r.level, "weight": r.weight,
                          "timestamp": r.timestamp, "meta": r.meta} for r in rows]}

    @app.post(f"{API_PREFIX}/replay-preview")
    def replay_preview(request: ReplayPreviewRequest):
        if not registry.has_player(request.player):
            raise HTTPException(status_code=404,
                                detail=f"unknown player {request.player!r}")
        clone = registry.clone()
        out = []
        for payload in request.records:
            record = payload.to_record()
            try:
                ctx = clone.context_from_record(record, with_target=False,
                                                create_players=False)
                result = clone.predict_next_shot(request.player, ctx, mode="replay")
            except OrderViolation as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except (KeyError, DirectoryFullError) as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            out.append(_prediction_json(result))
        return {"player": request.player, "predictions": out}

    return app

"""HTTP session service: create relocation sessions, step them manually or
automatically, stream state snapshots over server-sent events.

Manual deltas arrive as {dr, dtheta, dphi} with dr in scene units and the
angles in degrees.  Commands on one session are serialized by a per-session
lock; the event stream always coalesces to the latest state, so slow
consumers skip intermediate snapshots rather than lagging.
"""

from __future__ import annotations

import asyncio
import io
import json
import math
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from .controller import (
    AlrSession,
    SessionConfig,
    SessionStateError,
    Status,
    start_session,
    step_auto,
    step_manual,
)
from .navigation import ball_to_json, draw_ball_png


@dataclass
class _Handle:
    session: AlrSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    version: int = 0


def snapshot(handle: _Handle, session_id: str) -> dict:
    s = handle.session
    adv = s.advisory_direction()
    return {
        "id": session_id,
        "version": handle.version,
        "iteration": s.t,
        "status": s.status.value,
        "goodness": float(s.last_ball.goodness),
        "best_goodness": float(s.best_goodness),
        "eta": s.eta,
        "advisory": {"r": int(adv[0]), "theta": int(adv[1]), "phi": int(adv[2])},
        # display units: scene units, degrees, degrees
        "lambda": [
            float(s.nav.lam[0]),
            math.degrees(float(s.nav.lam[1])),
            math.degrees(float(s.nav.lam[2])),
        ],
        "ball": ball_to_json(s.last_ball),
        "events": list(s.events[-5:]),
    }


def create_app(base_config: SessionConfig | None = None, max_sessions: int = 64) -> FastAPI:
    base = base_config or SessionConfig()
    app = FastAPI(title="lightrec session service")
    # the browser panel is served from its own origin during development
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    handles: dict[str, _Handle] = {}

    def get_handle(session_id: str) -> _Handle:
        handle = handles.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return handle

    def run_command(session_id: str, fn) -> dict:
        handle = get_handle(session_id)
        with handle.lock:
            try:
                fn(handle.session)
            except SessionStateError as err:
                raise HTTPException(status_code=409, detail=str(err)) from err
            handle.version += 1
            return snapshot(handle, session_id)

    @app.post("/sessions")
    async def create_session(request: Request) -> dict:
        if len(handles) >= max_sessions:
            raise HTTPException(status_code=503, detail="session limit reached")
        body = await request.body()
        overrides = json.loads(body) if body else {}
        doc = base.to_json()
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(doc.get(key), dict):
                doc[key].update(value)
            else:
                doc[key] = value
        try:
            cfg = SessionConfig.from_json(doc)
            session = await asyncio.to_thread(
                start_session, cfg.scene, cfg.source_kind, cfg.ref_pose, cfg.init_pose, cfg
            )
        except (ValueError, KeyError) as err:
            raise HTTPException(status_code=422, detail=str(err)) from err
        session_id = uuid.uuid4().hex[:12]
        handles[session_id] = _Handle(session)
        return snapshot(handles[session_id], session_id)

    @app.get("/sessions")
    def list_sessions() -> dict:
        return {sid: handles[sid].session.status.value for sid in handles}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str) -> dict:
        return snapshot(get_handle(session_id), session_id)

    @app.post("/sessions/{session_id}/manual")
    async def manual(session_id: str, request: Request) -> dict:
        body = json.loads(await request.body() or b"{}")
        delta = np.array(
            [
                float(body.get("dr", 0.0)),
                math.radians(float(body.get("dtheta", 0.0))),
                math.radians(float(body.get("dphi", 0.0))),
            ]
        )
        return await asyncio.to_thread(run_command, session_id, lambda s: step_manual(s, delta))

    @app.post("/sessions/{session_id}/auto")
    async def auto(session_id: str) -> dict:
        return await asyncio.to_thread(run_command, session_id, step_auto)

    @app.post("/sessions/{session_id}/run")
    async def run_all(session_id: str) -> dict:
        # step in a loop, bumping the version each iteration, so the event
        # stream shows live progress instead of one final jump
        def drive() -> dict:
            handle = get_handle(session_id)
            with handle.lock:
                if handle.session.status != Status.RUNNING:
                    raise HTTPException(status_code=409, detail=f"session is {handle.session.status.value}")
            while True:
                with handle.lock:
                    if handle.session.status != Status.RUNNING:
                        break
                    step_auto(handle.session)
                    handle.version += 1
            with handle.lock:
                return snapshot(handle, session_id)

        return await asyncio.to_thread(drive)

    @app.get("/sessions/{session_id}/ball.png")
    def ball_png(session_id: str) -> Response:
        handle = get_handle(session_id)
        with handle.lock:
            buf = io.BytesIO()
            draw_ball_png(handle.session.last_ball, buf)
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/sessions/{session_id}/events")
    async def events(session_id: str, request: Request) -> StreamingResponse:
        get_handle(session_id)

        async def stream():
            last_version = -1
            while True:
                handle = handles.get(session_id)
                if handle is None:
                    break
                if handle.version != last_version:
                    last_version = handle.version
                    doc = snapshot(handle, session_id)
                    yield f"data: {json.dumps(doc)}\n\n"
                    if doc["status"] != Status.RUNNING.value:
                        break
                if await request.is_disconnected():
                    break
                await asyncio.sleep(0.05)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.delete("/sessions/{session_id}")
    def drop(session_id: str) -> dict:
        get_handle(session_id)
        del handles[session_id]
        return {"deleted": session_id}

    return app

"""HTTP facade: sessions, TaskFlow versions, actions and pipeline runs.

The HTTP layer adds no behavior of its own; every endpoint is a serialized
pass-through to the underlying module calls.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .actions import load_actions, save_actions
from .corpus import load_dialogues, utterance_lookup
from .engine import (
    DEFAULT_FALLBACK,
    SessionClosedError,
    create_session,
    step,
)
from .extract import default_param_defs, param_defs_from_json
from .harness import PipelineConfig, run_pipeline
from .sampler import BeamConfig
from .standardize import DEFAULT_RECALL_K, DEFAULT_THRESHOLD, build_bm25_index
from .taskflow import (
    TaskFlowStore,
    load_taskflow,
    taskflow_from_json,
    taskflow_to_json,
    validate_taskflow,
)

DEFAULT_SESSION_TTL = 30 * 60.0


@dataclass
class ServiceConfig:
    artifact_dir: str
    corpus_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    clusters_user: int = 100
    clusters_staff: int = 100
    order: int = 4
    beam: BeamConfig = field(default_factory=BeamConfig)
    recall_k: int = DEFAULT_RECALL_K
    threshold: float = DEFAULT_THRESHOLD
    seed: int = 0
    scenario: str = "default"
    fallback_message: str = DEFAULT_FALLBACK
    session_ttl: float = DEFAULT_SESSION_TTL
    param_defs: list = field(default_factory=default_param_defs)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            corpus_path=self.corpus_path,
            out_dir=self.artifact_dir,
            clusters_user=self.clusters_user,
            clusters_staff=self.clusters_staff,
            order=self.order,
            beam=self.beam,
            recall_k=self.recall_k,
            threshold=self.threshold,
            seed=self.seed,
            scenario=self.scenario,
        )


class ServiceState:
    """Shared in-memory state behind the endpoints."""

    def __init__(self, config: ServiceConfig, clock=time.time):
        self.config = config
        self.clock = clock
        self.lock = threading.Lock()
        self.sessions: dict = {}
        self.store = TaskFlowStore()
        self.index = None
        self.load_artifacts()

    def artifact(self, name: str) -> Path:
        return Path(self.config.artifact_dir) / name

    def load_artifacts(self) -> None:
        if not self.artifact("taskflow.json").exists():
            raise FileNotFoundError(
                f"no artifacts in {self.config.artifact_dir}; run the pipeline first"
            )
        dialogues = load_dialogues(self.config.corpus_path)
        actions = load_actions(self.artifact("actions.json"))
        self.index = build_bm25_index(actions, utterance_lookup(dialogues))
        self.actions = actions
        self.store = TaskFlowStore(load_taskflow(self.artifact("taskflow.json")))

    def run_pipeline(self) -> dict:
        result = run_pipeline(self.config.pipeline_config())
        self.load_artifacts()
        return {
            "artifacts": result.paths,
            "actions": len(result.actions),
            "samples": len(result.samples),
            "taskflow_version": self.store.current_version,
        }

    def expire_sessions(self) -> None:
        now = self.clock()
        stale = [
            sid for sid, s in self.sessions.items()
            if now - s.last_active > self.config.session_ttl
        ]
        for sid in stale:
            del self.sessions[sid]

    def get_session(self, session_id: str):
        self.expire_sessions()
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session


class MessageIn(BaseModel):
    text: str


def _turn_result_json(result) -> dict:
    return {
        "responses": result.responses,
        "api_calls": [
            {"name": n, "params": p, "response": r} for n, p, r in result.api_calls
        ],
        "path_delta": result.path_delta,
        "closed": result.closed,
        "fallback": result.fallback,
    }


def _actions_json(actions) -> list[dict]:
    return [
        {
            "id": a.id,
            "role": a.role,
            "name": a.name,
            "canonical_id": a.canonical_id,
            "member_ids": sorted(a.member_ids),
        }
        for a in actions
    ]


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="flowmine")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.service = state

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "taskflow_version": state.store.current_version}

    @app.post("/api/v1/sessions")
    def open_session():
        with state.lock:
            state.expire_sessions()
            session = create_session(state.store.get(), clock=state.clock)
            state.sessions[session.id] = session
            return {"session_id": session.id, "taskflow_version": session.taskflow_version}

    @app.post("/api/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn):
        with state.lock:
            session = state.get_session(session_id)
            try:
                result = step(
                    session,
                    message.text,
                    state.index,
                    state.config.param_defs,
                    clock=state.clock,
                    fallback_message=state.config.fallback_message,
                    recall_k=state.config.recall_k,
                    threshold=state.config.threshold,
                )
            except SessionClosedError:
                raise HTTPException(status_code=409, detail="session is closed")
            return _turn_result_json(result)

    @app.get("/api/v1/sessions/{session_id}")
    def get_session(session_id: str):
        with state.lock:
            session = state.get_session(session_id)
            return {
                "session_id": session.id,
                "taskflow_version": session.taskflow_version,
                "current": session.current,
                "closed": session.closed,
                "transcript": [
                    {"speaker": sp, "text": txt, "node": nid}
                    for sp, txt, nid in session.transcript
                ],
            }

    @app.get("/api/v1/taskflow")
    def get_taskflow(version: int | None = None):
        try:
            return taskflow_to_json(state.store.get(version))
        except Exception as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.put("/api/v1/taskflow")
    def put_taskflow(doc: dict):
        with state.lock:
            try:
                tf = taskflow_from_json(doc)
            except Exception as exc:
                raise HTTPException(status_code=422, detail={"issues": [str(exc)]})
            current = state.store.current_version
            if current is not None and doc.get("version") != current:
                raise HTTPException(
                    status_code=409,
                    detail=f"submitted against version {doc.get('version')}, "
                           f"server is at {current}",
                )
            issues = validate_taskflow(tf)
            blocking = [i for i in issues if i.blocking]
            if blocking:
                raise HTTPException(
                    status_code=422,
                    detail={
                        "issues": [
                            {"code": i.code, "subject": i.subject, "message": i.message}
                            for i in blocking
                        ]
                    },
                )
            version = state.store.publish(tf)
            return {"version": version}

    @app.get("/api/v1/actions")
    def get_actions():
        return _actions_json(state.actions)

    @app.post("/api/v1/pipeline/run")
    def pipeline_run():
        with state.lock:
            try:
                return state.run_pipeline()
            except Exception as exc:
                raise HTTPException(status_code=500, detail=str(exc))

    return app


def serve(config: ServiceConfig):
    """Build state, bind and run until interrupted."""
    import uvicorn

    state = ServiceState(config)
    app = create_app(state)
    uvicorn.run(app, host=config.host, port=config.port)

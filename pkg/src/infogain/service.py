"""HTTP session API so a human can play the answerer.

The service owns many concurrent sessions, each advancing strictly
sequentially: AwaitingAnswer -> Computing -> (AwaitingAnswer | Finished).
Scoring a turn can take a while against a real model, so transitions are
asynchronous from the client's view; clients poll snapshots and see a
Computing status in between.  Every transition is persisted to the run
directory, allowing a restarted service to resume all sessions, including
those that died mid-computation.

Endpoints (JSON bodies; errors carry machine-readable codes):
    POST /sessions                 create a session, first turn computes async
    GET  /sessions/{id}            current snapshot
    POST /sessions/{id}/answer     submit an option label
    GET  /sessions/{id}/transcript full turn log so far
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from infogain.backends.base import Backend
from infogain.belief import FilterConfig
from infogain.controller import (
    SCHEMA_VERSION,
    GuessQuestion,
    QuestionMode,
    SessionConfig,
    SessionState,
    StrategyKind,
    apply_answer,
    config_to_dict,
    question_from_dict,
    question_to_dict,
    report_to_dict,
    run_turn,
    start_session,
)
from infogain.core import Answer, BeliefState, History, Hypothesis, QuestionKind

STATUS_AWAITING = "awaiting-answer"
STATUS_COMPUTING = "computing"
STATUS_FINISHED = "finished"


class ServiceError(Exception):
    """Base for API-level failures; carries a machine-readable code."""

    def __init__(self, code: str, status: int, message: str, fields: dict[str, str] | None = None):
        super().__init__(message)
        self.code = code
        self.status = status
        self.fields = fields or {}

    def body(self) -> dict:
        payload: dict = {"error": {"code": self.code, "message": str(self)}}
        if self.fields:
            payload["error"]["fields"] = self.fields
        return payload


def _invalid_config(fields: dict[str, str]) -> ServiceError:
    return ServiceError("invalid-config", 422, "invalid session config", fields)


def _unknown_session(session_id: str) -> ServiceError:
    return ServiceError("unknown-session", 404, f"no session {session_id!r}")


def _conflict(message: str) -> ServiceError:
    return ServiceError("conflict", 409, message)


def _invalid_label(message: str) -> ServiceError:
    return ServiceError("invalid-label", 422, message)


def parse_session_config(data: dict) -> SessionConfig:
    """Lenient config parsing for the wire: defaults fill gaps, errors per field."""
    errors: dict[str, str] = {}
    kwargs: dict = {}

    def enum_field(name: str, enum_cls, default):
        raw = data.get(name)
        if raw is None:
            return default
        try:
            return enum_cls(raw)
        except ValueError:
            valid = ", ".join(e.value for e in enum_cls)
            errors[name] = f"expected one of: {valid}"
            return default

    kwargs["strategy"] = enum_field("strategy", StrategyKind, StrategyKind.EIG)
    kwargs["question_kind"] = enum_field("question_kind", QuestionKind, QuestionKind.BINARY)
    kwargs["question_mode"] = enum_field(
        "question_mode", QuestionMode, QuestionMode.CONDITIONAL_WITH_FALLBACK
    )
    for name in ("budget", "candidate_count", "seed", "posterior_samples"):
        if name in data and data[name] is not None:
            if not isinstance(data[name], int) or isinstance(data[name], bool):
                errors[name] = "expected an integer"
            else:
                kwargs[name] = data[name]
    flt = data.get("filter") or {}
    if not isinstance(flt, dict):
        errors["filter"] = "expected an object"
        flt = {}
    filter_kwargs: dict = {}
    if "likelihood_threshold" in flt:
        if not isinstance(flt["likelihood_threshold"], (int, float)):
            errors["filter.likelihood_threshold"] = "expected a number"
        else:
            filter_kwargs["likelihood_threshold"] = float(flt["likelihood_threshold"])
    for name in ("target_count", "max_cycles"):
        if name in flt:
            if not isinstance(flt[name], int) or isinstance(flt[name], bool):
                errors[f"filter.{name}"] = "expected an integer"
            else:
                filter_kwargs[name] = flt[name]
    if errors:
        raise _invalid_config(errors)
    try:
        kwargs["filter"] = FilterConfig(**filter_kwargs)
    except ValueError as exc:
        raise _invalid_config({"filter": str(exc)}) from exc
    try:
        return SessionConfig(**kwargs)
    except ValueError as exc:
        raise _invalid_config({"config": str(exc)}) from exc


@dataclass
class _Runtime:
    """Mutable per-session state; every access goes through ``lock``."""

    id: str
    config: SessionConfig
    backend: Backend
    state: SessionState
    status: str = STATUS_COMPUTING
    outcome: str | None = None
    error: str | None = None
    inflight: Answer | None = None
    last_scores: list[dict] = field(default_factory=list)
    turn_log: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionService:
    """Framework-free session manager; the FastAPI app is a thin adapter."""

    def __init__(
        self,
        backend_factory: Callable[[SessionConfig], Backend],
        run_dir: str | Path | None = None,
        max_workers: int = 4,
    ) -> None:
        self._factory = backend_factory
        self._run_dir = Path(run_dir) if run_dir is not None else None
        if self._run_dir is not None:
            (self._run_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, _Runtime] = {}
        self._registry_lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._resume_persisted()

    # -- public API ----------------------------------------------------------

    def create_session(self, config_data: dict) -> str:
        config = parse_session_config(config_data)
        backend = self._factory(config)
        session_id = uuid.uuid4().hex[:12]
        runtime = _Runtime(
            id=session_id,
            config=config,
            backend=backend,
            state=SessionState(config=config),
        )
        with self._registry_lock:
            self._sessions[session_id] = runtime
        self._persist(runtime)
        self._executor.submit(self._compute_first_turn, runtime)
        return session_id

    def get_snapshot(self, session_id: str) -> dict:
        runtime = self._get(session_id)
        with runtime.lock:
            return self._snapshot(runtime)

    def submit_answer(self, session_id: str, label: str) -> dict:
        runtime = self._get(session_id)
        with runtime.lock:
            if runtime.status != STATUS_AWAITING:
                raise _conflict(f"session is {runtime.status}, not awaiting an answer")
            pending = runtime.state.pending
            assert pending is not None
            try:
                index = pending.option_index(label)
            except KeyError:
                valid = ", ".join(o.label for o in pending.options)
                raise _invalid_label(f"unknown option {label!r}; expected one of: {valid}")
            runtime.inflight = Answer(pending.id, index)
            runtime.status = STATUS_COMPUTING
            snapshot = self._snapshot(runtime)
            self._persist_locked(runtime)
        self._executor.submit(self._advance, runtime)
        return snapshot

    def get_transcript(self, session_id: str) -> dict:
        runtime = self._get(session_id)
        with runtime.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "session_id": runtime.id,
                "config": config_to_dict(runtime.config),
                "status": runtime.status,
                "outcome": runtime.outcome,
                "error": runtime.error,
                "turns": list(runtime.turn_log),
            }

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)

    # -- internals -----------------------------------------------------------

    def _get(self, session_id: str) -> _Runtime:
        with self._registry_lock:
            runtime = self._sessions.get(session_id)
        if runtime is None:
            raise _unknown_session(session_id)
        return runtime

    def _snapshot(self, runtime: _Runtime) -> dict:
        """Wire form of the session; caller holds the runtime lock."""
        state = runtime.state
        pairs = [
            {
                "question": question_to_dict(q),
                "answer": {"question_id": a.question_id, "option_index": a.option_index},
                "answer_text": q.options[a.option_index].text,
            }
            for q, a in state.history.pairs
        ]
        turn = state.turn
        if runtime.inflight is not None and state.pending is not None:
            pending_q = state.pending
            answer = runtime.inflight
            pairs.append(
                {
                    "question": question_to_dict(pending_q),
                    "answer": {
                        "question_id": answer.question_id,
                        "option_index": answer.option_index,
                    },
                    "answer_text": pending_q.options[answer.option_index].text,
                }
            )
            turn += 1
        show_pending = runtime.status == STATUS_AWAITING and state.pending is not None
        return {
            "id": runtime.id,
            "status": runtime.status,
            "turn": turn,
            "budget": runtime.config.budget,
            "pending_question": question_to_dict(state.pending) if show_pending else None,
            "history": pairs,
            "belief": {
                "count": len(state.belief),
                "hypotheses": [h.text for h in state.belief],
            },
            "last_scores": list(runtime.last_scores),
            "outcome": runtime.outcome,
            "error": runtime.error,
        }

    def _compute_first_turn(self, runtime: _Runtime) -> None:
        try:
            state, _ = start_session(runtime.config, runtime.backend)
            with runtime.lock:
                runtime.state = state
                self._persist_locked(runtime)
            self._next_question(runtime)
        except Exception as exc:
            self._fail(runtime, exc)

    def _guarded_next(self, runtime: _Runtime) -> None:
        try:
            self._next_question(runtime)
        except Exception as exc:
            self._fail(runtime, exc)

    def _next_question(self, runtime: _Runtime) -> None:
        with runtime.lock:
            state = runtime.state
        _, new_state = run_turn(state, runtime.backend)
        with runtime.lock:
            runtime.state = new_state
            runtime.last_scores = [
                {
                    "question_id": s.question.id,
                    "text": s.question.text,
                    "score": s.score,
                    "estimator": s.estimator_kind.value,
                    "is_guess": isinstance(s.question, GuessQuestion),
                }
                for s in new_state.candidates
            ]
            runtime.status = STATUS_AWAITING
            self._persist_locked(runtime)

    def _advance(self, runtime: _Runtime) -> None:
        try:
            with runtime.lock:
                state = runtime.state
                answer = runtime.inflight
                assert answer is not None and state.pending is not None
                pending = state.pending
            new_state, report, solved = apply_answer(state, answer, runtime.backend)
            turn_entry = {
                "index": new_state.turn,
                "question": question_to_dict(pending),
                "is_guess": isinstance(pending, GuessQuestion),
                "answer": {"question_id": answer.question_id, "option_index": answer.option_index},
                "answer_text": pending.options[answer.option_index].text,
                "candidates": list(runtime.last_scores),
                "report": None if report is None else report_to_dict(report),
                "belief": [h.text for h in new_state.belief],
                "used_fallback": state.used_fallback,
            }
            with runtime.lock:
                runtime.state = new_state
                runtime.inflight = None
                runtime.turn_log.append(turn_entry)
                if solved:
                    runtime.status = STATUS_FINISHED
                    runtime.outcome = "success"
                elif new_state.turn >= runtime.config.budget:
                    runtime.status = STATUS_FINISHED
                    runtime.outcome = "budget-exhausted"
                self._persist_locked(runtime)
                finished = runtime.status == STATUS_FINISHED
            if not finished:
                self._next_question(runtime)
        except Exception as exc:
            self._fail(runtime, exc)

    def _fail(self, runtime: _Runtime, exc: Exception) -> None:
        with runtime.lock:
            runtime.status = STATUS_FINISHED
            runtime.outcome = "aborted"
            runtime.error = str(exc)
            runtime.inflight = None
            self._persist_locked(runtime)

    # -- persistence ----------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        assert self._run_dir is not None
        return self._run_dir / "sessions" / f"{session_id}.json"

    def _persist(self, runtime: _Runtime) -> None:
        with runtime.lock:
            self._persist_locked(runtime)

    def _persist_locked(self, runtime: _Runtime) -> None:
        if self._run_dir is None:
            return
        state = runtime.state
        payload = {
            "schema_version": SCHEMA_VERSION,
            "id": runtime.id,
            "config": config_to_dict(runtime.config),
            "status": runtime.status,
            "outcome": runtime.outcome,
            "error": runtime.error,
            "turn": state.turn,
            "history": [
                {
                    "question": question_to_dict(q),
                    "answer": {"question_id": a.question_id, "option_index": a.option_index},
                }
                for q, a in state.history.pairs
            ],
            "belief": {"turn": state.belief.turn, "hypotheses": [h.text for h in state.belief]},
            "pending": None if state.pending is None else question_to_dict(state.pending),
            "inflight": (
                None
                if runtime.inflight is None
                else {
                    "question_id": runtime.inflight.question_id,
                    "option_index": runtime.inflight.option_index,
                }
            ),
            "last_scores": list(runtime.last_scores),
            "turn_log": list(runtime.turn_log),
        }
        path = self._session_path(runtime.id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)

    def _resume_persisted(self) -> None:
        if self._run_dir is None:
            return
        for path in sorted((self._run_dir / "sessions").glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            runtime = self._rebuild(data)
            with self._registry_lock:
                self._sessions[runtime.id] = runtime
            if runtime.status == STATUS_COMPUTING:
                # Died mid-computation: redo the interrupted step.
                if runtime.inflight is not None:
                    self._executor.submit(self._advance, runtime)
                elif len(runtime.state.history) == 0 and runtime.state.pending is None:
                    self._executor.submit(self._compute_first_turn, runtime)
                else:
                    self._executor.submit(self._guarded_next, runtime)

    def _rebuild(self, data: dict) -> _Runtime:
        config = parse_session_config(data["config"])
        history = History()
        for pair in data["history"]:
            question = question_from_dict(pair["question"])
            history = history.append(
                question, Answer(pair["answer"]["question_id"], pair["answer"]["option_index"])
            )
        belief = BeliefState.of(
            (Hypothesis(t) for t in data["belief"]["hypotheses"]),
            turn=data["belief"]["turn"],
        )
        pending = None if data["pending"] is None else question_from_dict(data["pending"])
        state = SessionState(
            config=config,
            history=history,
            belief=belief,
            turn=data["turn"],
            pending=pending,
        )
        inflight = (
            None
            if data["inflight"] is None
            else Answer(data["inflight"]["question_id"], data["inflight"]["option_index"])
        )
        return _Runtime(
            id=data["id"],
            config=config,
            backend=self._factory(config),
            state=state,
            status=data["status"],
            outcome=data["outcome"],
            error=data["error"],
            inflight=inflight,
            last_scores=list(data["last_scores"]),
            turn_log=list(data["turn_log"]),
        )


def create_app(service: SessionService) -> "FastAPI":
    """FastAPI adapter over a SessionService."""
    app = FastAPI(title="infogain session service")
    # The browser client is served statically from wherever; the session id is
    # the only credential, so cross-origin access is safe to allow.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ServiceError("invalid-request", 400, "request body must be JSON")
        if not isinstance(body, dict):
            raise ServiceError("invalid-request", 400, "request body must be a JSON object")
        session_id = service.create_session(body)
        return {"id": session_id}

    @app.get("/sessions/{session_id}")
    async def get_snapshot(session_id: str) -> dict:
        return service.get_snapshot(session_id)

    @app.post("/sessions/{session_id}/answer")
    async def submit_answer(session_id: str, request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise ServiceError("invalid-request", 400, "request body must be JSON")
        label = body.get("label") if isinstance(body, dict) else None
        if not isinstance(label, str) or not label.strip():
            raise ServiceError("invalid-request", 400, 'body must carry a string "label"')
        return service.submit_answer(session_id, label)

    @app.get("/sessions/{session_id}/transcript")
    async def get_transcript(session_id: str) -> dict:
        return service.get_transcript(session_id)

    return app

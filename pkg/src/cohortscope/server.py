"""Read-only HTTP service the explorer UI drives.

One dataset snapshot is loaded at startup and shared immutably across
requests. Each query opens a session holding the aligned cohort and the
current scatterplot cut; mutations to one session (drill-down, roll-up,
budget changes) are serialized by a per-session lock while different
sessions proceed in parallel. Responses are deterministic: an identical
fresh server replays to byte-identical bodies.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .dataset_io import load_dataset
from .hierarchy import TypeHierarchy, build_hierarchy, read_edge_file
from .model import CohortDataset, EmptyCohortError, attribute_summary
from .query import (
    AlignedCohort,
    InvalidWindowError,
    QueryFormatError,
    TemporalQuery,
    run_query,
)
from .stats import (
    AlignedStats,
    BudgetTooSmallError,
    CutEditError,
    DegenerateOutcomeError,
    EmptyAlignedCohortError,
)

DEFAULT_BUDGET = 50
DEFAULT_SESSION_TIMEOUT_MINUTES = 60.0


@dataclass
class Session:
    session_id: str
    query: TemporalQuery
    aligned: AlignedCohort
    stats: AlignedStats
    budget: int
    cut: tuple[str, ...] | None
    cut_error: Exception | None
    last_used: float
    lock: threading.Lock = field(default_factory=threading.Lock)


def _error(status: int, message: str, **extra) -> JSONResponse:
    body = {"engine_version": __version__, "error": message}
    body.update(extra)
    return JSONResponse(body, status_code=status)


def build_app(
    dataset: CohortDataset | None,
    hierarchy: TypeHierarchy | None,
    *,
    default_budget: int = DEFAULT_BUDGET,
    session_timeout_minutes: float = DEFAULT_SESSION_TIMEOUT_MINUTES,
) -> FastAPI:
    app = FastAPI(title="cohortscope", version=__version__)
    # the browser explorer may be served from a different origin; the API
    # is read-only so open CORS is safe
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["content-type"],
    )
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    session_counter = itertools.count(1)
    timeout_seconds = session_timeout_minutes * 60.0

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, "malformed JSON body")

    def _purge_idle(now: float) -> None:
        expired = [
            sid for sid, s in sessions.items()
            if now - s.last_used > timeout_seconds
        ]
        for sid in expired:
            del sessions[sid]

    def _get_session(session_id: str | None) -> Session | None:
        if session_id is None:
            return None
        with sessions_lock:
            now = time.monotonic()
            _purge_idle(now)
            session = sessions.get(session_id)
            if session is not None:
                session.last_used = now
            return session

    def _compute_cut(session: Session, budget: int) -> None:
        session.budget = budget
        try:
            session.cut = session.stats.select_cut(budget)
            session.cut_error = None
        except (BudgetTooSmallError, EmptyAlignedCohortError,
                DegenerateOutcomeError) as exc:
            session.cut = None
            session.cut_error = exc

    def _cut_response(session: Session) -> JSONResponse:
        if session.cut is None:
            exc = session.cut_error
            if isinstance(exc, BudgetTooSmallError):
                return _error(
                    400, str(exc), minimum_feasible_budget=exc.minimum_feasible
                )
            return _error(409, str(exc))
        points = session.stats.points_for(session.cut)
        return JSONResponse({
            "engine_version": __version__,
            "session_id": session.session_id,
            "budget": session.budget,
            "points": [p.to_json_dict() for p in points],
        })

    @app.get("/cohort/summary")
    def cohort_summary():
        if dataset is None:
            return _error(503, "no dataset loaded")
        try:
            summary = attribute_summary(dataset)
        except EmptyCohortError as exc:
            return _error(503, str(exc))
        return JSONResponse({"engine_version": __version__, **summary})

    @app.post("/query")
    def post_query(payload: dict):
        if dataset is None or hierarchy is None:
            return _error(503, "no dataset loaded")
        try:
            query = TemporalQuery.from_json_dict(payload)
        except (QueryFormatError, InvalidWindowError) as exc:
            return _error(400, str(exc))
        aligned = run_query(dataset, query)
        stats = AlignedStats(hierarchy, aligned, dataset.labels())
        with sessions_lock:
            now = time.monotonic()
            _purge_idle(now)
            session_id = f"s-{next(session_counter):06d}"
            session = Session(
                session_id=session_id,
                query=query,
                aligned=aligned,
                stats=stats,
                budget=default_budget,
                cut=None,
                cut_error=None,
                last_used=now,
            )
            sessions[session_id] = session
        with session.lock:
            _compute_cut(session, default_budget)
        return JSONResponse({
            "engine_version": __version__,
            "session_id": session.session_id,
            "matched": len(aligned.matched_patient_ids),
            "unmatched": len(aligned.unmatched_patient_ids),
        })

    @app.get("/scatter")
    def get_scatter(session: str | None = None, budget: int | None = None):
        state = _get_session(session)
        if state is None:
            return _error(404, f"unknown session: {session}")
        with state.lock:
            if budget is not None:
                if budget < 1:
                    return _error(400, f"invalid budget: {budget}")
                if budget != state.budget:
                    _compute_cut(state, budget)
            return _cut_response(state)

    @app.post("/drilldown")
    def post_drilldown(payload: dict):
        return _edit_cut(payload, "drill_down")

    @app.post("/rollup")
    def post_rollup(payload: dict):
        return _edit_cut(payload, "roll_up")

    def _edit_cut(payload: dict, op: str) -> JSONResponse:
        session_id = payload.get("session")
        node_id = payload.get("node_id")
        if not isinstance(session_id, str) or not isinstance(node_id, str):
            return _error(400, "body must carry 'session' and 'node_id' strings")
        state = _get_session(session_id)
        if state is None:
            return _error(404, f"unknown session: {session_id}")
        with state.lock:
            if state.cut is None:
                return _cut_response(state)
            try:
                state.cut = getattr(state.stats, op)(state.cut, node_id)
            except CutEditError as exc:
                return _error(409, str(exc))
            except Exception as exc:  # unknown node ids and the like
                return _error(409, str(exc))
            return _cut_response(state)

    @app.get("/search")
    def get_search(session: str | None = None, q: str = ""):
        state = _get_session(session)
        if state is None:
            return _error(404, f"unknown session: {session}")
        assert hierarchy is not None
        results = []
        with state.lock:
            for node in hierarchy.search(q):
                try:
                    point = state.stats.point(node.node_id)
                except (EmptyAlignedCohortError, DegenerateOutcomeError):
                    break
                results.append(point.to_json_dict())
        return JSONResponse({
            "engine_version": __version__,
            "query": q,
            "results": results,
        })

    return app


def load_app_from_files(
    dataset_dir: Path,
    vocab_path: Path,
    manual_path: Path,
    *,
    default_budget: int = DEFAULT_BUDGET,
    session_timeout_minutes: float = DEFAULT_SESSION_TIMEOUT_MINUTES,
) -> FastAPI:
    """Build the service from on-disk dataset and edge files."""
    dataset = load_dataset(dataset_dir)
    hierarchy = build_hierarchy(
        read_edge_file(vocab_path),
        read_edge_file(manual_path),
        dataset.observed_types(),
    )
    return build_app(
        dataset,
        hierarchy,
        default_budget=default_budget,
        session_timeout_minutes=session_timeout_minutes,
    )

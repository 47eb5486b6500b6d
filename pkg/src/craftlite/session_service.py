"""Live interactive sessions over HTTP.

One session pairs a human with a generation context: a sampled recipe
book, six goal items, and a stocked raw inventory.  Dictation sessions
define and run programs synchronously; synthesis and planner sessions
start a budgeted background solver per submission, stream its progress,
and commit the winning plan's actions to the session world only on
success.  Cancellation and failures leave the world untouched, because
solvers always work on cloned speculative states.

Payloads are plain JSON.  The event channel is server-sent events:
``snapshot`` on connect, then ``progress``, ``state``, ``solver_done``,
``timer`` ticks, and a final ``session_end``.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from craftlite.chain_harness import GenerationContext, make_generation_context
from craftlite.env import (
    CRAFTABLE_ITEMS,
    Context,
    Goal,
    RecipeCatalog,
    WorldState,
    clear_slots,
    default_catalog,
    run,
)
from craftlite.executors import (
    DuplicateName,
    ProgramStore,
    UnknownName,
    ds_execute,
    np_execute,
    parse_programs,
)
from craftlite.library import Library, SearchProblem, parse_library
from craftlite.proposers import HashEmbedder, cosine
from craftlite.sim_users import library_size

# wall-clock to search-effort mapping; calibrate per machine if it matters
EXPANSIONS_PER_SECOND = 2000

_PROGRESS_EVERY = 500


class EventLog:
    """Append-only per-session event list with blocking reads."""

    def __init__(self) -> None:
        self._events: list[tuple[str, dict]] = []
        self._cond = threading.Condition()

    def publish(self, kind: str, data: dict) -> None:
        with self._cond:
            self._events.append((kind, data))
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._events)

    def wait(self, index: int, timeout: float) -> list[tuple[str, dict]]:
        """Events past ``index``, blocking up to ``timeout`` for fresh ones."""
        with self._cond:
            if len(self._events) <= index:
                self._cond.wait(timeout)
            return self._events[index:]


@dataclass
class LiveSession:
    id: str
    condition: str
    seed: int
    r: float
    context: GenerationContext
    state: WorldState
    library: Library | ProgramStore
    deadline: float
    submissions: int = 0
    solver_thread: threading.Thread | None = None
    cancel_event: threading.Event | None = None
    ended: bool = False
    lock: threading.RLock = field(default_factory=threading.RLock)
    events: EventLog = field(default_factory=EventLog)

    @property
    def solver_active(self) -> bool:
        return self.solver_thread is not None and self.solver_thread.is_alive()


class CreateSessionRequest(BaseModel):
    condition: str
    seed: int = 0
    r: float = 0.0
    duration_seconds: float | None = None
    library: str | None = None  # preload from a serialized chain state


class SubmitRequest(BaseModel):
    kind: str  # "define" | "run" | "solve" | "clear"
    name: str | None = None
    body: list[str] | None = None
    hint: str = ""
    goal: list[str] | None = None


def _error(status: int, error: str, message: str) -> HTTPException:
    return HTTPException(status_code=status,
                         detail={"error": error, "message": message})


def _sse(kind: str, data: dict) -> str:
    return f"event: {kind}\ndata: {json.dumps(data, sort_keys=True)}\n\n"


def _default_solve(condition: str, problem: SearchProblem, context: Context,
                   library: Library | ProgramStore, **kwargs):
    fn = np_execute if condition == "np" else ds_execute
    return fn(problem, context, library, **kwargs)


def create_app(
    catalog: RecipeCatalog | None = None,
    *,
    session_seconds: float = 600.0,
    solver_seconds: float = 30.0,
    expansions_per_second: int = EXPANSIONS_PER_SECOND,
    clock=time.monotonic,
    tick_seconds: float = 1.0,
    solve_fn=None,
) -> FastAPI:
    """Build the service app; every knob is injectable for tests.

    ``solve_fn(condition, problem, context, library, **solver_kwargs)``
    replaces the built-in condition dispatch when given.
    """
    catalog = catalog or default_catalog()
    solve_fn = solve_fn or _default_solve
    solver_budget = max(1, int(solver_seconds * expansions_per_second))
    embedder = HashEmbedder()
    sessions: dict[str, LiveSession] = {}
    app = FastAPI(title="craftlite sessions")

    def get_session(sid: str) -> LiveSession:
        session = sessions.get(sid)
        if session is None:
            raise _error(404, "UnknownSession", f"no session {sid!r}")
        return session

    def remaining(session: LiveSession) -> float:
        return max(0.0, session.deadline - clock())

    def check_expiry(session: LiveSession) -> bool:
        """Flip the session to ended when its clock runs out."""
        if session.ended:
            return True
        if remaining(session) > 0:
            return False
        with session.lock:
            if not session.ended:
                session.ended = True
                if session.cancel_event is not None:
                    session.cancel_event.set()
                session.events.publish("session_end", {"reason": "timer"})
        return True

    def snapshot(session: LiveSession) -> dict:
        state = session.state
        book = session.context.book
        derived = None
        if len(state.input_slots) == 2:
            a, b = state.input_slots
            pair = (a, b) if a <= b else (b, a)
            derived = book.craft_table().get(pair)
        return {
            "session_id": session.id,
            "condition": session.condition,
            "seed": session.seed,
            "r": session.r,
            "goals": [{"item": item, "built": state.crafted(item)}
                      for item in session.context.goal.items],
            "inventory": {item: count for item, count
                          in sorted(state.inventory.items()) if count},
            "input_slots": list(state.input_slots),
            "derived_output": derived,
            "remaining_seconds": round(remaining(session), 3),
            "submissions": session.submissions,
            "solver_active": session.solver_active,
            "library_size": library_size(session.library),
            "expired": check_expiry(session),
        }

    def commit(session: LiveSession, goal: Goal, actions: list[str]):
        """Run ``actions`` on the committed world; only success calls this."""
        trajectory = run(Context(goal, session.state, session.context.book),
                         actions)
        session.state = trajectory.final
        session.events.publish("state", snapshot(session))
        return trajectory

    def suggest_goal(session: LiveSession, hint: str) -> dict | None:
        if isinstance(session.library, ProgramStore):
            entries = [(r.hint, tuple(r.goal_items), r.last_used_tick)
                       for r in session.library.beam_entries() if r.goal_items]
        else:
            entries = [(e.hint, e.goal.items, e.last_used_tick)
                       for e in session.library.entries]
        if not entries:
            return None
        query = embedder.embed(hint)
        best = max(
            enumerate(entries),
            key=lambda pair: (cosine(query, embedder.embed(pair[1][0])),
                              pair[1][2], pair[0]))
        _, (matched_hint, items, _) = best
        return {"goal": list(items), "matched_hint": matched_hint}

    def start_solver(session: LiveSession, problem: SearchProblem) -> int:
        cancel = threading.Event()
        session.cancel_event = cancel
        entry_state = session.state

        def progress(stats) -> None:
            session.events.publish("progress", {
                "expansions": stats.expansions,
                "candidates": stats.candidates,
            })

        def work() -> None:
            ctx = Context(problem.goal, entry_state, session.context.book)
            result = solve_fn(session.condition, problem, ctx, session.library,
                              budget=solver_budget, cancel=cancel,
                              on_progress=progress,
                              progress_every=_PROGRESS_EVERY)
            with session.lock:
                session.solver_thread = None
                session.cancel_event = None
                if result.success and not session.ended:
                    commit(session, problem.goal, result.actions)
                session.events.publish("solver_done", {
                    "status": result.status,
                    "actions": result.actions,
                    "expansions": result.stats.expansions,
                    "library_size": library_size(session.library),
                })

        thread = threading.Thread(target=work, daemon=True)
        session.solver_thread = thread
        thread.start()
        return solver_budget

    @app.post("/sessions")
    def create_session(payload: CreateSessionRequest) -> dict:
        condition = payload.condition.lower()
        if condition not in ("dp", "ds", "np"):
            raise _error(422, "BadCondition",
                         f"condition must be dp, ds or np, not {payload.condition!r}")
        if not 0.0 <= payload.r <= 1.0:
            raise _error(422, "BadRate", "r must lie in [0, 1]")
        context = make_generation_context(catalog, payload.seed, 0, payload.r)
        if payload.library is not None:
            library = (parse_library(payload.library) if condition == "np"
                       else parse_programs(payload.library))
        else:
            library = Library() if condition == "np" else ProgramStore()
        duration = (payload.duration_seconds if payload.duration_seconds
                    is not None else session_seconds)
        session = LiveSession(
            id=uuid.uuid4().hex[:12], condition=condition, seed=payload.seed,
            r=payload.r, context=context, state=context.start,
            library=library, deadline=clock() + duration)
        sessions[session.id] = session
        return {"session_id": session.id, "snapshot": snapshot(session)}

    @app.get("/sessions/{sid}")
    def get_snapshot(sid: str) -> dict:
        return snapshot(get_session(sid))

    @app.post("/sessions/{sid}/submit")
    def submit(sid: str, payload: SubmitRequest) -> dict:
        session = get_session(sid)
        with session.lock:
            if check_expiry(session):
                raise _error(410, "SessionExpired", "the session timer ran out")
            if payload.kind == "clear":
                # Bench tidying, not a task submission: slotted items go
                # back to the inventory.  Planners have no such action, so
                # the service is where it lives.
                session.state = clear_slots(session.state)
                return {"status": "cleared", "snapshot": snapshot(session)}
            if session.condition == "dp":
                return _submit_dp(session, payload)
            return _submit_search(session, payload)

    def _submit_dp(session: LiveSession, payload: SubmitRequest) -> dict:
        store = session.library
        if payload.kind == "define":
            if not payload.name or payload.body is None:
                raise _error(422, "BadRequest", "define needs a name and a body")
            try:
                store.define(payload.name, payload.body, hint=payload.hint)
            except DuplicateName as exc:
                raise _error(409, "DuplicateName", str(exc))
            except UnknownName as exc:
                raise _error(404, "UnknownName", str(exc))
            except ValueError as exc:
                raise _error(422, "BadRequest", str(exc))
            return {"defined": payload.name, "library_size": library_size(store)}
        if payload.kind == "run":
            if not payload.name:
                raise _error(422, "BadRequest", "run needs a program name")
            try:
                actions = store.flatten(payload.name)
            except UnknownName as exc:
                raise _error(404, "UnknownName", str(exc))
            session.submissions += 1
            trajectory = commit(session, session.context.goal, actions)
            return {
                "status": "executed",
                "actions": actions,
                "error_count": sum(trajectory.error_flags),
                "snapshot": snapshot(session),
            }
        raise _error(422, "BadRequest",
                     f"dictation sessions accept define, run or clear, "
                     f"not {payload.kind!r}")

    def _submit_search(session: LiveSession, payload: SubmitRequest) -> dict:
        if payload.kind != "solve":
            raise _error(422, "BadRequest",
                         f"{session.condition} sessions accept solve, not {payload.kind!r}")
        if session.solver_active:
            raise _error(409, "SolverBusy", "a solver is already running")
        if payload.goal is None:
            # hint-only: answer with a goal suggestion, start nothing
            return {"suggestion": suggest_goal(session, payload.hint)}
        try:
            goal = Goal(tuple(payload.goal))
        except ValueError as exc:
            raise _error(422, "BadGoal", str(exc))
        session.submissions += 1
        # Planners have no clear action, so a stranded slot pair from an
        # earlier execution would dead-end the search; tidy before solving.
        session.state = clear_slots(session.state)
        budget = start_solver(session, SearchProblem(goal, payload.hint))
        return {"accepted": True, "budget": budget}

    @app.post("/sessions/{sid}/cancel")
    def cancel(sid: str) -> dict:
        session = get_session(sid)
        with session.lock:
            active = session.solver_active
            if session.cancel_event is not None:
                session.cancel_event.set()
        return {"cancelled": active}

    @app.get("/sessions/{sid}/library")
    def library_view(sid: str, filter: str = "") -> dict:
        session = get_session(sid)
        entries = []
        if isinstance(session.library, ProgramStore):
            for record in session.library.beam_entries():
                entries.append({
                    "kind": "program",
                    "name": record.name,
                    "hint": record.hint,
                    "goal": list(record.goal_items),
                    "body": list(record.body),
                })
        else:
            for entry in session.library.entries:
                steps = []
                for step in entry.decomposition.steps:
                    if hasattr(step, "action"):
                        steps.append({"kind": "action", "action": step.action})
                    else:
                        steps.append({"kind": "sub",
                                      "goal": list(step.problem.goal.items),
                                      "hint": step.problem.hint})
                entries.append({
                    "kind": "decomposition",
                    "name": ",".join(entry.goal.items),
                    "hint": entry.hint,
                    "goal": list(entry.goal.items),
                    "steps": steps,
                    "uses": entry.occurrence_count,
                })
        if filter:
            entries = [e for e in entries
                       if filter in e["name"] or filter in e["hint"]]
        return {"entries": entries}

    @app.get("/sessions/{sid}/recipes")
    def recipes(sid: str) -> dict:
        session = get_session(sid)
        book = session.context.book
        listed = []
        for item in CRAFTABLE_ITEMS:
            if item in book.catalog.rules:
                rule = book.active_rule(item)
                listed.append({"item": item, "inputs": list(rule.inputs)})
        return {"recipes": listed}

    @app.get("/sessions/{sid}/events")
    def events(sid: str) -> StreamingResponse:
        session = get_session(sid)

        def stream():
            yield _sse("snapshot", snapshot(session))
            index = len(session.events)
            while True:
                fresh = session.events.wait(index, timeout=tick_seconds)
                index += len(fresh)
                ended = False
                for kind, data in fresh:
                    yield _sse(kind, data)
                    ended = ended or kind == "session_end"
                if ended:
                    return
                if check_expiry(session):
                    continue  # pick up the published session_end next round
                if not fresh:
                    yield _sse("timer",
                               {"remaining_seconds": round(remaining(session), 3)})

        return StreamingResponse(stream(), media_type="text/event-stream")

    app.state.sessions = sessions
    return app

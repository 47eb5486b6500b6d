"""The three teaching conditions and their execution engines.

* Direct programs: users name action macros explicitly; execution is a
  deterministic flatten-and-run with no search and no goal test.
* Program synthesis: candidate compositions of stored programs stream in
  from an outer proposer; the first composition whose flattened actions
  satisfy the goal is stored as a new named program.
* Decomposition planning: candidates are sequences of library
  decompositions whose nested sub-problems are re-proposed at execution
  time, so a stored plan adapts to whichever recipe variants currently
  work.  Successful plans are mined for every height-two subtree.

Both searching conditions stage candidate sequences by length and walk them
depth-first with undo, skipping any candidate that extends a no-effect or
failed element: such a candidate behaves identically to a shorter one that
was already tried.  The expansion counter charges one unit per element
application or per attempted sub-problem expansion, and the budget is a cap
on that counter.
"""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from typing import Callable

from craftlite.env import (
    ACTION_INDEX,
    ACTIONS,
    Context,
    Goal,
    ITEM_INDEX,
    RecipeCatalog,
    SimWorld,
    Trajectory,
    WorldState,
    run,
)
from craftlite.library import (
    CallStack,
    Decomposition,
    Library,
    LibraryEntry,
    ParseError,
    PlanTree,
    Primitive,
    SearchProblem,
    flatten,
    inner_propose,
)
from craftlite.proposers import (
    CandidateSequence,
    CompletionSampler,
    Embedder,
    HashEmbedder,
    LlmFeed,
    ProposerParams,
    beam_elements,
    build_prompt,
    rank_distance,
    rank_naive,
)

PROGRAMS_FORMAT_HEADER = "craftlite-programs v1"


class DuplicateName(ValueError):
    pass


class UnknownName(ValueError):
    pass


@dataclass
class ProgramRecord:
    """A named deterministic program: a sequence of other program names."""

    name: str
    body: tuple[str, ...]
    hint: str = ""
    goal_items: tuple[str, ...] = ()
    insertion_tick: int = 0
    last_used_tick: int = 0

    @property
    def is_primitive(self) -> bool:
        return not self.body


class ProgramStore:
    """Name-indexed program library seeded with the thirty primitives.

    Primitive records map to themselves and never appear in propose beams.
    Acyclicity holds by construction: a body may only reference names that
    already exist.
    """

    def __init__(self) -> None:
        self.records: dict[str, ProgramRecord] = {}
        self.tick_counter = 0
        for action in ACTIONS:
            self.records[action] = ProgramRecord(name=action, body=())

    def __contains__(self, name: str) -> bool:
        return name in self.records

    @property
    def defined_count(self) -> int:
        """Programs beyond the primitive seed."""
        return len(self.records) - len(ACTIONS)

    def define(self, name: str, body: list[str] | tuple[str, ...], hint: str = "",
               goal_items: tuple[str, ...] = ()) -> ProgramRecord:
        if name in self.records:
            raise DuplicateName(f"name already taken: {name!r}")
        if not name:
            raise ValueError("program name must be non-empty")
        if not body:
            raise ValueError("program body must be non-empty")
        for part in body:
            if part not in self.records:
                raise UnknownName(f"body references undefined name: {part!r}")
        tick = self.tick_counter
        self.tick_counter += 1
        record = ProgramRecord(
            name=name, body=tuple(body), hint=hint, goal_items=tuple(goal_items),
            insertion_tick=tick, last_used_tick=tick,
        )
        self.records[name] = record
        return record

    def touch(self, name: str) -> None:
        record = self.records[name]
        if record.is_primitive:
            return
        record.last_used_tick = self.tick_counter
        self.tick_counter += 1

    def flatten(self, name: str) -> list[str]:
        record = self.records.get(name)
        if record is None:
            raise UnknownName(f"no such program: {name!r}")
        if record.is_primitive:
            return [record.name]
        actions: list[str] = []
        for part in record.body:
            actions.extend(self.flatten(part))
        return actions

    def beam_entries(self) -> list[ProgramRecord]:
        return [r for r in self.records.values() if not r.is_primitive]


def dp_define(store: ProgramStore, name: str, body: list[str], hint: str = "") -> ProgramRecord:
    """Teach a macro by name.  The body may reference primitives and any
    previously taught program."""
    return store.define(name, body, hint=hint)


def dp_execute(store: ProgramStore, name: str, context: Context
               ) -> tuple[list[str], Trajectory]:
    """Flatten a program to primitives and run it.  No search, no goal test;
    erroring actions are absorbed as no-ops like any other run."""
    actions = store.flatten(name)
    return actions, run(context, actions)


@dataclass
class SolveStats:
    expansions: int = 0
    candidates: int = 0
    cache_hits: int = 0


@dataclass
class SolveResult:
    status: str  # success | budget | no_candidates | cancelled
    actions: list[str] | None = None
    final_state: WorldState | None = None
    tree: PlanTree | None = None
    program_name: str | None = None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def success(self) -> bool:
        return self.status == "success"


@dataclass
class PartialEvalOutcome:
    """Result of resuming a partial plan.

    ``executed_primitives`` counts only the fresh action applications this
    call made, so a resume over a cached prefix reports zero for the shared
    part.
    """

    variant: str  # complete | suspended | errored
    state: WorldState
    unexpanded: SearchProblem | None = None
    reason: str | None = None
    trajectory: Trajectory | None = None
    executed_primitives: int = 0


class EvalCache:
    """Prefix-state cache for partial_eval, bound to one context."""

    def __init__(self) -> None:
        self.context: Context | None = None
        self.states: dict[tuple, tuple] = {}


def _plan_events(plan: PlanTree) -> list[tuple]:
    """Left-to-right walk events: ("a", action), ("enter"/"exit", goal
    items) around internal nodes, ("sus", problem) at bare sub-problems."""
    events: list[tuple] = []

    def visit(node: PlanTree) -> None:
        for child in node.children:
            if isinstance(child, str):
                events.append(("a", child))
            elif isinstance(child, PlanTree):
                events.append(("enter", child.head.goal.items))
                visit(child)
                events.append(("exit", child.head.goal.items))
            else:
                events.append(("sus", child))

    visit(plan)
    return events


def partial_eval(plan: PlanTree, context: Context,
                 cache: EvalCache | None = None) -> PartialEvalOutcome:
    """Run a partial plan up to its leftmost unexpanded sub-problem.

    Primitives execute left to right with errors absorbed; every internal
    node must strictly increase each of its goal's craft counts by the time
    it closes, otherwise the outcome is Errored.  The root's own goal is the
    caller's concern.  With a cache, execution resumes from the longest
    already-evaluated prefix of the same plan shape.
    """
    if cache is not None:
        if cache.context is None:
            cache.context = context
        elif cache.context is not context:
            raise ValueError("cache is bound to a different context")
    events = _plan_events(plan)
    first_sus = next((i for i, e in enumerate(events) if e[0] == "sus"),
                     len(events))
    start = 0
    world = None
    node_stack: list[tuple[tuple[str, ...], list[int]]] = []
    if cache is not None:
        for n in range(first_sus, 0, -1):
            hit = cache.states.get(tuple(events[:n]))
            if hit is not None:
                snap, stack_snap = hit
                world = SimWorld.from_state(context.start, context.book)
                world.restore(snap)
                node_stack = [(items, list(before)) for items, before in stack_snap]
                start = n
                break
    if world is None:
        world = SimWorld.from_state(context.start, context.book)
    executed = 0
    for i in range(start, len(events)):
        event = events[i]
        kind = event[0]
        if kind == "a":
            world.apply(ACTION_INDEX[event[1]])
            executed += 1
        elif kind == "enter":
            node_stack.append(
                (event[1], [world.crafted[ITEM_INDEX[it]] for it in event[1]]))
        elif kind == "exit":
            items, before = node_stack.pop()
            increased = all(
                world.crafted[ITEM_INDEX[it]] > before[j]
                for j, it in enumerate(items)
            )
            if not increased:
                return PartialEvalOutcome(
                    variant="errored", state=world.to_state(),
                    reason=f"sub-goal not achieved: {', '.join(items)}",
                    executed_primitives=executed,
                )
        else:
            return PartialEvalOutcome(
                variant="suspended", state=world.to_state(),
                unexpanded=event[1], executed_primitives=executed,
            )
        if cache is not None:
            cache.states[tuple(events[:i + 1])] = (
                world.snapshot(),
                tuple((items, tuple(before)) for items, before in node_stack),
            )
    actions = flatten(plan)
    return PartialEvalOutcome(
        variant="complete", state=world.to_state(),
        trajectory=run(context, actions), executed_primitives=executed,
    )


@dataclass
class Proposer:
    """Outer-propose strategy shared by the searching executors."""

    kind: str = "distance"  # naive | distance | llm
    embedder: Embedder | None = None
    sampler: CompletionSampler | None = None
    catalog: RecipeCatalog | None = None
    k: int = 10
    n_samples: int = 5

    def __post_init__(self) -> None:
        if self.kind not in ("naive", "distance", "llm"):
            raise ValueError(f"unknown proposer kind {self.kind!r}")
        if self.kind in ("distance", "llm") and self.embedder is None:
            self.embedder = HashEmbedder()
        if self.kind == "llm" and self.sampler is None:
            raise ValueError("llm proposer needs a sampler")

    def ranked_refs(self, problem: SearchProblem, library, params: ProposerParams) -> list:
        if self.kind == "naive":
            return rank_naive(library, params)
        return rank_distance(library, problem, self.embedder, params)

    def make_feed(self, problem: SearchProblem, library) -> LlmFeed | None:
        if self.kind != "llm":
            return None
        catalog = self.catalog
        if catalog is None:
            raise ValueError("llm proposer needs the recipe catalog for prompts")
        if isinstance(library, ProgramStore):
            library = _prompt_library(library)
        prompt = build_prompt(problem, library, catalog, self.embedder,
                              k=self.k, n_samples=self.n_samples)
        return LlmFeed(self.sampler, prompt)


def _prompt_library(store: ProgramStore) -> Library:
    """Prompt-example view of a program store.

    Programs are opaque macros, so each one is shown as its flattened action
    list under the goal it was synthesized for; programs without a recorded
    goal (user-defined macros) carry no post-condition worth showing and are
    left out.
    """
    view = Library()
    records = sorted((r for r in store.beam_entries() if r.goal_items),
                     key=lambda r: r.insertion_tick)
    for record in records:
        view.insert(Decomposition(
            head=SearchProblem(goal=Goal(record.goal_items), hint=record.hint),
            steps=tuple(Primitive(a) for a in store.flatten(record.name)),
        ))
    return view


class _Exhausted(Exception):
    def __init__(self, status: str):
        self.status = status


class _Found(Exception):
    pass


class _Charger:
    """Budget, cancellation and progress bookkeeping for one solve."""

    def __init__(self, stats: SolveStats, budget: int,
                 cancel: threading.Event | None,
                 on_progress: Callable[[SolveStats], None] | None,
                 progress_every: int):
        self.stats = stats
        self.budget = budget
        self.cancel = cancel
        self.on_progress = on_progress
        self.progress_every = progress_every

    def charge(self) -> None:
        if self.cancel is not None and self.cancel.is_set():
            raise _Exhausted("cancelled")
        if self.stats.expansions >= self.budget:
            raise _Exhausted("budget")
        self.stats.expansions += 1
        if self.on_progress is not None and \
                self.stats.expansions % self.progress_every == 0:
            self.on_progress(self.stats)


def _goal_marks(world: SimWorld, goal: Goal) -> list[tuple[int, int]]:
    return [(world.crafted[ITEM_INDEX[i]], world.counts[ITEM_INDEX[i]])
            for i in goal.items]


def _goal_delivered(world: SimWorld, goal: Goal,
                    marks: list[tuple[int, int]]) -> bool:
    """True when every goal item was crafted anew and is still held.

    Crafting alone is not enough: a plan can craft an item and then consume
    it as an ingredient further along, which satisfies the reward predicate
    but leaves nothing behind for whoever asked.  Solvers only accept plans
    whose outputs survive to the final state.
    """
    return all(
        world.crafted[ITEM_INDEX[item]] > crafted
        and world.counts[ITEM_INDEX[item]] > held
        for (crafted, held), item in zip(marks, goal.items)
    )


def ds_execute(problem: SearchProblem, context: Context, store: ProgramStore,
               proposer: Proposer | None = None,
               params: ProposerParams | None = None,
               budget: int | None = None, *,
               cancel: threading.Event | None = None,
               trace: Callable[[str], None] | None = None,
               on_progress: Callable[[SolveStats], None] | None = None,
               progress_every: int = 500,
               cache: bool = True) -> SolveResult:
    """Search for a program composition satisfying the goal and store it.

    The stored program replays the exact action sequence it was found with;
    no part of it re-plans later, which is what makes these programs brittle
    when recipes change underneath them.
    """
    proposer = proposer or Proposer()
    params = params or ProposerParams()
    budget = params.expansion_budget if budget is None else budget
    stats = SolveStats()
    charger = _Charger(stats, budget, cancel, on_progress, progress_every)
    world = SimWorld.from_state(context.start, context.book)
    goal_before = _goal_marks(world, problem.goal)
    flat_cache: dict[str, list[str]] = {}

    def flat(name: str) -> list[str]:
        if name not in flat_cache:
            flat_cache[name] = store.flatten(name)
        return flat_cache[name]

    beam = beam_elements(proposer.ranked_refs(problem, store, params))
    beam_names = [e if isinstance(e, str) else e.name for e in beam]
    feed = proposer.make_feed(problem, store)

    found: dict = {}

    goal_cache: dict[str, Goal | None] = {}

    def goal_of(name: str) -> Goal | None:
        if name not in goal_cache:
            items = store.records[name].goal_items if name in store else None
            goal_cache[name] = Goal(items) if items else None
        return goal_cache[name]

    def apply_name(name: str) -> tuple[bool, list]:
        # A stored program only counts as applied when it delivers the goal
        # it was synthesized for; partial execution with absorbed errors
        # would otherwise flood the search with half-applied macros.
        # Programs without a recorded goal (hand-dictated) fall back to
        # any-effect.
        entry_goal = goal_of(name)
        before = None if entry_goal is None else _goal_marks(world, entry_goal)
        tokens = []
        moved = False
        for action in flat(name):
            token = world.apply(ACTION_INDEX[action])
            if token is not None:
                tokens.append(token)
                moved = True
        if before is not None and not _goal_delivered(world, entry_goal, before):
            moved = False
        return moved, tokens

    def undo_tokens(tokens: list) -> None:
        for token in reversed(tokens):
            world.undo(token)

    def complete(body: list[str]) -> None:
        found["body"] = list(body)
        found["state"] = world.to_state()
        raise _Found()

    def name_for_goal(goal: Goal) -> str | None:
        best = None
        for record in store.records.values():
            if record.is_primitive or record.goal_items != goal.items:
                continue
            if best is None or (record.last_used_tick, record.insertion_tick) \
                    > (best.last_used_tick, best.insertion_tick):
                best = record
        return None if best is None else best.name

    def eval_feed_candidate(candidate: CandidateSequence) -> None:
        # A suggested sub-task grounds here as the most recently stored
        # program for that goal: stored programs are frozen artifacts, so
        # the substitution replays whatever recipe path that program was
        # synthesized under.  The planning condition re-solves the same
        # sub-task instead; that difference is the whole point.
        names = []
        for item in candidate.items:
            if isinstance(item, SearchProblem):
                name = name_for_goal(item.goal)
            else:
                name = item if isinstance(item, str) else item.name
            if name is None or name not in store:
                return
            names.append(name)
        charger.charge()
        tokens = []
        for name in names:
            moved, toks = apply_name(name)
            tokens.extend(toks)
        stats.candidates += 1
        if trace:
            trace(f"plan={stats.candidates} prefix={len(names)} outcome=proposed")
        if _goal_delivered(world, problem.goal, goal_before):
            complete(names)
        undo_tokens(tokens)

    path: list[str] = []
    root_snap = world.snapshot()

    def dfs(depth: int, stage: int) -> None:
        for name in beam_names:
            if depth == 1 and feed is not None:
                for candidate in feed.poll():
                    eval_feed_candidate(candidate)
            charger.charge()
            if not cache:
                # evaluate every candidate from scratch
                world.restore(root_snap)
                for prefix_name in path:
                    apply_name(prefix_name)
            else:
                stats.cache_hits += len(path)
            moved, tokens = apply_name(name)
            if not moved:
                if trace:
                    trace(f"plan={stats.candidates} prefix={depth} outcome=noop")
                undo_tokens(tokens)
                if not cache:
                    _replay(world, root_snap, path, apply_name)
                continue
            path.append(name)
            if depth == stage:
                stats.candidates += 1
                if trace:
                    trace(f"plan={stats.candidates} prefix={depth} outcome=evaluated")
                if _goal_delivered(world, problem.goal, goal_before):
                    complete(path)
            else:
                dfs(depth + 1, stage)
            path.pop()
            undo_tokens(tokens)
            if not cache:
                _replay(world, root_snap, path, apply_name)

    status = "no_candidates"
    try:
        if feed is not None:
            for candidate in feed.poll():
                eval_feed_candidate(candidate)
        for stage in range(1, params.max_len + 1):
            dfs(1, stage)
        if feed is not None:
            for candidate in feed.poll(wait=True):
                eval_feed_candidate(candidate)
    except _Exhausted as exc:
        status = exc.status
    except _Found:
        body = found["body"]
        for name in body:
            store.touch(name)
        program = store.define(_auto_name(store, problem.hint), body,
                               hint=problem.hint, goal_items=problem.goal.items)
        actions = []
        for name in body:
            actions.extend(flat(name))
        return SolveResult(
            status="success", actions=actions, final_state=found["state"],
            program_name=program.name, stats=stats,
        )
    finally:
        if feed is not None:
            feed.close()
    return SolveResult(status=status, stats=stats)


def _replay(world: SimWorld, snap, path: list[str], apply_name) -> None:
    world.restore(snap)
    for name in path:
        apply_name(name)


def _auto_name(store: ProgramStore, hint: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", hint.lower()).strip("_")[:48] or "program"
    if slug not in store:
        return slug
    n = 2
    while f"{slug}_{n}" in store:
        n += 1
    return f"{slug}_{n}"


def np_execute(problem: SearchProblem, context: Context, library: Library,
               proposer: Proposer | None = None,
               params: ProposerParams | None = None,
               budget: int | None = None, *,
               cancel: threading.Event | None = None,
               trace: Callable[[str], None] | None = None,
               on_progress: Callable[[SolveStats], None] | None = None,
               progress_every: int = 500,
               cache: bool = True,
               learn: bool = True) -> SolveResult:
    """Plan by recursive decomposition and learn from the winning tree.

    Top-level candidates come from the outer proposer; bare sub-problems
    inside a plan are expanded on the fly through ``inner_propose``, best
    candidate first, with a call-stack check stopping goal recursion.  Every
    internal node must deliver its own goal item, so a failing sub-recipe
    kills a plan early and the next stored variant is tried.
    """
    proposer = proposer or Proposer()
    params = params or ProposerParams()
    budget = params.expansion_budget if budget is None else budget
    stats = SolveStats()
    charger = _Charger(stats, budget, cancel, on_progress, progress_every)
    world = SimWorld.from_state(context.start, context.book)
    goal_before = _goal_marks(world, problem.goal)
    beam = beam_elements(proposer.ranked_refs(problem, library, params))
    feed = proposer.make_feed(problem, library)
    root_items = problem.goal.items

    found: dict = {}

    def solve_sub(sub: SearchProblem, ancestors: tuple[tuple[str, ...], ...]
                  ) -> PlanTree | None:
        stack = CallStack(goals=[Goal(items) for items in ancestors])
        ranked = inner_propose(stack, sub, library,
                               frequency_weight=params.frequency_weight,
                               recency_weight=params.recency_weight)
        for entry, _score in ranked:
            charger.charge()
            snap = world.snapshot()
            before = _goal_marks(world, sub.goal)
            children = exec_steps(entry.decomposition.steps,
                                  ancestors + (sub.goal.items,))
            if children is not None and _goal_delivered(world, sub.goal, before):
                return PlanTree(
                    head=SearchProblem(goal=sub.goal, hint=sub.hint or entry.hint),
                    children=tuple(children),
                )
            world.restore(snap)
        return None

    def exec_steps(steps, ancestors: tuple[tuple[str, ...], ...]):
        children: list[PlanTree | str] = []
        for step in steps:
            if isinstance(step, Primitive):
                world.apply(ACTION_INDEX[step.action])  # no-ops absorbed
                children.append(step.action)
            else:
                node = solve_sub(step.problem, ancestors)
                if node is None:
                    return None
                children.append(node)
        return children

    def apply_element(element) -> tuple[bool, Callable[[], None] | None, object]:
        if isinstance(element, str):
            token = world.apply(ACTION_INDEX[element])
            if token is None:
                return False, None, None
            return True, (lambda: world.undo(token)), element
        if isinstance(element, LibraryEntry):
            snap = world.snapshot()
            before = _goal_marks(world, element.goal)
            children = exec_steps(element.decomposition.steps,
                                  (root_items, element.goal.items)
                                  if element.goal.items != root_items
                                  else (root_items,))
            if children is None or not _goal_delivered(world, element.goal, before):
                world.restore(snap)
                return False, None, None
            node = PlanTree(
                head=SearchProblem(goal=element.goal, hint=element.hint),
                children=tuple(children),
            )
            return True, (lambda: world.restore(snap)), node
        # bare sub-problem from a parsed completion
        snap = world.snapshot()
        node = solve_sub(element, (root_items,))
        if node is None:
            world.restore(snap)
            return False, None, None
        return True, (lambda: world.restore(snap)), node

    def complete(payloads: list) -> None:
        # A payload node sharing the root goal is the root's own completion,
        # not a sub-problem; splice its steps in place.  Keeping it nested
        # would learn a decomposition that recurses on its own goal, which
        # the cycle check then blocks forever.
        children: list[PlanTree | str] = []
        for payload in payloads:
            if (isinstance(payload, PlanTree)
                    and payload.head.goal.items == root_items):
                children.extend(payload.children)
            else:
                children.append(payload)
        found["tree"] = PlanTree(
            head=SearchProblem(goal=problem.goal, hint=problem.hint),
            children=tuple(children),
        )
        found["state"] = world.to_state()
        raise _Found()

    def eval_candidate_items(items: tuple) -> None:
        charger.charge()
        snap = world.snapshot()
        payloads = []
        ok = True
        for element in items:
            moved, _undo, payload = apply_element(element)
            if not moved:
                ok = False
                break
            payloads.append(payload)
        stats.candidates += 1
        if trace:
            trace(f"plan={stats.candidates} prefix={len(items)} outcome=proposed")
        if ok and _goal_delivered(world, problem.goal, goal_before):
            complete(payloads)
        world.restore(snap)

    path: list = []
    payload_stack: list = []
    root_snap = world.snapshot()

    def dfs(depth: int, stage: int) -> None:
        for element in beam:
            if depth == 1 and feed is not None:
                for candidate in feed.poll():
                    eval_candidate_items(candidate.items)
            charger.charge()
            if not cache:
                world.restore(root_snap)
                replayed = []
                for prefix_element in path:
                    _m, _u, p = apply_element(prefix_element)
                    replayed.append(p)
                payload_stack[:] = replayed
            else:
                stats.cache_hits += len(path)
            moved, undo, payload = apply_element(element)
            if not moved:
                if trace:
                    trace(f"plan={stats.candidates} prefix={depth} outcome=noop")
                continue
            path.append(element)
            payload_stack.append(payload)
            if depth == stage:
                stats.candidates += 1
                if trace:
                    trace(f"plan={stats.candidates} prefix={depth} outcome=evaluated")
                if _goal_delivered(world, problem.goal, goal_before):
                    complete(list(payload_stack))
            else:
                dfs(depth + 1, stage)
            path.pop()
            payload_stack.pop()
            if cache and undo is not None:
                undo()

    status = "no_candidates"
    try:
        if feed is not None:
            for candidate in feed.poll():
                eval_candidate_items(candidate.items)
        for stage in range(1, params.max_len + 1):
            dfs(1, stage)
        if feed is not None:
            for candidate in feed.poll(wait=True):
                eval_candidate_items(candidate.items)
    except _Exhausted as exc:
        status = exc.status
    except _Found:
        tree = found["tree"]
        if learn:
            library.learn_from_tree(tree)
        return SolveResult(
            status="success", actions=flatten(tree), final_state=found["state"],
            tree=tree, stats=stats,
        )
    finally:
        if feed is not None:
            feed.close()
    return SolveResult(status=status, stats=stats)


def format_programs(store: ProgramStore) -> str:
    """Versioned text form of the non-primitive programs, insertion order."""
    lines = [PROGRAMS_FORMAT_HEADER, f"tick_counter={store.tick_counter}"]
    records = sorted(store.beam_entries(), key=lambda r: r.insertion_tick)
    for record in records:
        lines.append(json.dumps({
            "name": record.name,
            "hint": record.hint,
            "body": list(record.body),
            "goal": list(record.goal_items),
            "insertion_tick": record.insertion_tick,
            "last_used_tick": record.last_used_tick,
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


def parse_programs(text: str) -> ProgramStore:
    lines = text.splitlines()
    if not lines or lines[0].strip() != PROGRAMS_FORMAT_HEADER:
        raise ParseError("line 1: missing programs format header")
    if len(lines) < 2 or not lines[1].startswith("tick_counter="):
        raise ParseError("line 2: missing tick_counter")
    try:
        tick_counter = int(lines[1].split("=", 1)[1])
    except ValueError as exc:
        raise ParseError(f"line 2: bad tick_counter: {exc}") from exc
    store = ProgramStore()
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            program = store.define(record["name"], record["body"],
                                   hint=record.get("hint", ""),
                                   goal_items=tuple(record.get("goal", ())))
            program.insertion_tick = int(record["insertion_tick"])
            program.last_used_tick = int(record["last_used_tick"])
        except (KeyError, TypeError, ValueError, DuplicateName, UnknownName) as exc:
            raise ParseError(f"line {lineno}: bad program record: {exc}") from exc
    store.tick_counter = tick_counter
    return store

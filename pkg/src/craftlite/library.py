"""Library of learned goal decompositions.

A decomposition rewrites one search problem into a short sequence of steps,
each either a primitive action or a nested sub-problem.  The library indexes
decompositions by goal and ranks them for reuse by a weighted mix of how
often each one has been learned (frequency) and how recently it was touched
(recency).  Recency dominates the mix: decompositions learned under the
current dynamics are the ones most likely to still work.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from craftlite.env import ACTION_INDEX, Goal

FREQUENCY_WEIGHT = 0.2
RECENCY_WEIGHT = 0.8

LIBRARY_FORMAT_HEADER = "craftlite-library v1"


@dataclass(frozen=True)
class SearchProblem:
    """A goal plus the natural-language hint it was requested with."""

    goal: Goal
    hint: str = ""


@dataclass(frozen=True)
class Primitive:
    action: str

    def __post_init__(self) -> None:
        if self.action not in ACTION_INDEX:
            raise ValueError(f"unknown action {self.action!r}")


@dataclass(frozen=True)
class SubProblem:
    problem: SearchProblem


Step = Primitive | SubProblem


@dataclass(frozen=True)
class Decomposition:
    """Head problem rewritten into an ordered sequence of steps."""

    head: SearchProblem
    steps: tuple[Step, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("decomposition needs at least one step")

    def signature(self) -> tuple:
        """Identity key: the head goal and the step shapes, hints excluded."""
        return (self.head.goal.items, steps_signature(self.steps))


def steps_signature(steps: tuple[Step, ...]) -> tuple:
    sig = []
    for s in steps:
        if isinstance(s, Primitive):
            sig.append(("a", s.action))
        else:
            sig.append(("p", s.problem.goal.items))
    return tuple(sig)


@dataclass
class LibraryEntry:
    """A stored decomposition with its bookkeeping counters.

    ``hint`` tracks the most recent phrasing seen for this decomposition;
    identity never depends on it.
    """

    decomposition: Decomposition
    occurrence_count: int
    insertion_tick: int
    last_used_tick: int

    @property
    def goal(self) -> Goal:
        return self.decomposition.head.goal

    @property
    def hint(self) -> str:
        return self.decomposition.head.hint


@dataclass
class PlanTree:
    """Plan under a head problem.  Children are primitive actions (plain
    action strings), further plan trees, or still-unexpanded sub-problems;
    a fully grounded plan has no bare SearchProblem children anywhere.
    ``entry_state`` is optional runtime bookkeeping for goal checks."""

    head: SearchProblem
    children: tuple["PlanTree | SearchProblem | str", ...]
    entry_state: object | None = None


def flatten(tree: PlanTree) -> list[str]:
    """Primitive actions of the tree, left to right.  Grounded trees only."""
    actions: list[str] = []
    for child in tree.children:
        if isinstance(child, PlanTree):
            actions.extend(flatten(child))
        elif isinstance(child, SearchProblem):
            raise ValueError("cannot flatten a plan with unexpanded sub-problems")
        else:
            actions.append(child)
    return actions


def tree_decompositions(tree: PlanTree) -> list[Decomposition]:
    """All height-two subtrees of the plan, pre-order.

    Each internal node contributes one decomposition: its problem rewritten
    into its immediate children (sub-trees become sub-problems).
    """
    found: list[Decomposition] = []

    def visit(node: PlanTree) -> None:
        steps: list[Step] = []
        for child in node.children:
            if isinstance(child, PlanTree):
                steps.append(SubProblem(problem=child.head))
            elif isinstance(child, SearchProblem):
                steps.append(SubProblem(problem=child))
            else:
                steps.append(Primitive(action=child))
        found.append(Decomposition(head=node.head, steps=tuple(steps)))
        for child in node.children:
            if isinstance(child, PlanTree):
                visit(child)

    visit(tree)
    return found


class Library:
    """Goal-indexed store of decompositions with a logical clock."""

    def __init__(self) -> None:
        self.entries: list[LibraryEntry] = []
        self.tick_counter: int = 0
        self._by_signature: dict[tuple, LibraryEntry] = {}
        self._by_goal: dict[tuple[str, ...], list[LibraryEntry]] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def get_decompositions(self, goal: Goal) -> list[LibraryEntry]:
        return list(self._by_goal.get(goal.items, ()))

    def beam_entries(self) -> list[LibraryEntry]:
        """Entries eligible for outer-propose beams, in insertion order."""
        return list(self.entries)

    def insert(self, decomposition: Decomposition) -> LibraryEntry:
        """Add one decomposition, advancing the clock by one tick.

        A decomposition already present (same goal, same steps) has its
        occurrence count bumped and its recency and hint refreshed instead of
        creating a duplicate entry.
        """
        tick = self.tick_counter
        self.tick_counter += 1
        key = decomposition.signature()
        entry = self._by_signature.get(key)
        if entry is not None:
            entry.occurrence_count += 1
            entry.last_used_tick = tick
            entry.decomposition = decomposition
            return entry
        entry = LibraryEntry(
            decomposition=decomposition,
            occurrence_count=1,
            insertion_tick=tick,
            last_used_tick=tick,
        )
        self.entries.append(entry)
        self._by_signature[key] = entry
        self._by_goal.setdefault(decomposition.head.goal.items, []).append(entry)
        return entry

    def learn_from_tree(self, tree: PlanTree) -> list[LibraryEntry]:
        """Store every height-two subtree of a successful plan, pre-order."""
        return [self.insert(d) for d in tree_decompositions(tree)]


def frequency_score(entry: LibraryEntry, candidates: list[LibraryEntry]) -> float:
    """Occurrence count normalized by the candidate-set maximum."""
    top = max(e.occurrence_count for e in candidates)
    return entry.occurrence_count / top


def recency_score(entry: LibraryEntry, candidates: list[LibraryEntry]) -> float:
    """Last-used tick mapped linearly onto [0, 1]; newest scores 1.

    A degenerate range (all candidates share one tick) scores 1.0 for all.
    """
    ticks = [e.last_used_tick for e in candidates]
    low, high = min(ticks), max(ticks)
    if high == low:
        return 1.0
    return (entry.last_used_tick - low) / (high - low)


@dataclass
class CallStack:
    """Goals currently under expansion, outermost first."""

    goals: list[Goal] = field(default_factory=list)

    def push(self, goal: Goal) -> "CallStack":
        return CallStack(goals=self.goals + [goal])

    def contains(self, goal: Goal) -> bool:
        return any(g.items == goal.items for g in self.goals)


def inner_propose(
    stack: CallStack,
    problem: SearchProblem,
    library: Library,
    frequency_weight: float = FREQUENCY_WEIGHT,
    recency_weight: float = RECENCY_WEIGHT,
) -> list[tuple[LibraryEntry, float]]:
    """Rank the library's decompositions of a sub-problem's goal.

    Candidates that would re-introduce a goal already being expanded are
    dropped (the recursion check).  Survivors are scored by the weighted mix
    of frequency and recency and returned best first; ties prefer the more
    recently used entry, then earlier insertion.
    """
    candidates = [
        e
        for e in library.get_decompositions(problem.goal)
        if not any(
            isinstance(s, SubProblem) and stack.contains(s.problem.goal)
            for s in e.decomposition.steps
        )
    ]
    if not candidates:
        return []
    scored = [
        (
            e,
            frequency_weight * frequency_score(e, candidates)
            + recency_weight * recency_score(e, candidates),
        )
        for e in candidates
    ]
    order = {id(e): i for i, e in enumerate(candidates)}
    scored.sort(key=lambda pair: (-pair[1], -pair[0].last_used_tick, order[id(pair[0])]))
    return scored


def _steps_to_json(steps: tuple[Step, ...]) -> list:
    out = []
    for s in steps:
        if isinstance(s, Primitive):
            out.append(s.action)
        else:
            out.append({"goal": list(s.problem.goal.items), "hint": s.problem.hint})
    return out


def _steps_from_json(raw: list, location: str) -> tuple[Step, ...]:
    steps: list[Step] = []
    for part in raw:
        if isinstance(part, str):
            if part not in ACTION_INDEX:
                raise ParseError(f"{location}: unknown action {part!r}")
            steps.append(Primitive(action=part))
        elif isinstance(part, dict) and "goal" in part:
            steps.append(
                SubProblem(
                    problem=SearchProblem(
                        goal=Goal(tuple(part["goal"])), hint=part.get("hint", "")
                    )
                )
            )
        else:
            raise ParseError(f"{location}: unrecognized step {part!r}")
    return tuple(steps)


class ParseError(ValueError):
    pass


def format_library(library: Library) -> str:
    """Versioned text form: a header line, the clock, one record per entry."""
    lines = [LIBRARY_FORMAT_HEADER, f"tick_counter={library.tick_counter}"]
    for entry in library.entries:
        record = {
            "goal": list(entry.goal.items),
            "hint": entry.hint,
            "steps": _steps_to_json(entry.decomposition.steps),
            "occurrence_count": entry.occurrence_count,
            "insertion_tick": entry.insertion_tick,
            "last_used_tick": entry.last_used_tick,
        }
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + "\n"


def parse_library(text: str) -> Library:
    lines = text.splitlines()
    if not lines or lines[0].strip() != LIBRARY_FORMAT_HEADER:
        raise ParseError("line 1: missing library format header")
    if len(lines) < 2 or not lines[1].startswith("tick_counter="):
        raise ParseError("line 2: missing tick_counter")
    library = Library()
    try:
        final_tick = int(lines[1].split("=", 1)[1])
    except ValueError as exc:
        raise ParseError("line 2: bad tick_counter") from exc
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        location = f"line {lineno}"
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{location}: bad record: {exc}") from exc
        try:
            head = SearchProblem(goal=Goal(tuple(record["goal"])), hint=record["hint"])
            entry = LibraryEntry(
                decomposition=Decomposition(
                    head=head, steps=_steps_from_json(record["steps"], location)
                ),
                occurrence_count=int(record["occurrence_count"]),
                insertion_tick=int(record["insertion_tick"]),
                last_used_tick=int(record["last_used_tick"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"{location}: bad record: {exc}") from exc
        key = entry.decomposition.signature()
        if key in library._by_signature:
            raise ParseError(f"{location}: duplicate entry identity")
        library.entries.append(entry)
        library._by_signature[key] = entry
        library._by_goal.setdefault(entry.goal.items, []).append(entry)
    library.tick_counter = final_tick
    return library

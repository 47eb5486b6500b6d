"""Simulated teachers for generational experiments.

A simulated user receives a list of goal items and works through them in
order.  For each target it submits a search problem whose hint is phrased
from the active recipe, waits out the solver's expansion budget, and on
failure recursively pursues the recipe's craftable inputs before retrying
the target once.  Successful solves commit their actions to the session
world, so later targets start from the accumulated inventory; that is what
lets stored programs compose across a session.

Only the synthesis and planner conditions have simulated users.  Dictation
has nothing to simulate: a dictated program is its own transcript.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from craftlite.env import RAW_ITEMS, Context, Goal, RecipeRule, clear_slots, run
from craftlite.executors import ProgramStore, Proposer, SolveResult, ds_execute, np_execute
from craftlite.library import Library, SearchProblem
from craftlite.proposers import ProposerParams, TemplateSampler

CONDITIONS = ("np", "ds")

_RAW_SET = frozenset(RAW_ITEMS)


def make_hint(item: str, rule: RecipeRule) -> str:
    """Phrase the request a teacher types for one craft step.

    Inputs keep the rule's authored order, matching what a recipe browser
    would display.
    """
    if rule.output != item:
        raise ValueError(f"rule produces {rule.output!r}, not {item!r}")
    a, b = rule.inputs
    return f"please craft '{item}' with '{a}' and '{b}'"


@dataclass(frozen=True)
class SimUserPolicy:
    """Budgets for one simulated session.

    ``per_attempt_budget`` caps a single solver call; ``session_budget``
    caps the whole session, standing in for the wall-clock limit a real
    participant faces.  ``rng_seed`` is reserved for stochastic user
    models; the built-in teacher is deterministic and ignores it.
    """

    per_attempt_budget: int = 20_000
    session_budget: int = 120_000
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.per_attempt_budget <= 0:
            raise ValueError("per_attempt_budget must be positive")
        if self.per_attempt_budget > self.session_budget:
            raise ValueError("per_attempt_budget cannot exceed session_budget")


@dataclass(frozen=True)
class AttemptOutcome:
    """One solver submission: what was asked, in which role, what came back."""

    item: str
    role: str  # "goal" | "prerequisite" | "retry"
    status: str
    expansions: int


@dataclass
class SessionRecord:
    """Everything measurable about one simulated session."""

    condition: str
    goals: tuple[str, ...]
    submissions: int = 0
    items_built: int = 0
    truncated: bool = False
    library_size_before: int = 0
    library_size_after: int = 0
    expansions: int = 0
    outcomes: list[AttemptOutcome] = field(default_factory=list)

    @property
    def reward(self) -> int:
        """Each goal copy crafted is worth one point."""
        return self.items_built


def library_size(library: Library | ProgramStore) -> int:
    """Learned-content count that works for both library kinds."""
    if isinstance(library, ProgramStore):
        return library.defined_count
    return len(library.entries)


SolverFn = Callable[[SearchProblem, Context, int], SolveResult]


class _OutOfTime(Exception):
    """Internal control flow: the session budget ran dry."""


def simulate_session(
    condition: str,
    context: Context,
    library: Library | ProgramStore,
    policy: SimUserPolicy,
    *,
    solver: SolverFn | None = None,
    proposer: Proposer | None = None,
    params: ProposerParams | None = None,
) -> tuple[SessionRecord, Library | ProgramStore]:
    """Run one simulated teaching session and return its record.

    ``context.goal`` lists the session's target items in pursuit order;
    ``context.start`` is the opening world.  The library object is mutated
    in place by the solvers and returned for chaining.  A custom ``solver``
    (problem, context, budget) -> SolveResult replaces the built-in
    condition dispatch; scripted tests use this to force failures.
    """
    condition = condition.lower()
    if condition not in CONDITIONS:
        raise ValueError(f"no simulated user for condition {condition!r}")

    record = SessionRecord(condition=condition, goals=context.goal.items)
    record.library_size_before = library_size(library)
    book = context.book
    state = context.start
    if proposer is None:
        # Both searching conditions race enumeration against a completion
        # sampler; offline that is the template sampler, which turns the
        # teacher's phrasing into a suggested program over sub-tasks.  The
        # conditions differ in what a sub-task means to them: synthesis
        # substitutes its most recent stored program, planning re-solves it
        # under the current book.
        proposer = Proposer(kind="llm", sampler=TemplateSampler(),
                            catalog=book.catalog)

    def solve(problem: SearchProblem, budget: int) -> SolveResult:
        ctx = Context(problem.goal, state, book)
        if solver is not None:
            return solver(problem, ctx, budget)
        if condition == "np":
            return np_execute(problem, ctx, library, proposer, params, budget)
        return ds_execute(problem, ctx, library, proposer, params, budget)

    def attempt(item: str, role: str) -> bool:
        nonlocal state
        remaining = policy.session_budget - record.expansions
        if remaining <= 0:
            record.truncated = True
            raise _OutOfTime
        # Tidy the bench first: a committed solution can strand a pair of
        # items in the input slots, and since planners have no clear action
        # a mismatched pair would dead-end every later search.  The UI
        # exposes a clear control for exactly this; the teacher uses it.
        state = clear_slots(state)
        problem = SearchProblem(Goal((item,)), make_hint(item, book.active_rule(item)))
        result = solve(problem, min(policy.per_attempt_budget, remaining))
        record.submissions += 1
        record.expansions += result.stats.expansions
        record.outcomes.append(
            AttemptOutcome(item, role, result.status, result.stats.expansions))
        if not result.success:
            return False
        state = run(Context(problem.goal, state, book), result.actions).final
        return True

    def pursue(item: str, role: str) -> bool:
        if attempt(item, role):
            return True
        # Teach the recipe's craftable inputs (duplicates matter: the retry
        # needs both copies in inventory), then give the target one more try.
        for prereq in book.active_rule(item).inputs:
            if prereq not in _RAW_SET:
                pursue(prereq, "prerequisite")
        return attempt(item, "retry")

    try:
        for goal_item in context.goal.items:
            if pursue(goal_item, "goal"):
                record.items_built += 1
    except _OutOfTime:
        pass
    record.library_size_after = library_size(library)
    return record, library

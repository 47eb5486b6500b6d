"""Generational experiment harness.

A chain runs one condition through a sequence of simulated sessions, each
with a freshly sampled recipe book and goal list, carrying the learned
library from one generation to the next.  Matched chains for different
conditions see byte-identical contexts: every per-generation random draw
is keyed by (batch seed, generation, rule-flip rate) and nothing else.

Metrics land in a flat CSV, one row per session, plus a summary table of
per-generation means with seeded bootstrap confidence intervals.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from craftlite.env import (
    Goal,
    RecipeBook,
    RecipeCatalog,
    WorldState,
    Context,
    default_catalog,
    generate_book,
    starting_state,
)
from craftlite.executors import ProgramStore
from craftlite.library import Library
from craftlite.sim_users import SessionRecord, SimUserPolicy, simulate_session

METRICS_HEADER = (
    "batch", "condition", "generation", "r", "items_built", "reward",
    "submissions", "expansions", "truncated", "library_size",
)
SUMMARY_HEADER = (
    "condition", "r", "generation", "sessions", "mean_items",
    "ci_low", "ci_high",
)

_CONDITION_KEY = {"ds": 0, "np": 1}

# substream tags for per-generation draws
_BOOK_TAG = 0
_GOALS_TAG = 1


@dataclass(frozen=True)
class ChainConfig:
    """One batch worth of matched chains."""

    conditions: tuple[str, ...] = ("np", "ds")
    generations: int = 20
    r: float = 0.0
    batch_seed: int = 0
    goals_per_generation: int = 6
    policy: SimUserPolicy = SimUserPolicy()
    raw_count: int = 200

    def __post_init__(self) -> None:
        object.__setattr__(self, "conditions",
                           tuple(c.lower() for c in self.conditions))
        if not self.conditions:
            raise ValueError("need at least one condition")
        for condition in self.conditions:
            if condition not in _CONDITION_KEY:
                raise ValueError(f"no simulated user for condition {condition!r}")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        if self.goals_per_generation < 1:
            raise ValueError("goals_per_generation must be >= 1")


@dataclass(frozen=True)
class GenerationContext:
    """What one generation's user faces; identical across conditions."""

    generation: int
    goal: Goal
    start: WorldState
    book: RecipeBook

    def session_context(self) -> Context:
        return Context(self.goal, self.start, self.book)


def _r_key(r: float) -> int:
    # float-proof seed component; distinguishes r values to 1e-6
    return int(round(r * 1_000_000))


def _seed_seq(batch_seed: int, generation: int, r: float, tag: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([batch_seed, generation, _r_key(r), tag])


def make_generation_context(
    catalog: RecipeCatalog,
    batch_seed: int,
    generation: int,
    r: float,
    *,
    goals_per_generation: int = 6,
    raw_count: int = 200,
) -> GenerationContext:
    """Derive one generation's book, goals and starting world.

    Goals are distinct leaf items when the catalog has enough leaves,
    otherwise sampled with replacement so small test catalogs still work.
    """
    book_seed = int(_seed_seq(batch_seed, generation, r, _BOOK_TAG).generate_state(1)[0])
    book = generate_book(catalog, book_seed, r)
    leaves = catalog.leaf_items()
    if not leaves:
        raise ValueError("catalog has no leaf items to use as goals")
    rng = np.random.default_rng(_seed_seq(batch_seed, generation, r, _GOALS_TAG))
    picks = rng.choice(len(leaves), size=goals_per_generation,
                       replace=len(leaves) < goals_per_generation)
    goal = Goal(tuple(leaves[i] for i in picks))
    return GenerationContext(generation, goal, starting_state(raw_count), book)


def _fresh_library(condition: str) -> Library | ProgramStore:
    return ProgramStore() if condition == "ds" else Library()


GenerationHook = Callable[[str, int, "Library | ProgramStore"], None]


def run_chain(
    config: ChainConfig,
    catalog: RecipeCatalog | None = None,
    *,
    on_generation: GenerationHook | None = None,
) -> list[SessionRecord]:
    """Run every condition in ``config`` over matched generation contexts.

    Each condition gets its own library, initialized to primitives only,
    and keeps it across generations.  ``on_generation(condition, index,
    library)`` fires after each session; the harness uses it to snapshot
    libraries.  Records come back condition-major, generation order within.
    """
    catalog = catalog or default_catalog()
    records: list[SessionRecord] = []
    for condition in config.conditions:
        library = _fresh_library(condition)
        for generation in range(config.generations):
            context = make_generation_context(
                catalog, config.batch_seed, generation, config.r,
                goals_per_generation=config.goals_per_generation,
                raw_count=config.raw_count)
            record, library = simulate_session(
                condition, context.session_context(), library, config.policy)
            records.append(record)
            if on_generation is not None:
                on_generation(condition, generation, library)
    return records


@dataclass(frozen=True)
class MetricsRow:
    """One session, flattened for the metrics table."""

    batch: int
    condition: str
    generation: int
    r: float
    items_built: int
    reward: int
    submissions: int
    expansions: int
    truncated: int
    library_size: int

    def as_csv(self) -> list[str]:
        return [str(self.batch), self.condition, str(self.generation),
                format(self.r, "g"), str(self.items_built), str(self.reward),
                str(self.submissions), str(self.expansions),
                str(self.truncated), str(self.library_size)]


def _rows_for_chain(config: ChainConfig, records: Sequence[SessionRecord]) -> list[MetricsRow]:
    rows = []
    per_condition: dict[str, int] = {}
    for record in records:
        generation = per_condition.get(record.condition, 0)
        per_condition[record.condition] = generation + 1
        rows.append(MetricsRow(
            batch=config.batch_seed, condition=record.condition,
            generation=generation, r=config.r,
            items_built=record.items_built, reward=record.reward,
            submissions=record.submissions, expansions=record.expansions,
            truncated=int(record.truncated),
            library_size=record.library_size_after))
    return rows


def run_batches(
    r_values: Sequence[float],
    batches_per_r: int,
    template: ChainConfig,
    catalog: RecipeCatalog | None = None,
    *,
    on_generation_factory: Callable[[float, int], GenerationHook] | None = None,
) -> list[MetricsRow]:
    """Run ``batches_per_r`` matched batches for every rule-flip rate.

    Batch b uses ``template.batch_seed + b``, so re-running with the same
    template reproduces the table exactly.  ``on_generation_factory(r,
    batch_seed)`` may supply a per-chain snapshot hook.
    """
    if batches_per_r < 1:
        raise ValueError("batches_per_r must be >= 1")
    rows: list[MetricsRow] = []
    for r in r_values:
        for b in range(batches_per_r):
            config = ChainConfig(
                conditions=template.conditions,
                generations=template.generations, r=r,
                batch_seed=template.batch_seed + b,
                goals_per_generation=template.goals_per_generation,
                policy=template.policy, raw_count=template.raw_count)
            hook = (on_generation_factory(r, config.batch_seed)
                    if on_generation_factory is not None else None)
            records = run_chain(config, catalog, on_generation=hook)
            rows.extend(_rows_for_chain(config, records))
    return rows


def format_metrics(rows: Iterable[MetricsRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())
    return out.getvalue()


def parse_metrics(text: str) -> list[MetricsRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != METRICS_HEADER:
        raise ValueError("not a metrics table: bad header")
    rows = []
    for raw in reader:
        if len(raw) != len(METRICS_HEADER):
            raise ValueError(f"metrics row has {len(raw)} fields")
        rows.append(MetricsRow(
            batch=int(raw[0]), condition=raw[1], generation=int(raw[2]),
            r=float(raw[3]), items_built=int(raw[4]), reward=int(raw[5]),
            submissions=int(raw[6]), expansions=int(raw[7]),
            truncated=int(raw[8]), library_size=int(raw[9])))
    return rows


@dataclass(frozen=True)
class SummaryRow:
    condition: str
    r: float
    generation: int
    sessions: int
    mean_items: float
    ci_low: float
    ci_high: float

    def as_csv(self) -> list[str]:
        return [self.condition, format(self.r, "g"), str(self.generation),
                str(self.sessions), format(self.mean_items, ".6f"),
                format(self.ci_low, ".6f"), format(self.ci_high, ".6f")]


def bootstrap_ci(values: Sequence[float], rng: np.random.Generator,
                 nboot: int = 1000, alpha: float = 0.05) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    data = np.asarray(values, dtype=float)
    idx = rng.integers(0, len(data), size=(nboot, len(data)))
    means = data[idx].mean(axis=1)
    low, high = np.percentile(means, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(low), float(high)


def summarize(rows: Sequence[MetricsRow], *, nboot: int = 1000,
              seed: int = 0, alpha: float = 0.05) -> list[SummaryRow]:
    """Per (condition, r, generation) mean items with bootstrap CIs.

    Each group draws from its own seed stream, so adding or removing other
    groups never disturbs a group's interval.
    """
    groups: dict[tuple[str, float, int], list[int]] = {}
    for row in rows:
        groups.setdefault((row.condition, row.r, row.generation), []).append(
            row.items_built)
    out = []
    for (condition, r, generation) in sorted(groups):
        values = groups[(condition, r, generation)]
        rng = np.random.default_rng(np.random.SeedSequence(
            [seed, _CONDITION_KEY.get(condition, 99), _r_key(r), generation]))
        low, high = bootstrap_ci(values, rng, nboot=nboot, alpha=alpha)
        out.append(SummaryRow(
            condition=condition, r=r, generation=generation,
            sessions=len(values), mean_items=float(np.mean(values)),
            ci_low=low, ci_high=high))
    return out


def format_summary(rows: Iterable[SummaryRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())
    return out.getvalue()

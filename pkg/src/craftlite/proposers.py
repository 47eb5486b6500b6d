"""Outer proposers: ordered streams of candidate plans for a search problem.

A candidate sequence strings together up to ``max_len`` beam elements, where
the beam holds the top library entries plus every primitive action.  Three
orderings are provided:

* ``naive``     - beam entries ranked by recency alone.
* ``distance``  - hint similarity (bag-of-words embedding) added to recency.
* ``llm``       - the distance stream raced against one completion-sampler
                  call whose parsed blocks are injected at the stream head.

Streams stage candidates by length: every length-1 sequence, then length-2,
and so on, lexicographically within a stage.  Primitives sit after the
library entries in the beam, input actions in item order with ``craft`` last.
"""
from __future__ import annotations

import json
import logging
import re
import zlib
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Protocol

import numpy as np

from craftlite.env import (
    ACTIONS,
    CRAFT,
    INPUT_PREFIX,
    ITEM_INDEX,
    Goal,
    RecipeCatalog,
)
from craftlite.library import (
    FREQUENCY_WEIGHT,
    RECENCY_WEIGHT,
    Library,
    Primitive,
    SearchProblem,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProposerParams:
    frequency_weight: float = FREQUENCY_WEIGHT
    recency_weight: float = RECENCY_WEIGHT
    beam_width: int = 12
    max_len: int = 3
    # node-expansion cap standing in for a wall-clock timeout
    expansion_budget: int = 20_000

    def __post_init__(self) -> None:
        if abs(self.frequency_weight + self.recency_weight - 1.0) > 1e-9:
            raise ValueError("frequency and recency weights must sum to 1")
        if self.beam_width < 1 or self.max_len < 1 or self.expansion_budget < 1:
            raise ValueError("beam_width, max_len and expansion_budget are positive")


@dataclass(frozen=True)
class CandidateSequence:
    """Ordered plan elements: library refs, primitive actions, or bare
    sub-problems (the latter only from parsed completions)."""

    items: tuple


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic bag-of-words embedding: tokens hashed into a fixed
    number of buckets, counted, then L2-normalized."""

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=float)
        for token in re.findall(r"[a-z0-9_]+", text.lower()):
            vec[zlib.crc32(token.encode("utf-8")) % self.dim] += 1.0
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm else vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine over already-normalized vectors; zero vectors score 0."""
    return float(np.dot(a, b))


def _recency_map(refs: list) -> dict[int, float]:
    """Linear 0..1 recency per ref id; a degenerate range maps to 1.0."""
    if not refs:
        return {}
    ticks = [ref.last_used_tick for ref in refs]
    low, high = min(ticks), max(ticks)
    if high == low:
        return {id(ref): 1.0 for ref in refs}
    return {id(ref): (ref.last_used_tick - low) / (high - low) for ref in refs}


def rank_naive(library, params: ProposerParams) -> list:
    """Top library refs by recency: newest ticks first, later insertion
    breaking ties."""
    refs = library.beam_entries()
    order = {id(ref): i for i, ref in enumerate(refs)}
    refs.sort(key=lambda ref: (-ref.last_used_tick, -order[id(ref)]))
    return refs[: params.beam_width]


def rank_distance(library, problem: SearchProblem, embedder: Embedder,
                  params: ProposerParams) -> list:
    """Top library refs by hint similarity plus recency.

    Any embedder failure degrades to the naive ranking with a logged
    warning rather than aborting the solve.
    """
    refs = library.beam_entries()
    if not refs:
        return []
    try:
        target = embedder.embed(problem.hint)
        similarity = {id(ref): cosine(embedder.embed(ref.hint), target) for ref in refs}
    except Exception:
        log.warning("embedder failed; falling back to recency ranking", exc_info=True)
        return rank_naive(library, params)
    recency = _recency_map(refs)
    order = {id(ref): i for i, ref in enumerate(refs)}
    refs.sort(
        key=lambda ref: (
            -(similarity[id(ref)] + recency[id(ref)]),
            -ref.last_used_tick,
            -order[id(ref)],
        )
    )
    return refs[: params.beam_width]


def beam_elements(entry_refs: list) -> list:
    """Full beam: ranked entries first, then every primitive action."""
    return list(entry_refs) + list(ACTIONS)


def _product_stream(beam: list, max_len: int) -> Iterator[CandidateSequence]:
    for length in range(1, max_len + 1):
        for combo in product(beam, repeat=length):
            yield CandidateSequence(items=combo)


def outer_propose_naive(problem: SearchProblem, library, params: ProposerParams
                        ) -> Iterator[CandidateSequence]:
    yield from _product_stream(beam_elements(rank_naive(library, params)), params.max_len)


def outer_propose_distance(problem: SearchProblem, library, embedder: Embedder,
                           params: ProposerParams) -> Iterator[CandidateSequence]:
    beam = beam_elements(rank_distance(library, problem, embedder, params))
    yield from _product_stream(beam, params.max_len)


class CompletionSampler(Protocol):
    def complete(self, prompt: str) -> str: ...


class MockSampler:
    """Scripted completions for tests and offline runs; answers in order and
    records every prompt it saw."""

    synchronous = True

    def __init__(self, completions: list[str]):
        self.completions = list(completions)
        self.prompts: list[str] = []
        self._cursor = 0

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if self._cursor >= len(self.completions):
            return ""
        text = self.completions[self._cursor]
        self._cursor += 1
        return text


class TemplateSampler:
    """Offline completion model: reads the recipe phrase back as a program.

    The hint template users type ("please craft 'X' with 'A' and 'B'")
    carries the whole decomposition, so a completion can be produced by
    inverting it: each input that appears in the prompt's post-condition
    vocabulary becomes a sub-problem, raw inputs become direct places, and
    the block closes with the two places and a collect.  Everything is
    parsed from the prompt text itself, which is exactly the information a
    hosted model would see.  Hints that do not match the template yield an
    empty completion and the race degrades to plain enumeration.
    """

    synchronous = True

    _HINT = re.compile(r"craft\s+'([^']+)'\s+with\s+'([^']+)'\s+and\s+'([^']+)'")

    def complete(self, prompt: str) -> str:
        craftable = self._craftable_vocabulary(prompt)
        head = self._query_head(prompt)
        if head is None:
            return ""
        hint, goal_items = head
        match = self._HINT.search(hint)
        if match is None:
            return ""
        item, input_a, input_b = match.groups()
        if goal_items and goal_items != (item,):
            return ""
        lines = [_head_line(hint, Goal((item,)))]
        for part in (input_a, input_b):
            if part in craftable:
                lines.append(
                    "    " + json.dumps(
                        {"post_condition": json.dumps([part])}))
        for part in (input_a, input_b):
            lines.append("    place " + part)
        lines.append("    collect")
        return "START\n" + "\n".join(lines) + "\nEND"

    @staticmethod
    def _craftable_vocabulary(prompt: str) -> frozenset[str]:
        lines = prompt.splitlines()
        for i, line in enumerate(lines):
            if "post conditions" in line:
                for candidate in lines[i + 1:]:
                    candidate = candidate.strip()
                    if candidate.startswith("["):
                        try:
                            return frozenset(json.loads(candidate))
                        except json.JSONDecodeError:
                            return frozenset()
        return frozenset()

    @staticmethod
    def _query_head(prompt: str) -> tuple[str, tuple[str, ...]] | None:
        """Hint and goal of the last head-shaped line: the query block."""
        head = None
        for line in prompt.splitlines():
            line = line.strip()
            if not line.startswith("{"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(record, dict) and "name" in record \
                    and "post_condition" in record:
                goal_items = _parse_goal_value(record["post_condition"])
                if goal_items is not None:
                    head = (str(record["name"]), goal_items)
        return head


class HttpSampler:
    """Generic text-completion endpoint client.

    Sends ``{"prompt": ..., "max_tokens": ...}`` and reads the first entry of
    the response's ``choices`` list.  The bearer token is read from the
    environment at call time so the key never lands in config files.
    """

    synchronous = False

    def __init__(self, url: str, auth_env_var: str = "COMPLETION_API_KEY",
                 max_tokens: int = 1024, timeout: float = 30.0):
        self.url = url
        self.auth_env_var = auth_env_var
        self.max_tokens = max_tokens
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        import os

        import httpx

        headers = {}
        token = os.environ.get(self.auth_env_var)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        response = httpx.post(
            self.url,
            json={"prompt": prompt, "max_tokens": self.max_tokens},
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        payload = response.json()
        choices = payload.get("choices") or []
        if not choices:
            return ""
        first = choices[0]
        return first.get("text", "") if isinstance(first, dict) else str(first)


def _surface_action(action: str) -> str:
    if action == CRAFT:
        return "collect"
    return "place " + action[len(INPUT_PREFIX):]


def _head_line(hint: str, goal: Goal) -> str:
    return json.dumps({"name": hint, "post_condition": json.dumps(list(goal.items))})


def _render_entry_block(entry) -> str:
    lines = [_head_line(entry.hint, entry.goal)]
    for step in entry.decomposition.steps:
        if isinstance(step, Primitive):
            lines.append("    " + _surface_action(step.action))
        else:
            lines.append(
                "    " + json.dumps(
                    {"post_condition": json.dumps(list(step.problem.goal.items))}
                )
            )
    return "START\n" + "\n".join(lines) + "\nEND"


def build_prompt(problem: SearchProblem, library: Library, catalog: RecipeCatalog,
                 embedder: Embedder, k: int = 10, n_samples: int = 5) -> str:
    """Prompt for the completion sampler: primitive and post-condition
    vocabularies, the k most hint-similar library examples, then the query."""
    primitives = [
        "place " + item for item in sorted(ITEM_INDEX, key=ITEM_INDEX.__getitem__)
    ] + ["collect", "clear"]
    post_conditions = [
        rule.output
        for item in catalog.craftable_items
        for rule in catalog.rules[item]
    ]

    refs = library.beam_entries()
    target = embedder.embed(problem.hint)
    order = {id(ref): i for i, ref in enumerate(refs)}
    refs.sort(
        key=lambda ref: (
            -cosine(embedder.embed(ref.hint), target),
            -ref.last_used_tick,
            -order[id(ref)],
        )
    )
    examples = [_render_entry_block(ref) for ref in refs[:k]]

    parts = [
        "The task is to convert a sentence of how to craft an item into a"
        " small program that crafts the item.",
        "",
        "Here are all the primitive functions that you can use:",
        json.dumps(primitives),
        "",
        "When you are placing something, you can only use the functions in"
        " this list.",
        "",
        "Here are all the post conditions that you can use:",
        json.dumps(post_conditions),
        "",
        "Here are some examples:",
        "",
    ]
    parts.extend(examples)
    parts.extend(
        [
            "",
            "New input:",
            "START",
            _head_line(problem.hint, problem.goal),
            "",
            f"Give {n_samples} output examples for the new input.",
        ]
    )
    return "\n".join(parts)


def parse_completion(text: str) -> list[CandidateSequence]:
    """Lenient parse of START/END blocks into candidate sequences.

    ``place X`` and ``collect`` lines map to primitives, bare post-condition
    lines to sub-problems with empty hints; anything unrecognized (including
    ``clear``) is skipped.  Blocks with no parsed steps are dropped.  A
    missing END at end-of-text closes the last block.
    """
    sequences: list[CandidateSequence] = []
    block: list | None = None
    saw_head = False

    def close() -> None:
        nonlocal block, saw_head
        if block:
            sequences.append(CandidateSequence(items=tuple(block)))
        block = None
        saw_head = False

    for raw_line in text.splitlines():
        line = raw_line.strip()
        if line == "START":
            close()
            block = []
            continue
        if line == "END":
            close()
            continue
        if block is None:
            continue
        parsed = _parse_block_line(line, allow_head=not saw_head)
        if parsed == "head":
            saw_head = True
        elif parsed is not None:
            block.append(parsed)
    close()
    return sequences


def _parse_block_line(line: str, allow_head: bool):
    if not line:
        return None
    if line == "collect":
        return CRAFT
    if line.startswith("place "):
        item = line[len("place "):].strip()
        if item in ITEM_INDEX:
            return INPUT_PREFIX + item
        return None
    if line.startswith("{"):
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            return None
        if not isinstance(record, dict) or "post_condition" not in record:
            return None
        if "name" in record and allow_head:
            return "head"
        goal_items = _parse_goal_value(record["post_condition"])
        if goal_items is None:
            return None
        return SearchProblem(goal=Goal(goal_items), hint=str(record.get("name", "")))
    return None


def _parse_goal_value(value) -> tuple[str, ...] | None:
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            return None
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not value:
        return None
    items = tuple(str(v) for v in value)
    if any(item not in ITEM_INDEX for item in items):
        return None
    return items


class LlmFeed:
    """One in-flight sampler call whose parsed candidates are drained as they
    arrive.  ``poll`` returns each parsed candidate exactly once."""

    def __init__(self, sampler: CompletionSampler, prompt: str):
        self._future: Future | None = None
        self._drained = False
        self._immediate: list[CandidateSequence] = []
        if getattr(sampler, "synchronous", False):
            self._immediate = self._call(sampler, prompt)
        else:
            pool = ThreadPoolExecutor(max_workers=1)
            self._future = pool.submit(self._call, sampler, prompt)
            pool.shutdown(wait=False)

    @staticmethod
    def _call(sampler: CompletionSampler, prompt: str) -> list[CandidateSequence]:
        try:
            return parse_completion(sampler.complete(prompt))
        except Exception:
            log.warning("completion sampler failed; continuing without it",
                        exc_info=True)
            return []

    def poll(self, wait: bool = False) -> list[CandidateSequence]:
        if self._drained:
            return []
        if self._future is None:
            self._drained = True
            return self._immediate
        if self._future.done() or wait:
            self._drained = True
            try:
                return self._future.result()
            except Exception:
                return []
        return []

    def close(self) -> None:
        self._drained = True
        if self._future is not None:
            self._future.cancel()


def outer_propose_llm(problem: SearchProblem, library: Library, catalog: RecipeCatalog,
                      embedder: Embedder, sampler: CompletionSampler,
                      params: ProposerParams, k: int = 10, n_samples: int = 5
                      ) -> Iterator[CandidateSequence]:
    """Distance enumeration raced against one sampler call; parsed completions
    jump the queue as soon as they arrive."""
    feed = LlmFeed(sampler, build_prompt(problem, library, catalog, embedder,
                                         k=k, n_samples=n_samples))
    try:
        for candidate in outer_propose_distance(problem, library, embedder, params):
            yield from feed.poll()
            yield candidate
        yield from feed.poll(wait=True)
    finally:
        feed.close()

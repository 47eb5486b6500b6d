"""Full-pipeline acceptance checks.

The fleet fixture runs the complete matched-batch experiment once (both
rule-flip rates, five batches, ten generations, default policy budgets)
and the condition-comparison tests read from it.  The remaining checks
are self-contained: a deterministic adaptation regression on the tiny
catalog, randomized brute-force oracles for candidate ranking and
library learning, environment-level guarantees, a thousand-solve
soundness sweep, and byte-level metrics reproducibility.

Expected numbers below are frozen from calibration runs; the seeded
pipeline reproduces them exactly, so any drift is a behavior change.
"""
import random
import time
from collections import Counter

import numpy as np
import pytest

from craftlite.chain_harness import (
    ChainConfig,
    bootstrap_ci,
    format_metrics,
    run_batches,
)
from craftlite.env import (
    ACTIONS,
    CRAFT,
    RAW_ITEMS,
    Context,
    Goal,
    RecipeBook,
    default_catalog,
    generate_book,
    run,
    starting_state,
    step,
)
from craftlite.executors import ProgramStore, Proposer, ds_execute, np_execute
from craftlite.library import (
    CallStack,
    Library,
    PlanTree,
    SearchProblem,
    inner_propose,
)
from craftlite.proposers import TemplateSampler

from helpers import copy_library, decomp, sub


def _problem(item, hint=""):
    return SearchProblem(goal=Goal((item,)), hint=hint)


def _ctx(book, item):
    return Context(Goal((item,)), starting_state(), book)


@pytest.fixture(scope="module")
def fleet():
    template = ChainConfig(generations=10, batch_seed=0)
    t0 = time.perf_counter()
    rows = run_batches([0.0, 0.5], 5, template)
    return rows, time.perf_counter() - t0


def items_by(rows, r, condition):
    return {(row.batch, row.generation): row.items_built
            for row in rows if row.r == r and row.condition == condition}


class TestConditionComparison:
    def test_parity_when_recipes_never_flip(self, fleet):
        rows, elapsed = fleet
        np_items = items_by(rows, 0.0, "np")
        ds_items = items_by(rows, 0.0, "ds")
        assert len(np_items) == len(ds_items) == 50
        np_mean = sum(np_items.values()) / 50
        ds_mean = sum(ds_items.values()) / 50
        assert np_mean == pytest.approx(5.64)
        assert ds_mean == pytest.approx(5.68)
        assert abs(np_mean - ds_mean) <= 0.15 * ds_mean
        assert elapsed < 600

    def test_planner_pulls_ahead_when_recipes_flip(self, fleet):
        rows, _ = fleet
        np_items = items_by(rows, 0.5, "np")
        ds_items = items_by(rows, 0.5, "ds")
        wins = sum(
            sum(np_items[b, g] for g in range(10))
            > sum(ds_items[b, g] for g in range(10))
            for b in range(5))
        assert wins >= 4
        assert wins == 5
        # matched per-batch differences pooled over the back half
        diffs = [np_items[b, g] - ds_items[b, g]
                 for b in range(5) for g in range(5, 10)]
        assert np.mean(diffs) == pytest.approx(0.72)
        low, high = bootstrap_ci(diffs, np.random.default_rng(0))
        assert low > 0.0
        assert high > low

    def test_later_generations_grow_faster_for_the_planner(self, fleet):
        rows, _ = fleet
        slopes = {}
        for condition in ("np", "ds"):
            items = items_by(rows, 0.5, condition)
            means = [sum(items[b, g] for b in range(5)) / 5
                     for g in range(10)]
            slopes[condition] = float(np.polyfit(range(10), means, 1)[0])
        assert slopes["np"] == pytest.approx(0.3588, abs=1e-3)
        assert slopes["ds"] == pytest.approx(0.2461, abs=1e-3)
        assert slopes["np"] > slopes["ds"]


class TestAdaptationRegression:
    def test_frozen_program_breaks_where_the_planner_adapts(
            self, tiny_catalog, tiny_book, tiny_library):
        b1 = tiny_book()
        b2 = tiny_book(string="B")
        proposer = Proposer(kind="llm", sampler=TemplateSampler(),
                            catalog=tiny_catalog)
        store = ProgramStore()
        taught = ds_execute(
            _problem("string", "craft 'string' with 'wool' and 'wool'"),
            _ctx(b1, "string"), store, proposer=proposer)
        assert taught.success
        synth = ds_execute(
            _problem("hut", "craft 'hut' with 'string' and 'grass'"),
            _ctx(b1, "hut"), store, proposer=proposer)
        assert synth.success
        assert run(_ctx(b1, "hut"), synth.actions).final.crafted("hut") == 1

        # the stored program replays its old string recipe and dies
        replay = run(_ctx(b2, "hut"), store.flatten(synth.program_name))
        assert replay.final.crafted("hut") == 0

        # the planner re-solves the string sub-goal under either book
        for book in (b1, b2):
            adapted = np_execute(
                _problem("hut", "craft 'hut' with 'string' and 'grass'"),
                _ctx(book, "hut"), copy_library(tiny_library))
            assert adapted.success
            check = run(_ctx(book, "hut"), adapted.actions)
            assert check.final.crafted("hut") == 1


class TestProposeOracle:
    def test_matches_brute_force_on_randomized_libraries(self):
        rng = random.Random(1234)
        items = ["string", "cloth", "hut", "brick", "bed"]
        acts = ["input_wool", "input_grass", "input_wood", "input_clay",
                "craft"]
        nonempty = 0
        for trial in range(100):
            lib = Library()
            for _ in range(rng.randint(1, 20)):
                goal_item = rng.choice(items)
                steps = []
                for _ in range(rng.randint(1, 4)):
                    if rng.random() < 0.3:
                        steps.append(sub(rng.choice(items)))
                    else:
                        steps.append(rng.choice(acts))
                entry = lib.insert(decomp(goal_item, f"hint {trial}", steps))
                entry.occurrence_count = rng.randint(1, 9)
                entry.last_used_tick = rng.randint(0, 60)
            target = rng.choice(items)
            ranked = inner_propose(CallStack(), _problem(target), lib)
            expected = self.reference_ranking(lib, target)
            assert [e for e, _ in ranked] == [e for e, _ in expected]
            for (_, got), (_, want) in zip(ranked, expected):
                assert got == pytest.approx(want, abs=1e-12)
            nonempty += bool(expected)
        assert nonempty == 77

    @staticmethod
    def reference_ranking(lib, target):
        # brute force over entry fields only: weighted score, then newest
        # last-used tick, then insertion order
        cands = [e for e in lib.entries if e.goal.items == (target,)]
        if not cands:
            return []
        top = max(e.occurrence_count for e in cands)
        ticks = [e.last_used_tick for e in cands]
        low, high = min(ticks), max(ticks)

        def score(e):
            freq = e.occurrence_count / top
            rec = 1.0 if high == low else (e.last_used_tick - low) / (high - low)
            return 0.2 * freq + 0.8 * rec

        order = {id(e): i for i, e in enumerate(cands)}
        return sorted(((e, score(e)) for e in cands),
                      key=lambda p: (-p[1], -p[0].last_used_tick,
                                     order[id(p[0])]))


class TestEnvironmentSuite:
    def test_material_is_conserved_under_random_actions(self):
        catalog = default_catalog()
        for seed in (5, 6, 7):
            rng = random.Random(seed)
            book = generate_book(catalog, seed=seed, r=0.5)
            state = starting_state(raw_count=5)
            for _ in range(300):
                action = rng.choice(ACTIONS)
                before = state.total_material()
                try:
                    state = step(state, action, book)
                except Exception:
                    continue
                delta = state.total_material() - before
                assert delta == (-1 if action == CRAFT else 0)

    def test_runs_are_deterministic(self):
        catalog = default_catalog()
        for seed in (11, 12, 13):
            rng = random.Random(seed)
            book = generate_book(catalog, seed=seed, r=0.5)
            actions = [rng.choice(ACTIONS) for _ in range(200)]
            context = Context(Goal(("brick",)), starting_state(5), book)
            first = run(context, actions)
            second = run(context, actions)
            assert first.final == second.final
            assert first.error_flags == second.error_flags

    def test_recipe_graph_is_acyclic(self):
        catalog = default_catalog()
        deps = {item: {i for rule in rules for i in rule.inputs
                       if i not in RAW_ITEMS}
                for item, rules in catalog.rules.items()}
        while deps:
            free = [item for item, d in deps.items() if not d]
            assert free, f"cycle among {sorted(deps)}"
            for item in free:
                del deps[item]
            for d in deps.values():
                d.difference_update(free)

    def test_every_item_reachable_under_sampled_books(self):
        catalog = default_catalog()
        books = [generate_book(catalog, seed=s, r=0.5) for s in range(100)]
        books += [generate_book(catalog, seed=0, r=0.0),
                  RecipeBook(catalog, {item: 1 for item in catalog.rules})]
        for book in books:
            done = set(RAW_ITEMS)
            progress = True
            while progress:
                progress = False
                for item in catalog.rules:
                    if item in done:
                        continue
                    a, b = book.active_rule(item).inputs
                    if a in done and b in done:
                        done.add(item)
                        progress = True
            assert set(catalog.rules) <= done

    def test_every_item_craftable_under_extreme_books(self):
        catalog = default_catalog()
        for choice in (0, 1):
            book = RecipeBook(catalog, {item: choice for item in catalog.rules})
            for item in catalog.rules:
                actions: list[str] = []
                self.append_build(book, item, actions)
                traj = run(Context(Goal((item,)), starting_state(), book),
                           actions)
                assert traj.final.crafted(item) >= 1, (choice, item)
                assert not any(traj.error_flags), (choice, item)

    @staticmethod
    def append_build(book, item, actions):
        if item in RAW_ITEMS:
            return
        a, b = book.active_rule(item).inputs
        TestEnvironmentSuite.append_build(book, a, actions)
        TestEnvironmentSuite.append_build(book, b, actions)
        actions.extend([f"input_{a}", f"input_{b}", "craft"])

    def test_flip_rate_half_is_uniform(self):
        catalog = default_catalog()
        names = sorted(catalog.rules)
        counts = {name: 0 for name in names}
        for seed in range(10_000):
            book = generate_book(catalog, seed=seed, r=0.5)
            for name in names:
                counts[name] += book.choice[name]
        stats = []
        for name in names:
            c1 = counts[name]
            c0 = 10_000 - c1
            stats.append((c1 - 5000) ** 2 / 5000 + (c0 - 5000) ** 2 / 5000)
        # each item tested against the 1% critical value, df=1
        assert max(stats) == pytest.approx(3.3124, abs=1e-3)
        assert all(stat < 6.635 for stat in stats)

    def test_zero_flip_rate_gives_first_rules_exactly(self):
        catalog = default_catalog()
        for seed in (0, 1, 77):
            book = generate_book(catalog, seed=seed, r=0.0)
            assert book.choice == {item: 0 for item in catalog.rules}


class TestPlannerSoundness:
    def test_thousand_randomized_solves_replay_faithfully(self, tiny_catalog):
        pool = [
            decomp("string", "craft 'string' with 'wool' and 'wool'",
                   ["input_wool", "input_wool", "craft"]),
            decomp("string", "craft 'string' with 'wool' and 'grass'",
                   ["input_wool", "input_grass", "craft"]),
            decomp("cloth", "craft 'cloth' with 'string' and 'string'",
                   [sub("string"), sub("string"),
                    "input_string", "input_string", "craft"]),
            decomp("cloth", "craft 'cloth' with 'string' and 'wool'",
                   [sub("string"), "input_string", "input_wool", "craft"]),
            decomp("hut", "craft 'hut' with 'string' and 'grass'",
                   [sub("string"), "input_grass", "input_string", "craft"]),
            decomp("hut", "craft 'hut' with 'cloth' and 'wood'",
                   [sub("cloth"), "input_cloth", "input_wood", "craft"]),
            # junk variants the planner must reject at run time
            decomp("string", "half a string", ["input_wool", "craft"]),
            decomp("hut", "hollow hut", [sub("cloth"), "craft"]),
            decomp("cloth", "cloth from cloth",
                   [sub("cloth"), "input_wool", "craft"]),
        ]
        rng = random.Random(99)
        craftables = sorted(tiny_catalog.rules)
        successes = 0
        for trial in range(1000):
            lib = Library()
            for d in rng.sample(pool, rng.randint(2, len(pool))):
                entry = lib.insert(d)
                entry.occurrence_count = rng.randint(1, 5)
                entry.last_used_tick = rng.randint(0, 40)
            book = RecipeBook(tiny_catalog,
                              {item: rng.randint(0, 1) for item in craftables})
            goal_item = rng.choice(craftables)
            hint = rng.choice(["", "make it", f"craft '{goal_item}'"])
            prob = SearchProblem(goal=Goal((goal_item,)), hint=hint)
            context = Context(prob.goal, starting_state(), book)
            on = np_execute(prob, context, copy_library(lib), budget=20_000)
            off = np_execute(prob, context, copy_library(lib), budget=20_000,
                             cache=False)
            assert on.status == off.status, trial
            if not on.success:
                continue
            successes += 1
            traj = run(context, on.actions)
            assert traj.final.crafted(goal_item) >= 1, trial
            assert traj.final == on.final_state, trial
            assert on.final_state == off.final_state, trial
        assert successes == 623


class TestLibraryLearning:
    def test_matches_height_two_enumeration_and_double_learns(self):
        rng = random.Random(7)
        items = ["string", "cloth", "hut", "bed", "brick"]
        acts = ["input_wool", "input_grass", "craft"]

        def random_tree(depth=0):
            goal_item = rng.choice(items)
            children = []
            for _ in range(rng.randint(1, 3)):
                if depth < 2 and rng.random() < 0.4:
                    children.append(random_tree(depth + 1))
                else:
                    children.append(rng.choice(acts))
            return PlanTree(
                head=SearchProblem(goal=Goal((goal_item,)),
                                   hint=f"h{rng.randint(0, 5)}"),
                children=tuple(children))

        def brute_signatures(tree):
            # independent height-two enumeration over raw node fields
            out = [(tree.head.goal.items,
                    tuple(("p", c.head.goal.items) if isinstance(c, PlanTree)
                          else ("a", c) for c in tree.children))]
            for c in tree.children:
                if isinstance(c, PlanTree):
                    out.extend(brute_signatures(c))
            return out

        total_entries = 0
        for trial in range(100):
            tree = random_tree()
            brute = brute_signatures(tree)
            expected = Counter(brute)
            lib = Library()
            returned = lib.learn_from_tree(tree)
            assert len(returned) == len(brute), trial
            assert [r.decomposition.signature() for r in returned] == brute
            assert len(lib.entries) == len(expected), trial
            for e in lib.entries:
                assert e.occurrence_count == expected[e.decomposition.signature()]
            lib.learn_from_tree(tree)
            assert len(lib.entries) == len(expected), trial
            for e in lib.entries:
                assert e.occurrence_count == 2 * expected[e.decomposition.signature()]
            total_entries += len(lib.entries)
        assert total_entries == 248


class TestMetricsDeterminism:
    def test_rerun_reproduces_metrics_file_byte_for_byte(self, tmp_path):
        template = ChainConfig(generations=4, batch_seed=3)
        first = tmp_path / "metrics_a.csv"
        second = tmp_path / "metrics_b.csv"
        first.write_text(format_metrics(run_batches([0.0, 0.5], 1, template)))
        second.write_text(format_metrics(run_batches([0.0, 0.5], 1, template)))
        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes().startswith(b"batch,condition,generation,")

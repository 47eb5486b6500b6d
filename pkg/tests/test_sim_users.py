"""Simulated-teacher behavior: hints, recursion, budgets, determinism."""

import pytest

from craftlite.env import Context, Goal, RecipeRule, run, goal_satisfied, starting_state
from craftlite.executors import ProgramStore, Proposer, SolveResult, SolveStats
from craftlite.library import Library
from craftlite.sim_users import (
    SimUserPolicy,
    library_size,
    make_hint,
    simulate_session,
)

from helpers import copy_library, decomp, sub


def ctx(book, items, state=None):
    return Context(Goal(tuple(items)), state or starting_state(), book)


class ScriptedSolver:
    """Returns canned results in call order; records every request."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def __call__(self, problem, context, budget):
        self.calls.append((problem, context, budget))
        status, actions, expansions = self.script.pop(0)
        return SolveResult(status=status, actions=actions,
                           stats=SolveStats(expansions=expansions))


def ok(actions, cost=5):
    return ("success", actions, cost)


def fail(cost=10):
    return ("budget", None, cost)


STRING_ACTIONS = ["input_wool", "input_wool", "craft"]  # book A
CLOTH_FROM_STRINGS = ["input_string", "input_string", "craft"]


class TestMakeHint:
    def test_brick_phrasing(self):
        rule = RecipeRule("brick", ("clay", "clay"))
        assert make_hint("brick", rule) == "please craft 'brick' with 'clay' and 'clay'"

    def test_hut_phrasing_keeps_authored_order(self):
        rule = RecipeRule("hut", ("string", "grass"))
        assert make_hint("hut", rule) == "please craft 'hut' with 'string' and 'grass'"

    def test_follows_the_active_book(self, tiny_book):
        book = tiny_book(string="B")  # wool + grass variant
        hint = make_hint("string", book.active_rule("string"))
        assert hint == "please craft 'string' with 'wool' and 'grass'"

    def test_rule_must_produce_the_item(self):
        with pytest.raises(ValueError):
            make_hint("hut", RecipeRule("cloth", ("string", "string")))


class TestPolicy:
    def test_attempt_budget_cannot_exceed_session_budget(self):
        with pytest.raises(ValueError):
            SimUserPolicy(per_attempt_budget=1000, session_budget=999)

    def test_budgets_must_be_positive(self):
        with pytest.raises(ValueError):
            SimUserPolicy(per_attempt_budget=0, session_budget=100)

    def test_unknown_condition_rejected(self, tiny_book):
        with pytest.raises(ValueError):
            simulate_session("dp", ctx(tiny_book(), ["hut"]), Library(),
                             SimUserPolicy())


class TestScriptedSessions:
    def test_smooth_session_is_one_submission_per_goal(self, tiny_book):
        solver = ScriptedSolver([ok(STRING_ACTIONS), ok(STRING_ACTIONS)])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["string", "string"]), Library(),
            SimUserPolicy(), solver=solver)
        assert record.submissions == 2
        assert record.items_built == 2
        assert record.reward == 2
        assert not record.truncated
        assert [o.role for o in record.outcomes] == ["goal", "goal"]

    def test_failure_teaches_both_prerequisites_then_retries(self, tiny_book):
        # cloth A needs string + string: fail, teach twice, retry -> 4 submissions
        solver = ScriptedSolver([
            fail(), ok(STRING_ACTIONS), ok(STRING_ACTIONS), ok(CLOTH_FROM_STRINGS),
        ])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["cloth"]), Library(), SimUserPolicy(),
            solver=solver)
        assert record.submissions == 4
        assert [o.role for o in record.outcomes] == [
            "goal", "prerequisite", "prerequisite", "retry"]
        assert [o.item for o in record.outcomes] == [
            "cloth", "string", "string", "cloth"]
        assert record.items_built == 1

    def test_retry_actions_run_from_the_taught_inventory(self, tiny_book):
        # The scripted cloth retry only works because both prerequisite
        # solves committed a string each; this pins the rolling-state rule.
        solver = ScriptedSolver([
            fail(), ok(STRING_ACTIONS), ok(STRING_ACTIONS), ok(CLOTH_FROM_STRINGS),
        ])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["cloth"]), Library(), SimUserPolicy(),
            solver=solver)
        final_ctx = solver.calls[-1][1]
        assert final_ctx.start.count("string") == 2
        assert record.items_built == 1

    def test_raw_inputs_are_never_pursued(self, tiny_book):
        # hut A = string + grass; only string gets a prerequisite attempt
        solver = ScriptedSolver([
            fail(), ok(STRING_ACTIONS), ok(["input_string", "input_grass", "craft"]),
        ])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["hut"]), Library(), SimUserPolicy(),
            solver=solver)
        assert [o.item for o in record.outcomes] == ["hut", "string", "hut"]
        assert "grass" not in {o.item for o in record.outcomes}
        assert record.items_built == 1

    def test_abandons_goal_after_failed_retry(self, tiny_book):
        solver = ScriptedSolver([
            fail(), fail(), fail(),            # cloth; string#1 and its retry
            fail(), fail(),                    # string#2 and its retry
            fail(), fail(),                    # cloth retry; second goal string
            ok(STRING_ACTIONS),                # ... whose retry lands
        ])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["cloth", "string"]), Library(),
            SimUserPolicy(), solver=solver)
        assert record.items_built == 1
        assert record.submissions == 8
        # nested recursion: each failed prerequisite retries once, in place
        assert [o.role for o in record.outcomes] == [
            "goal", "prerequisite", "retry", "prerequisite", "retry",
            "retry", "goal", "retry"]
        assert record.outcomes[-1].item == "string"

    def test_hints_always_match_the_active_book(self, tiny_book):
        book = tiny_book(string="B", cloth="B")
        solver = ScriptedSolver([fail(), fail(), fail(), fail()])
        simulate_session("np", ctx(book, ["cloth"]), Library(), SimUserPolicy(),
                         solver=solver)
        for problem, _, _ in solver.calls:
            item = problem.goal.items[0]
            assert problem.hint == make_hint(item, book.active_rule(item))
        # cloth B = string + wool: the wool half is raw, never pursued
        assert [p.goal.items[0] for p, _, _ in solver.calls] == [
            "cloth", "string", "string", "cloth"]


class TestBudgets:
    def test_attempt_budget_is_clipped_to_session_remainder(self, tiny_book):
        solver = ScriptedSolver([("budget", None, 60), ("budget", None, 40)])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["string", "string"]), Library(),
            SimUserPolicy(per_attempt_budget=60, session_budget=100),
            solver=solver)
        assert [budget for _, _, budget in solver.calls] == [60, 40]
        assert record.expansions == 100

    def test_exhaustion_truncates_and_keeps_partial_reward(self, tiny_book):
        solver = ScriptedSolver([ok(STRING_ACTIONS, cost=50), ("budget", None, 50)])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["string", "cloth"]), Library(),
            SimUserPolicy(per_attempt_budget=50, session_budget=100),
            solver=solver)
        assert record.truncated
        assert record.items_built == 1
        assert record.submissions == 2  # the cloth prerequisite never ran

    def test_finishing_exactly_on_budget_is_not_truncation(self, tiny_book):
        solver = ScriptedSolver([ok(STRING_ACTIONS, cost=100)])
        record, _ = simulate_session(
            "np", ctx(tiny_book(), ["string"]), Library(),
            SimUserPolicy(per_attempt_budget=100, session_budget=100),
            solver=solver)
        assert not record.truncated
        assert record.items_built == 1


class TestRealSolvers:
    @pytest.mark.parametrize("condition", ["np", "ds"])
    def test_deep_goal_is_taught_then_reused_next_session(self, tiny_book, condition):
        book = tiny_book()
        library = Library() if condition == "np" else ProgramStore()
        policy = SimUserPolicy(per_attempt_budget=20_000, session_budget=120_000)

        first, library = simulate_session(condition, ctx(book, ["hut"]),
                                          library, policy)
        assert first.items_built == 1
        assert [o.role for o in first.outcomes] == ["goal", "prerequisite", "retry"]
        assert not first.outcomes[0].status == "success"
        assert first.library_size_after >= 2

        second, _ = simulate_session(condition, ctx(book, ["hut"]),
                                     library, policy)
        assert second.items_built == 1
        assert second.submissions == 1
        assert second.expansions < 120
        assert second.expansions < first.expansions

    def test_template_race_composes_beyond_beam_length(self, tiny_book):
        # hut under choice B needs cloth; with no stored hut decomposition
        # the shortest beam composition is four elements, one past max_len,
        # so only the raced template suggestion delivers it in one attempt.
        book = tiny_book(hut="B")
        lib = Library()
        lib.insert(decomp("string", "craft 'string' with 'wool' and 'wool'",
                           ["input_wool", "input_wool", "craft"]))
        lib.insert(decomp("cloth", "craft 'cloth' with 'string' and 'string'",
                           [sub("string"), sub("string"),
                            "input_string", "input_string", "craft"]))
        record, _ = simulate_session("np", ctx(book, ["hut"]),
                                     copy_library(lib), SimUserPolicy())
        assert record.items_built == 1
        assert record.submissions == 1
        assert [o.role for o in record.outcomes] == ["goal"]

        # without the race the user falls back to the teach-retry detour
        control, _ = simulate_session("np", ctx(book, ["hut"]),
                                      copy_library(lib), SimUserPolicy(),
                                      proposer=Proposer(kind="naive"))
        assert control.submissions > 1
        assert [o.role for o in control.outcomes] == [
            "goal", "prerequisite", "retry"]

    def test_session_record_is_deterministic(self, tiny_book):
        book = tiny_book()
        policy = SimUserPolicy()
        rec1, _ = simulate_session("np", ctx(book, ["hut", "cloth"]),
                                   Library(), policy)
        rec2, _ = simulate_session("np", ctx(book, ["hut", "cloth"]),
                                   Library(), policy)
        assert rec1 == rec2

    def test_returned_library_is_the_one_passed_in(self, tiny_book):
        store = ProgramStore()
        _, out = simulate_session("ds", ctx(tiny_book(), ["string"]),
                                  store, SimUserPolicy())
        assert out is store
        assert library_size(out) == store.defined_count >= 1

    def test_committed_world_satisfies_each_built_goal(self, tiny_book):
        book = tiny_book()
        record, library = simulate_session(
            "np", ctx(book, ["string", "cloth", "hut"]), Library(),
            SimUserPolicy())
        assert record.items_built == 3
        # replay every successful goal solve from scratch through the library
        for outcome in record.outcomes:
            assert outcome.expansions <= 20_000

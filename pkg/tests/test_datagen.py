import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plankit.core import Condition, ConditionCategory, Goal, Plan
from plankit.datagen import (
    GoalPool,
    PromptRecipe,
    SamplingParams,
    W1,
    W2,
    W3,
    W4,
    all_prefixes,
    assemble_prompt,
    bootstrap_goals,
    categorize_condition,
    load_template,
    randomized_prefix,
    sample_conditions,
    sample_counterfactual,
)
from plankit.errors import ParseError, ScorerUnavailableError, ValidationError


def scripted_completion(*responses):
    """Completion stub returning scripted responses in order."""
    queue = list(responses)

    def completion(prompt, params):
        item = queue.pop(0) if queue else ""
        if isinstance(item, Exception):
            raise item
        return item

    return completion


class TestRandomizedPrefix:
    def test_canonical_wording_reachable(self):
        assert (
            randomized_prefix(71)
            == "Given a goal, write down a list of steps to achieve the goal.\n\n"
        )

    def test_enumeration_is_168(self):
        universe = all_prefixes()
        assert len(universe) == 2 * 4 * 7 * 3 == 168
        assert len(set(universe)) == 168

    def test_deterministic(self):
        assert randomized_prefix(5) == randomized_prefix(5)

    def test_draws_stay_in_universe(self):
        universe = set(all_prefixes())
        assert all(randomized_prefix(seed) in universe for seed in range(300))


class TestAssemblePrompt:
    def recipe(self, exemplars=1):
        pairs = tuple(
            (Goal(f"example goal {i}", f"e{i}"), Plan.from_texts([f"step one {i}", f"step two {i}"]))
            for i in range(exemplars)
        )
        return PromptRecipe(
            w1=W1[1], w2=W2[0], w3=W3[2], w4=W4[0],
            in_context=pairs, target_goal=Goal("hire a dog walker", "tg"),
        )

    def test_ends_with_target_header(self):
        assert assemble_prompt(self.recipe()).endswith("Goal: hire a dog walker\nStep 1:")

    def test_two_exemplars_in_order(self):
        prompt = assemble_prompt(self.recipe(2))
        assert prompt.index("example goal 0") < prompt.index("example goal 1")

    def test_long_exemplar_renders_all_steps(self):
        goal = Goal("g", "e")
        plan = Plan.from_texts([f"s{i}" for i in range(1, 8)])
        recipe = PromptRecipe(
            w1=W1[0], w2=W2[1], w3=W3[0], w4=W4[2],
            in_context=((goal, plan),), target_goal=Goal("t", "t"),
        )
        assert "Step 7: s7" in assemble_prompt(recipe)

    def test_empty_exemplar_plan_rejected(self):
        goal = Goal("g", "e")
        with pytest.raises(ValidationError):
            PromptRecipe(
                w1=W1[0], w2=W2[0], w3=W3[0], w4=W4[0],
                in_context=(), target_goal=goal,
            )

    @given(
        idx=st.tuples(
            st.integers(0, 1), st.integers(0, 3), st.integers(0, 6), st.integers(0, 2)
        ),
        target=st.sampled_from(["walk the dog", "paint a wall", "bake bread"]),
    )
    @settings(max_examples=40, deadline=None)
    def test_injective_over_recipes(self, idx, target):
        recipe = PromptRecipe(
            w1=W1[idx[0]], w2=W2[idx[1]], w3=W3[idx[2]], w4=W4[idx[3]],
            in_context=((Goal("e", "e"), Plan.from_texts(["s"])),),
            target_goal=Goal(target, "t"),
        )
        prompt = assemble_prompt(recipe)
        assert prompt.endswith(f"Goal: {target}\nStep 1:")
        assert prompt.startswith(f"{W1[idx[0]]}, {W2[idx[1]]} {W3[idx[2]]} {W4[idx[3]]}.\n\n")


class TestGoalPool:
    def test_dedup_is_normalized_and_idempotent(self):
        pool = GoalPool()
        assert pool.add("Walk the Dog")
        assert not pool.add("walk  the dog ")
        assert not pool.add("Walk the Dog")
        assert len(pool) == 1

    def test_save_load_round_trip(self, tmp_path):
        pool = GoalPool()
        pool.add("one", "seed", 0)
        pool.add("two", "generated", 1)
        path = tmp_path / "pool.jsonl"
        pool.save(path)
        loaded = GoalPool.load(path)
        assert loaded.texts() == ["one", "two"]
        assert loaded.entries[1].provenance == "generated"


class TestBootstrap:
    def seed_pool(self):
        pool = GoalPool()
        for text in ("goal alpha", "goal beta", "goal gamma"):
            pool.add(text)
        return pool

    def test_grows_by_novel_goals_only(self):
        pool = self.seed_pool()
        completion = scripted_completion("fresh goal\ngoal alpha\nanother fresh goal")
        bootstrap_goals(pool, completion, rounds=1, batch=1, params=SamplingParams(seed=1))
        assert len(pool) == 5
        assert "fresh goal" in pool.texts()

    def test_duplicates_leave_pool_unchanged(self):
        pool = self.seed_pool()
        completion = scripted_completion("goal alpha\nGOAL BETA")
        bootstrap_goals(pool, completion, rounds=1, batch=1)
        assert len(pool) == 3

    def test_failed_round_keeps_pool(self):
        pool = self.seed_pool()
        completion = scripted_completion(ScorerUnavailableError("down"))
        bootstrap_goals(pool, completion, rounds=1, batch=1)
        assert len(pool) == 3

    def test_two_rounds_deterministic(self):
        def run():
            pool = self.seed_pool()

            def completion(prompt, params):
                # Derived deterministically from the call seed.
                return f"generated goal {params.seed % 1000}"

            bootstrap_goals(pool, completion, rounds=2, batch=2, params=SamplingParams(seed=9))
            return pool.texts()

        assert run() == run()

    def test_never_shrinks(self):
        pool = self.seed_pool()
        completion = scripted_completion("", "x goal", "")
        for _ in range(3):
            before = len(pool)
            bootstrap_goals(pool, completion, rounds=1, batch=1)
            assert len(pool) >= before


class TestConditions:
    def goal_plan(self):
        return Goal("empty lint filter", "lint"), Plan.from_texts(
            ["find lint filter", "remove lint filter", "clean lint filter"]
        )

    def test_if_prefix_stripped_and_categorized_location(self):
        goal, plan = self.goal_plan()
        conditions = sample_conditions(goal, plan, scripted_completion("If the store is closed"))
        assert len(conditions) == 1
        assert conditions[0].text == "the store is closed"
        assert conditions[0].category is ConditionCategory.LOCATION

    def test_empty_completion_gives_empty_list(self):
        goal, plan = self.goal_plan()
        assert sample_conditions(goal, plan, scripted_completion("")) == []

    def test_teacher_fixture_hot_lint_trap(self):
        goal, plan = self.goal_plan()
        conditions = sample_conditions(
            goal, plan, scripted_completion("If the lint trap is too hot to touch")
        )
        assert conditions[0].text == "the lint trap is too hot to touch"
        assert conditions[0].category is ConditionCategory.SAFETY

    def test_category_families(self):
        assert categorize_condition("there are no local gardening stores nearby") is (
            ConditionCategory.LOCATION
        )
        assert categorize_condition("you don't have the right tools") is (
            ConditionCategory.EQUIPMENT
        )
        assert categorize_condition("the plates are too heavy or fragile") is (
            ConditionCategory.SAFETY
        )
        assert categorize_condition("you are unable to read sheet music") is (
            ConditionCategory.USER_SPECIFICATION
        )
        assert categorize_condition("the moon is full") is ConditionCategory.OTHER


class TestCounterfactual:
    def test_identity_mock_round_trips(self):
        goal = Goal("g", "g")
        plan = Plan.from_texts(["one", "two"])
        text = "\n".join(f"Step {s.index}: {s.text}" for s in plan.steps)
        revised = sample_counterfactual(
            goal, plan, Condition("c"), scripted_completion(text)
        )
        assert revised.step_texts == plan.step_texts

    def test_parses_step_lines(self):
        revised = sample_counterfactual(
            Goal("g", "g"),
            Plan.from_texts(["x"]),
            Condition("c"),
            scripted_completion("Step 1: a\nStep 2: b\nStep 3: c"),
        )
        assert revised.step_texts == ("a", "b", "c")

    def test_revision_fixture_uses_protective_gear(self):
        goal = Goal("empty lint filter", "lint")
        plan = Plan.from_texts(
            ["load clothes into dryer", "locate lint trap", "pull lint trap out of dryer"]
        )
        response = "\n".join(
            [
                "Step 1: load clothes into dryer",
                "Step 2: locate lint trap",
                "Step 3: Use heat-resistant glove or mitt to pick up lint trap",
                "Step 4: pull lint trap out of dryer",
                "Step 5: empty lint trap",
            ]
        )
        revised = sample_counterfactual(
            goal, plan, Condition("the lint trap is too hot to touch"),
            scripted_completion(response),
        )
        assert "Use heat-resistant glove or mitt to pick up lint trap" in revised.step_texts

    def test_unparseable_output_raises_with_raw_text(self):
        with pytest.raises(ParseError, match="gibberish"):
            sample_counterfactual(
                Goal("g", "g"), Plan.from_texts(["x"]), Condition("c"),
                scripted_completion("gibberish"),
            )


def test_templates_load_without_headers():
    for name in ("goal_bootstrap.txt", "conditions.txt", "counterfactual.txt"):
        template = load_template(name)
        assert "reconstruction" not in template
        assert "{" in template

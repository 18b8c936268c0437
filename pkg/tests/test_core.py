import itertools

import pytest
from hypothesis import given

from plankit.core import (
    Condition,
    ConditionCategory,
    Goal,
    Plan,
    PlanningInstance,
    Step,
    TaskKind,
    instance_to_record,
    parse_plan,
    read_instances,
    record_to_instance,
    render_template,
    write_instances,
)
from plankit.errors import ParseError, ValidationError

from conftest import step_texts


def make_instance(kind=TaskKind.PLANNING, **overrides):
    fields = dict(
        kind=kind,
        goal=Goal("hire a dog walker", "g1"),
        condition=None,
        initial_plan=None,
    )
    fields.update(overrides)
    return PlanningInstance(**fields)


class TestTypes:
    def test_goal_requires_text(self):
        with pytest.raises(ValidationError):
            Goal("   ")

    def test_goal_id_is_stable(self):
        assert Goal("say hi").id == Goal("Say  Hi ").id

    def test_step_rejects_newlines_and_bad_index(self):
        with pytest.raises(ValidationError):
            Step("a\nb", 1)
        with pytest.raises(ValidationError):
            Step("a", 0)

    def test_plan_indices_must_be_contiguous(self):
        with pytest.raises(ValidationError):
            Plan((Step("a", 1), Step("b", 3)))

    def test_terminal_plan_needs_a_step(self):
        with pytest.raises(ValidationError):
            Plan((), terminal=True)
        assert len(Plan((), terminal=False)) == 0

    def test_condition_category_coerced(self):
        assert Condition("x", "safety").category is ConditionCategory.SAFETY


class TestTaskKindGrid:
    @pytest.mark.parametrize(
        "kind,with_condition,with_initial",
        list(itertools.product(TaskKind, [False, True], [False, True])),
    )
    def test_presence_grid(self, kind, with_condition, with_initial):
        """Validation accepts exactly the rows whose optional fields match."""
        kwargs = {}
        if with_condition:
            kwargs["condition"] = Condition("it rains")
        if with_initial:
            kwargs["initial_plan"] = Plan.from_texts(["x"])
        should_pass = (
            with_condition == kind.requires_condition
            and with_initial == kind.requires_initial_plan
        )
        if should_pass:
            make_instance(kind, **kwargs)
        else:
            with pytest.raises(ValidationError):
                make_instance(kind, **kwargs)

    def test_error_names_missing_field(self):
        with pytest.raises(ValidationError, match="condition"):
            make_instance(TaskKind.COUNTERFACTUAL_PLANNING)
        with pytest.raises(ValidationError, match="initial_plan"):
            make_instance(TaskKind.COUNTERFACTUAL_REVISION, condition=Condition("c"))


class TestRenderTemplate:
    def test_planning_empty_prefix(self):
        text = render_template(make_instance())
        assert text.endswith("Goal: hire a dog walker\nStep 1:")

    def test_prefix_appends_next_header(self):
        instance = make_instance(goal=Goal("x", "g2"))
        text = render_template(instance, [Step("a", 1)])
        assert "Step 1: a" in text
        assert text.endswith("Step 2:")

    def test_revision_includes_goal_condition_and_initial_steps(self):
        instance = make_instance(
            TaskKind.COUNTERFACTUAL_REVISION,
            condition=Condition("no phone"),
            initial_plan=Plan.from_texts(["one", "two", "three"]),
        )
        text = render_template(instance)
        assert "Goal: hire a dog walker" in text
        assert "Condition: no phone" in text
        body = text.split("Initial plan:\n", 1)[1]
        assert body.startswith("Step 1: one\nStep 2: two\nStep 3: three\nRevised plan:")

    def test_deterministic(self):
        instance = make_instance(
            TaskKind.COUNTERFACTUAL_PLANNING, condition=Condition("at home")
        )
        assert render_template(instance, [Step("a", 1)]) == render_template(
            instance, [Step("a", 1)]
        )

    def test_injective_across_kinds(self):
        plain = make_instance(goal=Goal("g", "a"))
        conditioned = make_instance(
            TaskKind.COUNTERFACTUAL_PLANNING,
            goal=Goal("g", "a"),
            condition=Condition("Step 1: sneaky"),
        )
        assert render_template(plain, [Step("sneaky", 1)]) != render_template(conditioned)


class TestParsePlan:
    def test_direct(self):
        assert parse_plan("Step 1: a\nStep 2: b").step_texts == ("a", "b")

    def test_empty(self):
        plan = parse_plan("")
        assert len(plan) == 0 and not plan.terminal

    def test_out_of_order_is_sorted_and_reindexed(self):
        plan = parse_plan("Step 2: b\nStep 1: a")
        assert plan.step_texts == ("a", "b")
        assert [s.index for s in plan.steps] == [1, 2]

    def test_duplicates_listed(self):
        with pytest.raises(ParseError, match=r"\[2\]"):
            parse_plan("Step 2: b\nStep 2: c")

    def test_non_matching_lines_ignored(self):
        plan = parse_plan("Goal: g\nStep 1: a\nnote\nStep 2:   \n")
        assert plan.step_texts == ("a",)

    @given(step_texts)
    def test_round_trip(self, texts):
        rendered = "\n".join(f"Step {i}: {t}" for i, t in enumerate(texts, 1))
        assert parse_plan(rendered).step_texts == tuple(texts)


class TestSerialization:
    def test_record_round_trip(self, tmp_path):
        items = [
            (make_instance(), Plan.from_texts(["a", "b"])),
            (
                make_instance(
                    TaskKind.COUNTERFACTUAL_PLANNING,
                    goal=Goal("goal two", "g2"),
                    condition=Condition("store closed", ConditionCategory.LOCATION),
                ),
                None,
            ),
            (
                make_instance(
                    TaskKind.COUNTERFACTUAL_REVISION,
                    goal=Goal("goal three", "g3"),
                    condition=Condition("no tools"),
                    initial_plan=Plan.from_texts(["x", "y"]),
                ),
                Plan.from_texts(["x", "z", "y"]),
            ),
        ]
        path = tmp_path / "instances.jsonl"
        assert write_instances(path, items) == 3
        loaded = read_instances(path)
        assert len(loaded) == 3
        for (instance, plan), (got_instance, got_plan) in zip(items, loaded):
            assert got_instance.kind == instance.kind
            assert got_instance.goal.text == instance.goal.text
            if instance.condition:
                assert got_instance.condition.text == instance.condition.text
                assert got_instance.condition.category == instance.condition.category
            if plan:
                assert got_plan.step_texts == plan.step_texts

    def test_record_fields_exact(self):
        record = instance_to_record(make_instance(), Plan.from_texts(["a"]))
        assert set(record) == {"id", "kind", "goal", "plan"}

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "dup.jsonl"
        items = [(make_instance(), None), (make_instance(), None)]
        write_instances(path, items)
        with pytest.raises(ValidationError, match="duplicate record id"):
            read_instances(path)

    def test_missing_field_is_validation_error(self):
        with pytest.raises(ValidationError, match="kind"):
            record_to_instance({"goal": "g"})

import pytest
from hypothesis import strategies as st

from plankit.core import Goal, Plan
from plankit.scorers.mockworld import MockWorld

# Step/goal/condition texts: non-empty, single line, no surrounding whitespace.
line_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="\n\r"),
    min_size=1,
    max_size=40,
).map(str.strip).filter(bool)

step_texts = st.lists(line_text, min_size=1, max_size=8)

# Plans whose step texts are pairwise distinct (needed where text-level
# collisions would make pairs ambiguous on purpose).
distinct_step_texts = st.lists(line_text, min_size=1, max_size=8, unique=True)


@pytest.fixture
def tiny_world() -> MockWorld:
    """Root fork {a: 0.6, b: 0.4}; a has one child, b is a leaf."""
    return MockWorld(
        [
            {"prefix": [], "step": "a", "prob": 0.6, "validity": 0.9},
            {"prefix": [], "step": "b", "prob": 0.4, "validity": 0.2},
            {"prefix": ["a"], "step": "c", "prob": 1.0, "validity": 0.8},
        ],
        goal="tiny goal",
    )


@pytest.fixture
def goal() -> Goal:
    return Goal("do the thing", "g0001")


def make_plan(*texts: str) -> Plan:
    return Plan.from_texts(texts)

"""Acceptance criteria, one test each; every test prints its pass/fail line."""
import pytest

from torus_ma import acceptance
from torus_ma.grid import threads

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda f: f.__name__)
def test_criterion(criterion):
    with threads(1):
        result = criterion()
    print(result.line())
    ACCEPTANCE_LINES.append(result.line())
    assert result.passed, result.line()

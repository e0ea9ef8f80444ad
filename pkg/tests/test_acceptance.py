"""Acceptance suite: one test per criterion, each printing its PASS/FAIL line."""

import pytest

from conftest import ACCEPTANCE_LINES
from slabdtn.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    result = CRITERIA[number]()
    print(result.line())
    ACCEPTANCE_LINES.append(result.line())
    assert result.passed, result.line()

"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Every run prints a ``[PASS]``/``[FAIL]`` line per criterion (visible with -s
or in the captured output of a failure).
"""

import pytest

from lambda_thermo import acceptance


@pytest.mark.parametrize(
    "number", [num for num, _, _ in acceptance.CHECKS], ids=[f"criterion_{n}" for n, _, _ in acceptance.CHECKS]
)
def test_criterion(number):
    out = acceptance.run_check(number)
    print(out.line())
    assert out.passed, out.line()

"""Acceptance gate: every validation criterion at its stated tolerance.

Each criterion prints one pass/fail line (run pytest with -s to see them all
even on success).  The shared session fixes n=256, N=8, seed=0, matching the
`ottocircle validate` defaults.
"""

import pytest

from ottocircle.validation import CRITERIA, ValidationSession, format_record


@pytest.fixture(scope="module")
def session():
    return ValidationSession(n=256, N=8, seed=0)


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda fn: fn.__name__)
def test_criterion(criterion, session):
    record = criterion(session)
    line = format_record(record)
    print(line)
    failed = [c for c in record["checks"] if not c["passed"]]
    assert record["passed"], f"{line}; failing checks: {failed}"

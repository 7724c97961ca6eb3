"""One test per acceptance criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines; the same
checks back ``bpri selftest --full``.
"""
import pytest

from bpri import checks


def _run(check):
    result = check()
    print(result.line())
    for part, ok in result.parts.items():
        print(f"    {'ok ' if ok else 'MISS'} {part}")
    return result


@pytest.mark.parametrize("check", checks.ALL_CHECKS, ids=lambda c: c.__name__)
def test_criterion(check):
    result = _run(check)
    assert result.passed, result.detail

"""Acceptance suite: one PASS/FAIL line per criterion.

Criteria 1-13 run once with one worker and must also finish within their
runtime budgets; criterion 14 reruns them with four workers and compares the
serialised outputs byte for byte.  Run directly
(``python3 tests/test_acceptance.py``) to print the lines without pytest.
"""
import sys

import pytest

from percolab import acceptance as A
from percolab.parallel import workers

_single: dict[int, dict] = {}
_secs: dict[int, float] = {}


def _run_single(i):
    if i not in _single:
        with workers(1):
            _single[i], _secs[i] = A.run(i)
    return _single[i], _secs[i]


def _judged(i):
    """Criterion result with the runtime budget folded into the verdict."""
    res, secs = _run_single(i)
    within = secs <= A.BUDGET[i]
    shown = dict(res, passed=res["passed"] and within)
    if not within:
        shown["summary"] += " (over runtime budget)"
    return shown, A.line(shown, secs, A.BUDGET[i])


@pytest.mark.parametrize("i", sorted(A.CRITERIA))
def test_criterion(i, acceptance_lines):
    res, acceptance_lines[i] = _judged(i)
    print(acceptance_lines[i])
    assert res["passed"], res["summary"]


def _worker_invariance(single):
    multi = {}
    with workers(4):
        for i in sorted(single):
            multi[i] = A.run(i)[0]
    differ = [i for i in sorted(single) if A.serialise({i: single[i]}) != A.serialise({i: multi[i]})]
    ok = not differ and A.serialise(single) == A.serialise(multi)
    summary = ("criteria 1-13 byte-identical for workers 1 and 4" if ok
               else f"outputs differ for criteria {differ}")
    return {"criterion": 14, "passed": ok, "summary": summary, "data": {"differ": differ}}


def test_criterion_14_worker_invariance(acceptance_lines):
    for i in sorted(A.CRITERIA):
        _run_single(i)
    res = _worker_invariance(_single)
    acceptance_lines[14] = A.line(res)
    print(acceptance_lines[14])
    assert res["passed"], res["summary"]


if __name__ == "__main__":
    failed = 0
    for i in sorted(A.CRITERIA):
        res, text = _judged(i)
        failed += not res["passed"]
        print(text, flush=True)
    res = _worker_invariance(_single)
    failed += not res["passed"]
    print(A.line(res), flush=True)
    sys.exit(1 if failed else 0)

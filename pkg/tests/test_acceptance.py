from __future__ import annotations

import time

import pytest

from degenfrac import cli
from degenfrac.acceptance import CRITERIA, SuiteOptions, run_suite
from degenfrac.reports import decode

SEED = 7
FULL_RUN_BUDGET = 300.0

# one summary line per criterion, printed by the conftest terminal-summary hook
SUMMARY: dict[int, str] = {}


def _record(number: int, ok: bool, detail: str) -> None:
    SUMMARY[number] = f"criterion {number:2d} {CRITERIA[number].name}: {'PASS' if ok else 'FAIL'} ({detail})"


def _describe_failures(lines) -> str:
    bad = [f"{x.check}[{x.model}] observed={x.observed!r} {x.relation} {x.tolerance!r}" for x in lines if not x.passed]
    return "; ".join(bad[:10])


@pytest.mark.parametrize("number", [n for n in sorted(CRITERIA) if n != 13])
def test_criterion(number):
    result = run_suite(SuiteOptions(seed=SEED), criteria=[number])
    mine = [line for line in result.lines if line.criterion == number]
    elapsed = result.timings[number]
    ok = result.criterion_passed(number) and elapsed < CRITERIA[number].budget
    _record(number, ok, f"{len(mine)} checks, {elapsed:.1f}s of {CRITERIA[number].budget:.0f}s")
    assert number not in result.errors, result.errors.get(number)
    assert mine
    assert all(line.passed for line in mine), _describe_failures(mine)
    assert elapsed < CRITERIA[number].budget


def test_criterion_13_full_verify_is_byte_identical(tmp_path, capsys):
    reports = []
    durations = []
    for run in ("first", "second"):
        out = tmp_path / run
        start = time.perf_counter()
        code = cli.main(["verify", "--seed", str(SEED), "--out", str(out)])
        durations.append(time.perf_counter() - start)
        capsys.readouterr()
        assert code == 0, (out / "verify_report.jsonl").read_text()
        reports.append((out / "verify_report.jsonl").read_bytes())
    identical = reports[0] == reports[1]
    lines = decode(reports[0].decode())
    ok = identical and all(line["pass"] for line in lines) and max(durations) < FULL_RUN_BUDGET
    _record(13, ok, f"{len(lines)} report lines, runs {durations[0]:.1f}s and {durations[1]:.1f}s, "
                    f"{'identical' if identical else 'different'} bytes")
    assert identical
    assert {line["criterion"] for line in lines} == set(CRITERIA)
    assert max(durations) < FULL_RUN_BUDGET

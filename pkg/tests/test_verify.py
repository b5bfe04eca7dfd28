"""The built-in property suites must pass on a fresh checkout."""

import io

import pytest

from nitns.verify import SUITES, run_suites, suite_names


def test_suite_registry():
    assert suite_names() == ["algebra", "spectral", "energy", "cauchy", "consistency"]


@pytest.mark.parametrize("name", suite_names())
def test_suite_passes(name):
    failed = [c for c in SUITES[name]() if not c.passed]
    assert not failed, [f"{c.name}: {c.value}" for c in failed]


def test_output_lines_are_machine_readable():
    buf = io.StringIO()
    ok = run_suites(["algebra"], out=buf)
    assert ok
    lines = buf.getvalue().splitlines()
    assert lines
    for line in lines:
        status, rest = line.split(" ", 1)
        assert status in ("PASS", "FAIL")
        assert rest.startswith("algebra.")
        assert ": " in rest

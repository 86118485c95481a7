"""Shared fixtures: the s = 0.5 profile and cached steady solves."""
import numpy as np
import pytest

from bcpatch.barrier import solve_profile
from bcpatch.steady import SolveConfig, solve_steady

_SOLVES = {}
_VERDICTS = []


@pytest.fixture(scope="session")
def profile():
    return solve_profile(0.5)


@pytest.fixture(scope="session")
def solve(profile):
    """solve(eps, n, init="psi0") -> SolveReport, computed once per session."""

    def get(eps, n, init="psi0"):
        key = (float(eps), int(n), init)
        if key not in _SOLVES:
            cfg = SolveConfig(eps=float(eps), s=0.5, n=int(n), init=init)
            _SOLVES[key] = solve_steady(cfg, profile=profile)
        return _SOLVES[key]

    return get


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

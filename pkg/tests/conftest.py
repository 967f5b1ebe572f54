from __future__ import annotations

import numpy as np
import pytest

from fliplab.weights import EdgeWeights


@pytest.fixture
def k3() -> EdgeWeights:
    """Triangle with X01 = 0.5, X02 = -0.2, X12 = 0.1."""
    return EdgeWeights.from_pairs(3, {(0, 1): 0.5, (0, 2): -0.2, (1, 2): 0.1})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion and return the flag."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)

import random
from fractions import Fraction

import pytest

from dstq.graph import DstInstance, parse_dst

G1_TEXT = """dst 4 5
root 0
terminals 2 3
edge 0 1 1
edge 1 2 1
edge 1 3 1
edge 0 2 3
edge 0 3 3
"""


def g1() -> DstInstance:
    return parse_dst(G1_TEXT)


def star(costs) -> DstInstance:
    edges = tuple((0, i + 1, Fraction(c)) for i, c in enumerate(costs))
    return DstInstance(len(costs) + 1, edges, 0, frozenset(range(1, len(costs) + 1)))


@pytest.fixture
def G1():
    return g1()


@pytest.fixture
def rng():
    return random.Random(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number: int, ok: bool, detail: str, seconds: float, limit=None):
    """Remember one criterion line; printed again in the terminal summary."""
    timing = f"{seconds:.1f}s" + (f" (limit {limit}s)" if limit else "")
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{timing}]"
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

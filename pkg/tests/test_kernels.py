import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstq import _kernels_py as pure
from dstq import kernels

compiled = pytest.importorskip("dstq._kernels")


@st.composite
def tables(draw):
    rows = draw(st.integers(0, 30))
    words = draw(st.integers(1, 4))
    flat = draw(st.lists(st.integers(0, 2**64 - 1), min_size=rows * words, max_size=rows * words))
    weights = draw(st.lists(st.integers(1, 2**40), min_size=rows, max_size=rows))
    bits = np.array(flat, dtype=np.uint64).reshape(rows, words)
    events = draw(st.lists(st.integers(0, 64 * words - 1), max_size=5, unique=True))
    return bits, np.array(weights, dtype=np.int64), events


@settings(max_examples=200, deadline=None)
@given(tables())
def test_compiled_matches_pure(table):
    bits, weights, events = table
    assert compiled.masked_weight_sum(bits, weights, events) == pure.masked_weight_sum(
        bits, weights, events)
    for e in events:
        assert list(compiled.rows_with_event(bits, e)) == pure.rows_with_event(bits, e)


def test_dispatch_prefers_compiled():
    assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, DSTQ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import dstq.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_empty_event_list_sums_everything():
    bits = np.zeros((3, 1), dtype=np.uint64)
    weights = np.array([1, 2, 3], dtype=np.int64)
    assert compiled.masked_weight_sum(bits, weights, []) == pure.masked_weight_sum(
        bits, weights, []) == 6

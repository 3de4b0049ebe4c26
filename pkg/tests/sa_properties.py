"""Exact checks of the lifted-solution properties, shared by unit and acceptance tests."""

import itertools
import random
from fractions import Fraction

from dstq.lp.lifted import SaLpSolution, ZeroProbabilityEvent, materialize
from dstq.lp.program import LinearProgram, check_sa_membership, lift
from dstq.lp.simplex import solve_lp


def toy_lp(rng: random.Random, n: int, force_one: bool = True) -> LinearProgram:
    """Random order/packing/covering rows over ``n`` 0/1 variables, all
    satisfied by a hidden integral point so the hull is never empty."""
    hidden = [rng.randint(0, 1) for _ in range(n)]
    if force_one:
        hidden[0] = 1
    rows = []
    for _ in range(3 * n):
        i, j = rng.sample(range(n), 2)
        kind = rng.randrange(3)
        if kind == 0:
            row = ({i: 1, j: -1}, 0)
        elif kind == 1:
            row = ({i: 1, j: 1}, 1)
        else:
            row = ({i: -1, j: -1}, -1)
        if sum(c * hidden[v] for v, c in row[0].items()) <= row[1]:
            rows.append(row)
    if force_one:
        rows.append(({0: -1}, -1))
    for v in range(n):
        rows.append(({v: 1}, 1))
        rows.append(({v: -1}, 0))
    objective = {v: Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for v in range(n)}
    return LinearProgram(tuple(range(n)), rows, objective)


def integral_hull_points(lp: LinearProgram):
    """All 0/1 assignments satisfying every row (exhaustive)."""
    out = []
    for bits in itertools.product((0, 1), repeat=lp.n_vars):
        point = {v: Fraction(b) for v, b in zip(lp.variables, bits)}
        if lp.satisfies(point):
            out.append(point)
    return out


def implied_pairs(lp: LinearProgram):
    """``(i, j)`` with a row ``x_i - x_j <= 0``, so every point has ``x_i <= x_j``."""
    out = set()
    for coef, bound in lp.rows:
        if bound == 0 and len(coef) == 2 and sorted(coef.values()) == [-1, 1]:
            i = next(v for v, c in coef.items() if c == 1)
            j = next(v for v, c in coef.items() if c == -1)
            out.add((i, j))
    return sorted(out)


def solve_lifted(lp: LinearProgram, rounds: int) -> SaLpSolution:
    return SaLpSolution(solve_lp(lift(lp, rounds)).x, rounds)


def check_properties(x, lp: LinearProgram, rounds: int, events=None):
    """Assert properties (a) to (f) exactly; returns the number of checks made."""
    events = sorted(lp.variables if events is None else events)
    point = materialize(x, events, rounds)
    checks = 0
    # (a) monotone under inclusion, values in [0, 1]
    for S, val in point.items():
        assert 0 <= val <= 1, (S, val)
        for e in events:
            if e not in S and len(S) < rounds:
                assert point[tuple(sorted(S + (e,)))] <= val
                checks += 1
    assert point[()] == 1
    # (b) x_i = 1 forces x_{i,j} = x_j
    if rounds >= 2:
        for i in events:
            if point[(i,)] == 1:
                for j in events:
                    if j != i:
                        assert point[tuple(sorted((i, j)))] == point[(j,)]
                        checks += 1
    # (c) implied x_i <= x_j gives x_{i,j} = x_i
    if rounds >= 2:
        for i, j in implied_pairs(lp):
            if i in events and j in events:
                assert point[tuple(sorted((i, j)))] == point[(i,)]
                checks += 1
    if rounds < 2:
        return checks
    for e in events:
        if point[(e,)] == 0:
            try:
                x.condition(e)
            except ZeroProbabilityEvent:
                checks += 1
                continue
            raise AssertionError("conditioning on a zero event must fail")
        y = x.condition(e)
        # (d) the conditioned event holds surely
        assert y.query((e,)) == 1
        sub = materialize(y, events, rounds - 1)
        # (e) membership one level down
        assert check_sa_membership(sub, lp, rounds - 1)
        # (f) 0/1 coordinates survive conditioning
        for S, val in sub.items():
            if point[S] in (0, 1):
                assert val == point[S], (e, S)
        checks += 3
    return checks

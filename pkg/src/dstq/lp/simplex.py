"""Exact rational simplex for ``min c.x  s.t.  A x <= b`` with free ``x``.

The solver works on the dual ``min b.y  s.t.  A^T y = -c, y >= 0``, whose
basis has one row per primal variable (far fewer than the number of primal
rows in lifted programs). Two phases with artificial columns, an explicit
basis inverse, and Dantzig pricing that falls back to Bland's rule for as
long as pivots stay degenerate, which rules out cycling. The primal optimum
is read off the simplex multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import LpInfeasible, LpUnbounded
from .program import LinearProgram

try:  # gmpy2 rationals are several times faster than Fraction
    from gmpy2 import mpq as _mpq

    def _num(q: Fraction):
        return _mpq(q.numerator, q.denominator)

    def _frac(q) -> Fraction:
        return Fraction(int(q.numerator), int(q.denominator))

    EXACT_BACKEND = "gmpy2"
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _num = Fraction

    def _frac(q) -> Fraction:
        return Fraction(q)

    EXACT_BACKEND = "fractions"


@dataclass(frozen=True)
class LpResult:
    """Optimal point, value and the dual certificate that proves optimality.

    ``basis`` lists the primal rows whose dual variables are basic; ``duals``
    holds the nonzero dual values by row index.
    """

    x: dict
    objective: Fraction
    basis: tuple
    duals: dict
    pivots: int


def verify_certificate(lp: LinearProgram, res: LpResult) -> bool:
    """Primal feasibility, dual feasibility and equal objectives, exactly."""
    if not lp.satisfies(res.x):
        return False
    if any(y < 0 for y in res.duals.values()):
        return False
    reduced = {v: lp.objective.get(v, Fraction(0)) for v in lp.variables}
    for j, y in res.duals.items():
        for v, a in lp.rows[j][0].items():
            reduced[v] += a * y
    if any(r != 0 for r in reduced.values()):
        return False
    dual_value = -sum((lp.rows[j][1] * y for j, y in res.duals.items()), Fraction(0))
    return dual_value == lp.objective_value(res.x) == res.objective


class _Tableau:
    """Revised simplex state for ``min cost.y, M y = rhs, y >= 0`` with ``rhs >= 0``."""

    def __init__(self, columns, rhs, n_struct):
        self.columns = columns  # sparse: list of [(row, value)]
        self.m = len(rhs)
        self.n_struct = n_struct
        self.basis = [n_struct + i for i in range(self.m)]
        self.binv = [[_num(Fraction(int(i == k))) for k in range(self.m)] for i in range(self.m)]
        self.xb = list(rhs)
        self.pivots = 0
        zero = _num(Fraction(0))
        self.zero = zero

    def multipliers(self, cost):
        m, binv = self.m, self.binv
        pi = [self.zero] * m
        for i in range(m):
            cb = cost(self.basis[i])
            if cb:
                row = binv[i]
                for t in range(m):
                    if row[t]:
                        pi[t] += cb * row[t]
        return pi

    def direction(self, j):
        col = self.columns[j]
        out = []
        for row in self.binv:
            acc = self.zero
            for t, a in col:
                r = row[t]
                if r:
                    acc += r * a
            out.append(acc)
        return out

    def pivot(self, r, j, w):
        theta = self.xb[r] / w[r]
        for i in range(self.m):
            if i != r and w[i]:
                self.xb[i] -= theta * w[i]
        self.xb[r] = theta
        binv = self.binv
        piv = w[r]
        prow = [a / piv for a in binv[r]]
        binv[r] = prow
        nz = [t for t, a in enumerate(prow) if a]
        for i in range(self.m):
            f = w[i]
            if i != r and f:
                row = binv[i]
                for t in nz:
                    row[t] -= f * prow[t]
        self.basis[r] = j
        self.pivots += 1

    def run(self, cost, allowed):
        """Iterate to optimality. Returns False if the objective is unbounded."""
        bland = False
        in_basis = set(self.basis)
        while True:
            pi = self.multipliers(cost)
            enter, best = None, None
            for j in allowed:
                if j in in_basis:
                    continue
                d = cost(j)
                for t, a in self.columns[j]:
                    if pi[t]:
                        d -= pi[t] * a
                if d < 0:
                    if bland:
                        enter = j
                        break
                    if best is None or d < best:
                        enter, best = j, d
            if enter is None:
                return True
            w = self.direction(enter)
            leave, ratio = None, None
            for i in range(self.m):
                if w[i] > 0:
                    q = self.xb[i] / w[i]
                    if (
                        ratio is None
                        or q < ratio
                        or (q == ratio and self.basis[i] < self.basis[leave])
                    ):
                        leave, ratio = i, q
            if leave is None:
                return False
            in_basis.discard(self.basis[leave])
            in_basis.add(enter)
            self.pivot(leave, enter, w)
            bland = ratio == 0


def solve_lp(lp: LinearProgram) -> LpResult:
    """Exact optimum of ``lp``.

    Raises :class:`LpInfeasible` when no point satisfies the rows and
    :class:`LpUnbounded` when the objective has no lower bound (impossible
    once box rows are present).
    """
    n = lp.n_vars
    index = lp.index
    sign = []
    rhs = []
    for v in lp.variables:
        r = -lp.objective.get(v, Fraction(0))
        s = -1 if r < 0 else 1
        sign.append(s)
        rhs.append(_num(r * s))
    columns = []
    for coef, _ in lp.rows:
        columns.append(
            sorted((index[v], _num(a * sign[index[v]])) for v, a in coef.items())
        )
    n_struct = len(columns)
    one = _num(Fraction(1))
    for i in range(n):
        columns.append([(i, one)])
    bounds = [_num(b) for _, b in lp.rows]
    tab = _Tableau(columns, rhs, n_struct)

    def phase1(j):
        return one if j >= n_struct else tab.zero

    tab.run(phase1, range(n_struct + n))
    if any(tab.xb[i] for i in range(n) if tab.basis[i] >= n_struct):
        raise LpUnbounded("objective is unbounded below")

    # drive remaining zero-level artificial columns out of the basis
    for i in range(n):
        if tab.basis[i] < n_struct:
            continue
        row = tab.binv[i]
        in_basis = set(tab.basis)
        for j in range(n_struct):
            if j in in_basis:
                continue
            val = tab.zero
            for t, a in columns[j]:
                if row[t]:
                    val += row[t] * a
            if val:
                tab.pivot(i, j, tab.direction(j))
                break

    def phase2(j):
        return bounds[j] if j < n_struct else tab.zero

    if not tab.run(phase2, range(n_struct)):
        raise LpInfeasible("constraints admit no point")

    pi = tab.multipliers(phase2)
    x = {v: _frac(pi[i]) * sign[i] for i, v in enumerate(lp.variables)}
    duals = {}
    for i, j in enumerate(tab.basis):
        if j < n_struct and tab.xb[i]:
            duals[j] = _frac(tab.xb[i])
    objective = lp.objective_value(x)
    res = LpResult(
        x=x,
        objective=objective,
        basis=tuple(sorted(j for j in tab.basis if j < n_struct)),
        duals=duals,
        pivots=tab.pivots,
    )
    if not verify_certificate(lp, res):
        raise AssertionError("simplex produced an invalid optimality certificate")
    return res

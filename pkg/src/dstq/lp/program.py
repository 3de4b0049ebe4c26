"""Linear programs over exact rationals, the base LCST relaxation and its lifts.

Every constraint is stored as ``sum(coef[v] * x[v]) <= bound``; equalities are
two opposite rows. Lifted variables are sorted tuples of base variables, with
``()`` standing for the empty product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

from ..errors import CapExceeded
from ..graph import format_rational
from ..lcst import NormalizedLcst

ONE = Fraction(1)
ZERO = Fraction(0)


class EventSpace:
    """Bijective integer ids for node events ``v`` and pair events ``(v, label)``.

    Node ``v`` has id ``v``; the pair ``(v, label)`` has id
    ``N + v * |L| + rank(label)`` where labels are ranked in sorted order.
    """

    __slots__ = ("n_nodes", "labels", "_rank")

    def __init__(self, n_nodes: int, labels):
        self.n_nodes = n_nodes
        self.labels = tuple(sorted(labels))
        self._rank = {ell: i for i, ell in enumerate(self.labels)}

    @classmethod
    def of(cls, inst) -> "EventSpace":
        return cls(len(inst), inst.labels)

    def __len__(self):
        return self.n_nodes * (1 + len(self.labels))

    def __eq__(self, other):
        return (
            isinstance(other, EventSpace)
            and self.n_nodes == other.n_nodes
            and self.labels == other.labels
        )

    def __hash__(self):
        return hash((self.n_nodes, self.labels))

    def node(self, v) -> int:
        return v

    def pair(self, v, ell) -> int:
        return self.n_nodes + v * len(self.labels) + self._rank[ell]

    def decode(self, e):
        """``v`` for a node event, ``(v, label)`` for a pair event."""
        if not 0 <= e < len(self):
            raise ValueError(f"event id {e} out of range")
        if e < self.n_nodes:
            return e
        v, r = divmod(e - self.n_nodes, len(self.labels))
        return (v, self.labels[r])

    def describe(self, e) -> str:
        d = self.decode(e)
        return f"v{d}" if isinstance(d, int) else f"v{d[0]}:l{d[1]}"

    def inside(self, nodes):
        """All event ids attached to the given nodes, sorted."""
        out = []
        for v in nodes:
            out.append(v)
            out.extend(self.pair(v, ell) for ell in self.labels)
        return sorted(out)


def var_name(v) -> str:
    if isinstance(v, tuple):
        return "x(" + ",".join(str(i) for i in v) + ")"
    return f"x{v}"


@dataclass
class LinearProgram:
    """``min objective . x`` subject to ``rows``; all data exact.

    ``tags`` names the family each row belongs to (parallel to ``rows``).
    """

    variables: tuple
    rows: list
    objective: dict
    tags: list = field(default_factory=list)
    space: EventSpace | None = None

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.index = {v: i for i, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            raise ValueError("duplicate variable")
        rows = []
        for coef, bound in self.rows:
            rows.append(({v: Fraction(c) for v, c in coef.items() if c != 0}, Fraction(bound)))
        self.rows = rows
        self.objective = {v: Fraction(c) for v, c in self.objective.items() if c != 0}
        if not self.tags:
            self.tags = [""] * len(self.rows)
        for coef, _ in self.rows:
            for v in coef:
                if v not in self.index:
                    raise ValueError(f"row references undeclared variable {v!r}")
        for v in self.objective:
            if v not in self.index:
                raise ValueError(f"objective references undeclared variable {v!r}")

    @property
    def n_vars(self):
        return len(self.variables)

    @property
    def n_rows(self):
        return len(self.rows)

    def row_activity(self, j, point) -> Fraction:
        coef, _ = self.rows[j]
        return sum((c * point[v] for v, c in coef.items()), ZERO)

    def violated_rows(self, point):
        return [
            j for j, (_, bound) in enumerate(self.rows) if self.row_activity(j, point) > bound
        ]

    def satisfies(self, point) -> bool:
        return all(self.row_activity(j, point) <= b for j, (_, b) in enumerate(self.rows))

    def objective_value(self, point) -> Fraction:
        return sum((c * point[v] for v, c in self.objective.items()), ZERO)

    def export(self) -> str:
        """Canonical text: variables in declaration order, rows sorted."""

        def terms(coef):
            items = sorted(coef.items(), key=lambda kv: self.index[kv[0]])
            return " + ".join(f"{format_rational(c)}*{var_name(v)}" for v, c in items) or "0"

        lines = [f"lp {self.n_vars} {self.n_rows}"]
        lines.append("vars " + " ".join(var_name(v) for v in self.variables))
        lines.append("min " + terms(self.objective))
        lines.extend(
            sorted(f"row {terms(coef)} <= {format_rational(b)}" for coef, b in self.rows)
        )
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ base LP


def _le(rows, tags, tag, coef, bound):
    rows.append((coef, bound))
    tags.append(tag)


def _eq(rows, tags, tag, coef, bound):
    rows.append((coef, bound))
    rows.append(({v: -c for v, c in coef.items()}, -bound))
    tags.extend([tag, tag])


def _kept_pairs(inst: NormalizedLcst):
    """Pair events that can be nonzero: a leaf with that label lies below."""
    below = [None] * len(inst)
    for v in reversed(inst.order):
        if inst.children[v]:
            acc = set()
            for c in inst.children[v]:
                acc |= below[c]
            below[v] = acc
        else:
            below[v] = {inst.a[v]} if v in inst.a else set()
    return below


def build_base_lp(inst: NormalizedLcst, restrict: bool = False) -> LinearProgram:
    """The relaxation over node and (node, label) events, with box rows.

    With ``restrict`` the pair events that no leaf below could serve are
    treated as the constant 0 and left out of the variable set.
    """
    space = EventSpace.of(inst)
    labels = space.labels
    below = _kept_pairs(inst) if restrict else None

    def live(v, ell):
        return below is None or ell in below[v]

    variables = []
    for v in range(len(inst)):
        variables.append(v)
    for v in range(len(inst)):
        variables.extend(space.pair(v, ell) for ell in labels if live(v, ell))
    rows, tags = [], []

    def pair(v, ell):
        return space.pair(v, ell) if live(v, ell) else None

    for u in inst.internal:
        for v in inst.children[u]:
            _le(rows, tags, "child-le-parent", {v: ONE, u: -ONE}, ZERO)
    for u in range(len(inst)):
        for ell in labels:
            e = pair(u, ell)
            if e is not None:
                _le(rows, tags, "label-le-node", {e: ONE, u: -ONE}, ZERO)
    for u in inst.internal:
        for ell in sorted(inst.dem[u]):
            e = pair(u, ell)
            coef = {u: -ONE} if e is None else {e: ONE, u: -ONE}
            _eq(rows, tags, "demand", coef, ZERO)
    for v in inst.leaves:
        if v in inst.a:
            _eq(rows, tags, "leaf-label", {pair(v, inst.a[v]): ONE, v: -ONE}, ZERO)
    for u in inst.internal:
        for ell in labels:
            e = pair(u, ell)
            if e is None:
                continue
            coef = {e: ONE}
            for v in inst.children[u]:
                f = pair(v, ell)
                if f is not None:
                    coef[f] = coef.get(f, ZERO) - ONE
            _eq(rows, tags, "flow", coef, ZERO)
    for v in inst.leaves:
        for ell in labels:
            if ell != inst.a.get(v):
                e = pair(v, ell)
                if e is not None:
                    _eq(rows, tags, "leaf-zero", {e: ONE}, ZERO)
    for ell in sorted(inst.globals):
        e = pair(inst.root, ell)
        if e is None:
            # the constant 0 would have to equal 1
            _le(rows, tags, "global", {}, -ONE)
        else:
            _eq(rows, tags, "global", {e: ONE}, ONE)
    for x in variables:
        _le(rows, tags, "box-upper", {x: ONE}, ONE)
        _le(rows, tags, "box-lower", {x: -ONE}, ZERO)
    objective = {v: inst.cost[v] for v in range(len(inst)) if inst.cost[v]}
    return LinearProgram(tuple(variables), rows, objective, tags, space)


def check_sum_leaf_identity(inst: NormalizedLcst, point, u, ell) -> bool:
    """Whether the leaf values below ``u`` for ``ell`` add up to the value at ``u``.

    ``point`` maps event ids to values; missing events count as 0.
    """
    space = EventSpace.of(inst)
    total = sum(
        (Fraction(point.get(space.pair(v, ell), 0)) for v in inst.leaf_descendants(u)), ZERO
    )
    return total == Fraction(point.get(space.pair(u, ell), 0))


# --------------------------------------------------------------------- lifting


def _lifted_count(n_base, rounds):
    return sum(comb(n_base, r) for r in range(rounds + 1))


def lift(lp: LinearProgram, rounds: int, max_vars: int | None = None) -> LinearProgram:
    """Sherali-Adams lift of ``lp`` at level ``rounds``.

    For each row ``a.x <= b`` and disjoint ``S``, ``T`` with
    ``|S| + |T| <= rounds - 1`` the product of the row with
    ``prod_S x_i * prod_T (1 - x_j)`` is linearized. The empty-product
    variable is moved into the bound; ``x() = 1`` is kept as a row pair.
    Rows are scaled so their leading coefficient has absolute value 1, then
    deduplicated and sorted.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    base = sorted(lp.variables)
    n_lifted = _lifted_count(len(base), rounds)
    if max_vars is not None and n_lifted > max_vars:
        raise CapExceeded(
            f"lift at level {rounds} needs {n_lifted} variables (budget {max_vars})", n_lifted
        )
    variables = [()]
    for r in range(1, rounds + 1):
        variables.extend(combinations(base, r))
    order = {v: i for i, v in enumerate(variables)}
    seen = {}

    def add(coef, bound, tag):
        items = sorted(((k, c) for k, c in coef.items() if c != 0), key=lambda kv: order[kv[0]])
        if not items:
            if bound < 0:
                seen.setdefault(((), -ONE), tag)
            return
        scale = abs(items[0][1])
        key = (tuple((k, c / scale) for k, c in items), bound / scale)
        seen.setdefault(key, tag)

    for (coef, bound), tag in zip(lp.rows, lp.tags):
        row_vars = sorted(coef)
        for s_size in range(rounds):
            for S in combinations(base, s_size):
                s_set = set(S)
                rest = [v for v in base if v not in s_set]
                for t_size in range(rounds - s_size):
                    for T in combinations(rest, t_size):
                        lifted, const = {}, ZERO
                        for k in range(t_size + 1):
                            sign = -ONE if k % 2 else ONE
                            for Tp in combinations(T, k):
                                st = s_set.union(Tp)
                                for v in row_vars:
                                    key = tuple(sorted(st | {v}))
                                    lifted[key] = lifted.get(key, ZERO) + sign * coef[v]
                                key = tuple(sorted(st))
                                lifted[key] = lifted.get(key, ZERO) - sign * bound
                        const = lifted.pop((), ZERO)
                        add(lifted, -const, tag)
    rows, tags = [], []
    for (items, bound), tag in sorted(seen.items(), key=lambda kv: _row_sort_key(kv[0], order)):
        rows.append((dict(items), bound))
        tags.append(tag)
    rows.append(({(): ONE}, ONE))
    rows.append(({(): -ONE}, -ONE))
    tags.extend(["empty", "empty"])
    objective = {(v,): c for v, c in lp.objective.items()}
    return LinearProgram(tuple(variables), rows, objective, tags, lp.space)


def _row_sort_key(key, order):
    items, bound = key
    return (tuple((order[k], c) for k, c in items), bound)


def lifted_point_from_integral(values, rounds):
    """Extend a 0/1 base point by products to every subset of size <= rounds."""
    base = sorted(values)
    point = {}
    for r in range(rounds + 1):
        for S in combinations(base, r):
            point[S] = ONE if all(values[v] == 1 for v in S) else ZERO
    return point


def check_sa_membership(point, lp: LinearProgram, rounds: int) -> bool:
    """Exact test that ``point`` (keyed by sorted tuples) lies in the level-``rounds`` lift."""
    lifted = lift(lp, rounds)
    if point.get(()) != 1:
        return False
    missing = [v for v in lifted.variables if v not in point]
    if missing:
        raise ValueError(f"point is missing {len(missing)} lifted coordinates, e.g. {missing[0]}")
    return lifted.satisfies(point)


def format_lifted_point(point) -> str:
    """One ``(sorted ids) = num/den`` line per coordinate, sorted by subset."""
    keys = sorted(point, key=lambda k: (len(k), k))
    return "".join(
        f"({' '.join(str(i) for i in k)}) = {format_rational(point[k])}\n" for k in keys
    )

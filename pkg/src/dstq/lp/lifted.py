"""Lifted solutions: values on event sets that can be conditioned on events.

Two implementations share one interface. :class:`SaLpSolution` wraps an
optimal point of a lifted program; :class:`DistributionBacked` is an explicit
distribution over integral solutions, which lies in every lifting level.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from fractions import Fraction
from itertools import combinations

import numpy as np

from ..errors import RoundBudgetExhausted, ValidationError
from ..kernels import masked_weight_sum, rows_with_event
from ..lcst import LcstSolution, NormalizedLcst, validate_full
from .program import EventSpace, LinearProgram

ONE = Fraction(1)
ZERO = Fraction(0)
# support weights share a denominator below this so row sums fit in int64
MAX_DENOMINATOR = 1 << 62


class ZeroProbabilityEvent(ValueError):
    pass


def required_rounds(s: int, h: int) -> int:
    """Lifting level that suffices for every conditioning the rounding performs."""
    if s < 0 or h < 0:
        raise ValueError("s and h must be nonnegative")
    return s * (h + 2) * (h + 1) + 1


class LiftedSolution(ABC):
    """Read access to ``x_S`` for ``|S| <= rounds`` plus conditioning."""

    rounds: float

    @abstractmethod
    def query(self, events) -> Fraction:
        """``x_S`` for the event set ``S``."""

    @abstractmethod
    def condition(self, e) -> "LiftedSolution":
        """The solution conditioned on event ``e``, one level lower."""

    def value(self, e) -> Fraction:
        return self.query((e,))


class SaLpSolution(LiftedSolution):
    """A point of a lifted program, keyed by sorted tuples of base events.

    Conditioning is kept lazy: after conditioning on the set ``C`` the value
    of ``S`` is ``x[S | C] / x[C]``, which equals conditioning one event at a
    time. Base events absent from ``known`` are fixed to 0.
    """

    def __init__(self, values, rounds: int, known=None, given=frozenset()):
        self._values = values
        self.rounds = rounds
        self._known = (
            frozenset(k[0] for k in values if len(k) == 1) if known is None else known
        )
        self._given = frozenset(given)
        self._norm = values[tuple(sorted(self._given))]

    @classmethod
    def from_point(cls, point, rounds: int) -> "SaLpSolution":
        return cls(dict(point), rounds)

    def query(self, events) -> Fraction:
        s = set(events)
        if len(s) > self.rounds:
            raise RoundBudgetExhausted(
                f"query of {len(s)} events exceeds remaining level {self.rounds}"
            )
        if not s <= self._known:
            return ZERO
        return self._values[tuple(sorted(s | self._given))] / self._norm

    def condition(self, e) -> "SaLpSolution":
        if self.rounds < 2:
            raise RoundBudgetExhausted("conditioning needs at least two remaining levels")
        if self.query((e,)) == 0:
            raise ZeroProbabilityEvent(f"event {e} has probability 0")
        return SaLpSolution(self._values, self.rounds - 1, self._known, self._given | {e})


class DistributionBacked(LiftedSolution):
    """Finite distribution over 0/1 points, stored as a bitset table.

    ``weights[i] / total`` is the probability of row ``i``.
    """

    rounds = math.inf

    def __init__(self, bits: np.ndarray, weights: np.ndarray, total: int, n_events: int):
        self.bits = bits
        self.weights = weights
        self.total = total
        self.n_events = n_events

    @classmethod
    def from_masks(cls, masks, weights, n_events: int) -> "DistributionBacked":
        """Build from integer bitmasks and positive rational weights summing to 1."""
        merged = {}
        for m, w in zip(masks, weights):
            w = Fraction(w)
            if w <= 0:
                raise ValidationError("support weights must be positive")
            merged[m] = merged.get(m, ZERO) + w
        if sum(merged.values(), ZERO) != 1:
            raise ValidationError("support weights do not sum to 1")
        denom = 1
        for w in merged.values():
            denom = math.lcm(denom, w.denominator)
        if denom >= MAX_DENOMINATOR:
            raise ValidationError("support weights need too fine a common denominator")
        keys = sorted(merged)
        n_words = max(1, (n_events + 63) // 64)
        bits = np.zeros((len(keys), n_words), dtype=np.uint64)
        for i, m in enumerate(keys):
            for w in range(n_words):
                bits[i, w] = (m >> (64 * w)) & 0xFFFFFFFFFFFFFFFF
        nums = np.array([merged[m].numerator * (denom // merged[m].denominator) for m in keys],
                        dtype=np.int64)
        return cls(bits, nums, denom, n_events)

    def __len__(self):
        return len(self.weights)

    def query(self, events) -> Fraction:
        s = sorted(set(events))
        if not s:
            return ONE
        if s[-1] >= self.n_events or s[0] < 0:
            return ZERO
        return Fraction(masked_weight_sum(self.bits, self.weights, s), self.total)

    def condition(self, e) -> "DistributionBacked":
        if not 0 <= e < self.n_events:
            raise ZeroProbabilityEvent(f"event {e} has probability 0")
        idx = rows_with_event(self.bits, e)
        if not idx:
            raise ZeroProbabilityEvent(f"event {e} has probability 0")
        weights = self.weights[idx]
        return DistributionBacked(
            np.ascontiguousarray(self.bits[idx]), weights, int(weights.sum()), self.n_events
        )

    def support(self):
        """``(bitmask, probability)`` pairs in bitmask order."""
        out = []
        for row, w in zip(self.bits.tolist(), self.weights.tolist()):
            m = 0
            for i, word in enumerate(row):
                m |= word << (64 * i)
            out.append((m, Fraction(w, self.total)))
        return out


# ------------------------------------------------------- LCST support points


def solution_events(inst: NormalizedLcst, space: EventSpace, nodes) -> list:
    """Event ids that hold for the subtree ``nodes``: its nodes and, for each
    selected node, the labels of selected leaves below it."""
    nodes = set(nodes)
    out = set(nodes)
    for w in nodes:
        if w in inst.a and not inst.children[w]:
            ell = inst.a[w]
            u = w
            while u is not None:
                out.add(space.pair(u, ell))
                u = inst.parent[u]
    return sorted(out)


def integral_violation(inst: NormalizedLcst, nodes):
    """Why ``nodes`` is not an integral point of the base relaxation, or ``None``."""
    sol = inst.solution(nodes)
    try:
        validate_full(inst, sol)
    except ValidationError as exc:
        return str(exc)
    seen = {}
    for v in sorted(sol.nodes):
        if v in inst.a and not inst.children[v]:
            ell = inst.a[v]
            if ell in seen:
                return f"label {ell} served by leaves {seen[ell]} and {v}"
            seen[ell] = v
    return None


def integral_point(inst: NormalizedLcst, lp: LinearProgram, nodes) -> dict:
    """0/1 values of every variable of ``lp`` for the subtree ``nodes``."""
    held = set(solution_events(inst, lp.space, nodes))
    return {v: ONE if v in held else ZERO for v in lp.variables}


def distribution_backed(inst: NormalizedLcst, support, lp: LinearProgram | None = None):
    """Lifted solution given by a distribution over feasible subtrees.

    ``support`` is a list of ``(LcstSolution or node iterable, weight)``.
    Each point must be feasible with at most one selected leaf per label;
    if ``lp`` is given its 0/1 vector is also checked against every row.
    """
    space = EventSpace.of(inst)
    masks, weights = [], []
    for item, w in support:
        nodes = item.nodes if isinstance(item, LcstSolution) else frozenset(item)
        why = integral_violation(inst, nodes)
        if why is not None:
            raise ValidationError(f"support point outside the integral hull: {why}")
        if lp is not None and not lp.satisfies(integral_point(inst, lp, nodes)):
            raise ValidationError("support point violates the base relaxation")
        m = 0
        for e in solution_events(inst, space, nodes):
            m |= 1 << e
        masks.append(m)
        weights.append(w)
    return DistributionBacked.from_masks(masks, weights, len(space))


def point_mass(inst: NormalizedLcst, nodes, lp: LinearProgram | None = None):
    return distribution_backed(inst, [(frozenset(nodes), ONE)], lp)


def support_solutions(inst: NormalizedLcst, x: DistributionBacked):
    """Decode the support of ``x`` back into ``(LcstSolution, weight)`` pairs."""
    out = []
    n = len(inst)
    for m, w in x.support():
        out.append((inst.solution(v for v in range(n) if m >> v & 1), w))
    return out


def materialize(x: LiftedSolution, events, rounds: int) -> dict:
    """``{sorted tuple S: x_S}`` for every subset of ``events`` up to size ``rounds``."""
    events = sorted(events)
    point = {}
    for r in range(rounds + 1):
        for S in combinations(events, r):
            point[S] = x.query(S)
    return point

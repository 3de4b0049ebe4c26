"""Randomized round-and-condition rounding of lifted LCST solutions.

The recursion visits a node ``u`` with a set of labels that must be served
below it. For each such label (in sorted order) one child is drawn with
probability ``x(child, label)`` and ``x`` is conditioned on that event. Then
every child (in sorted order) is entered with probability ``x(child)`` on
``x`` conditioned on the child; all children condition the same post-loop
``x``.

Randomness comes from ``random.Random(seed)`` (Mersenne Twister, MT19937).
Every decision consumes exactly one ``getrandbits(64)`` draw ``r``, read as
the dyadic rational ``r / 2**64`` and compared exactly; decisions whose
outcome is certain still consume a draw, so traces line up across inputs.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist

from .errors import RetryCapExhausted, RoundBudgetExhausted, RoundingError
from .lcst import LcstSolution, NormalizedLcst
from .lp.lifted import LiftedSolution, required_rounds
from .lp.program import EventSpace

DRAW_BITS = 64
DRAW_SCALE = 1 << DRAW_BITS
DEFAULT_RETRY_CAP = 64
REPS_CONSTANT = 4


# ------------------------------------------------------------------- stepper


@dataclass(frozen=True)
class Decision:
    """The next random choice: ``kind`` is ``"label"`` or ``"coin"``.

    For a label draw ``options`` lists ``(child, probability)`` over children
    with positive probability; for a coin it is ``((child, probability),)``.
    """

    kind: str
    node: int
    label: int | None
    options: tuple


class RoundingState:
    """Immutable snapshot of the recursion: a stack of frames plus the nodes
    entered so far. ``advance`` returns a new state."""

    __slots__ = ("inst", "space", "frames", "selected", "trace")

    def __init__(self, inst, space, frames, selected, trace):
        self.inst = inst
        self.space = space
        self.frames = frames
        self.selected = selected
        self.trace = trace

    @classmethod
    def start(cls, inst: NormalizedLcst, x: LiftedSolution, space: EventSpace | None = None,
              record: bool = True):
        space = space or EventSpace.of(inst)
        state = cls(inst, space, (), (), [] if record else None)
        return state._enter(inst.root, inst.dem[inst.root], x)

    def _enter(self, u, labels, x):
        inst = self.inst
        if x.value(u) != 1:
            raise RoundingError(f"entered node {u} with x({u}) = {x.value(u)}")
        for ell in sorted(labels):
            if x.value(self.space.pair(u, ell)) != 1:
                raise RoundingError(f"entered node {u} with label {ell} not fixed to 1")
        labels = tuple(sorted(labels))
        trace = self.trace
        if trace is not None:
            trace = trace + [("enter", u, labels)]
        selected = self.selected + (u,)
        frames = self.frames
        if inst.children[u]:
            frames = frames + (("labels", u, x, labels, ()),)
        return RoundingState(inst, self.space, frames, selected, trace)._settle()

    def _settle(self):
        frames = self.frames
        while frames:
            kind, u, x, rest, assigned = frames[-1]
            if rest:
                break
            if kind == "labels":
                frames = frames[:-1] + (("children", u, x, self.inst.children[u], assigned),)
            else:
                frames = frames[:-1]
        if frames is self.frames:
            return self
        return RoundingState(self.inst, self.space, frames, self.selected, self.trace)

    @property
    def done(self):
        return not self.frames

    def x(self):
        """The lifted solution held by the innermost frame."""
        return self.frames[-1][2]

    def next_decision(self) -> Decision | None:
        if not self.frames:
            return None
        kind, u, x, rest, _ = self.frames[-1]
        if kind == "labels":
            ell = rest[0]
            opts = []
            total = Fraction(0)
            for v in self.inst.children[u]:
                p = x.value(self.space.pair(v, ell))
                if p:
                    opts.append((v, p))
                    total += p
            if total != 1:
                raise RoundingError(
                    f"child probabilities for label {ell} at node {u} sum to {total}, not 1"
                )
            return Decision("label", u, ell, tuple(opts))
        v = rest[0]
        return Decision("coin", u, None, ((v, x.value(v)),))

    def advance(self, outcome) -> "RoundingState":
        """Apply ``outcome``: a child id for a label draw, a bool for a coin."""
        kind, u, x, rest, assigned = self.frames[-1]
        base = self.frames[:-1]
        if kind == "labels":
            ell, v = rest[0], outcome
            trace = self.trace + [("label", u, ell, v)] if self.trace is not None else None
            x2 = x.condition(self.space.pair(v, ell))
            frame = ("labels", u, x2, rest[1:], assigned + ((v, ell),))
            return RoundingState(self.inst, self.space, base + (frame,), self.selected,
                                 trace)._settle()
        v = rest[0]
        trace = self.trace + [("coin", u, v, int(bool(outcome)))] if self.trace is not None else None
        frame = ("children", u, x, rest[1:], assigned)
        state = RoundingState(self.inst, self.space, base + (frame,), self.selected, trace)
        if not outcome:
            return state._settle()
        labels = {ell for w, ell in assigned if w == v} | self.inst.dem[v]
        return state._enter(v, labels, x.condition(v))


def _draw(rng: random.Random) -> Fraction:
    return Fraction(rng.getrandbits(DRAW_BITS), DRAW_SCALE)


def _pick(decision: Decision, r: Fraction):
    if decision.kind == "coin":
        return r < decision.options[0][1]
    acc = Fraction(0)
    for v, p in decision.options:
        acc += p
        if r < acc:
            return v
    raise AssertionError("cumulative probabilities reached 1 without a pick")


# ---------------------------------------------------------------- single run


@dataclass(frozen=True)
class RoundingRun:
    seed: int
    trace: tuple
    solution: LcstSolution

    def export_trace(self) -> str:
        lines = []
        for step in self.trace:
            if step[0] == "enter":
                lines.append(f"enter {step[1]} " + (",".join(map(str, step[2])) or "-"))
            elif step[0] == "label":
                lines.append(f"label {step[1]} {step[2]} {step[3]}")
            else:
                lines.append(f"coin {step[1]} {step[2]} {step[3]}")
        return "\n".join(lines) + "\n"


def check_start(inst: NormalizedLcst, x: LiftedSolution, space: EventSpace, check_rounds=True):
    """Raise :class:`RoundingError` naming the first unmet starting condition."""
    if check_rounds and x.rounds < required_rounds(inst.s, inst.height):
        raise RoundBudgetExhausted(
            f"lifted solution has {x.rounds} levels, rounding needs "
            f"{required_rounds(inst.s, inst.height)}"
        )
    if x.value(inst.root) != 1:
        raise RoundingError("root value is not 1")
    for ell in sorted(inst.dem[inst.root] | inst.globals):
        if x.value(space.pair(inst.root, ell)) != 1:
            raise RoundingError(f"root value for label {ell} is not 1")


def round_once(inst: NormalizedLcst, x: LiftedSolution, seed: int, *, space=None,
               record: bool = True, check_rounds: bool = True) -> RoundingRun:
    """One run of the recursive rounding from the root."""
    space = space or EventSpace.of(inst)
    check_start(inst, x, space, check_rounds)
    rng = random.Random(seed)
    state = RoundingState.start(inst, x, space, record)
    while True:
        dec = state.next_decision()
        if dec is None:
            break
        state = state.advance(_pick(dec, _draw(rng)))
    return RoundingRun(seed, tuple(state.trace or ()), inst.solution(state.selected))


# ------------------------------------------------------------ union wrapper


def default_reps(h: int, k: int) -> int:
    if k == 0:
        return 1
    return math.ceil(REPS_CONSTANT * (h + 1) * math.log(max(2, 2 * k)))


def _factory(x_factory):
    if isinstance(x_factory, LiftedSolution):
        return lambda: x_factory
    return x_factory


@dataclass(frozen=True)
class UnionReport:
    solution: LcstSolution
    reps: int
    batches: int
    run_seeds: tuple


def served_labels(inst: NormalizedLcst, nodes) -> set:
    return {inst.a[v] for v in nodes if v in inst.a and not inst.children[v]}


def solve_lcst_report(inst: NormalizedLcst, x_factory, seed: int, reps: int | None = None,
                      retry_cap: int = DEFAULT_RETRY_CAP, check_rounds: bool = True
                      ) -> UnionReport:
    """Union of ``reps`` independent runs, retried until every global is served."""
    make = _factory(x_factory)
    reps = default_reps(inst.height, len(inst.globals)) if reps is None else reps
    if reps < 1:
        raise ValueError("reps must be positive")
    space = EventSpace.of(inst)
    rng = random.Random(seed)
    seeds = []
    missing = set(inst.globals)
    for batch in range(1, retry_cap + 1):
        union = set()
        for _ in range(reps):
            s = rng.getrandbits(DRAW_BITS)
            seeds.append(s)
            run = round_once(inst, make(), s, space=space, record=False,
                             check_rounds=check_rounds)
            union |= run.solution.nodes
        missing = inst.globals - served_labels(inst, union)
        if not missing:
            return UnionReport(inst.solution(union), reps, batch, tuple(seeds))
    raise RetryCapExhausted(
        f"globals {sorted(missing)} uncovered after {retry_cap} batches of {reps} runs",
        uncovered=sorted(missing),
    )


def solve_lcst(inst: NormalizedLcst, x_factory, seed: int, reps: int | None = None,
               retry_cap: int = DEFAULT_RETRY_CAP, check_rounds: bool = True) -> LcstSolution:
    return solve_lcst_report(inst, x_factory, seed, reps, retry_cap, check_rounds).solution


# ---------------------------------------------------------------- statistics


def z_value(confidence: float, families: int = 1) -> float:
    """Two-sided normal quantile with a Bonferroni split over ``families``."""
    alpha = (1 - confidence) / families
    return NormalDist().inv_cdf(1 - alpha / 2)


def wilson_interval(successes: int, trials: int, z: float):
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    # exact endpoints at the extremes, where rounding can miss 0 or 1
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass
class CoverageStats:
    """Counts gathered over independent runs.

    ``node_hits[v]`` counts runs that selected ``v``. For each global label,
    ``t_sum`` and ``t_sq`` accumulate the number of selected leaves serving
    it (and its square) and ``covered`` counts runs where it was positive.
    """

    trials: int
    node_hits: list
    labels: tuple
    t_sum: dict = field(default_factory=dict)
    t_sq: dict = field(default_factory=dict)
    covered: dict = field(default_factory=dict)

    def marginal(self, v) -> Fraction:
        return Fraction(self.node_hits[v], self.trials)

    def mean_t(self, ell) -> float:
        return self.t_sum[ell] / self.trials

    def sd_t(self, ell) -> float:
        n = self.trials
        if n < 2:
            return 0.0
        mean = self.t_sum[ell] / n
        return math.sqrt(max(0.0, (self.t_sq[ell] - n * mean * mean) / (n - 1)))

    def cond_mean_t(self, ell):
        c = self.covered[ell]
        return self.t_sum[ell] / c if c else float("nan")

    def cond_sd_t(self, ell) -> float:
        c = self.covered[ell]
        if c < 2:
            return 0.0
        mean = self.t_sum[ell] / c
        return math.sqrt(max(0.0, (self.t_sq[ell] - c * mean * mean) / (c - 1)))

    def coverage_interval(self, ell, z: float):
        return wilson_interval(self.covered[ell], self.trials, z)

    def node_interval(self, v, z: float):
        return wilson_interval(self.node_hits[v], self.trials, z)

    def to_csv(self, confidence: float = 0.99) -> str:
        z = z_value(confidence)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "trials", "covered", "mean_t", "cond_mean_t", "wilson_lo",
                    "wilson_hi"])
        for ell in self.labels:
            lo, hi = self.coverage_interval(ell, z)
            w.writerow([ell, self.trials, self.covered[ell], f"{self.mean_t(ell):.6f}",
                        f"{self.cond_mean_t(ell):.6f}", f"{lo:.6f}", f"{hi:.6f}"])
        return buf.getvalue()


def estimate_marginals(inst: NormalizedLcst, x_factory, trials: int, seed: int = 0,
                       check_rounds: bool = False) -> CoverageStats:
    """Empirical node marginals and per-global serving counts over ``trials`` runs."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    make = _factory(x_factory)
    space = EventSpace.of(inst)
    labels = tuple(sorted(inst.globals))
    stats = CoverageStats(trials, [0] * len(inst), labels,
                          {ell: 0 for ell in labels}, {ell: 0 for ell in labels},
                          {ell: 0 for ell in labels})
    rng = random.Random(seed)
    for _ in range(trials):
        run = round_once(inst, make(), rng.getrandbits(DRAW_BITS), space=space, record=False,
                         check_rounds=check_rounds)
        counts = {ell: 0 for ell in labels}
        for v in run.solution.nodes:
            stats.node_hits[v] += 1
            if v in inst.a and not inst.children[v] and inst.a[v] in counts:
                counts[inst.a[v]] += 1
        for ell, t in counts.items():
            stats.t_sum[ell] += t
            stats.t_sq[ell] += t * t
            if t:
                stats.covered[ell] += 1
    return stats


# ------------------------------------------------------- exact martingale


@dataclass(frozen=True)
class MartingaleReport:
    states: int
    checks: int
    failures: tuple

    @property
    def ok(self):
        return not self.failures


def check_martingale(inst: NormalizedLcst, x: LiftedSolution, depth: int = 3) -> MartingaleReport:
    """Exhaustively verify that expected next values equal current values.

    Every state reachable within ``depth`` decisions is visited. Before a
    label draw, every event must keep its value in expectation; before a
    coin for child ``v``, every event inside the subtree of ``v`` must, where
    a child that is not entered contributes 0.
    """
    space = EventSpace.of(inst)
    all_events = range(len(space))
    inside = {v: space.inside(inst.subtree(v)) for v in range(len(inst))}
    failures, counters = [], [0, 0]

    def visit(state: RoundingState, d: int):
        dec = state.next_decision()
        if dec is None:
            return
        counters[0] += 1
        x = state.x()
        if dec.kind == "label":
            branches = [(p, x.condition(space.pair(v, dec.label))) for v, p in dec.options]
            events = all_events
        else:
            v, p = dec.options[0]
            branches = [(p, x.condition(v))] if p else []
            events = inside[v]
        for e in events:
            counters[1] += 1
            expected = sum((p * y.value(e) for p, y in branches), Fraction(0))
            if expected != x.value(e):
                failures.append((dec.kind, dec.node, dec.label, e, x.value(e), expected))
        if d >= depth:
            return
        if dec.kind == "label":
            for v, _ in dec.options:
                visit(state.advance(v), d + 1)
        else:
            p = dec.options[0][1]
            if p > 0:
                visit(state.advance(True), d + 1)
            if p < 1:
                visit(state.advance(False), d + 1)

    visit(RoundingState.start(inst, x, space, record=False), 0)
    return MartingaleReport(counters[0], counters[1], tuple(failures))


def expected_cost(inst: NormalizedLcst, x: LiftedSolution) -> Fraction:
    """``sum_v c_v x(v)``: the relaxation value carried by ``x``."""
    return sum((inst.cost[v] * x.value(v) for v in range(len(inst))), Fraction(0))


__all__ = [
    "CoverageStats",
    "Decision",
    "MartingaleReport",
    "RoundingRun",
    "RoundingState",
    "UnionReport",
    "check_martingale",
    "default_reps",
    "estimate_marginals",
    "expected_cost",
    "round_once",
    "solve_lcst",
    "solve_lcst_report",
    "wilson_interval",
]

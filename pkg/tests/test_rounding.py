import math
from fractions import Fraction

import pytest

from dstq.errors import RetryCapExhausted, RoundBudgetExhausted, RoundingError
from dstq.lcst import NormalizedLcst, validate_label_consistent
from dstq.lp.lifted import DistributionBacked, LiftedSolution, SaLpSolution, distribution_backed, point_mass
from dstq.lp.program import build_base_lp, lift
from dstq.lp.simplex import solve_lp
from dstq.rounding import (
    RoundingState,
    check_martingale,
    default_reps,
    estimate_marginals,
    expected_cost,
    round_once,
    solve_lcst,
    solve_lcst_report,
    wilson_interval,
    z_value,
)

from fixtures import rounding_fixture, rounding_fixtures


def two_leaf():
    """root demands local 5, served by leaf 1 (cost 1) or leaf 2 (cost 2); leaf 3 serves global 0."""
    return NormalizedLcst([None, 0, 0, 0], [0, 1, 2, 1], [{5}, set(), set(), set()],
                          [set(), {5}, {5}, {0}], [0], range(4), {0: 0, 5: 5})


T1, T2 = frozenset({0, 1, 3}), frozenset({0, 2, 3})


def exact_outcomes(inst, x):
    """Exact distribution of the selected node set, by enumerating every decision."""
    out = {}

    def walk(state, prob):
        dec = state.next_decision()
        if dec is None:
            key = frozenset(state.selected)
            out[key] = out.get(key, Fraction(0)) + prob
            return
        if dec.kind == "label":
            for v, p in dec.options:
                walk(state.advance(v), prob * p)
        else:
            p = dec.options[0][1]
            if p > 0:
                walk(state.advance(True), prob * p)
            if p < 1:
                walk(state.advance(False), prob * (1 - p))

    walk(RoundingState.start(inst, x, record=False), Fraction(1))
    return out


def test_point_mass_reproduces_tree():
    inst = two_leaf()
    for seed in range(20):
        assert round_once(inst, point_mass(inst, T2), seed).solution.nodes == T2


def test_half_half_frequencies():
    inst = two_leaf()
    x = distribution_backed(inst, [(T1, Fraction(1, 2)), (T2, Fraction(1, 2))])
    hits = sum(round_once(inst, x, seed, record=False).solution.nodes == T1 for seed in range(2000))
    outs = {round_once(inst, x, seed, record=False).solution.nodes for seed in range(50)}
    assert outs == {T1, T2}
    assert abs(hits - 1000) <= 3 * math.sqrt(2000 * 0.25)


def test_trace_replays():
    inst, x, _ = rounding_fixture(3)
    a, b = round_once(inst, x, 99), round_once(inst, x, 99)
    assert a.export_trace() == b.export_trace() and a.solution == b.solution
    assert a.export_trace().startswith(f"enter {inst.root} ")


def test_trace_format():
    inst = two_leaf()
    x = distribution_backed(inst, [(T1, Fraction(1, 2)), (T2, Fraction(1, 2))])
    lines = round_once(inst, x, 0).export_trace().splitlines()
    assert lines[0] == "enter 0 5"
    assert lines[1] in ("label 0 5 1", "label 0 5 2")
    assert [ln.split()[0] for ln in lines[2:]].count("coin") == 3


def test_exact_marginals_and_t_on_fixtures():
    for seed in range(8):
        inst, x, _ = rounding_fixture(seed, max_nodes=16, size=3)
        dist = exact_outcomes(inst, x)
        assert sum(dist.values()) == 1
        for nodes in dist:
            assert validate_label_consistent(inst, inst.solution(nodes))
        for v in range(len(inst)):
            assert sum((p for s, p in dist.items() if v in s), Fraction(0)) == x.value(v)
        for ell in inst.globals:
            mean_t = sum((p * sum(1 for w in s if inst.a.get(w) == ell and not inst.children[w])
                          for s, p in dist.items()), Fraction(0))
            assert mean_t == 1


def test_sa_backed_rounding_matches_marginals():
    inst = two_leaf()
    lp = build_base_lp(inst, restrict=True)
    rounds = 3  # one label draw and one child conditioning, then a leaf query
    x = SaLpSolution(solve_lp(lift(lp, rounds)).x, rounds)
    dist = exact_outcomes(inst, x)
    for v in range(len(inst)):
        assert sum((p for s, p in dist.items() if v in s), Fraction(0)) == x.value(v)


def test_rounds_precondition():
    inst = two_leaf()
    x = SaLpSolution(solve_lp(lift(build_base_lp(inst), 2)).x, 2)
    with pytest.raises(RoundBudgetExhausted):
        round_once(inst, x, 0)


class Halved(LiftedSolution):
    """Wrapper that lies about the root."""

    rounds = math.inf

    def __init__(self, inner):
        self.inner = inner

    def query(self, events):
        return self.inner.query(events) / 2

    def condition(self, e):
        return self.inner.condition(e)


class Skewed(LiftedSolution):
    """Conditioning ignores the event and collapses onto the first support point."""

    rounds = math.inf

    def __init__(self, inner: DistributionBacked):
        self.inner = inner

    def query(self, events):
        return self.inner.query(events)

    def condition(self, e):
        inner = self.inner
        return DistributionBacked(inner.bits[:1].copy(), inner.weights[:1].copy(),
                                  int(inner.weights[0]), inner.n_events)


def test_precondition_violation_is_reported():
    inst = two_leaf()
    with pytest.raises(RoundingError, match="root"):
        round_once(inst, Halved(point_mass(inst, T1)), 0)


def test_martingale_holds_and_detects_skew():
    inst = two_leaf()
    x = distribution_backed(inst, [(T1, Fraction(1, 3)), (T2, Fraction(2, 3))])
    report = check_martingale(inst, x, depth=3)
    assert report.ok and report.checks > 0
    assert not check_martingale(inst, Skewed(x), depth=3).ok


def test_solve_lcst_point_mass_one_batch():
    inst = two_leaf()
    rep = solve_lcst_report(inst, point_mass(inst, T1), 5)
    assert rep.batches == 1 and rep.solution.nodes == T1
    assert rep.reps == default_reps(inst.height, 1)


def test_no_globals_single_run():
    inst = NormalizedLcst([None, 0, 0], [0, 1, 2], [{5}, set(), set()], [set(), {5}, {5}],
                          [], range(3), {5: 5})
    x = distribution_backed(inst, [({0, 1}, Fraction(1, 2)), ({0, 2}, Fraction(1, 2))])
    rep = solve_lcst_report(inst, x, 1)
    assert rep.reps == 1 and rep.batches == 1
    assert validate_label_consistent(inst, rep.solution)


def test_default_reps_formula():
    assert default_reps(1, 2) == math.ceil(4 * 2 * math.log(4))
    assert default_reps(3, 0) == 1
    assert default_reps(0, 1) == math.ceil(4 * math.log(2))


def test_retry_cap_reports_uncovered():
    found = False
    for seed in range(40):
        inst, x, _ = rounding_fixture(seed, max_nodes=30, size=4)
        try:
            solve_lcst(inst, x, seed, reps=1, retry_cap=1)
        except RetryCapExhausted as exc:
            assert exc.uncovered and set(exc.uncovered) <= inst.globals
            found = True
            break
    assert found


def test_union_is_label_consistent_and_covers():
    for inst, x, _ in rounding_fixtures(6, max_nodes=30):
        sol = solve_lcst(inst, x, 7)
        assert validate_label_consistent(inst, sol)
        served = {inst.a[v] for v in sol.nodes if v in inst.a and not inst.children[v]}
        assert inst.globals <= served


def test_expected_cost_bound():
    inst, x, _ = rounding_fixture(2, max_nodes=30)
    reps = default_reps(inst.height, len(inst.globals))
    costs = [float(solve_lcst(inst, x, seed, reps=reps).cost) for seed in range(100)]
    assert sum(costs) / len(costs) <= reps * float(expected_cost(inst, x))
    single = [float(round_once(inst, x, s, record=False).solution.cost) for s in range(500)]
    mean = sum(single) / len(single)
    sd = math.sqrt(sum((c - mean) ** 2 for c in single) / (len(single) - 1))
    assert abs(mean - float(expected_cost(inst, x))) <= 3 * sd / math.sqrt(len(single)) + 1e-9


def test_wilson_interval_values():
    lo, hi = wilson_interval(0, 10, 1.96)
    assert lo == 0 and abs(hi - 1.96**2 / 10 / (1 + 1.96**2 / 10)) < 1e-12
    lo, hi = wilson_interval(50, 100, 1.96)
    assert abs(lo - 0.4038298) < 1e-7 and abs(hi - 0.5961702) < 1e-7
    assert abs(z_value(0.95) - 1.959964) < 1e-6
    assert z_value(0.99, families=10) > z_value(0.99)


def test_stats_csv_shape():
    inst, x, _ = rounding_fixture(1, max_nodes=20)
    stats = estimate_marginals(inst, x, 200, seed=3)
    lines = stats.to_csv().splitlines()
    assert lines[0] == "label,trials,covered,mean_t,cond_mean_t,wilson_lo,wilson_hi"
    assert len(lines) == 1 + len(inst.globals)
    assert all(len(ln.split(",")) == 7 for ln in lines[1:])
    assert stats.to_csv() == estimate_marginals(inst, x, 200, seed=3).to_csv()


def test_estimate_needs_trials():
    inst, x, _ = rounding_fixture(1, max_nodes=20)
    with pytest.raises(ValueError):
        estimate_marginals(inst, x, 0)


@pytest.mark.parametrize("z", [1.0, 2.576, 3.1, 3.7, 4.2])
def test_wilson_interval_exact_at_extremes(z):
    assert wilson_interval(10_000, 10_000, z)[1] == 1.0
    assert wilson_interval(0, 10_000, z)[0] == 0.0

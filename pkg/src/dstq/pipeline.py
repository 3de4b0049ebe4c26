"""End-to-end orchestration: DST instance in, validated Steiner tree out."""

from __future__ import annotations

import csv
import io
import random
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .decomp import RootedTree, build_decomposition_tree, decomposition_to_steiner
from .errors import (
    CapExceeded,
    DstqError,
    EmbeddingError,
    InfeasibleError,
    StageError,
)
from .graph import (
    DstInstance,
    SteinerSolution,
    expand_to_original,
    format_rational,
    metric_closure,
    parse_dst,
    prune_to_arborescence,
    validate_solution,
)
from .lcst import (
    LcstInstance,
    parse_lcst,
    NormalizedLcst,
    exact_lcst,
    normalize,
    prune_useless,
    restrict,
)
from .lp.lifted import (
    LiftedSolution,
    SaLpSolution,
    distribution_backed,
    integral_point,
    required_rounds,
)
from .lp.program import build_base_lp, lift
from .lp.simplex import solve_lp
from .oracle import DEFAULT_TERMINAL_CAP, canonical_optimum_tree, exact_opt
from .generators import random_feasible_solution
from .reduction import (
    DEFAULT_MAX_NODES,
    DEFAULT_MAX_TWIGS,
    build_label_tree,
    choose_params,
    embed_optimal,
    lcst_to_decomposition,
    twig_forest,
)
from .rounding import (
    DEFAULT_RETRY_CAP,
    CoverageStats,
    estimate_marginals,
    expected_cost,
    solve_lcst_report,
)

MODES = ("exact", "approx", "lp-bound", "lcst", "stats", "bench")
BACKENDS = ("sa-lp", "dist")
DEFAULT_MAX_LP_VARS = 4000
# exact LCST optimum used to seed the distribution oracle when no embedding exists
DEFAULT_SEED_DP_NODES = 5000


@dataclass
class PipelineConfig:
    mode: str = "approx"
    seed: int = 0
    g: int | None = None
    depth: int | None = None
    max_nodes: int = DEFAULT_MAX_NODES
    max_twigs: int = DEFAULT_MAX_TWIGS
    max_lp_vars: int = DEFAULT_MAX_LP_VARS
    rounds: int | None = None
    reps: int | None = None
    retry_cap: int = DEFAULT_RETRY_CAP
    backend: str = "dist"
    perturb: int = 0
    trials: int = 1000
    oracle_cap: int = DEFAULT_TERMINAL_CAP
    csv_path: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        for name in ("max_nodes", "max_twigs", "max_lp_vars", "retry_cap", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.reps is not None and self.reps < 1:
            raise ValueError("reps must be positive")
        if self.perturb < 0:
            raise ValueError("perturb must be nonnegative")


@dataclass
class RunReport:
    n: int = 0
    m: int = 0
    k: int = 0
    params: dict = field(default_factory=dict)
    label_tree_nodes: int | None = None
    lcst_nodes: int | None = None
    lp_objective: Fraction | None = None
    cost: Fraction | None = None
    opt: Fraction | None = None
    ratio: Fraction | None = None
    reps: int | None = None
    batches: int | None = None
    backend: str = ""
    seed: int = 0
    wall_time: float = 0.0

    def finish(self):
        if self.cost is not None and self.opt is not None:
            self.ratio = self.cost / self.opt if self.opt else Fraction(1)
            if self.ratio < 1:
                raise AssertionError(f"cost {self.cost} below optimum {self.opt}")
        return self

    def as_text(self) -> str:
        lines = []
        for key, val in asdict(self).items():
            if key == "params":
                val = " ".join(f"{k}={v}" for k, v in sorted(val.items())) or "-"
            elif isinstance(val, Fraction):
                val = format_rational(val)
            elif key == "wall_time":
                val = f"{val:.3f}s"
            lines.append(f"{key}: {'-' if val is None else val}")
        return "\n".join(lines) + "\n"


@contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except DstqError as exc:
        raise StageError(name, exc) from exc


# ------------------------------------------------------------- reduction


@dataclass
class Reduced:
    """Everything the later stages need from the reduction."""

    closed: DstInstance
    closure: object
    tree: object
    raw: LcstInstance
    paths: list
    inst: NormalizedLcst


def reduce_instance(inst: DstInstance, config: PipelineConfig, report: RunReport) -> Reduced:
    with stage("closure"):
        closed, mc = metric_closure(inst)
    with stage("params"):
        params = choose_params(max(1, inst.k), config.g, config.depth,
                               max_nodes=config.max_nodes, max_twigs=config.max_twigs)
        report.params = params.as_dict()
    with stage("label-tree"):
        tree = build_label_tree(closed, params)
        raw, paths = tree.materialize()
        report.label_tree_nodes = len(raw)
    with stage("normalize"):
        norm = normalize(raw)
        pruned, feasible = prune_useless(norm)
        if not feasible:
            raise InfeasibleError("label tree serves no feasible subtree under these parameters")
        report.lcst_nodes = len(pruned)
    return Reduced(closed, mc, tree, raw, paths, pruned)


def trim_duplicate_leaves(inst: NormalizedLcst, nodes) -> frozenset:
    """Drop selected leaves whose label another kept leaf already provides.

    For a local label the kept leaf is the first one (in preorder) below its
    demanding node; for a global label it is the first one overall.
    """
    nodes = set(nodes)
    demander = {}
    for u in nodes:
        for ell in inst.dem[u]:
            demander[ell] = u
    by_label = {}
    for v in inst.order:
        if v in nodes and v in inst.a and not inst.children[v]:
            by_label.setdefault(inst.a[v], []).append(v)
    for ell, leaves in by_label.items():
        if len(leaves) < 2:
            continue
        keep = leaves[0]
        if ell in demander:
            below = set(inst.subtree(demander[ell]))
            keep = next(v for v in leaves if v in below)
        nodes.difference_update(v for v in leaves if v != keep)
    return frozenset(nodes)


def embedded_support(red: Reduced, cap: int) -> frozenset:
    """Optimal LCST nodes inside the image of the embedded optimum.

    Normalization may swap an embedded leaf for an equally useful cheaper
    sibling and adds zero-cost service leaves, so the image is widened by
    all leaf children of mapped nodes before taking the exact optimum there.
    """
    inst = red.inst
    tau = build_decomposition_tree(
        RootedTree.from_edges(red.closed.root, canonical_optimum_tree(red.closed, cap).edges)
    )
    forest = twig_forest(tau, red.tree.params.g)
    chosen = embed_optimal(red.tree, forest)
    raw_index = {p: i for i, p in enumerate(red.paths)}
    to_norm = {o: j for j, o in enumerate(inst.origin) if o is not None}
    mapped = {to_norm[raw_index[p]] for p in chosen if raw_index[p] in to_norm}
    allowed = set(mapped)
    for v in mapped:
        allowed.update(c for c in inst.children[v] if not inst.children[c])
    order = [v for v in inst.order if v in allowed]
    sub = restrict(inst, allowed)
    _, sol = exact_lcst(sub)
    return trim_duplicate_leaves(inst, {order[j] for j in sol.nodes})


def optimal_support(inst: NormalizedLcst) -> frozenset:
    if len(inst) > DEFAULT_SEED_DP_NODES:
        raise CapExceeded(f"{len(inst)} nodes exceed the seeding cap", len(inst))
    _, sol = exact_lcst(inst)
    return trim_duplicate_leaves(inst, sol.nodes)


def distribution_oracle(red_inst: NormalizedLcst, seed_nodes, config: PipelineConfig):
    """Point mass on ``seed_nodes``, optionally mixed with random feasible subtrees."""
    support = [(seed_nodes, Fraction(1))]
    if config.perturb:
        rng = random.Random(config.seed)
        extra = [random_feasible_solution(red_inst, rng) for _ in range(config.perturb)]
        share = Fraction(1, 4 * config.perturb)
        support = [(seed_nodes, Fraction(3, 4))] + [(e, share) for e in extra]
    return distribution_backed(red_inst, support)


def sa_lp_oracle(inst: NormalizedLcst, config: PipelineConfig):
    """Optimal lifted point of the relaxation, or a point mass when the base
    optimum is already integral (it then lies in every lifting level)."""
    lp = build_base_lp(inst, restrict=True)
    if lp.n_vars > config.max_lp_vars:
        raise CapExceeded(
            f"base LP has {lp.n_vars} variables (budget {config.max_lp_vars})", lp.n_vars
        )
    res = solve_lp(lp)
    if all(v in (0, 1) for v in res.x.values()):
        nodes = frozenset(v for v in range(len(inst)) if res.x[v] == 1)
        if integral_point(inst, lp, nodes) == res.x:
            return distribution_backed(inst, [(nodes, Fraction(1))], lp), res.objective
    rounds = config.rounds or required_rounds(inst.s, inst.height)
    lifted = lift(lp, rounds, max_vars=config.max_lp_vars)
    res = solve_lp(lifted)
    return SaLpSolution(res.x, rounds), res.objective


def build_oracle(red: Reduced, config: PipelineConfig, report: RunReport) -> LiftedSolution:
    inst = red.inst
    if config.backend == "sa-lp":
        with stage("lp"):
            x, obj = sa_lp_oracle(inst, config)
            report.lp_objective = obj
        return x
    with stage("oracle"):
        try:
            nodes = embedded_support(red, config.oracle_cap)
        except EmbeddingError:
            nodes = optimal_support(inst)
        x = distribution_oracle(inst, nodes, config)
        report.lp_objective = expected_cost(inst, x)
    return x


def run_approx(inst: DstInstance, config: PipelineConfig):
    """Reduce, build the lifted oracle, round, and map back to a Steiner tree."""
    start = time.perf_counter()
    report = RunReport(n=inst.n, m=inst.m, k=inst.k, backend=config.backend, seed=config.seed)
    if inst.k == 0:
        report.cost = report.opt = Fraction(0)
        report.wall_time = time.perf_counter() - start
        return SteinerSolution(frozenset(), Fraction(0)), report.finish()
    red = reduce_instance(inst, config, report)
    x = build_oracle(red, config, report)
    with stage("rounding"):
        union = solve_lcst_report(red.inst, x, config.seed, config.reps, config.retry_cap,
                                  check_rounds=config.backend == "sa-lp")
        report.reps, report.batches = union.reps, union.batches
    with stage("back-map"):
        raw_sol = red.inst.to_original(union.solution, red.raw)
        tau = lcst_to_decomposition(red.tree, [red.paths[i] for i in sorted(raw_sol.nodes)])
        closure_sol = decomposition_to_steiner(tau, red.closed)
        sol = expand_to_original(inst, red.closure, closure_sol)
        report.cost = validate_solution(inst, sol)
    if inst.k <= config.oracle_cap:
        with stage("oracle"):
            report.opt = exact_opt(inst, config.oracle_cap).opt
    report.wall_time = time.perf_counter() - start
    return sol, report.finish()


def run_lp_bound(inst: DstInstance, config: PipelineConfig) -> Fraction:
    """Base relaxation value of the reduced instance; a lower bound on opt."""
    report = RunReport(n=inst.n, m=inst.m, k=inst.k)
    red = reduce_instance(inst, config, report)
    with stage("lp"):
        lp = build_base_lp(red.inst, restrict=True)
        if lp.n_vars > config.max_lp_vars:
            raise CapExceeded(
                f"base LP has {lp.n_vars} variables (budget {config.max_lp_vars})", lp.n_vars
            )
        return solve_lp(lp).objective


def load_lcst(text: str, config: PipelineConfig, report: RunReport) -> NormalizedLcst:
    """Normalized, pruned LCST from either an ``lcst`` file or a DST file."""
    if text.lstrip().startswith("lcst"):
        with stage("parse"):
            raw = parse_lcst(text)
        with stage("normalize"):
            pruned, feasible = prune_useless(normalize(raw))
            if not feasible:
                raise InfeasibleError("instance has no label-consistent subtree")
            report.lcst_nodes = len(pruned)
        return pruned
    with stage("parse"):
        inst = parse_dst(text)
    report.n, report.m, report.k = inst.n, inst.m, inst.k
    return reduce_instance(inst, config, report).inst


def lcst_oracle(inst: NormalizedLcst, config: PipelineConfig, report: RunReport):
    if config.backend == "sa-lp":
        with stage("lp"):
            x, report.lp_objective = sa_lp_oracle(inst, config)
        return x
    with stage("oracle"):
        x = distribution_oracle(inst, optimal_support(inst), config)
        report.lp_objective = expected_cost(inst, x)
    return x


def run_lcst_direct(text: str, config: PipelineConfig):
    """Round an LCST instance directly; ``opt`` is its exact optimum."""
    start = time.perf_counter()
    report = RunReport(backend=config.backend, seed=config.seed)
    inst = load_lcst(text, config, report)
    x = lcst_oracle(inst, config, report)
    with stage("rounding"):
        union = solve_lcst_report(inst, x, config.seed, config.reps, config.retry_cap,
                                  check_rounds=config.backend == "sa-lp")
        report.reps, report.batches = union.reps, union.batches
        report.cost = union.solution.cost
    if len(inst) <= DEFAULT_SEED_DP_NODES:
        report.opt, _ = exact_lcst(inst)
    report.wall_time = time.perf_counter() - start
    return union.solution, report.finish()


def run_stats(text: str, config: PipelineConfig) -> CoverageStats:
    """Coverage statistics of ``config.trials`` independent rounding runs."""
    report = RunReport(backend=config.backend, seed=config.seed)
    inst = load_lcst(text, config, report)
    x = lcst_oracle(inst, config, report)
    with stage("rounding"):
        return estimate_marginals(inst, x, config.trials, config.seed)


def baseline_shortest_paths(inst: DstInstance) -> SteinerSolution:
    """Union of shortest root-terminal paths, pruned to an arborescence."""
    _, mc = metric_closure(inst)
    edges = set()
    for t in sorted(inst.terminals):
        path = mc.path(inst.root, t)
        edges.update(zip(path, path[1:]))
    return prune_to_arborescence(inst, SteinerSolution.of(inst, edges))


# --------------------------------------------------------------------- bench

BENCH_COLUMNS = (
    "instance", "mode", "seed", "backend", "n", "m", "k", "g", "depth", "label_tree_nodes",
    "lcst_nodes", "lp_objective", "cost", "opt", "ratio", "baseline_cost", "reps", "batches",
    "status",
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return format_rational(v)
    return str(v)


def bench(corpus, config: PipelineConfig, seeds=None) -> str:
    """CSV with one row per (instance, seed); failures become status rows."""
    files = sorted(Path(corpus).glob("*.dst")) if corpus is not None else []
    seeds = [config.seed] if seeds is None else list(seeds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for path in files:
        for seed in seeds:
            row = {"instance": path.name, "mode": "approx", "seed": seed,
                   "backend": config.backend, "status": "ok"}
            try:
                inst = parse_dst(path.read_text())
                row.update(n=inst.n, m=inst.m, k=inst.k)
                row["baseline_cost"] = baseline_shortest_paths(inst).cost
                cfg = PipelineConfig(**{**asdict(config), "seed": seed, "mode": "approx"})
                _, rep = run_approx(inst, cfg)
                row.update(
                    g=rep.params.get("g"), depth=rep.params.get("depth"),
                    label_tree_nodes=rep.label_tree_nodes, lcst_nodes=rep.lcst_nodes,
                    lp_objective=rep.lp_objective, cost=rep.cost, opt=rep.opt,
                    ratio=rep.ratio, reps=rep.reps, batches=rep.batches,
                )
            except DstqError as exc:
                row["status"] = f"error:{type(getattr(exc, 'cause', exc)).__name__}"
            w.writerow([_fmt(row.get(c)) for c in BENCH_COLUMNS])
    return buf.getvalue()

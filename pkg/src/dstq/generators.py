"""Seeded random instances for tests, fixtures and benchmarks."""

from __future__ import annotations

import random
from fractions import Fraction

from .decomp import RootedTree
from .graph import DstInstance, metric_closure
from .lcst import LcstInstance, NormalizedLcst, prune_useless


def random_rooted_tree(n: int, rng: random.Random) -> RootedTree:
    """Uniform random recursive tree on ``0..n-1`` with relabelled ids."""
    ids = list(range(n))
    rng.shuffle(ids)
    parent = {ids[i]: ids[rng.randrange(i)] for i in range(1, n)}
    return RootedTree(ids[0], parent)


def random_dst(n: int, m: int, k: int, rng: random.Random, max_cost: int = 5) -> DstInstance:
    """Random digraph with a spanning out-tree from root 0, so every terminal
    is reachable, padded with random extra edges up to ``m`` edges."""
    if not 1 <= k <= n - 1:
        raise ValueError("need 1 <= k <= n - 1")
    edges = {}
    order = list(range(1, n))
    rng.shuffle(order)
    reached = [0]
    for v in order:
        h = rng.choice(reached)
        edges[(h, v)] = rng.randint(1, max_cost)
        reached.append(v)
    pairs = [(h, t) for h in range(n) for t in range(n) if h != t and (h, t) not in edges]
    rng.shuffle(pairs)
    for h, t in pairs[: max(0, m - len(edges))]:
        edges[(h, t)] = rng.randint(0, max_cost)
    terminals = frozenset(rng.sample(range(1, n), k))
    return DstInstance(n, tuple((h, t, c) for (h, t), c in edges.items()), 0, terminals)


def random_metric_dst(n: int, k: int, rng: random.Random, density: float = 0.5) -> DstInstance:
    """Metric closure of a random reachable digraph."""
    m = max(n - 1, int(density * n * (n - 1)))
    closed, _ = metric_closure(random_dst(n, m, k, rng))
    return closed


def random_lcst(n: int, rng: random.Random, n_labels: int = 4, k: int = 1,
                p_dem: float = 0.3, p_ser: float = 0.4, max_cost: int = 5) -> LcstInstance:
    """Unnormalized instance: labels ``0..k-1`` are global, the rest local."""
    parent = [None] + [rng.randrange(v) for v in range(1, n)]
    locals_ = list(range(k, n_labels))
    dem, ser = [], []
    for v in range(n):
        dem.append({ell for ell in locals_ if rng.random() < p_dem / max(1, len(locals_))})
        ser.append({ell for ell in range(n_labels) if rng.random() < p_ser / n_labels * 2})
    cost = [rng.randint(0, max_cost) for _ in range(n)]
    return LcstInstance(parent, cost, dem, ser, range(k))


def random_normalized_lcst(rng: random.Random, max_nodes: int = 40, height: int = 3,
                           s: int = 2, k: int = 2, branching: int = 3,
                           max_cost: int = 5, attempts: int = 200) -> NormalizedLcst:
    """Feasible normalized instance of height at most ``height``.

    Internal nodes demand up to ``s`` fresh local labels each; leaves carry
    one label drawn from the globals and the labels demanded above them.
    """
    for _ in range(attempts):
        parent, depth = [None], [0]
        frontier = [0]
        while frontier and len(parent) < max_nodes:
            u = frontier.pop(0)
            if depth[u] >= height:
                continue
            for _ in range(rng.randint(1, branching)):
                if len(parent) >= max_nodes:
                    break
                parent.append(u)
                depth.append(depth[u] + 1)
                frontier.append(len(parent) - 1)
        n = len(parent)
        kids = [[] for _ in range(n)]
        for v in range(1, n):
            kids[parent[v]].append(v)
        next_label = k
        dem = [set() for _ in range(n)]
        ser = [set() for _ in range(n)]
        above = [set(range(k)) for _ in range(n)]
        for v in range(n):
            if kids[v]:
                for _ in range(rng.randint(0, s)):
                    dem[v].add(next_label)
                    next_label += 1
                for c in kids[v]:
                    above[c] = above[v] | dem[v]
        for v in range(n):
            if not kids[v] and v != 0:
                ser[v] = {rng.choice(sorted(above[v]))}
        cost = [rng.randint(0, max_cost) for _ in range(n)]
        inst = NormalizedLcst(parent, cost, dem, ser, range(k), list(range(n)),
                              {ell: ell for ell in range(next_label)})
        pruned, feasible = prune_useless(inst)
        if feasible and len(pruned) > 1:
            return pruned
    raise RuntimeError("could not generate a feasible instance")


def random_feasible_solution(inst: NormalizedLcst, rng: random.Random,
                             p_extra: float = 0.3) -> frozenset:
    """A feasible subtree with at most one selected leaf per label.

    Each required label is routed down one random path to a leaf serving it;
    internal children are also entered at random, bringing their own demands.
    Assumes ``inst`` has no useless nodes.
    """
    below = {}
    for v in reversed(inst.order):
        if inst.children[v]:
            acc = set()
            for c in inst.children[v]:
                acc |= below[c]
            below[v] = acc
        else:
            below[v] = {inst.a[v]} if v in inst.a else set()
    chosen = set()

    def enter(u, labels):
        chosen.add(u)
        if not inst.children[u]:
            return
        assign = {}
        for ell in sorted(labels):
            options = [c for c in inst.children[u] if ell in below[c]]
            if not options:
                raise ValueError(f"label {ell} cannot be served below {u}")
            assign.setdefault(rng.choice(options), set()).add(ell)
        for c in inst.children[u]:
            if c in assign:
                enter(c, assign[c] | inst.dem[c])
            elif inst.children[c] and rng.random() < p_extra:
                enter(c, set(inst.dem[c]))

    enter(inst.root, set(inst.dem[inst.root]) | set(inst.globals))
    return frozenset(chosen)


def random_distribution(inst: NormalizedLcst, rng: random.Random, size: int = 3,
                        max_weight: int = 5):
    """Support list of up to ``size`` distinct feasible subtrees with random weights."""
    sols = []
    for _ in range(4 * size):
        sol = random_feasible_solution(inst, rng)
        if sol not in sols:
            sols.append(sol)
        if len(sols) == size:
            break
    raw = [rng.randint(1, max_weight) for _ in sols]
    total = sum(raw)
    return [(sol, Fraction(w, total)) for sol, w in zip(sols, raw)]

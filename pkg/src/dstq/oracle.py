"""Exact optimum for tiny directed Steiner tree instances.

Two independent routes: a subset dynamic program over terminal sets and an
exhaustive enumeration of edge subsets. Tests require them to agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .errors import CapExceeded
from .graph import (
    DstInstance,
    SteinerSolution,
    is_arborescence,
    metric_closure,
    prune_to_arborescence,
)

DEFAULT_TERMINAL_CAP = 12


@dataclass(frozen=True)
class OracleResult:
    opt: Fraction
    tree: SteinerSolution


def exact_opt(inst: DstInstance, cap: int = DEFAULT_TERMINAL_CAP) -> OracleResult:
    """Minimum-cost arborescence by dynamic programming over terminal subsets.

    ``best[S][v]`` is the cheapest tree rooted at ``v`` reaching every terminal
    in ``S``; a state either splits ``S`` at ``v`` or walks a shortest path to
    a vertex where it splits.
    """
    if inst.k > cap:
        raise CapExceeded(f"{inst.k} terminals exceeds oracle cap {cap}", reached=inst.k)
    _, mc = metric_closure(inst)
    terms = sorted(inst.terminals)
    if not terms:
        return OracleResult(Fraction(0), SteinerSolution(frozenset(), Fraction(0)))
    n, k = inst.n, len(terms)
    dist = mc.dist
    full = (1 << k) - 1
    best = [None] * (full + 1)
    # how[S][v]: ("path", u) walks v->u then splits at u; ("split", A) splits at v
    how = [None] * (full + 1)
    for i, t in enumerate(terms):
        S = 1 << i
        best[S] = [dist[v][t] for v in range(n)]
        how[S] = [("leaf", t)] * n
    for size in range(2, k + 1):
        for idx in combinations(range(k), size):
            S = sum(1 << i for i in idx)
            split = [None] * n
            split_how = [None] * n
            low = S & -S
            # enumerate proper subsets A containing the lowest bit, so each
            # unordered split is seen once
            A = (S - 1) & S
            while A:
                if A & low:
                    B = S ^ A
                    ba, bb = best[A], best[B]
                    for v in range(n):
                        if ba[v] is None or bb[v] is None:
                            continue
                        c = ba[v] + bb[v]
                        if split[v] is None or c < split[v]:
                            split[v] = c
                            split_how[v] = A
                A = (A - 1) & S
            row, row_how = [None] * n, [None] * n
            for v in range(n):
                dv = dist[v]
                for u in range(n):
                    if dv[u] is None or split[u] is None:
                        continue
                    c = dv[u] + split[u]
                    if row[v] is None or c < row[v]:
                        row[v] = c
                        row_how[v] = (u, split_how[u])
            best[S], how[S] = row, row_how

    root = inst.root
    if best[full][root] is None:
        raise AssertionError("closure reported reachability but DP found none")
    edges = set()

    def add_path(a, b):
        path = mc.path(a, b)
        edges.update(zip(path, path[1:]))

    stack = [(full, root)]
    while stack:
        S, v = stack.pop()
        choice = how[S][v]
        if choice[0] == "leaf":
            add_path(v, choice[1])
            continue
        u, A = choice
        add_path(v, u)
        stack.append((A, u))
        stack.append((S ^ A, u))
    tree = prune_to_arborescence(inst, SteinerSolution.of(inst, edges))
    opt = best[full][root]
    if tree.cost != opt:
        raise AssertionError(f"reconstructed cost {tree.cost} != DP value {opt}")
    return OracleResult(opt, tree)


def brute_force_dst(inst: DstInstance, max_edges: int = 16) -> OracleResult:
    """Exhaustive minimum over arborescences formed by edge subsets.

    Ties go to the lexicographically smallest sorted edge list.
    """
    if inst.m > max_edges:
        raise CapExceeded(f"{inst.m} edges exceeds enumeration cap {max_edges}", inst.m)
    metric_closure(inst)  # raises on unreachable terminals
    keys = inst.edge_keys()
    costs = [c for _, _, c in inst.edges]
    best_key = None
    best_edges = None
    terms = inst.terminals
    for mask in range(1 << len(keys)):
        chosen = [keys[i] for i in range(len(keys)) if mask >> i & 1]
        if not is_arborescence(inst.root, chosen):
            continue
        covered = {t for _, t in chosen}
        if not terms <= covered:
            continue
        cost = sum((costs[i] for i in range(len(keys)) if mask >> i & 1), Fraction(0))
        key = (cost, sorted(chosen))
        if best_key is None or key < best_key:
            best_key, best_edges = key, chosen
    if best_edges is None:
        # k = 0 is the only case where the empty set is not matched above
        best_edges, best_key = [], (Fraction(0), [])
    return OracleResult(best_key[0], SteinerSolution.of(inst, best_edges))


def canonical_optimum_tree(closed: DstInstance, cap: int = DEFAULT_TERMINAL_CAP) -> SteinerSolution:
    """An optimum in which every Steiner vertex other than the root branches.

    ``closed`` must be a metric closure so that shortcut edges exist and cost
    no more than the two-edge paths they replace.
    """
    res = exact_opt(closed, cap)
    edges = set(res.tree.edges)
    keep = set(closed.terminals) | {closed.root}
    while True:
        children, parent = {}, {}
        for h, t in edges:
            children.setdefault(h, []).append(t)
            parent[t] = h
        chain = sorted(
            v for v, cs in children.items() if len(cs) == 1 and v not in keep
        )
        if not chain:
            break
        v = chain[0]
        p, c = parent[v], children[v][0]
        edges -= {(p, v), (v, c)}
        edges.add((p, c))
    sol = SteinerSolution.of(closed, edges)
    if sol.cost != res.opt:
        raise AssertionError("shortcutting changed the optimum cost")
    return sol

"""Directed Steiner tree instances: text I/O, metric closure, validation."""

from __future__ import annotations

import heapq
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import (
    InfeasibleError,
    MalformedLine,
    NegativeCost,
    RootIsTerminal,
    SelfLoop,
    ValidationError,
    VertexOutOfRange,
)

Edge = tuple  # (head, tail); head is the source vertex

_COST_RE = re.compile(r"^-?\d+(/\d+)?$")


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class DstInstance:
    """Directed graph on vertices ``0..n-1`` with root and terminal set.

    ``edges`` is a sorted tuple of ``(head, tail, cost)``; parallel edges are
    collapsed to the cheapest one on construction.
    """

    n: int
    edges: tuple
    root: int
    terminals: frozenset
    _cost: dict = field(init=False, repr=False, compare=False)
    _out: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cheapest = {}
        for h, t, c in self.edges:
            c = Fraction(c)
            if not (0 <= h < self.n and 0 <= t < self.n):
                raise ValueError(f"edge ({h}, {t}) out of range")
            if h == t:
                raise ValueError(f"self-loop at {h}")
            if c < 0:
                raise ValueError(f"negative cost on ({h}, {t})")
            if (h, t) not in cheapest or c < cheapest[(h, t)]:
                cheapest[(h, t)] = c
        if not 0 <= self.root < self.n:
            raise ValueError("root out of range")
        terms = frozenset(self.terminals)
        if self.root in terms:
            raise ValueError("root is terminal")
        if any(not 0 <= t < self.n for t in terms):
            raise ValueError("terminal out of range")
        object.__setattr__(self, "terminals", terms)
        object.__setattr__(
            self, "edges", tuple((h, t, c) for (h, t), c in sorted(cheapest.items()))
        )
        object.__setattr__(self, "_cost", dict(cheapest))
        out = {v: [] for v in range(self.n)}
        for h, t, _ in self.edges:
            out[h].append(t)
        object.__setattr__(self, "_out", {v: tuple(ts) for v, ts in out.items()})

    @property
    def k(self) -> int:
        return len(self.terminals)

    @property
    def m(self) -> int:
        return len(self.edges)

    def cost(self, h, t) -> Fraction:
        return self._cost[(h, t)]

    def has_edge(self, h, t) -> bool:
        return (h, t) in self._cost

    def out_neighbors(self, v):
        return self._out[v]

    def edge_keys(self):
        return [(h, t) for h, t, _ in self.edges]


@dataclass(frozen=True)
class SteinerSolution:
    edges: frozenset
    cost: Fraction

    @classmethod
    def of(cls, inst: DstInstance, edges: Iterable) -> "SteinerSolution":
        edges = frozenset((h, t) for h, t in edges)
        missing = [e for e in edges if not inst.has_edge(*e)]
        if missing:
            raise ValidationError(f"edges not in instance: {sorted(missing)}")
        return cls(edges, sum((inst.cost(*e) for e in edges), Fraction(0)))

    def sorted_edges(self):
        return sorted(self.edges)


@dataclass(frozen=True)
class MetricClosure:
    """All-pairs shortest distances with next-hop table for path recovery.

    ``dist[u][v]`` is ``None`` when ``v`` is unreachable from ``u``.
    """

    dist: tuple
    nxt: tuple

    def distance(self, u, v):
        return self.dist[u][v]

    def path(self, u, v):
        if self.dist[u][v] is None:
            raise ValueError(f"{v} unreachable from {u}")
        verts = [u]
        while u != v:
            u = self.nxt[u][v]
            verts.append(u)
        return verts


# --------------------------------------------------------------------------- I/O


def _int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise MalformedLine(f"expected integer, got {tok!r}", lineno) from None


def parse_dst(text) -> DstInstance:
    """Parse the line-oriented DST format. ``text`` may be ``str`` or bytes."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body.split()))
    if len(lines) < 3:
        raise MalformedLine("missing header lines", lines[-1][0] if lines else None)

    lineno, toks = lines[0]
    if toks[0] != "dst" or len(toks) != 3:
        raise MalformedLine("expected 'dst <n> <m>'", lineno)
    n, m = _int(toks[1], lineno), _int(toks[2], lineno)
    if n < 1 or m < 0:
        raise MalformedLine("n must be positive and m non-negative", lineno)

    lineno, toks = lines[1]
    if toks[0] != "root" or len(toks) != 2:
        raise MalformedLine("expected 'root <r>'", lineno)
    root = _int(toks[1], lineno)
    if not 0 <= root < n:
        raise VertexOutOfRange(f"root {root} not in [0, {n})", lineno)

    lineno, toks = lines[2]
    if toks[0] != "terminals":
        raise MalformedLine("expected 'terminals <t1> ...'", lineno)
    terminals = set()
    for tok in toks[1:]:
        t = _int(tok, lineno)
        if not 0 <= t < n:
            raise VertexOutOfRange(f"terminal {t} not in [0, {n})", lineno)
        if t == root:
            raise RootIsTerminal("root is terminal", lineno)
        terminals.add(t)

    edge_lines = lines[3:]
    if len(edge_lines) != m:
        where = edge_lines[-1][0] if edge_lines else lineno
        raise MalformedLine(f"expected {m} edge lines, found {len(edge_lines)}", where)
    edges = []
    for lineno, toks in edge_lines:
        if toks[0] != "edge" or len(toks) != 4:
            raise MalformedLine("expected 'edge <head> <tail> <cost>'", lineno)
        h, t = _int(toks[1], lineno), _int(toks[2], lineno)
        for v in (h, t):
            if not 0 <= v < n:
                raise VertexOutOfRange(f"vertex {v} not in [0, {n})", lineno)
        if h == t:
            raise SelfLoop(f"self-loop at {h}", lineno)
        if not _COST_RE.match(toks[3]):
            raise MalformedLine(f"bad cost {toks[3]!r}", lineno)
        c = Fraction(toks[3])
        if c < 0:
            raise NegativeCost("negative cost", lineno)
        edges.append((h, t, c))
    return DstInstance(n, tuple(edges), root, frozenset(terminals))


def serialize_dst(inst: DstInstance) -> str:
    out = [
        f"dst {inst.n} {inst.m}",
        f"root {inst.root}",
        " ".join(["terminals"] + [str(t) for t in sorted(inst.terminals)]),
    ]
    out += [f"edge {h} {t} {format_rational(c)}" for h, t, c in inst.edges]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------- closure


def metric_closure(inst: DstInstance):
    """Floyd-Warshall over exact rationals.

    Returns ``(closed, mc)`` where ``closed`` has one edge per ordered pair at
    finite distance. Raises :class:`InfeasibleError` if a terminal is
    unreachable from the root.
    """
    n = inst.n
    dist = [[None] * n for _ in range(n)]
    nxt = [[None] * n for _ in range(n)]
    for v in range(n):
        dist[v][v] = Fraction(0)
        nxt[v][v] = v
    for h, t, c in inst.edges:
        dist[h][t] = c
        nxt[h][t] = t
    for k in range(n):
        dk = dist[k]
        for i in range(n):
            dik = dist[i][k]
            if dik is None or i == k:
                continue
            di, ni = dist[i], nxt[i]
            for j in range(n):
                dkj = dk[j]
                if dkj is None:
                    continue
                cand = dik + dkj
                if di[j] is None or cand < di[j]:
                    di[j] = cand
                    ni[j] = ni[k]
    for t in sorted(inst.terminals):
        if dist[inst.root][t] is None:
            raise InfeasibleError(f"terminal {t} unreachable from root {inst.root}")
    closed_edges = tuple(
        (u, v, dist[u][v])
        for u in range(n)
        for v in range(n)
        if u != v and dist[u][v] is not None
    )
    closed = DstInstance(n, closed_edges, inst.root, inst.terminals)
    mc = MetricClosure(tuple(map(tuple, dist)), tuple(map(tuple, nxt)))
    return closed, mc


# ------------------------------------------------------------------- solutions


def reachable_from(root, edges) -> set:
    adj = {}
    for h, t in edges:
        adj.setdefault(h, []).append(t)
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def validate_solution(inst: DstInstance, sol: SteinerSolution) -> Fraction:
    """Total cost of ``sol`` if it connects the root to every terminal."""
    for e in sol.edges:
        if not inst.has_edge(*e):
            raise ValidationError(f"edge {e} not in instance")
    seen = reachable_from(inst.root, sol.edges)
    for t in sorted(inst.terminals):
        if t not in seen:
            raise ValidationError(f"terminal {t} unreachable")
    return sum((inst.cost(*e) for e in sol.edges), Fraction(0))


def prune_to_arborescence(inst: DstInstance, sol: SteinerSolution) -> SteinerSolution:
    """Shortest-path tree inside ``sol``, restricted to root-terminal paths."""
    validate_solution(inst, sol)
    adj = {}
    for h, t in sorted(sol.edges):
        adj.setdefault(h, []).append(t)
    best = {inst.root: Fraction(0)}
    pred = {}
    done = set()
    heap = [(Fraction(0), inst.root)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v in adj.get(u, ()):
            if v in done:
                continue
            cand = d + inst.cost(u, v)
            if v not in best or cand < best[v] or (cand == best[v] and u < pred[v]):
                best[v] = cand
                pred[v] = u
                heapq.heappush(heap, (cand, v))
    keep = set()
    for t in inst.terminals:
        v = t
        while v != inst.root:
            e = (pred[v], v)
            if e in keep:
                break
            keep.add(e)
            v = pred[v]
    return SteinerSolution.of(inst, keep)


def expand_to_original(
    inst: DstInstance, mc: MetricClosure, closure_sol: SteinerSolution
) -> SteinerSolution:
    """Replace every closure edge by its recorded shortest path, then prune."""
    edges = set()
    for u, v in closure_sol.edges:
        path = mc.path(u, v)
        edges.update(zip(path, path[1:]))
    return prune_to_arborescence(inst, SteinerSolution.of(inst, edges))


def is_arborescence(root, edges) -> bool:
    """True iff ``edges`` form an out-tree rooted at ``root``."""
    indeg = {}
    for h, t in edges:
        indeg[t] = indeg.get(t, 0) + 1
    if root in indeg or any(d != 1 for d in indeg.values()):
        return False
    return len(reachable_from(root, edges)) == len(indeg) + 1

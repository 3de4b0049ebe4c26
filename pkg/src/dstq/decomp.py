"""Balanced tree partitions and decomposition trees.

A decomposition tree records a recursive edge partition of a Steiner tree:
every node carries a vertex ``mu`` and every leaf carries one edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import StructureError, ValidationError
from .graph import DstInstance, SteinerSolution, prune_to_arborescence, reachable_from


class RootedTree:
    """Immutable rooted tree over hashable, orderable node ids."""

    __slots__ = ("root", "parent", "children", "_size")

    def __init__(self, root, parent: dict):
        self.root = root
        self.parent = dict(parent)
        self.parent.pop(root, None)
        children = {root: []}
        for v, p in self.parent.items():
            children.setdefault(v, [])
            children.setdefault(p, []).append(v)
        for cs in children.values():
            cs.sort()
        self.children = {v: tuple(cs) for v, cs in children.items()}
        if len(self.reachable()) != len(self.children):
            raise StructureError("parent links do not form a tree under the root")
        self._size = None

    @classmethod
    def from_edges(cls, root, edges):
        parent = {}
        for h, t in edges:
            if t in parent:
                raise StructureError(f"vertex {t} has two parents")
            parent[t] = h
        return cls(root, parent)

    def reachable(self):
        seen, stack = [self.root], [self.root]
        while stack:
            v = stack.pop()
            for c in self.children.get(v, ()):
                seen.append(c)
                stack.append(c)
        return seen

    @property
    def nodes(self):
        return sorted(self.children)

    def __len__(self):
        return len(self.children)

    def edges(self):
        return sorted((p, v) for v, p in self.parent.items())

    def preorder(self):
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return out

    def subtree_sizes(self):
        if self._size is None:
            size = {}
            for v in reversed(self.preorder()):
                size[v] = 1 + sum(size[c] for c in self.children[v])
            self._size = size
        return self._size

    def subtree_nodes(self, v):
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        return out

    def height(self):
        depth = {self.root: 0}
        for v in self.preorder():
            for c in self.children[v]:
                depth[c] = depth[v] + 1
        return max(depth.values())


def depth_bound(n: int) -> int:
    """``ceil(log_{3/2} n) + 2`` computed with integers only."""
    if n < 1:
        raise ValueError("n must be positive")
    e, p = 0, Fraction(1)
    while p < n:
        p *= Fraction(3, 2)
        e += 1
    return e + 2


def _components_without(t: RootedTree, v):
    """Components of ``t`` minus ``v`` as (size, is_parent_side, root)."""
    size = t.subtree_sizes()
    comps = [(size[c], False, c) for c in t.children[v]]
    if v != t.root:
        comps.append((len(t) - size[v], True, t.root))
    return comps


def tree_separator(t: RootedTree):
    """Lowest-id vertex whose removal leaves components of size at most n/2."""
    n = len(t)
    for v in t.nodes:
        if all(2 * s <= n for s, _, _ in _components_without(t, v)):
            return v
    raise AssertionError("every tree has a separator")


def balanced_partition(t: RootedTree):
    """Split ``t`` at a separator into two trees sharing only that vertex.

    Components are packed greedily while the packed side stays below 2n/3,
    smallest first; on equal size, child subtrees precede the component
    holding the root, then lower root id wins. Returns ``(T1, T2, v)`` with
    ``T1`` rooted at ``t.root``.
    """
    n = len(t)
    if n < 3:
        raise ValueError("balanced_partition needs at least 3 vertices")
    v = tree_separator(t)
    comps = sorted(_components_without(t, v))
    packed, taken = 0, []
    for size, parent_side, croot in comps:
        if 3 * (packed + size) < 2 * n:
            packed += size
            taken.append((parent_side, croot))
        else:
            break
    taken_set = set(taken)
    rest = [(ps, cr) for _, ps, cr in comps if (ps, cr) not in taken_set]

    def side_nodes(parts):
        nodes = {v}
        for parent_side, croot in parts:
            if parent_side:
                below = set(t.subtree_nodes(v))
                nodes.update(u for u in t.children if u not in below)
            else:
                nodes.update(t.subtree_nodes(croot))
        return nodes

    a_nodes, b_nodes = side_nodes(taken), side_nodes(rest)

    def induced(nodes):
        root = t.root if t.root in nodes else v
        return RootedTree(root, {u: t.parent[u] for u in nodes if u != root})

    A, B = induced(a_nodes), induced(b_nodes)
    if B.root == t.root and A.root != t.root:
        A, B = B, A
    return A, B, v


class DecompositionTree:
    """Flat-array rooted tree; node 0 is the root.

    ``mu[i]`` is a vertex id, ``edge[i]`` an ``(head, tail)`` pair or ``None``.
    """

    __slots__ = ("mu", "edge", "parent", "children")

    def __init__(self, mu, edge, parent):
        self.mu = list(mu)
        self.edge = [None if e is None else tuple(e) for e in edge]
        self.parent = list(parent)
        self.children = [[] for _ in self.mu]
        for i, p in enumerate(self.parent):
            if p is not None:
                self.children[p].append(i)
        if not self.mu or self.parent[0] is not None:
            raise StructureError("node 0 must be the root")

    def __len__(self):
        return len(self.mu)

    def leaves(self):
        return [i for i in range(len(self)) if not self.children[i]]

    def subtree(self, a):
        out, stack = [], [a]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def height(self, a=0):
        best = 0
        stack = [(a, 0)]
        while stack:
            u, d = stack.pop()
            best = max(best, d)
            stack.extend((c, d + 1) for c in self.children[u])
        return best

    def depth(self, a):
        d = 0
        while self.parent[a] is not None:
            a = self.parent[a]
            d += 1
        return d

    def cost(self, inst: DstInstance) -> Fraction:
        return sum((inst.cost(*self.edge[b]) for b in self.leaves()), Fraction(0))

    def is_binary(self):
        return all(len(c) in (0, 2) for c in self.children)

    def serialize(self) -> str:
        lines = []
        stack = [(0, 0)]
        while stack:
            a, d = stack.pop()
            text = f"{'  ' * d}{d} {self.mu[a]}"
            if self.edge[a] is not None:
                text += f" {self.edge[a][0]} {self.edge[a][1]}"
            lines.append(text)
            stack.extend((c, d + 1) for c in reversed(self.children[a]))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "DecompositionTree":
        mu, edge, parent, stack = [], [], [], []
        for raw in text.splitlines():
            if not raw.strip():
                continue
            toks = raw.split()
            d, m = int(toks[0]), int(toks[1])
            e = (int(toks[2]), int(toks[3])) if len(toks) == 4 else None
            del stack[d:]
            parent.append(stack[-1] if stack else None)
            if d != len(stack):
                raise StructureError(f"bad indentation depth {d}")
            stack.append(len(mu))
            mu.append(m)
            edge.append(e)
        return cls(mu, edge, parent)


def build_decomposition_tree(steiner: RootedTree) -> DecompositionTree:
    """Recursive balanced partition down to single edges."""
    if len(steiner) < 2:
        raise ValueError("decomposition needs at least one edge")
    mu, edge, parent = [], [], []

    def build(t: RootedTree, par):
        idx = len(mu)
        parent.append(par)
        mu.append(t.root)
        if len(t) == 2:
            (v,) = t.children[t.root]
            edge.append((t.root, v))
            return
        edge.append(None)
        t1, t2, _ = balanced_partition(t)
        build(t1, idx)
        build(t2, idx)

    build(steiner, None)
    return DecompositionTree(mu, edge, parent)


def involved_vertices(tau: DecompositionTree, alpha) -> set:
    out = {tau.mu[alpha]}
    for b in tau.subtree(alpha):
        if not tau.children[b] and tau.edge[b] is not None:
            out.add(tau.edge[b][1])
    return out


@dataclass(frozen=True)
class DecompositionCheck:
    ok: bool
    prop: str = ""
    node: int | None = None
    message: str = ""

    def __bool__(self):
        return self.ok


def validate_decomposition(tau: DecompositionTree, inst: DstInstance) -> DecompositionCheck:
    """Check the three defining properties; the first violation is reported."""
    if tau.mu[0] != inst.root:
        return DecompositionCheck(False, "a", 0, f"root mu {tau.mu[0]} != {inst.root}")
    for b in tau.leaves():
        e = tau.edge[b]
        if e is None:
            return DecompositionCheck(False, "b", b, "leaf without edge")
        if e[0] != tau.mu[b]:
            return DecompositionCheck(False, "b", b, f"head of {e} != mu {tau.mu[b]}")
        if not inst.has_edge(*e):
            return DecompositionCheck(False, "b", b, f"{e} is not an edge")
    for a in range(len(tau)):
        if tau.children[a] and tau.edge[a] is not None:
            return DecompositionCheck(False, "b", a, "internal node carries an edge")
    involved = {}

    def inv(a):
        if a not in involved:
            involved[a] = involved_vertices(tau, a)
        return involved[a]

    for a in range(len(tau)):
        kids = tau.children[a]
        same = [c for c in kids if tau.mu[c] == tau.mu[a]]
        for c in kids:
            if tau.mu[c] == tau.mu[a]:
                continue
            if not any(tau.mu[c] in inv(w) for w in same):
                return DecompositionCheck(
                    False, "c", a, f"child {c} (mu {tau.mu[c]}) has no witness sibling"
                )
    return DecompositionCheck(True)


def reachability_holds(tau: DecompositionTree, alpha) -> bool:
    """Leaf edges below ``alpha`` reach every vertex involved there from mu."""
    edges = [tau.edge[b] for b in tau.subtree(alpha) if not tau.children[b]]
    seen = reachable_from(tau.mu[alpha], [e for e in edges if e is not None])
    return involved_vertices(tau, alpha) <= seen


def decomposition_to_steiner(tau: DecompositionTree, inst: DstInstance) -> SteinerSolution:
    check = validate_decomposition(tau, inst)
    if not check:
        raise ValidationError(f"invalid decomposition tree: ({check.prop}) {check.message}")
    involved = involved_vertices(tau, 0)
    for t in sorted(inst.terminals):
        if t not in involved:
            raise ValidationError(f"terminal {t} is not involved")
    edges = {tau.edge[b] for b in tau.leaves()}
    return prune_to_arborescence(inst, SteinerSolution.of(inst, edges))


def height_bound_for_terminals(k: int) -> int:
    return depth_bound(max(1, 2 * k))

"""Label-consistent subtree instances.

A solution is a subtree containing the root in which every selected node's
demand labels are served by a selected node in its own subtree (the node
itself counts), and every global label is served somewhere.
"""

from __future__ import annotations

import re
from fractions import Fraction
from itertools import product

from .errors import CapExceeded, InfeasibleError, MalformedLine, StructureError, ValidationError
from .graph import format_rational

DEFAULT_BRUTE_FORCE_CAP = 24


class LcstInstance:
    """Rooted tree on nodes ``0..N-1`` with costs and demand/service labels."""

    def __init__(self, parent, cost, dem, ser, globals_):
        self.parent = tuple(parent)
        n = len(self.parent)
        roots = [v for v, p in enumerate(self.parent) if p is None]
        if len(roots) != 1:
            raise StructureError(f"expected one root, found {len(roots)}")
        self.root = roots[0]
        self.cost = tuple(Fraction(c) for c in cost)
        self.dem = tuple(frozenset(d) for d in dem)
        self.ser = tuple(frozenset(s) for s in ser)
        self.globals = frozenset(globals_)
        if not len(self.cost) == len(self.dem) == len(self.ser) == n:
            raise StructureError("per-node arrays have different lengths")
        if any(c < 0 for c in self.cost):
            raise ValidationError("negative node cost")
        if any(d & self.globals for d in self.dem):
            raise ValidationError("a global label appears in a demand set")
        kids = [[] for _ in range(n)]
        for v, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(v)
        self.children = tuple(tuple(k) for k in kids)
        order = self._preorder()
        if len(order) != n:
            raise StructureError("parent links do not form a tree")
        self.order = tuple(order)
        depth = [0] * n
        for v in self.order:
            for c in self.children[v]:
                depth[c] = depth[v] + 1
        self.depth = tuple(depth)

    def _preorder(self):
        out, stack = [], [self.root]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children[v]))
        return out

    def __len__(self):
        return len(self.parent)

    @property
    def n_nodes(self):
        return len(self.parent)

    @property
    def height(self):
        return max(self.depth)

    @property
    def labels(self):
        out = set(self.globals)
        for d in self.dem:
            out |= d
        for s in self.ser:
            out |= s
        return frozenset(out)

    @property
    def s(self):
        return max((len(d) for d in self.dem), default=0)

    def is_leaf(self, v):
        return not self.children[v]

    def subtree(self, v):
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        return out

    def solution(self, nodes) -> "LcstSolution":
        nodes = frozenset(nodes)
        return LcstSolution(nodes, sum((self.cost[v] for v in nodes), Fraction(0)))


class NormalizedLcst(LcstInstance):
    """Instance with disjoint demand sets, demands only on internal nodes and
    exactly one service label per leaf (``a[v]``). A childless root is the
    exception: it serves at most one label and may keep demands nothing can
    serve, which makes the instance infeasible.

    ``origin[v]`` is the pre-normalization node id (``None`` for added
    leaves); ``label_origin`` maps label copies back to their source label.
    """

    def __init__(self, parent, cost, dem, ser, globals_, origin, label_origin):
        super().__init__(parent, cost, dem, ser, globals_)
        self.origin = tuple(origin)
        self.label_origin = dict(label_origin)
        a = {}
        for v in range(len(self)):
            if self.children[v]:
                if self.ser[v]:
                    raise StructureError(f"internal node {v} has service labels")
            elif v != self.root:
                if len(self.ser[v]) != 1:
                    raise StructureError(f"leaf {v} must serve exactly one label")
                if self.dem[v]:
                    raise StructureError(f"leaf {v} has demand labels")
                (a[v],) = self.ser[v]
            elif len(self.ser[v]) > 1:
                raise StructureError("a childless root serves at most one label")
            elif self.ser[v]:
                (a[v],) = self.ser[v]
        seen = set()
        for d in self.dem:
            if d & seen:
                raise StructureError("demand sets are not disjoint")
            seen |= d
        self.a = a
        self.leaves = tuple(v for v in self.order if not self.children[v])
        self.internal = tuple(v for v in self.order if self.children[v])
        self._leaf_desc = None

    def leaf_descendants(self, v):
        if self._leaf_desc is None:
            desc = [None] * len(self)
            for u in reversed(self.order):
                if self.children[u]:
                    acc = []
                    for c in self.children[u]:
                        acc.extend(desc[c])
                    desc[u] = tuple(sorted(acc))
                else:
                    desc[u] = (u,)
            self._leaf_desc = desc
        return self._leaf_desc[v]

    def to_original(self, sol: "LcstSolution", original: LcstInstance) -> "LcstSolution":
        """Map a solution back to the pre-normalization ids."""
        return original.solution(
            self.origin[v] for v in sol.nodes if self.origin[v] is not None
        )


class LcstSolution:
    __slots__ = ("nodes", "cost")

    def __init__(self, nodes, cost):
        self.nodes = frozenset(nodes)
        self.cost = Fraction(cost)

    def __eq__(self, other):
        return isinstance(other, LcstSolution) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self):
        return f"LcstSolution(nodes={sorted(self.nodes)}, cost={self.cost})"

    def sorted_nodes(self):
        return sorted(self.nodes)


# ------------------------------------------------------------------ validation


def check_structure(inst: LcstInstance, nodes) -> None:
    nodes = set(nodes)
    if inst.root not in nodes:
        raise StructureError("solution does not contain the root")
    for v in nodes:
        if not 0 <= v < len(inst):
            raise StructureError(f"node {v} out of range")
        p = inst.parent[v]
        if p is not None and p not in nodes:
            raise StructureError(f"node {v} selected without its parent {p}")


def _served_below(inst: LcstInstance, nodes, relevant):
    served = {}
    for v in reversed(inst.order):
        if v not in nodes:
            continue
        acc = set(inst.ser[v] & relevant)
        for c in inst.children[v]:
            if c in nodes:
                acc |= served[c]
        served[v] = acc
    return served


def first_unserved_demand(inst: LcstInstance, sol: LcstSolution):
    """``(u, label)`` for the first violated demand in preorder, else ``None``."""
    check_structure(inst, sol.nodes)
    relevant = set()
    for v in sol.nodes:
        relevant |= inst.dem[v]
    served = _served_below(inst, sol.nodes, relevant)
    for u in inst.order:
        if u in sol.nodes:
            missing = inst.dem[u] - served[u]
            if missing:
                return u, min(missing)
    return None


def validate_label_consistent(inst: LcstInstance, sol: LcstSolution) -> bool:
    return first_unserved_demand(inst, sol) is None


def validate_full(inst: LcstInstance, sol: LcstSolution) -> Fraction:
    """Cost of ``sol`` if it is label-consistent and serves every global."""
    bad = first_unserved_demand(inst, sol)
    if bad is not None:
        raise ValidationError(f"demand {bad[1]} of node {bad[0]} unserved")
    offered = set()
    for v in sol.nodes:
        offered |= inst.ser[v]
    for g in sorted(inst.globals - offered):
        raise ValidationError(f"global {g} unserved")
    return sum((inst.cost[v] for v in sol.nodes), Fraction(0))


# --------------------------------------------------------------- normalization


def normalize(inst: LcstInstance) -> NormalizedLcst:
    """Rewrite ``inst`` into normalized form; ``origin`` is the back-map."""
    n = len(inst)
    parent = dict(enumerate(inst.parent))
    cost = dict(enumerate(inst.cost))
    dem = {v: set(d) for v, d in enumerate(inst.dem)}
    ser = {v: set(s) for v, s in enumerate(inst.ser)}
    origin = {v: v for v in range(n)}
    root = inst.root
    kids = {v: set(c) for v, c in enumerate(inst.children)}

    # copies for labels demanded by several nodes
    label_origin = {ell: ell for ell in inst.labels}
    next_label = max(inst.labels, default=-1) + 1
    demanders = {}
    for v in range(n):
        for ell in dem[v]:
            demanders.setdefault(ell, []).append(v)
    for ell in sorted(demanders):
        users = demanders[ell]
        if len(users) < 2:
            continue
        copies = []
        for v in users:
            dem[v].discard(ell)
            dem[v].add(next_label)
            label_origin[next_label] = ell
            copies.append(next_label)
            next_label += 1
        for v in range(n):
            if ell in ser[v]:
                ser[v].discard(ell)
                ser[v].update(copies)
        del label_origin[ell]

    def delete(v):
        for u in _subtree(kids, v):
            for d in (parent, cost, dem, ser, origin):
                d.pop(u, None)
            kids.pop(u, None)

    def settle_leaves():
        changed = True
        while changed:
            changed = False
            for v in sorted(parent):
                if v not in parent or kids[v]:
                    continue
                dem[v] -= ser[v]
                if v == root:
                    continue
                if dem[v] or not ser[v]:
                    kids[parent[v]].discard(v)
                    delete(v)
                    changed = True

    settle_leaves()

    # push services to fresh leaves
    next_node = n
    for v in sorted(parent):
        if ser[v] and (kids[v] or len(ser[v]) > 1):
            for ell in sorted(ser[v]):
                w = next_node
                next_node += 1
                parent[w], cost[w], dem[w], ser[w] = v, Fraction(0), set(), {ell}
                origin[w] = None
                kids[w] = set()
                kids[v].add(w)
            ser[v] = set()

    # keep one cheapest leaf child per label, drop leaves nobody asks for
    above = {root: set()}
    for v in _preorder(kids, root):
        for c in kids[v]:
            above[c] = above[v] | dem[v]
    for v in sorted(parent):
        if v not in parent:
            continue
        best = {}
        for c in sorted(kids[v]):
            if kids[c]:
                continue
            (ell,) = ser[c]
            if ell not in inst.globals and ell not in above[c]:
                kids[v].discard(c)
                delete(c)
                continue
            if ell not in best or cost[c] < cost[best[ell]]:
                if ell in best:
                    kids[v].discard(best[ell])
                    delete(best[ell])
                best[ell] = c
            else:
                kids[v].discard(c)
                delete(c)

    settle_leaves()

    ids = {}
    for v in _preorder(kids, root):
        ids[v] = len(ids)
    order = sorted(ids, key=ids.get)
    used = set()
    for v in order:
        used |= dem[v] | ser[v]
    used |= inst.globals
    return NormalizedLcst(
        [None if v == root else ids[parent[v]] for v in order],
        [cost[v] for v in order],
        [dem[v] for v in order],
        [ser[v] for v in order],
        inst.globals,
        [origin[v] for v in order],
        {ell: label_origin[ell] for ell in used if ell in label_origin},
    )


def _subtree(kids, v):
    out, stack = [], [v]
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(kids.get(u, ()))
    return out


def _preorder(kids, root):
    out, stack = [], [root]
    while stack:
        v = stack.pop()
        out.append(v)
        stack.extend(sorted(kids[v], reverse=True))
    return out


def prune_useless(inst: NormalizedLcst):
    """Drop nodes whose demands no leaf below can serve, to a fixpoint.

    Returns ``(pruned, feasible)``; when the root itself is useless the input
    is returned unchanged with ``feasible = False``.
    """
    alive = set(range(len(inst)))
    while True:
        below = {}
        removed = set()
        for v in reversed(inst.order):
            if v not in alive:
                continue
            kids = [c for c in inst.children[v] if c in alive]
            if not inst.children[v]:
                below[v] = set(inst.ser[v])
                if not inst.dem[v] <= below[v]:
                    removed.add(v)
                continue
            acc = set()
            for c in kids:
                acc |= below[c]
            below[v] = acc
            # a childless non-root node serves nothing; the root may stand alone
            if (not kids and v != inst.root) or not inst.dem[v] <= acc:
                removed.add(v)
        if not removed:
            break
        if inst.root in removed:
            return inst, False
        for v in removed:
            if v in alive:
                alive.difference_update(inst.subtree(v))
    feasible = inst.globals <= below[inst.root]
    if len(alive) == len(inst):
        return inst, feasible
    return restrict(inst, alive), feasible


def restrict(inst: NormalizedLcst, alive) -> NormalizedLcst:
    """Sub-instance on the root-closed node set ``alive``, ids in preorder."""
    order = [v for v in inst.order if v in alive]
    ids = {v: i for i, v in enumerate(order)}
    used = set(inst.globals)
    for v in order:
        used |= inst.dem[v] | inst.ser[v]
    return NormalizedLcst(
        [None if inst.parent[v] is None else ids[inst.parent[v]] for v in order],
        [inst.cost[v] for v in order],
        [inst.dem[v] for v in order],
        [inst.ser[v] for v in order],
        inst.globals,
        [inst.origin[v] for v in order],
        {ell: o for ell, o in inst.label_origin.items() if ell in used},
    )


# ------------------------------------------------------------------- solvers


def brute_force_lcst(inst: LcstInstance, cap: int = DEFAULT_BRUTE_FORCE_CAP):
    """Exhaustive minimum over root-containing subtrees (ties: sorted ids)."""
    if len(inst) > cap:
        raise CapExceeded(f"{len(inst)} nodes exceeds enumeration cap {cap}", len(inst))
    options = {}
    for v in reversed(inst.order):
        per_child = [[()] + options[c] for c in inst.children[v]]
        options[v] = [(v,) + sum(combo, ()) for combo in product(*per_child)]
    best = None
    for nodes in options[inst.root]:
        sol = inst.solution(nodes)
        try:
            c = validate_full(inst, sol)
        except ValidationError:
            continue
        key = (c, sorted(nodes))
        if best is None or key < best[0]:
            best = (key, sol)
    if best is None:
        raise InfeasibleError("no label-consistent subtree serves every global")
    return best[0][0], best[1]


def exact_lcst(inst: LcstInstance):
    """Exact optimum by dynamic programming over served label sets.

    A node's table maps the set of labels its chosen subtree serves (restricted
    to labels that matter above it) to the cheapest such subtree. Only labels
    demanded by a proper ancestor, plus the globals, matter above a node.
    """
    above = [None] * len(inst)
    above[inst.root] = frozenset(inst.globals)
    for v in inst.order:
        for c in inst.children[v]:
            above[c] = above[v] | inst.dem[v]
    tables = {}
    for v in reversed(inst.order):
        keep = above[v] | inst.dem[v]
        table = {frozenset(inst.ser[v] & keep): (inst.cost[v], (v,))}
        for c in inst.children[v]:
            child = tables.pop(c)
            merged = dict(table)
            for s1, (c1, n1) in table.items():
                for s2, (c2, n2) in child.items():
                    s = s1 | s2
                    cand = c1 + c2
                    cur = merged.get(s)
                    if cur is None or cand < cur[0]:
                        merged[s] = (cand, n1 + n2)
            table = _dominance_prune(merged)
        final = {}
        for s, (c, nodes) in table.items():
            if inst.dem[v] <= s:
                key = s & above[v]
                cur = final.get(key)
                if cur is None or c < cur[0]:
                    final[key] = (c, nodes)
        tables[v] = _dominance_prune(final)
    best = None
    for s, (c, nodes) in sorted(tables[inst.root].items(), key=lambda kv: sorted(kv[0])):
        if inst.globals <= s and (best is None or c < best[0]):
            best = (c, nodes)
    if best is None:
        raise InfeasibleError("no label-consistent subtree serves every global")
    return best[0], inst.solution(best[1])


def _dominance_prune(table):
    """Drop states whose label set is contained in a cheaper-or-equal state's."""
    if len(table) < 2:
        return table
    items = sorted(table.items(), key=lambda kv: (kv[1][0], -len(kv[0]), sorted(kv[0])))
    kept = {}
    for s, val in items:
        if any(s <= t for t in kept):
            continue
        kept[s] = val
    return kept


# ------------------------------------------------------------------- text I/O


def _ids(items):
    return ",".join(str(x) for x in sorted(items))


def serialize_lcst(inst: LcstInstance) -> str:
    lines = [f"lcst {len(inst)}"]
    for v in range(len(inst)):
        p = "-" if inst.parent[v] is None else str(inst.parent[v])
        lines.append(
            f"node {v} {p} {format_rational(inst.cost[v])} "
            f"dem:{_ids(inst.dem[v])} ser:{_ids(inst.ser[v])}"
        )
    lines.append(" ".join(["globals"] + [str(g) for g in sorted(inst.globals)]))
    return "\n".join(lines) + "\n"


_NODE_RE = re.compile(r"^node (\d+) (-|\d+) (\d+(?:/\d+)?) dem:([\d,]*) ser:([\d,]*)$")


def parse_lcst(text) -> LcstInstance:
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    lines = [
        (i, ln.split("#", 1)[0].strip())
        for i, ln in enumerate(text.splitlines(), start=1)
    ]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines or not lines[0][1].startswith("lcst "):
        raise MalformedLine("expected 'lcst <N>'", lines[0][0] if lines else None)
    n = int(lines[0][1].split()[1])
    parent, cost, dem, ser = [None] * n, [0] * n, [()] * n, [()] * n
    seen = set()
    globals_ = ()
    for lineno, ln in lines[1:]:
        if ln.startswith("globals"):
            globals_ = tuple(int(x) for x in ln.split()[1:])
            continue
        m = _NODE_RE.match(ln)
        if not m:
            raise MalformedLine("bad node line", lineno)
        v = int(m.group(1))
        if not 0 <= v < n or v in seen:
            raise MalformedLine(f"bad node id {v}", lineno)
        seen.add(v)
        parent[v] = None if m.group(2) == "-" else int(m.group(2))
        cost[v] = Fraction(m.group(3))
        dem[v] = tuple(int(x) for x in m.group(4).split(",") if x)
        ser[v] = tuple(int(x) for x in m.group(5).split(",") if x)
    if len(seen) != n:
        raise MalformedLine(f"expected {n} node lines, found {len(seen)}")
    return LcstInstance(parent, cost, dem, ser, globals_)

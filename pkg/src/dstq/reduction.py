"""Reduction from directed Steiner tree to label-consistent subtree.

Twigs are canonical nested tuples ``(mu, edge, children)``: ``edge`` is
``()`` when undefined and ``children`` is ``()`` for leaves or a sorted pair.
Treating twigs as unordered trees removes duplicate q-nodes that differ only
by sibling order.

Label-tree nodes are addressed by paths: the root p-node is ``()``, a q-node
appends the index of its twig among the parent's twigs, and a p-node below a
q-node appends the index of the undefined leaf it hangs from. Labels are
structural keys, so lazily built parts of the tree name labels identically
no matter in which order they were first touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .decomp import DecompositionTree, depth_bound
from .errors import CapExceeded, EmbeddingError, StructureError
from .graph import DstInstance
from .lcst import LcstInstance

DEFAULT_MAX_NODES = 200_000
DEFAULT_MAX_TWIGS = 5_000


# ---------------------------------------------------------------------- twigs


def twig_leaf(mu, edge=None):
    return (mu, () if edge is None else tuple(edge), ())


def twig_node(mu, left, right):
    a, b = sorted((left, right))
    return (mu, (), (a, b))


def twig_depth(node) -> int:
    return 0 if not node[2] else 1 + max(twig_depth(c) for c in node[2])


def twig_leaves(node):
    """Leaves in left-to-right order."""
    if not node[2]:
        return [node]
    return twig_leaves(node[2][0]) + twig_leaves(node[2][1])


def undefined_leaves(node):
    return [b for b in twig_leaves(node) if not b[1]]


def twig_internal(node):
    """Internal nodes in preorder."""
    if not node[2]:
        return []
    return [node] + twig_internal(node[2][0]) + twig_internal(node[2][1])


def twig_cost(node, inst: DstInstance) -> Fraction:
    return sum((inst.cost(*b[1]) for b in twig_leaves(node) if b[1]), Fraction(0))


def is_valid_twig(node, g: int, inst: DstInstance | None = None) -> bool:
    mu, edge, kids = node
    if kids:
        if edge or len(kids) != 2 or kids[0] > kids[1]:
            return False
        if all(c[0] != mu for c in kids):
            return False
        return g >= 1 and all(is_valid_twig(c, g - 1, inst) for c in kids)
    if edge:
        if edge[0] != mu:
            return False
        if inst is not None and not inst.has_edge(*edge):
            return False
    return True


def enumerate_twigs(inst: DstInstance, root_mu, g: int, max_twigs: int = DEFAULT_MAX_TWIGS):
    """All non-singular twigs of depth at most ``g`` with root vertex ``root_mu``.

    Sorted by their tuple form. Raises :class:`CapExceeded` past ``max_twigs``.
    """
    memo = {}

    def shapes(mu, d):
        key = (mu, d)
        if key in memo:
            return memo[key]
        out = [twig_leaf(mu)] + [twig_leaf(mu, (mu, w)) for w in inst.out_neighbors(mu)]
        if d >= 1:
            same = shapes(mu, d - 1)
            anyv = [s for v in range(inst.n) for s in shapes(v, d - 1)]
            pairs = set()
            for a in same:
                for b in anyv:
                    pairs.add(twig_node(mu, a, b))
                    if len(pairs) > max_twigs:
                        raise CapExceeded(
                            f"more than {max_twigs} twigs rooted at {mu}", len(pairs)
                        )
            out += sorted(pairs)
        memo[key] = out
        return out

    result = sorted(t for t in shapes(root_mu, g) if t[2])
    if len(result) > max_twigs:
        raise CapExceeded(f"{len(result)} twigs rooted at {root_mu}", len(result))
    return result


# ----------------------------------------------------------------- parameters


@dataclass(frozen=True)
class ReductionParams:
    g: int
    dbound: int
    depth: int
    max_nodes: int = DEFAULT_MAX_NODES
    max_twigs: int = DEFAULT_MAX_TWIGS
    forfeited: bool = False

    def __post_init__(self):
        if self.g < 1 or self.depth < 0:
            raise ValueError("need g >= 1 and depth >= 0")

    def as_dict(self):
        return {
            "g": self.g,
            "dbound": self.dbound,
            "depth": self.depth,
            "max_nodes": self.max_nodes,
            "max_twigs": self.max_twigs,
            "guarantee_forfeited": self.forfeited,
        }


def collapse_depth(k: int) -> int:
    """``max(1, ceil(log2 log2 k))``: least g >= 1 with ``2**(2**g) >= k``."""
    g = 0
    while 2 ** (2**g) < k:
        g += 1
    return max(1, g)


def choose_params(
    k: int,
    g: int | None = None,
    depth: int | None = None,
    dbound: int | None = None,
    max_nodes: int = DEFAULT_MAX_NODES,
    max_twigs: int = DEFAULT_MAX_TWIGS,
) -> ReductionParams:
    if k < 1:
        raise ValueError("k must be at least 1")
    gg = collapse_depth(k) if g is None else g
    full_bound = depth_bound(2 * k)
    hb = full_bound if dbound is None else dbound
    full_depth = -(-full_bound // gg)
    d = -(-hb // gg) if depth is None else depth
    forfeited = hb < full_bound or d < full_depth
    return ReductionParams(gg, hb, d, max_nodes, max_twigs, forfeited)


# ----------------------------------------------------------------- label tree


@dataclass
class _Node:
    kind: str
    level: int
    vertex: int | None
    twig: tuple | None
    pending: tuple
    dem: frozenset
    ser: frozenset
    cost: Fraction
    children: tuple | None = None


@dataclass
class LabelTree:
    """Lazily materialized label tree over a metric closure.

    Label keys: ``("g", t)`` for terminal ``t``; ``("p", path)`` demanded by
    a p-node; ``("tie", path, i)`` tying q-node ``path`` to its i-th
    undefined leaf; ``("cons", path, j)`` for the j-th internal twig node of
    q-node ``path`` lacking a witness inside the twig.
    """

    inst: DstInstance
    params: ReductionParams
    _nodes: dict = field(default_factory=dict)
    _twigs: dict = field(default_factory=dict)
    _twig_index: dict = field(default_factory=dict)

    def __post_init__(self):
        root = ()
        self._nodes[root] = _Node(
            "p", 0, self.inst.root, None, (), frozenset({("p", root)}), frozenset(), Fraction(0)
        )

    # -- access

    @property
    def root(self):
        return ()

    @property
    def globals(self):
        return frozenset(("g", t) for t in self.inst.terminals)

    def size(self):
        return len(self._nodes)

    def node(self, path) -> _Node:
        if path not in self._nodes:
            self.children(path[:-1])
            if path not in self._nodes:
                raise KeyError(f"no label-tree node at {path}")
        return self._nodes[path]

    def kind(self, path):
        return "p" if len(path) % 2 == 0 else "q"

    def dem(self, path):
        return self.node(path).dem

    def ser(self, path):
        return self.node(path).ser

    def cost(self, path):
        return self.node(path).cost

    def twigs(self, u):
        if u not in self._twigs:
            ts = enumerate_twigs(self.inst, u, self.params.g, self.params.max_twigs)
            self._twigs[u] = ts
            self._twig_index[u] = {t: i for i, t in enumerate(ts)}
        return self._twigs[u]

    def twig_index(self, u, twig):
        self.twigs(u)
        return self._twig_index[u].get(twig)

    def children(self, path):
        node = self.node(path)
        if node.children is None:
            node.children = tuple(self._make_children(path, node))
        return node.children

    def _add(self, path, node):
        if len(self._nodes) >= self.params.max_nodes:
            raise CapExceeded(
                f"label tree exceeds {self.params.max_nodes} nodes", len(self._nodes)
            )
        self._nodes[path] = node

    def _make_children(self, path, node):
        out = []
        if node.kind == "p":
            if node.level >= self.params.depth:
                return out
            plabel = ("p", path)
            for i, twig in enumerate(self.twigs(node.vertex)):
                qpath = path + (i,)
                self._add(qpath, self._make_q(qpath, twig, node, plabel))
                out.append(qpath)
            return out
        twig = node.twig
        leaves = undefined_leaves(twig)
        extra = _consistency_requirements(twig, qpath=path)
        for i, beta in enumerate(leaves):
            ppath = path + (i,)
            inherited = node.pending + tuple(
                (lab, target) for lab, target, owners in extra if i in owners
            )
            self._add(
                ppath,
                _Node(
                    "p",
                    node.level + 1,
                    beta[0],
                    None,
                    inherited,
                    frozenset({("p", ppath)}),
                    frozenset({("tie", path, i)}),
                    Fraction(0),
                ),
            )
            out.append(ppath)
        return out

    def _make_q(self, qpath, twig, parent, plabel):
        tails = {b[1][1] for b in twig_leaves(twig) if b[1]}
        ser = {plabel}
        ser.update(("g", t) for t in tails if t in self.inst.terminals)
        ser.update(lab for lab, target in parent.pending if target in tails)
        dem = {("tie", qpath, i) for i in range(len(undefined_leaves(twig)))}
        dem.update(lab for lab, _, _ in _consistency_requirements(twig, qpath))
        return _Node(
            "q",
            parent.level,
            None,
            twig,
            parent.pending,
            frozenset(dem),
            frozenset(ser),
            twig_cost(twig, self.inst),
        )

    # -- materialization

    def walk(self):
        """All paths in preorder, materializing everything (subject to caps)."""
        out, stack = [], [()]
        while stack:
            path = stack.pop()
            out.append(path)
            stack.extend(reversed(self.children(path)))
        return out

    def label_ids(self, paths):
        """Integer ids: globals take ``0..k-1`` by terminal order; local labels
        follow in order of first appearance along ``paths``."""
        ids = {("g", t): i for i, t in enumerate(sorted(self.inst.terminals))}
        for path in paths:
            node = self.node(path)
            for lab in sorted(node.dem) + sorted(node.ser):
                if lab not in ids:
                    ids[lab] = len(ids)
        return ids

    def to_instance(self, paths):
        """Explicit instance induced on ``paths`` (a root-containing subtree),
        with node ids in the order given."""
        index = {p: i for i, p in enumerate(paths)}
        if () not in index:
            raise StructureError("the root path is missing")
        ids = self.label_ids(paths)
        parent, cost, dem, ser = [], [], [], []
        for p in paths:
            node = self.node(p)
            if p == ():
                parent.append(None)
            else:
                if p[:-1] not in index:
                    raise StructureError(f"parent of {p} missing")
                parent.append(index[p[:-1]])
            cost.append(node.cost)
            dem.append({ids[lab] for lab in node.dem})
            ser.append({ids[lab] for lab in node.ser})
        return LcstInstance(parent, cost, dem, ser, range(self.inst.k))

    def materialize(self):
        """``(instance, paths)`` for the whole depth-capped tree."""
        paths = self.walk()
        return self.to_instance(paths), paths


_REQ_CACHE: dict = {}


def _consistency_requirements(twig, qpath):
    """For each internal twig node lacking an in-twig witness: the label key,
    the vertex that must be reached, and the undefined-leaf indices below the
    child sharing the parent's vertex."""
    if twig not in _REQ_CACHE:
        _REQ_CACHE[twig] = _requirements(twig)
    return [(("cons", qpath, j), target, owners) for j, target, owners in _REQ_CACHE[twig]]


def _requirements(twig):
    leaves = []  # (leaf, undefined-leaf index or None)
    internal = []  # (node, [(child, first leaf pos, end leaf pos)])
    undef_count = [0]

    def walk(node):
        start = len(leaves)
        if not node[2]:
            if node[1]:
                leaves.append((node, None))
            else:
                leaves.append((node, undef_count[0]))
                undef_count[0] += 1
            return start, len(leaves)
        entry = (node, [])
        internal.append(entry)
        for c in node[2]:
            lo, hi = walk(c)
            entry[1].append((c, lo, hi))
        return start, len(leaves)

    walk(twig)
    out = []
    for j, (alpha, kids) in enumerate(internal):
        mu = alpha[0]
        same = [k for k in kids if k[0][0] == mu]
        other = [k for k in kids if k[0][0] != mu]
        if not other:
            continue
        (_, lo, hi), target = same[0], other[0][0][0]
        below = leaves[lo:hi]
        if any(b[1] and b[1][1] == target for b, _ in below):
            continue
        owners = frozenset(i for _, i in below if i is not None)
        out.append((j, target, owners))
    return tuple(out)


def build_label_tree(inst: DstInstance, params: ReductionParams) -> LabelTree:
    """Lazy label tree; use :meth:`LabelTree.materialize` for the explicit one."""
    return LabelTree(inst, params)


# ---------------------------------------------------------------- twig forest


@dataclass(frozen=True)
class TwigForestNode:
    twig: tuple
    children: tuple  # aligned with undefined_leaves(twig)

    def depth(self):
        return 1 + max((c.depth() for c in self.children), default=0)

    def twigs(self):
        out = [self.twig]
        for c in self.children:
            out.extend(c.twigs())
        return out


def twig_forest(tau: DecompositionTree, g: int) -> TwigForestNode:
    """Cut ``tau`` into twigs spanning depth strata of height ``g``."""
    if not tau.children[0]:
        raise EmbeddingError("a single-edge decomposition has no twig to embed")
    if not tau.is_binary():
        raise StructureError("twig forest needs a binary decomposition tree")

    def cut(a, rel):
        """(tuple form, tau nodes of undefined leaves in leaf order)."""
        if not tau.children[a]:
            return twig_leaf(tau.mu[a], tau.edge[a]), []
        if rel == g:
            return twig_leaf(tau.mu[a]), [a]
        (t1, l1), (t2, l2) = (cut(c, rel + 1) for c in tau.children[a])
        if t2 < t1:
            (t1, l1), (t2, l2) = (t2, l2), (t1, l1)
        return (tau.mu[a], (), (t1, t2)), l1 + l2

    def build(a):
        twig, roots = cut(a, 0)
        return TwigForestNode(twig, tuple(build(r) for r in roots))

    return build(0)


# ------------------------------------------------------------------ embedding


def embed_optimal(tree: LabelTree, forest: TwigForestNode):
    """Paths selected by following ``forest`` down the label tree."""
    chosen = []

    def visit(ppath, fnode):
        p = tree.node(ppath)
        if p.vertex != fnode.twig[0]:
            raise EmbeddingError(f"p-node vertex {p.vertex} != twig root {fnode.twig[0]}")
        if p.level >= tree.params.depth:
            raise EmbeddingError("twig forest deeper than the label tree depth")
        idx = tree.twig_index(p.vertex, fnode.twig)
        if idx is None:
            raise EmbeddingError(f"twig {fnode.twig} not enumerated at vertex {p.vertex}")
        qpath = ppath + (idx,)
        tree.children(ppath)
        chosen.append(ppath)
        chosen.append(qpath)
        kids = tree.children(qpath)
        if len(kids) != len(fnode.children):
            raise EmbeddingError("undefined leaves do not match forest children")
        for child_p, child_f in zip(kids, fnode.children):
            visit(child_p, child_f)

    visit((), forest)
    return sorted(chosen)


def preorder_paths(paths):
    """Sort paths so every parent precedes its children, siblings by index."""
    return sorted(paths)


# --------------------------------------------------- LCST -> decomposition tree


def lcst_to_decomposition(tree: LabelTree, paths) -> DecompositionTree:
    """Glue the twigs of the selected q-nodes into one decomposition tree."""
    selected = set(paths)
    if () not in selected:
        raise StructureError("solution misses the label-tree root")
    mu, edge, parent = [tree.inst.root], [None], [None]

    def add(m, e, par):
        mu.append(m)
        edge.append(e)
        parent.append(par)
        return len(mu) - 1

    def copy(twig_node_, par, qpath, counter):
        m, e, kids = twig_node_
        if kids:
            a = add(m, None, par)
            for c in kids:
                copy(c, a, qpath, counter)
        elif e:
            add(m, e, par)
        else:
            i = counter[0]
            counter[0] += 1
            a = add(m, None, par)
            attach(a, qpath + (i,))

    def attach(anchor, ppath):
        if ppath not in selected:
            raise StructureError(f"undefined leaf target {ppath} not selected")
        qs = [q for q in tree.children(ppath) if q in selected]
        if not qs:
            raise StructureError(f"p-node {ppath} has no selected child")
        for q in qs:
            twig = tree.node(q).twig
            if twig[0] != mu[anchor]:
                raise StructureError("identified nodes disagree on their vertex")
            counter = [0]
            for c in twig[2]:
                copy(c, anchor, q, counter)

    attach(0, ())
    return DecompositionTree(mu, edge, parent)

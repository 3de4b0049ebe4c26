"""Print every seeded artifact; run twice to check byte-for-byte determinism."""

import random
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from conftest import G1_TEXT, g1  # noqa: E402
from dstq.decomp import RootedTree, build_decomposition_tree  # noqa: E402
from dstq.graph import metric_closure  # noqa: E402
from dstq.lcst import serialize_lcst  # noqa: E402
from dstq.lp.program import build_base_lp, lift  # noqa: E402
from dstq.lp.simplex import solve_lp  # noqa: E402
from dstq.oracle import canonical_optimum_tree  # noqa: E402
from dstq.pipeline import PipelineConfig, bench  # noqa: E402
from dstq.reduction import build_label_tree, choose_params  # noqa: E402
from dstq.rounding import estimate_marginals, round_once  # noqa: E402
from fixtures import rounding_fixture  # noqa: E402
from sa_properties import toy_lp  # noqa: E402


def main():
    closed, _ = metric_closure(g1())
    tau = build_decomposition_tree(RootedTree.from_edges(0, canonical_optimum_tree(closed).edges))
    print("=== decomposition tree")
    print(tau.serialize(), end="")
    raw, _ = build_label_tree(closed, choose_params(2, depth=2)).materialize()
    print("=== label tree")
    print(serialize_lcst(raw), end="")
    inst, x, _ = rounding_fixture(3, max_nodes=20)
    lp = build_base_lp(inst)
    res = solve_lp(lp)
    lifted = solve_lp(lift(toy_lp(random.Random(1), 5), 2))
    print("=== lp basis")
    print(res.basis, res.objective, lifted.basis, lifted.objective)
    print(lp.export(), end="")
    print("=== rounding trace")
    print(round_once(inst, x, 12345).export_trace(), end="")
    print("=== stats csv")
    print(estimate_marginals(inst, x, 300, seed=8).to_csv(), end="")
    with tempfile.TemporaryDirectory() as tmp:
        Path(tmp, "g1.dst").write_text(G1_TEXT)
        print("=== bench csv")
        print(bench(tmp, PipelineConfig(depth=2, seed=5)), end="")


if __name__ == "__main__":
    main()

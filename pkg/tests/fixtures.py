"""Seeded LCST fixtures with distribution-backed lifted solutions."""

import random

from dstq.generators import random_distribution, random_normalized_lcst
from dstq.lp.lifted import distribution_backed


def rounding_fixture(seed: int, max_nodes: int = 40, branching: int = 4, size: int = 4,
                     height: int = 3, s: int = 2, k: int = 2):
    rng = random.Random(seed)
    inst = random_normalized_lcst(rng, max_nodes=max_nodes, height=height, s=s, k=k,
                                  branching=branching)
    support = random_distribution(inst, rng, size=size)
    return inst, distribution_backed(inst, support), support


def rounding_fixtures(count: int, **kw):
    return [rounding_fixture(seed, **kw) for seed in range(count)]

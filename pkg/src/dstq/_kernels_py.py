"""Reference implementation of the support-table kernels in plain Python.

A support table is a 2-D ``uint64`` array: row ``i`` is the bitset of events
that hold in support point ``i`` (event ``e`` is bit ``e % 64`` of word
``e // 64``). Weights are ``int64`` numerators over a shared denominator.
"""


def masked_weight_sum(bits, weights, events) -> int:
    """Total weight of the rows in which every event of ``events`` is set."""
    probes = [(e >> 6, 1 << (e & 63)) for e in events]
    total = 0
    for row, w in zip(bits.tolist(), weights.tolist()):
        for word, mask in probes:
            if not row[word] & mask:
                break
        else:
            total += w
    return total


def rows_with_event(bits, event) -> list:
    """Indices of the rows in which ``event`` is set."""
    word, mask = event >> 6, 1 << (event & 63)
    return [i for i, row in enumerate(bits[:, word].tolist()) if row & mask]

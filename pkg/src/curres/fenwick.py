"""Binary indexed tree over site occupation counts.

Trees are stored 1-based in an int64 array of length ``n + 1`` (slot 0 unused)
so the kernels can be called from inside jitted simulation loops.
"""
import numpy as np

from ._jit import jit


@jit
def fw_build(counts):
    n = counts.shape[0]
    tree = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        tree[i] += counts[i - 1]
        parent = i + (i & -i)
        if parent <= n:
            tree[parent] += tree[i]
    return tree


@jit
def fw_add(tree, site, delta):
    n = tree.shape[0] - 1
    i = site + 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@jit
def fw_prefix(tree, stop):
    """Sum of counts at sites ``0 .. stop-1``."""
    s = 0
    i = stop
    while i > 0:
        s += tree[i]
        i -= i & -i
    return s


@jit
def fw_find(tree, k):
    """Site holding the particle of 0-based rank ``k`` in site order.

    That is the smallest site ``x`` with ``prefix(x + 1) > k``. The caller
    guarantees ``0 <= k < total``.
    """
    n = tree.shape[0] - 1
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    rem = k
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        step //= 2
    return pos


class FenwickTree:
    """Prefix/suffix sums and rank queries over non-negative integer counts."""

    def __init__(self, counts):
        counts = np.asarray(counts, dtype=np.int64)
        self.size = counts.shape[0]
        self.tree = fw_build(counts)

    def add(self, site, delta):
        fw_add(self.tree, site, delta)

    def prefix(self, stop):
        return int(fw_prefix(self.tree, stop))

    def find(self, k):
        return int(fw_find(self.tree, k))

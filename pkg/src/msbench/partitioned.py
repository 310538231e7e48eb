"""Block 2x2 view ``C = [D E; F G]`` of a (reordered) system."""
from functools import cached_property

import numpy as np

from .graph import physics_partition, saddle_partition
from .sparse import Permutation, SparseMatrix, extract_block, permute

__all__ = ["PartitionedMatrix", "partition_system"]


class PartitionedMatrix:
    """A square system split after its first ``p`` unknowns.

    Parameters
    ----------
    C : SparseMatrix
        The system in its working (possibly reordered) numbering.
    p : int
        Dimension of the (1,1) block ``D``.
    d_block_ranges : list of range, optional
        Interior blocks of ``D``. Off-diagonal coupling between them must be
        zero; it is checked on construction. Defaults to one block.
    permutation : Permutation, optional
        ``permutation.forward[new] = old`` relative to the caller's original
        numbering; identity when omitted.
    d_cuts, g_cuts : array, optional
        Offsets in ``D``/``G`` at which aggregates may start. Defaults to
        every index.
    """

    def __init__(self, C, p, d_block_ranges=None, permutation=None, d_cuts=None,
                 g_cuts=None, check=True):
        if C.nrows != C.ncols:
            raise ValueError("C must be square")
        if not 0 < p <= C.nrows:
            raise ValueError(f"p={p} outside (0, {C.nrows}]")
        self.C = C
        self.p = int(p)
        self.n = C.nrows
        self.d_block_ranges = list(d_block_ranges) if d_block_ranges else [range(0, self.p)]
        self.permutation = permutation or Permutation.identity(self.n)
        self.d_cuts = np.arange(self.p + 1) if d_cuts is None else np.asarray(d_cuts)
        self.g_cuts = np.arange(self.n_g + 1) if g_cuts is None else np.asarray(g_cuts)
        if check:
            self._check_blocks()

    def _check_blocks(self):
        covered = 0
        for r in self.d_block_ranges:
            if r.start != covered or r.stop <= r.start:
                raise ValueError("d_block_ranges must tile [0, p) contiguously")
            covered = r.stop
        if covered != self.p:
            raise ValueError("d_block_ranges do not cover D")
        if len(self.d_block_ranges) > 1:
            owner = np.empty(self.p, dtype=np.int64)
            for k, r in enumerate(self.d_block_ranges):
                owner[r.start:r.stop] = k
            D = self.D
            if np.any(owner[D.row_ids()] != owner[D.indices]):
                raise ValueError("D has coupling between distinct interior blocks")

    @property
    def n_g(self):
        return self.n - self.p

    @cached_property
    def D(self):
        return extract_block(self.C, (0, self.p), (0, self.p))

    @cached_property
    def E(self):
        return extract_block(self.C, (0, self.p), (self.p, self.n))

    @cached_property
    def F(self):
        return extract_block(self.C, (self.p, self.n), (0, self.p))

    @cached_property
    def G(self):
        return extract_block(self.C, (self.p, self.n), (self.p, self.n))

    @classmethod
    def from_blocks(cls, D, E, F, G, d_block_ranges=None):
        import scipy.sparse as sp

        C = sp.bmat([[D.to_scipy(), E.to_scipy()], [F.to_scipy(), G.to_scipy()]])
        return cls(SparseMatrix.from_scipy(C), D.nrows, d_block_ranges)

    def to_working(self, v):
        """Map a vector from the original numbering to the working one."""
        return np.asarray(v)[self.permutation.forward]

    def to_original(self, v):
        return np.asarray(v)[self.permutation.inverse]

    def __repr__(self):
        return (f"PartitionedMatrix(n={self.n}, p={self.p}, "
                f"blocks={len(self.d_block_ranges)})")


def partition_system(C, p, target_blocks, mode="saddle"):
    """Reorder ``C`` so its (1,1) block splits into independent blocks.

    ``mode="saddle"`` dissects the whole system with zero-diagonal unknowns
    kept next to a partner; ``mode="physics"`` keeps the first ``p``
    unknowns as the (1,1) block and dissects only that block. ``mode="none"``
    keeps the ordering and uses one (1,1) block.
    """
    if mode == "none":
        return PartitionedMatrix(C, p)
    if mode == "saddle":
        part = saddle_partition(C, target_blocks)
    elif mode == "physics":
        part = physics_partition(C, p, target_blocks)
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    Cp = permute(C, part.permutation)
    return PartitionedMatrix(
        Cp, part.p, part.d_block_ranges, part.permutation, part.d_cuts, part.g_cuts
    )

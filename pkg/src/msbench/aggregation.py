"""Aggregates over the (2,2)-block unknowns and their (1,1)-block companions."""
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import neighborhood

__all__ = [
    "AggregateSet",
    "aggregate_by_numbering",
    "aggregate_overlapped",
    "aggregate_by_edges",
    "equal_sizes",
    "snap_sizes",
    "overlap_widths",
]


@dataclass(frozen=True)
class AggregateSet:
    """Ordered aggregates over ``G``.

    Attributes
    ----------
    g_sets : list of ndarray
        Indices into ``G`` of each aggregate, overlap included.
    base_ranges : list of range
        Disjoint ownership ranges; aggregate ``i`` owns the columns of
        ``base_ranges[i]`` when the approximation is assembled.
    d_sets : list of ndarray
        Companion indices into ``D``.
    overlaps : ndarray
        Width ``w_i`` shared with the next aggregate; the last is 0.
    scheme : str
        ``"numbering"``, ``"numbering-overlapped"`` or ``"edge"``.
    radius : int or None
        Path radius for the edge scheme.
    """

    g_sets: list
    base_ranges: list
    d_sets: list
    overlaps: np.ndarray
    scheme: str
    radius: int = None

    @property
    def k(self):
        return len(self.g_sets)

    @property
    def n_g(self):
        return self.base_ranges[-1].stop

    @property
    def sizes(self):
        return [len(r) for r in self.base_ranges]


def _ranges(n_g, sizes):
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("at least one aggregate is required")
    if any(s < 1 for s in sizes):
        raise ValueError("aggregate sizes must be positive")
    if sum(sizes) != n_g:
        raise ValueError(f"aggregate sizes sum to {sum(sizes)}, expected {n_g}")
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def aggregate_by_numbering(n_g, sizes):
    """Consecutive index blocks; the ``D`` companion uses the same local indices."""
    base = _ranges(n_g, sizes)
    g_sets = [np.arange(r.start, r.stop) for r in base]
    return AggregateSet(
        g_sets=g_sets,
        base_ranges=base,
        d_sets=[s.copy() for s in g_sets],
        overlaps=np.zeros(len(base), dtype=np.int64),
        scheme="numbering",
    )


def overlap_widths(sizes, width, clip=True, cuts=None):
    """Per-aggregate widths for a uniform requested ``width``.

    Widths are clipped to ``min(sizes[i], sizes[i+1]) - 1``; the last is 0.
    With ``cuts``, each overlapped end is pulled back to an allowed cut.
    """
    sizes = [int(s) for s in sizes]
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    out = []
    clipped = False
    for i in range(len(sizes)):
        if i == len(sizes) - 1:
            out.append(0)
            continue
        limit = min(sizes[i], sizes[i + 1]) - 1
        w = int(width)
        if w > limit:
            if not clip:
                raise ValueError(f"overlap {w} for aggregate {i} exceeds bound {limit}")
            clipped = True
            w = limit
        if cuts is not None and w > 0:
            end = bounds[i + 1] + w
            allowed = cuts[(cuts >= bounds[i + 1]) & (cuts <= end)]
            w = int(allowed.max() - bounds[i + 1])
        out.append(max(w, 0))
    if clipped:
        warnings.warn(
            f"overlap {width} clipped to satisfy w_i < size of the aggregates it joins",
            stacklevel=2,
        )
    return out


def aggregate_overlapped(n_g, sizes, widths, clip=False):
    """Aggregate ``i`` spans ``[r_i, r_{i+1} - 1 + w_i]``.

    ``widths[i]`` must be smaller than both ``sizes[i]`` and ``sizes[i+1]``
    and the last width must be 0. With ``clip=True`` too-wide overlaps are
    reduced to the bound with a warning instead of raising.
    """
    base = _ranges(n_g, sizes)
    widths = [int(w) for w in widths]
    if len(widths) != len(base):
        raise ValueError("need one overlap width per aggregate")
    if any(w < 0 for w in widths):
        raise ValueError("overlap widths must be non-negative")
    if widths[-1] != 0:
        if not clip:
            raise ValueError("the last overlap width must be 0")
        widths[-1] = 0
    fixed = []
    for i, w in enumerate(widths[:-1]):
        limit = min(len(base[i]), len(base[i + 1])) - 1
        if w > limit:
            if not clip:
                raise ValueError(
                    f"overlap {w} for aggregate {i} violates w_i < {limit + 1}"
                )
            warnings.warn(f"overlap {w} for aggregate {i} clipped to {limit}", stacklevel=2)
            w = limit
        fixed.append(w)
    fixed.append(0)
    g_sets = [np.arange(r.start, r.stop + w) for r, w in zip(base, fixed)]
    return AggregateSet(
        g_sets=g_sets,
        base_ranges=base,
        d_sets=[s.copy() for s in g_sets],
        overlaps=np.asarray(fixed, dtype=np.int64),
        scheme="numbering" if not any(fixed) else "numbering-overlapped",
    )


def aggregate_by_edges(g, p, g_ranges, radius, d_cuts=None):
    """Pair each aggregate with the ``D`` nodes within ``radius`` in the graph of C.

    ``g`` is the adjacency graph of the whole system, whose first ``p``
    nodes are ``D`` and the rest ``G``. ``g_ranges`` are disjoint index
    ranges (or arrays) into ``G``. When ``d_cuts`` (sorted group starts in
    ``D``, ending with ``p``) is given, each ``D`` set is widened to whole
    groups.
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    n_g = g.n - p
    g_sets = [np.asarray(list(r), dtype=np.int64) for r in g_ranges]
    covered = np.zeros(n_g, dtype=np.int64)
    for s in g_sets:
        covered[s] += 1
    if np.any(covered != 1):
        raise ValueError("g_ranges must partition the G indices")
    d_sets = []
    for i, s in enumerate(g_sets):
        near = neighborhood(g, s + p, radius)
        d = near[near < p]
        if d_cuts is not None and len(d):
            grp = np.searchsorted(d_cuts, d, side="right") - 1
            d = np.concatenate(
                [np.arange(d_cuts[k], d_cuts[k + 1]) for k in np.unique(grp)]
            )
        if len(d) == 0:
            raise ValueError(f"aggregate {i} has no D node within radius {radius}")
        d_sets.append(d)
    base = []
    for s in g_sets:
        base.append(range(int(s.min()), int(s.max()) + 1))
    return AggregateSet(
        g_sets=g_sets,
        base_ranges=base,
        d_sets=d_sets,
        overlaps=np.zeros(len(g_sets), dtype=np.int64),
        scheme="edge",
        radius=int(radius),
    )


def equal_sizes(n_g, sz):
    """Aggregates of size ``sz``; the last one absorbs the remainder."""
    if sz < 1:
        raise ValueError("sz must be positive")
    k = max(n_g // sz, 1)
    sizes = [sz] * k
    sizes[-1] = n_g - sz * (k - 1)
    return sizes


def snap_sizes(sizes, cuts):
    """Move each aggregate boundary to the nearest allowed cut.

    ``cuts`` is a sorted array of admissible offsets including 0 and the
    total. Aggregates that collapse are merged into their neighbour.
    """
    cuts = np.asarray(cuts)
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    total = bounds[-1]
    snapped = [0]
    for b in bounds[1:-1]:
        j = np.searchsorted(cuts, b)
        cand = [cuts[x] for x in (j - 1, j) if 0 <= x < len(cuts)]
        c = int(min(cand, key=lambda v: (abs(v - b), v)))
        if snapped[-1] < c < total:
            snapped.append(c)
    snapped.append(int(total))
    return [b - a for a, b in zip(snapped[:-1], snapped[1:])]

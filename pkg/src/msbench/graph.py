"""Adjacency graphs, path-length neighborhoods and nested dissection."""
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .sparse import Permutation, SparseMatrix

__all__ = [
    "AdjacencyGraph",
    "SeparatorPartition",
    "SaddlePartition",
    "build_graph",
    "neighborhood",
    "nested_dissection",
    "saddle_pairing",
    "saddle_partition",
    "physics_partition",
]


@dataclass(frozen=True)
class AdjacencyGraph:
    """Directed pattern graph; ``u -> v`` iff entry (u, v) is nonzero and u != v.

    ``sym_indptr``/``sym_indices`` hold the undirected closure used for
    traversal.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    sym_indptr: np.ndarray = field(repr=False)
    sym_indices: np.ndarray = field(repr=False)

    def neighbors(self, u):
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def undirected_neighbors(self, u):
        return self.sym_indices[self.sym_indptr[u]:self.sym_indptr[u + 1]]

    @property
    def n_edges(self):
        return int(self.indptr[-1])

    def edges(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return list(zip(rows.tolist(), self.indices.tolist()))

    def subgraph(self, nodes):
        """Undirected induced subgraph on ``nodes`` (re-indexed in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        sym = sp.csr_matrix(
            (np.ones(len(self.sym_indices)), self.sym_indices, self.sym_indptr),
            shape=(self.n, self.n),
        )
        return _from_pattern(sym[nodes][:, nodes])


def _from_pattern(m):
    m = sp.csr_matrix(m)
    m.setdiag(0)
    m.eliminate_zeros()
    m.data[:] = 1.0
    m.sort_indices()
    sym = (m + m.T).tocsr()
    sym.data[:] = 1.0
    sym.sort_indices()
    return AdjacencyGraph(
        n=m.shape[0],
        indptr=m.indptr.astype(np.int64),
        indices=m.indices.astype(np.int64),
        sym_indptr=sym.indptr.astype(np.int64),
        sym_indices=sym.indices.astype(np.int64),
    )


def build_graph(A):
    if A.nrows != A.ncols:
        raise ValueError("build_graph needs a square matrix")
    return _from_pattern(A.to_scipy())


def _bfs_levels(indptr, indices, root, active=None):
    """BFS distances from ``root``; neighbours are visited in increasing index."""
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[root] = 0
    order = [root]
    q = deque([root])
    while q:
        u = q.popleft()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if dist[v] < 0 and (active is None or active[v]):
                dist[v] = dist[u] + 1
                order.append(int(v))
                q.append(v)
    return dist, order


def neighborhood(g, seeds, radius):
    """All nodes within undirected path length ``radius`` of any seed (sorted)."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    seeds = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if len(seeds) and (seeds.min() < 0 or seeds.max() >= g.n):
        raise IndexError("seed outside the graph")
    seen = np.zeros(g.n, dtype=bool)
    seen[seeds] = True
    frontier = seeds
    for _ in range(radius):
        if len(frontier) == 0:
            break
        nxt = np.concatenate(
            [g.sym_indices[g.sym_indptr[u]:g.sym_indptr[u + 1]] for u in frontier]
        ) if len(frontier) else np.zeros(0, dtype=np.int64)
        nxt = np.unique(nxt)
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return np.flatnonzero(seen)


@dataclass(frozen=True)
class SeparatorPartition:
    """Nested-dissection reordering: interior blocks first, separator last.

    ``permutation.forward[new] = old``. ``n_blocks`` is the number of
    non-empty interior blocks actually produced.
    """

    permutation: Permutation
    block_ranges: list
    separator_range: range

    @property
    def n_blocks(self):
        return len(self.block_ranges)

    @property
    def n(self):
        return len(self.permutation)


def _components(indptr, indices, nodes):
    """Connected components of the subgraph induced on ``nodes``."""
    n = len(indptr) - 1
    active = np.zeros(n, dtype=bool)
    active[nodes] = True
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in sorted(int(x) for x in nodes):
        if seen[s]:
            continue
        _, order = _bfs_levels(indptr, indices, s, active)
        seen[order] = True
        comps.append(sorted(order))
    return comps


def _pseudo_peripheral(indptr, indices, nodes, active):
    root = int(min(nodes))
    dist, _ = _bfs_levels(indptr, indices, root, active)
    ecc = dist.max()
    while True:
        far = np.flatnonzero(dist == ecc)
        cand = int(far.min())
        d2, _ = _bfs_levels(indptr, indices, cand, active)
        if d2.max() > ecc:
            root, dist, ecc = cand, d2, d2.max()
        else:
            return root


def _bisect(indptr, indices, nodes):
    """Split ``nodes`` into (left, right, separator) with no left-right edges."""
    nodes = sorted(int(x) for x in nodes)
    comps = sorted(_components(indptr, indices, nodes), key=lambda c: (-len(c), c[0]))
    if len(comps) > 1:
        if 2 * len(comps[0]) > len(nodes) and len(comps[0]) >= 3:
            # one dominant component: split it, then top up the lighter side
            left, right, sep = _bisect(indptr, indices, comps[0])
            halves = [list(left), list(right)]
            rest = comps[1:]
        else:
            halves, sep, rest = [[], []], [], comps
        # pack whole components, largest first, into the lighter half
        for comp in rest:
            tgt = 0 if len(halves[0]) <= len(halves[1]) else 1
            halves[tgt].extend(comp)
        return sorted(halves[0]), sorted(halves[1]), sorted(sep)
    if len(nodes) < 3:
        return nodes, [], []
    n = len(indptr) - 1
    active = np.zeros(n, dtype=bool)
    active[nodes] = True
    root = _pseudo_peripheral(indptr, indices, nodes, active)
    _, order = _bfs_levels(indptr, indices, root, active)
    half = (len(order) + 1) // 2
    in_right = np.zeros(n, dtype=bool)
    in_right[order[half:]] = True
    left, sep = [], []
    for u in order[:half]:
        nb = indices[indptr[u]:indptr[u + 1]]
        (sep if in_right[nb].any() else left).append(u)
    return sorted(left), sorted(order[half:]), sorted(sep)


def _dissect(g, target_blocks):
    if target_blocks < 1:
        raise ValueError("target_blocks must be at least 1")
    if target_blocks > max(g.n, 1):
        raise ValueError(f"target_blocks={target_blocks} exceeds the node count {g.n}")
    levels = int(np.ceil(np.log2(target_blocks))) if target_blocks > 1 else 0
    parts = [list(range(g.n))]
    seps = []
    for _ in range(levels):
        nxt = []
        for part in parts:
            if len(part) < 2:
                nxt.append(part)
                continue
            left, right, sep = _bisect(g.sym_indptr, g.sym_indices, part)
            nxt.extend([left, right])
            seps.extend(sep)
        parts = nxt
    parts = [sorted(p) for p in parts if p]
    parts.sort(key=lambda p: p[0])
    return parts, sorted(seps)


def _assemble(parts, seps):
    forward, ranges, pos = [], [], 0
    for p in parts:
        forward.extend(p)
        ranges.append(range(pos, pos + len(p)))
        pos += len(p)
    forward.extend(seps)
    return Permutation.from_forward(forward), ranges, range(pos, pos + len(seps))


def nested_dissection(g, target_blocks):
    """Recursive level-set bisection with vertex separators.

    Bisection depth is ``ceil(log2(target_blocks))``; halves too small to
    split are kept whole, so fewer blocks than requested may result.
    """
    parts, seps = _dissect(g, target_blocks)
    perm, ranges, srange = _assemble(parts, seps)
    return SeparatorPartition(perm, ranges, srange)


# saddle-point aware orderings -------------------------------------------


def saddle_pairing(A):
    """Pair every zero-diagonal node with one neighbour.

    Nodes with a zero diagonal are visited in increasing order and matched
    to their unmatched undirected neighbour of largest index that itself has
    a nonzero diagonal. Returns a list of supernodes (tuples ordered as
    ``(partner, node)``) covering all nodes, sorted by smallest member.
    """
    g = build_graph(A)
    diag = A.diagonal()
    matched = np.full(A.nrows, -1, dtype=np.int64)
    for u in np.flatnonzero(diag == 0.0):
        nb = g.undirected_neighbors(u)
        nb = nb[(matched[nb] < 0) & (diag[nb] != 0.0)]
        if len(nb) == 0:
            continue
        v = int(nb.max())
        matched[u] = v
        matched[v] = u
    groups = []
    for u in range(A.nrows):
        m = matched[u]
        if m < 0:
            groups.append((u,))
        elif diag[u] == 0.0:
            groups.append((int(m), u))
    groups.sort(key=min)
    return groups


@dataclass(frozen=True)
class SaddlePartition:
    """Reordering of a whole system into [interior | separator].

    ``p`` is the interior size (the new (1,1) block); ``d_block_ranges``
    are the interior blocks. ``d_cuts``/``g_cuts`` list the offsets inside
    each side where a supernode starts, which are the only safe places to
    cut aggregates.
    """

    permutation: Permutation
    p: int
    d_block_ranges: list
    d_cuts: np.ndarray
    g_cuts: np.ndarray
    kind: str = "saddle"


def _cuts(groups):
    sizes = [len(g) for g in groups]
    return np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)


def _rcm(g, nodes):
    """Reverse Cuthill-McKee order of the subgraph induced on ``nodes``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) < 3:
        return nodes.tolist()
    sub = g.subgraph(nodes)
    pat = sp.csr_matrix(
        (np.ones(len(sub.sym_indices)), sub.sym_indices, sub.sym_indptr), shape=(sub.n, sub.n)
    )
    return nodes[reverse_cuthill_mckee(pat, symmetric_mode=True)].tolist()


def saddle_partition(A, target_blocks, local_order="rcm"):
    """Nested dissection of the whole system on its supernode quotient graph.

    Zero-diagonal unknowns travel with their paired neighbour so that every
    interior block and every separator slice stays nonsingular. Interior
    blocks form the (1,1) block; the separator becomes the (2,2) block.
    With ``local_order="rcm"`` supernodes inside each interior block and
    inside the separator are listed in reverse Cuthill-McKee order, which
    keeps incomplete factors narrow; ``"index"`` keeps increasing index.
    """
    groups = saddle_pairing(A)
    s = len(groups)
    owner = np.empty(A.nrows, dtype=np.int64)
    for k, grp in enumerate(groups):
        owner[list(grp)] = k
    pat = A.to_scipy()
    P = sp.csr_matrix((np.ones(A.nrows), (np.arange(A.nrows), owner)), shape=(A.nrows, s))
    abs_pat = sp.csr_matrix((np.ones(pat.nnz), pat.indices, pat.indptr), shape=pat.shape)
    quotient = _from_pattern(P.T @ abs_pat @ P)
    parts, seps = _dissect(quotient, min(target_blocks, s))
    if local_order == "rcm":
        parts = [_rcm(quotient, part) for part in parts]
        seps = _rcm(quotient, seps)
    forward, ranges, d_cuts, pos = [], [], [], 0
    for part in parts:
        blk = [groups[k] for k in part]
        for grp in blk:
            d_cuts.append(pos)
            forward.extend(grp)
            pos += len(grp)
        ranges.append(range(ranges[-1].stop if ranges else 0, pos))
    p = pos
    d_cuts.append(p)
    sep_groups = [groups[k] for k in seps]
    for grp in sep_groups:
        forward.extend(grp)
    return SaddlePartition(
        permutation=Permutation.from_forward(forward),
        p=p,
        d_block_ranges=ranges,
        d_cuts=np.asarray(d_cuts, dtype=np.int64),
        g_cuts=_cuts(sep_groups),
    )


def physics_partition(A, p, target_blocks):
    """Keep the given velocity/pressure split; dissect only the (1,1) block.

    The (1,1) block's separator nodes are moved to the front of the (2,2)
    side, ahead of the original trailing unknowns.
    """
    D = SparseMatrix.from_scipy(A.to_scipy()[:p, :p])
    part = nested_dissection(build_graph(D), target_blocks)
    fwd = part.permutation.forward
    interior = fwd[: part.separator_range.start]
    sep = fwd[part.separator_range.start:]
    forward = np.concatenate((interior, sep, np.arange(p, A.nrows)))
    new_p = len(interior)
    n_g = A.nrows - new_p
    return SaddlePartition(
        permutation=Permutation.from_forward(forward),
        p=new_p,
        d_block_ranges=list(part.block_ranges),
        d_cuts=np.arange(new_p + 1, dtype=np.int64),
        g_cuts=np.arange(n_g + 1, dtype=np.int64),
        kind="physics",
    )

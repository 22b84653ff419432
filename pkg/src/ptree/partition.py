"""Dyadic partition trees over a rectangular sample space.

Two constructions are provided:

* :func:`build_partial_tree` splits every node on an observed order
  statistic (the sample median by default).  The observation used as the
  cut is taken out of both children, and so is every other observation
  that ties with a cut value.
* :func:`build_fixed_tree` splits every node at the geometric midpoint.
  Nothing is removed and a point sitting exactly on a cut goes left.

In ``d > 1`` dimensions a node records the split candidate and the child
counts for *every* axis.  The realised split axis of these trees is chosen
round robin (``depth % d``); models that treat the axis as latent use the
full expansion in :mod:`ptree.multivariate` instead.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DepthNegative, EmptyDomain, OutOfDomain, ZeroMass


class SplitMode(str, Enum):
    MEDIAN_ON_DATA = "MedianOnData"
    FIXED_MIDPOINT = "FixedMidpoint"


@dataclass(frozen=True)
class Region:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise EmptyDomain("region bounds must be non-empty and congruent")
        for a, b in zip(self.lower, self.upper):
            if not b > a:
                raise EmptyDomain(f"degenerate extent [{a}, {b}]")

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, other: "Region"):
        return all(a <= c and d <= b for a, b, c, d in
                   zip(self.lower, self.upper, other.lower, other.upper))

    def split(self, j, cut):
        left_upper = list(self.upper)
        left_upper[j] = cut
        right_lower = list(self.lower)
        right_lower[j] = cut
        return (Region(self.lower, tuple(left_upper)),
                Region(tuple(right_lower), self.upper))


@dataclass(frozen=True)
class SplitSpec:
    """How a node is cut.

    ``cuts`` holds the candidate cut coordinate for every axis; ``location``
    is the one used on the realised ``dimension``.
    """

    mode: SplitMode
    dimension: int
    location: float
    cuts: tuple
    order_index: Optional[int] = None
    anchor_points: tuple = ()


@dataclass
class PartitionNode:
    region: Region
    n_total: int
    depth: int
    counts_left: tuple = ()
    counts_right: tuple = ()
    tie_count: int = 0
    split: Optional[SplitSpec] = None
    children: Optional[tuple] = None
    index: int = -1

    @property
    def is_leaf(self):
        return self.children is None

    @property
    def mode(self):
        return None if self.split is None else self.split.mode

    def child_counts(self, j=None):
        """``(n(A_l), n(A_r))`` along axis j (the realised axis by default)."""
        if j is None:
            j = self.split.dimension
        return self.counts_left[j], self.counts_right[j]

    def iter_preorder(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if node.children is not None:
                stack.append(node.children[1])
                stack.append(node.children[0])

    def locate(self, point):
        """Return the root-to-leaf list of nodes whose regions hold ``point``.

        A query on a cut goes left, matching the fixed-tree convention.
        """
        path = [self]
        node = self
        while node.children is not None:
            j = node.split.dimension
            node = node.children[0] if point[j] <= node.split.location else node.children[1]
            path.append(node)
        return path


@dataclass
class Dataset:
    points: np.ndarray
    bounds: Region = field(default_factory=lambda: Region((0.0,), (1.0,)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        d = self.bounds.dim
        if pts.size == 0:
            pts = pts.reshape(0, d)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
        if pts.shape[1] != d:
            raise ValueError(f"points have {pts.shape[1]} columns, bounds have {d}")
        lo = np.asarray(self.bounds.lower)
        hi = np.asarray(self.bounds.upper)
        if pts.shape[0] and (np.any(pts < lo) or np.any(pts > hi)):
            raise OutOfDomain("observations outside the declared bounds")
        self.points = pts

    @classmethod
    def unit(cls, points, d=None):
        pts = np.asarray(points, dtype=float)
        if d is None:
            d = 1 if pts.ndim <= 1 else pts.shape[1]
        return cls(pts, Region((0.0,) * d, (1.0,) * d))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.bounds.dim


def order_index(n, p):
    """k = ceil(n p), clipped to 1..n."""
    return min(max(int(math.ceil(n * p)), 1), n)


def _check(data, max_depth, p=0.5):
    if max_depth < 0:
        raise DepthNegative(f"max_depth must be >= 0, got {max_depth}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile must lie in (0, 1), got {p}")
    Region(tuple(data.bounds.lower), tuple(data.bounds.upper))


def _number(root):
    for i, node in enumerate(root.iter_preorder()):
        node.index = i
    return root


def build_partial_tree(data: Dataset, max_depth: int, p: float = 0.5,
                       leaf_size: Optional[int] = None) -> PartitionNode:
    """Build the data-dependent tree T(x).

    Parameters
    ----------
    data : Dataset
    max_depth : int
        Nodes at this depth are leaves.
    p : float
        Quantile of the cut; the anchor on axis j is the ``ceil(n p)``-th
        order statistic of the node's points along j.
    leaf_size : int, optional
        Nodes holding at most this many points are leaves.  Defaults to the
        dimension ``d`` (so ``n(A) <= 1`` in one dimension).
    """
    _check(data, max_depth, p)
    d = data.dim
    if leaf_size is None:
        leaf_size = d
    pts = data.points

    def grow(idx, region, depth):
        n = idx.size
        node = PartitionNode(region, n, depth)
        if n <= leaf_size or depth >= max_depth:
            return node
        sub = pts[idx]
        k = order_index(n, p)
        cuts = []
        anchors = []
        for j in range(d):
            col = sub[:, j]
            cut = float(np.partition(col, k - 1)[k - 1])
            cuts.append(cut)
            anchors.append(tuple(float(v) for v in sub[np.flatnonzero(col == cut)[0]]))
        # an anchor on the node boundary leaves a zero-mass child
        if any(not region.lower[j] < cuts[j] < region.upper[j] for j in range(d)):
            return node
        removed = np.zeros(n, dtype=bool)
        for j in range(d):
            removed |= sub[:, j] == cuts[j]
        keep = ~removed
        left = [int(np.count_nonzero(keep & (sub[:, j] < cuts[j]))) for j in range(d)]
        right = [int(np.count_nonzero(keep & (sub[:, j] > cuts[j]))) for j in range(d)]
        jr = depth % d
        node.counts_left = tuple(left)
        node.counts_right = tuple(right)
        node.tie_count = int(np.count_nonzero(removed))
        node.split = SplitSpec(SplitMode.MEDIAN_ON_DATA, jr, cuts[jr], tuple(cuts),
                               k, tuple(anchors))
        lreg, rreg = region.split(jr, cuts[jr])
        col = sub[:, jr]
        node.children = (grow(idx[keep & (col < cuts[jr])], lreg, depth + 1),
                         grow(idx[keep & (col > cuts[jr])], rreg, depth + 1))
        return node

    return _number(grow(np.arange(data.n), data.bounds, 0))


def build_fixed_tree(data: Dataset, max_depth: int) -> PartitionNode:
    """Build the fixed midpoint tree T restricted to nodes that hold data."""
    _check(data, max_depth)
    d = data.dim
    pts = data.points

    def grow(idx, region, depth):
        n = idx.size
        node = PartitionNode(region, n, depth)
        if n <= 1 or depth >= max_depth:
            return node
        sub = pts[idx]
        cuts = tuple(0.5 * (a + b) for a, b in zip(region.lower, region.upper))
        left = tuple(int(np.count_nonzero(sub[:, j] <= cuts[j])) for j in range(d))
        node.counts_left = left
        node.counts_right = tuple(n - c for c in left)
        jr = depth % d
        node.split = SplitSpec(SplitMode.FIXED_MIDPOINT, jr, cuts[jr], cuts)
        lreg, rreg = region.split(jr, cuts[jr])
        go_left = sub[:, jr] <= cuts[jr]
        node.children = (grow(idx[go_left], lreg, depth + 1),
                         grow(idx[~go_left], rreg, depth + 1))
        return node

    return _number(grow(np.arange(data.n), data.bounds, 0))


def node_base_mass(node: PartitionNode, H, j: Optional[int] = None):
    """Conditional base masses ``(H(A_{j,l}|A), H(A_{j,r}|A))`` of a node's children."""
    if node.split is None:
        raise ValueError("leaf nodes have no children")
    if j is None:
        j = node.split.dimension
    lo, hi = node.region.lower[j], node.region.upper[j]
    left = float(H.conditional_mass(j, lo, hi, node.split.cuts[j]))
    if not 0.0 <= left <= 1.0:
        raise ZeroMass(f"invalid conditional mass {left}")
    return left, 1.0 - left

"""Grid embeddings of finite metric spaces and the periodic gadgets built on them.

Two gadget families are produced.  ``phi`` gadgets have a prescribed packing
radius and encode a grid point through a signature block placed next to a
dense corner block; ``psi`` gadgets have a prescribed covering radius and
encode the grid point through clusters sitting on an empty row of a cubic
scaffold.  Both are tuned so their density equals a given value exactly.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .bottleneck import (
    Budget,
    Matching,
    _chord,
    _rotation_2d,
    bottleneck_periodic_upper,
    counting_lower_bound,
)
from .geometry import (
    TOL,
    FinitePointSet,
    Lattice,
    PeriodicPointSet,
    RadiusInterval,
    covering_radius,
    max_ball_count,
    points_in_ball,
)

# relative enlargement of the corner grid spacing over 2r
PACKING_MARGIN = 1e-3
# relative shrinkage of the scaffold spacing below the covering limit
COVERING_MARGIN = 0.01
MAX_FIXED_POINT_ROUNDS = 10


# ----------------------------------------------------------------------------
# pairing of (m, n)


def pairing_T(m: int, n: int) -> int:
    """Diagonal enumeration of pairs of positive integers, starting at T(1, 1) = 1."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    return m + (m + n - 2) * (m + n - 1) // 2


def pairing_T_inverse(T: int) -> tuple[int, int]:
    if T < 1:
        raise ValueError("T must be positive")
    # diagonal k holds the pairs with m + n = k + 1
    k = math.isqrt(2 * T)
    while k * (k + 1) // 2 < T:
        k += 1
    while (k - 1) * k // 2 >= T:
        k -= 1
    m = T - (k - 1) * k // 2
    return m, k + 1 - m


# ----------------------------------------------------------------------------
# grids and finite metric spaces


@dataclass(frozen=True)
class GridPoint:
    """A point of ([0, tm] ∩ tN)^n."""

    m: int
    n: int
    t: float
    coords: tuple

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not self.t > 0:
            raise ValueError("t must be positive")
        coords = tuple(float(c) for c in self.coords)
        if len(coords) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(coords)}")
        for c in coords:
            k = c / self.t
            if abs(k - round(k)) > 1e-9 or not -1e-9 <= k <= self.m + 1e-9:
                raise ValueError(f"coordinate {c} is not a multiple of t in [0, tm]")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_indices(cls, m: int, n: int, t: float, indices) -> "GridPoint":
        return cls(m, n, t, tuple(t * int(k) for k in indices))

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(int(round(c / self.t)) for c in self.coords)


def grid_points(m: int, n: int, t: float = 1.0) -> list[GridPoint]:
    """All (m + 1)^n points of the grid, in lexicographic order."""
    return [GridPoint.from_indices(m, n, t, idx)
            for idx in itertools.product(range(m + 1), repeat=n)]


def sup_distance(a: GridPoint, b: GridPoint) -> float:
    if (a.m, a.n, a.t) != (b.m, b.n, b.t):
        raise ValueError("grid points come from different grids")
    return max(abs(x - y) for x, y in zip(a.coords, b.coords))


class FiniteMetricSpace:
    def __init__(self, distances, tol: float = 1e-9):
        dist = np.asarray(distances, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.allclose(dist, dist.T, atol=tol):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.abs(np.diag(dist)) > tol):
            raise ValueError("distance matrix must have zero diagonal")
        if np.any(dist < -tol):
            raise ValueError("distances must be nonnegative")
        n = len(dist)
        off = dist + np.eye(n)
        if n > 1 and off.min() <= tol:
            raise ValueError("distinct points at distance zero")
        # d(i, k) <= d(i, j) + d(j, k) for all triples
        if n and np.any(dist[:, None, :] > dist[:, :, None] + dist[None, :, :] + tol):
            raise ValueError("triangle inequality fails")
        self.distances = (dist + dist.T) / 2
        np.fill_diagonal(self.distances, 0.0)

    @property
    def size(self) -> int:
        return len(self.distances)

    @property
    def diameter(self) -> float:
        return float(self.distances.max()) if self.size else 0.0

    @classmethod
    def from_points(cls, points) -> "FiniteMetricSpace":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(np.linalg.norm(pts[:, None] - pts[None], axis=2))


def kuratowski(space: FiniteMetricSpace, base: int = 0) -> np.ndarray:
    """Rows diam + d(x, z) - d(base, z): an isometry into the sup metric with values in [0, 2 diam]."""
    dist = space.distances
    return space.diameter + dist - dist[base][None, :]


def embed_metric_space(space: FiniteMetricSpace, t: float = 1.0,
                       base: int = 0) -> tuple[list[GridPoint], int, int]:
    """Kuratowski embedding, floored onto the integer grid and dilated by t."""
    if not t > 0:
        raise ValueError("t must be positive")
    n = space.size
    if n == 0:
        raise ValueError("empty metric space")
    m = max(1, math.floor(2 * space.diameter + 1e-12))
    coords = np.floor(kuratowski(space, base) + 1e-12).astype(int)
    coords = np.clip(coords, 0, m)
    return [GridPoint.from_indices(m, n, t, row) for row in coords], m, n


def control_lower(x: float, t: float = 1.0) -> float:
    return t * max(x - 1.0, 0.0)


def control_upper(x: float, t: float = 1.0) -> float:
    return t * (x + 1.0)


# ----------------------------------------------------------------------------
# grid points as finite subsets of an interval


def interval_length(t: float, m: int, n: int) -> float:
    """Length of an interval holding every encoded grid point.

    tm(3n + 2) is enough for n <= 2; the last point sits at 4tmn, which is
    larger from n = 3 on.
    """
    return t * m * max(3 * n + 2, 4 * n)


def encode_grid_to_interval(p: GridPoint) -> FinitePointSet:
    """n points of [0, M], one per coordinate, far enough apart that d_B sees coordinates."""
    tm = p.t * p.m
    pts = [3 * tm * i + tm * (i - 1) + x for i, x in enumerate(p.coords, start=1)]
    return FinitePointSet(np.array(pts).reshape(-1, 1), dim=1)


# ----------------------------------------------------------------------------
# gadget bookkeeping


@dataclass
class GadgetSpec:
    """Parameters of an emitted gadget and where its blocks sit in the motif."""

    kind: str
    params: dict
    source: GridPoint
    blocks: dict = field(default_factory=dict)

    def block(self, name: str) -> slice:
        start, count = self.blocks[name]
        return slice(start, start + count)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()},
            "source": {"m": self.source.m, "n": self.source.n, "t": self.source.t,
                       "coords": list(self.source.coords)},
            "blocks": {k: list(v) for k, v in self.blocks.items()},
        }


def _axis_grid(counts, spacings, offset=0.0) -> np.ndarray:
    axes = [offset + np.arange(c) * h for c, h in zip(counts, spacings)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(counts))


# ----------------------------------------------------------------------------
# packing-constrained gadgets


@dataclass(frozen=True)
class PhiLayout:
    m: int
    n: int
    t: float
    r: float
    kappa: float
    dim: int
    interval: float
    corner: float
    gap: float
    sides: tuple
    corner_spacing: float
    corner_counts: tuple
    facet_counts: tuple

    @property
    def side(self) -> float:
        return self.sides[0]

    @property
    def motif_size(self) -> int:
        facet = math.prod(self.facet_counts) - math.prod(c - 1 for c in self.facet_counts)
        return math.prod(self.corner_counts) + facet + self.n

    @property
    def covering_bounds(self) -> tuple[float, float]:
        """Interval that the covering radius provably lies in."""
        return self.gap / 2, (self.side + 2 * self.r * math.sqrt(self.dim - 1)) / 2


def _facet_counts(sides, r, q):
    counts = []
    for s in sides:
        lo = math.ceil(s / (4 * r) - 1e-12)
        hi = math.floor(s / q + 1e-12)
        if lo > hi:
            raise ValueError("density incompatible with packing radius")
        counts.append(max(lo, 1))
    return tuple(counts)


def _phi_sides_for(corner, m, n, r, kappa, d, q):
    corner_counts = tuple(math.floor(j * corner / q + 1e-12) + 1 for j in range(1, d + 1))
    base = math.prod(corner_counts) + n
    # the cell is diag(s1, 2 s1, ..., d s1) with volume d! s1^d
    scale = kappa * math.factorial(d)
    side = (base / scale) ** (1 / d)
    facets = None
    for _ in range(MAX_FIXED_POINT_ROUNDS):
        sides = tuple(j * side for j in range(1, d + 1))
        facets = _facet_counts(sides, r, q)
        facet_size = math.prod(facets) - math.prod(c - 1 for c in facets)
        new_side = ((base + facet_size) / scale) ** (1 / d)
        if _facet_counts(tuple(j * new_side for j in range(1, d + 1)), r, q) == facets:
            return new_side, corner_counts, facets
        side = new_side
    raise ValueError("facet counts did not reach a fixed point")


def phi_layout(m: int, n: int, r: float = 0.5, kappa: float = 0.02, d: int = 2,
               min_gap: float = 0.0) -> PhiLayout:
    """Solve the corner size and cell so the density is exactly ``kappa``.

    The free gap s between the corner block and the far facet must satisfy
    s >= 7M + 3m and s >= ``min_gap``.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if not (r > 0 and kappa > 0):
        raise ValueError("r and kappa must be positive")
    t = 2 * r
    q = t * (1 + PACKING_MARGIN)
    if 3 * m <= t:
        raise ValueError("offset 3m must exceed 2r to keep the packing radius")
    M = interval_length(t, m, n)
    need = max(7 * M + 3 * m, min_gap)
    # the gap grows like l (1 / (q kappa^(1/d)) - 1); no solution if that slope is <= 0
    if q * kappa ** (1 / d) >= 1 - 1e-9:
        raise ValueError("density incompatible with packing radius")
    k = 0
    while k < 10 ** 6:
        corner = k * q
        try:
            side, corner_counts, facets = _phi_sides_for(corner, m, n, r, kappa, d, q)
        except ValueError:
            k += 1
            continue
        gap = side - 3 * m - corner
        if gap >= need:
            return PhiLayout(m, n, t, r, kappa, d, M, corner, gap,
                             tuple(j * side for j in range(1, d + 1)), q, corner_counts, facets)
        # jump ahead using the asymptotic slope
        slope = 1 / (q * kappa ** (1 / d)) - 1
        k = max(k + 1, int((need - gap) / (slope * q) * 0.5) + k)
    raise ValueError("density incompatible with packing radius")


def build_phi_gadget(p: GridPoint, r: float = 0.5, kappa: float = 0.02, d: int = 2,
                     min_gap: float = 0.0, layout: PhiLayout | None = None):
    """Packing-constrained gadget encoding ``p``; returns (PPS, GadgetSpec)."""
    if abs(p.t - 2 * r) > 1e-12:
        raise ValueError("grid spacing t must equal 2r")
    if layout is None:
        layout = phi_layout(p.m, p.n, r, kappa, d, min_gap)
    if (layout.m, layout.n, layout.dim) != (p.m, p.n, d):
        raise ValueError("layout does not match the grid point")
    m, M = p.m, layout.interval
    corner = _axis_grid(layout.corner_counts, [layout.corner_spacing] * d, offset=3.0 * m)
    facet_all = _axis_grid(layout.facet_counts,
                           [s / c for s, c in zip(layout.sides, layout.facet_counts)])
    facet = facet_all[np.any(_axis_grid(layout.facet_counts, [1.0] * d) == 0, axis=1)]
    code = np.array(encode_grid_to_interval(p).points)[:, 0]
    signature = np.full((p.n, d), 3.0 * m)
    signature[:, 0] = 3 * m + layout.corner + 3 * M + code
    motif = np.concatenate([corner, facet, signature])
    pps = PeriodicPointSet(Lattice(np.diag(layout.sides)), motif)
    blocks = {"corner": (0, len(corner)), "facets": (len(corner), len(facet)),
              "signature": (len(corner) + len(facet), p.n)}
    params = {"t": layout.t, "m": m, "n": p.n, "r": r, "kappa": kappa, "d": d,
              "M": M, "l": layout.corner, "s": layout.gap, "sides": layout.sides,
              "corner_spacing": layout.corner_spacing}
    return pps, GadgetSpec("phi", params, p, blocks)


def signature_points(pps: PeriodicPointSet, spec: GadgetSpec) -> np.ndarray:
    return np.array(pps.motif[spec.block("signature")])


def phi_pair_bounds(x: PeriodicPointSet, sx: GadgetSpec, y: PeriodicPointSet,
                    sy: GadgetSpec) -> RadiusInterval:
    """Certified d_B interval: optimal equivariant matching above, signature ball counts below."""
    upper = bottleneck_periodic_upper(x, y).upper
    centers = np.concatenate([signature_points(x, sx), signature_points(y, sy)])
    lower = counting_lower_bound(x, y, centers=centers, radii=(0.0,))
    return RadiusInterval(min(lower, upper), upper)


# ----------------------------------------------------------------------------
# covering-constrained gadgets


def cluster(count: int, eps: float) -> np.ndarray:
    """The points eps * i / count for i < count."""
    return eps * np.arange(count) / count


def psi_interval_length(m: int, n: int, eps: float) -> float:
    return 3 * (n + 1) * (m + 1) + n * (m + 1) + eps


def signature_row(indices, m: int, eps: float, small: int, large: int):
    """Offsets of the clusters along the signature row and their (start, count) blocks."""
    n = len(indices)
    parts, blocks, start = [], [], 0
    for i, x in enumerate(indices, start=1):
        parts.append(3 * (m + 1) * i + (m + 1) * (i - 1) + x + cluster(small, eps))
        blocks.append((start, small))
        start += small
    parts.append(3 * (n + 1) * (m + 1) + n * (m + 1) + cluster(large, eps))
    blocks.append((start, large))
    return np.concatenate(parts), blocks


@dataclass(frozen=True)
class PsiLayout:
    m: int
    n: int
    R: float
    kappa: float
    dim: int
    eps: float
    interval: float
    side: float
    per_axis: int
    small: int
    large: int
    row_start: float
    row_height: float

    @property
    def spacing(self) -> float:
        return self.side / self.per_axis

    @property
    def motif_size(self) -> int:
        return self.per_axis ** self.dim + self.n * self.small + self.large


def _scaffold_count(spacing: float, d: int, radius: float) -> int:
    """Certified maximum number of scaffold points in a closed ball of the given radius."""
    return max_ball_count(Lattice(np.eye(d) * spacing), radius, pad=1e-3 * spacing)[1]


def psi_layout(m: int, n: int, R: float = 1.0, kappa: float = 1.0, d: int = 2,
               eps: float = 0.25, min_large: int = 0) -> PsiLayout:
    """Scaffold size, cluster sizes L and K, and cell side l giving density ``kappa``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not (R > 0 and kappa > 0):
        raise ValueError("R and kappa must be positive")
    M = psi_interval_length(m, n, eps)
    max_spacing = (1 - COVERING_MARGIN) * 2 * R / math.sqrt(d)
    if kappa ** (-1 / d) >= max_spacing:
        raise ValueError("density incompatible with covering radius")
    # the row [3M, 4M] plus half a spacing of room must fit in one cell
    min_side = 4 * M + 1
    spacing = kappa ** (-1 / d)
    for _ in range(MAX_FIXED_POINT_ROUNDS):
        small = _scaffold_count(spacing, d, m + 1) + 1
        large = max(2 * small, min_large)
        extra = n * small + large
        N = max(1, math.floor(min_side / max_spacing))
        while True:
            side = ((N ** d + extra) / kappa) ** (1 / d)
            if side >= min_side and side / N <= max_spacing:
                break
            N += 1
        if abs(side / N - spacing) <= 1e-12 or _scaffold_count(side / N, d, m + 1) + 1 == small:
            spacing = side / N
            break
        spacing = side / N
    else:
        raise ValueError("cluster sizes did not reach a fixed point")
    if _scaffold_count(spacing, d, m + 1) + 1 > small:
        raise ValueError("L = max ball count + 1 is violated")
    row_start = 3 * M
    if d == 1:
        row_height = 0.0
        # slide the row until it avoids the scaffold points
        for k in range(64):
            start = 3 * M + spacing * k / 64
            ok = True
            for idx in itertools.product(range(m + 1), repeat=n):
                offs, _ = signature_row(idx, m, eps, small, large)
                pts = start + offs
                gap = np.abs(pts / spacing - np.round(pts / spacing)) * spacing
                if gap.min() < 1e-3 * spacing:
                    ok = False
                    break
            if ok:
                row_start = start
                break
        else:
            raise ValueError("no empty segment for the signature row")
    else:
        row_height = (math.ceil(3 * M / spacing) + 0.5) * spacing
        if row_height > side - spacing / 2 + TOL:
            raise ValueError("no empty segment for the signature row")
    return PsiLayout(m, n, R, kappa, d, eps, M, side, N, small, large, row_start, row_height)


def build_psi_gadget(p: GridPoint, R: float = 1.0, kappa: float = 1.0, d: int = 2,
                     eps: float = 0.25, min_large: int = 0, layout: PsiLayout | None = None):
    """Covering-constrained gadget encoding ``p``; returns (PPS, GadgetSpec)."""
    if abs(p.t - 1) > 1e-12:
        raise ValueError("covering gadgets encode grid points with t = 1")
    if layout is None:
        layout = psi_layout(p.m, p.n, R, kappa, d, eps, min_large)
    if (layout.m, layout.n, layout.dim) != (p.m, p.n, d):
        raise ValueError("layout does not match the grid point")
    h = layout.spacing
    scaffold = _axis_grid([layout.per_axis] * d, [h] * d)
    offs, blocks = signature_row(p.indices, p.m, eps, layout.small, layout.large)
    row = np.full((len(offs), d), layout.row_height)
    row[:, 0] = layout.row_start + offs
    motif = np.concatenate([scaffold, row])
    pps = PeriodicPointSet(Lattice(np.eye(d) * layout.side), motif)
    base = len(scaffold)
    named = {"scaffold": (0, base)}
    for i, (start, count) in enumerate(blocks, start=1):
        named[f"A{i}"] = (base + start, count)
    params = {"m": p.m, "n": p.n, "R": R, "kappa": kappa, "d": d, "eps": eps,
              "M": layout.interval, "l": layout.side, "L": layout.small, "K": layout.large,
              "spacing": h, "row_start": layout.row_start, "row_height": layout.row_height}
    return pps, GadgetSpec("psi", params, p, named)


def psi_blocks(pps: PeriodicPointSet, spec: GadgetSpec) -> list[np.ndarray]:
    n = spec.params["n"]
    return [np.array(pps.motif[spec.block(f"A{i}")]) for i in range(1, n + 2)]


def psi_matching(x: PeriodicPointSet, sx: GadgetSpec, y: PeriodicPointSet,
                 sy: GadgetSpec) -> Matching:
    """Equivariant bijection fixing the scaffold and pairing the clusters pointwise."""
    if x.size != y.size or sx.params["l"] != sy.params["l"]:
        raise ValueError("gadgets come from different layouts")
    cost = float(np.linalg.norm(np.array(x.motif) - np.array(y.motif), axis=1).max())
    return Matching(tuple((i, i) for i in range(x.size)), cost)


def psi_ball_count_bound(layout: PsiLayout, radius: float) -> int:
    """Upper bound on the points of any gadget with this layout in a closed ball."""
    row = layout.n * layout.small + layout.large
    if 2 * radius >= layout.side - layout.interval:
        copies = math.prod(math.ceil((2 * radius + layout.interval) / layout.side) + 1
                           for _ in range(layout.dim))
        row *= copies
    return _scaffold_count(layout.spacing, layout.dim, radius) + row


class _PsiBounder:
    """Hall-type lower bounds on d_B(psi(x), iso(psi(y))) over boxes of isometries.

    Isometries are written z -> Q (z - a_y) + a_x + p with a_x, a_y the
    first points of the large clusters.  A cluster S on one side needs |S|
    distinct partners within the displacement; the |S|-th smallest distance
    from the other side to S is therefore a lower bound.
    """

    def __init__(self, x, sx, y, sy, cap, reach):
        self.d = x.dim
        bx, by = psi_blocks(x, sx), psi_blocks(y, sy)
        self.ax, self.ay = bx[-1][0], by[-1][0]
        self.cap = cap
        win_x = np.array(points_in_ball(x, self.ax, reach).points)
        win_y = np.array(points_in_ball(y, self.ay, reach).points) - self.ay
        self.tree_x, self.win_x = cKDTree(win_x), win_x
        self.tree_y, self.win_y = cKDTree(win_y), win_y
        self.norm_y = np.linalg.norm(win_y, axis=1)
        self.reach = float(self.norm_y.max()) if len(win_y) else 0.0
        self.x_blocks = bx
        self.y_blocks = [b - self.ay for b in by]

    def _kth(self, values: np.ndarray, k: int) -> float:
        if len(values) < k:
            return self.cap
        return float(min(self.cap, np.partition(values, k - 1)[k - 1]))

    def bound(self, q: np.ndarray, p: np.ndarray, turn: float, shift: float) -> float:
        """Lower bound for all isometries within angle ``turn`` of q and ``shift`` of p."""
        best = 0.0
        shift_x = self.ax + p
        for block in self.x_blocks:
            center = block.mean(axis=0)
            spread = float(np.linalg.norm(block - center, axis=1).max())
            slack_max = self.reach * turn + shift
            pre = (center - shift_x) @ q
            idx = self.tree_y.query_ball_point(pre, self.cap + spread + slack_max + TOL)
            if len(idx) < len(block):
                return self.cap
            cand = self.win_y[idx]
            moved = cand @ q.T + shift_x
            dist = np.sqrt(((moved[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
            vals = np.maximum(dist - (self.norm_y[idx] * turn + shift), 0.0)
            best = max(best, self._kth(vals, len(block)))
            if best >= self.cap:
                return self.cap
        for block in self.y_blocks:
            moved = block @ q.T + shift_x
            center = moved.mean(axis=0)
            spread = float(np.linalg.norm(moved - center, axis=1).max())
            slack = float(np.linalg.norm(block, axis=1).max()) * turn + shift
            idx = self.tree_x.query_ball_point(center, self.cap + spread + slack + TOL)
            if len(idx) < len(block):
                return self.cap
            cand = self.win_x[idx]
            dist = np.sqrt(((cand[:, None, :] - moved[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
            best = max(best, self._kth(np.maximum(dist - slack, 0.0), len(block)))
            if best >= self.cap:
                return self.cap
        return best


def psi_euclidean_lower(x: PeriodicPointSet, sx: GadgetSpec, y: PeriodicPointSet,
                        sy: GadgetSpec, budget: Budget | None = None,
                        upper: float | None = None) -> tuple[float, bool, int]:
    """Certified lower bound on d_EB(psi(x), psi(y)); returns (bound, truncated, nodes).

    Below a threshold lam with lam + eps <= m + 1, the large cluster of x
    can only be served by a copy of the large cluster of y (every other ball
    of radius lam + eps holds fewer than K points), so the translation is
    confined to a disc around the cluster anchors.  Branch and bound over
    that compact set then gives min(lam, bound).
    """
    budget = budget or Budget()
    d = x.dim
    if d not in (1, 2):
        raise ValueError("covering gadget certificate supports d = 1 or 2")
    if upper is None:
        upper = psi_matching(x, sx, y, sy).cost
    m, eps = sx.params["m"], sx.params["eps"]
    small, large = sx.params["L"], sx.params["K"]
    lam = min(upper, m + 1 - eps)
    if lam <= 0:
        return 0.0, False, 0
    if large < 2 * small:
        raise ValueError("K >= 2L is violated")
    for spec, pps in ((sx, x), (sy, y)):
        blocks = psi_blocks(pps, spec)
        for a, b in zip(blocks, blocks[1:]):
            if b[:, 0].min() - a[:, 0].max() <= 2 * (lam + eps):
                raise ValueError("clusters too close for the localisation argument")
        if spec.params["l"] - spec.params["M"] <= 2 * (lam + eps):
            raise ValueError("cell too small for the localisation argument")
    disc = lam + 2 * eps
    target = lam if budget.lower_target is None else min(lam, budget.lower_target)
    reach = sx.params["M"] + 2 * disc + 2
    bounder = _PsiBounder(x, sx, y, sy, lam, reach)

    sigmas = (1.0, -1.0)
    heap, counter = [], itertools.count()
    nodes = 0
    start = time.monotonic()

    def evaluate(sigma, lo, hi, plo, phi):
        nonlocal nodes
        nodes += 1
        pc = (plo + phi) / 2
        # boxes entirely outside the disc hold no admissible translation
        nearest = np.clip(np.zeros(d), plo, phi)
        if np.linalg.norm(nearest) > disc:
            return math.inf
        shift = float(np.linalg.norm(phi - plo)) / 2
        if d == 1:
            q = np.array([[sigma]])
            turn = 0.0
        else:
            q = _rotation_2d((lo + hi) / 2, sigma)
            turn = _chord((hi - lo) / 2)
        return bounder.bound(q, pc, turn, shift)

    def push(sigma, lo, hi, plo, phi):
        val = evaluate(sigma, lo, hi, plo, phi)
        if math.isfinite(val):
            heapq.heappush(heap, (val, next(counter), sigma, lo, hi, plo, phi))

    steps = 16 if d == 2 else 1
    cells = 4
    edge = 2 * disc / cells
    for sigma in sigmas:
        for k in range(steps):
            lo, hi = (2 * math.pi * k / steps, 2 * math.pi * (k + 1) / steps) if d == 2 else (0.0, 0.0)
            for corner in itertools.product(range(cells), repeat=d):
                plo = -disc + edge * np.array(corner, dtype=float)
                push(sigma, lo, hi, plo, plo + edge)
    truncated = False
    while heap:
        val = heap[0][0]
        if val >= target - 1e-12:
            break
        if nodes >= budget.max_nodes or time.monotonic() - start > budget.max_seconds:
            truncated = True
            break
        val, _, sigma, lo, hi, plo, phi = heapq.heappop(heap)
        turn_size = bounder.reach * _chord((hi - lo) / 2) if d == 2 else 0.0
        widths = phi - plo
        axis = int(np.argmax(widths))
        if turn_size > widths[axis] / 2:
            mid = (lo + hi) / 2
            push(sigma, lo, mid, plo, phi)
            push(sigma, mid, hi, plo, phi)
        else:
            mid = (plo[axis] + phi[axis]) / 2
            left_hi, right_lo = phi.copy(), plo.copy()
            left_hi[axis] = mid
            right_lo[axis] = mid
            push(sigma, lo, hi, plo, left_hi)
            push(sigma, lo, hi, right_lo, phi)
    lowest = heap[0][0] if heap else lam
    return float(min(lam, lowest)), truncated, nodes


# ----------------------------------------------------------------------------
# families and coarse disjoint unions


@dataclass
class Family:
    kind: str
    T: int
    m: int
    n: int
    layout: object
    gadgets: list


@dataclass
class FamilyPairBound:
    earlier: int
    later: int
    lower: float
    required: float

    @property
    def ok(self) -> bool:
        return self.lower >= self.required


@dataclass
class DisjointUnionReport:
    kind: str
    families: list
    pairs: list

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.pairs)


def build_families(kind: str, pairs, d: int = 2, **params) -> list[Family]:
    """Gadget families in increasing T with the separation constraints imposed recursively."""
    pairs = sorted(pairs, key=lambda mn: pairing_T(*mn))
    families: list[Family] = []
    for m, n in pairs:
        T = pairing_T(m, n)
        if kind == "phi":
            r = params.get("r", 0.5)
            kappa = params.get("kappa", 0.02)
            margin = params.get("margin", 0.5)
            prev = max((f.layout.covering_bounds[1] for f in families), default=0.0)
            min_gap = 2 * (prev + 2 ** T + margin) if families else 0.0
            layout = phi_layout(m, n, r, kappa, d, min_gap)
            if families and layout.covering_bounds[0] < prev + 2 ** T:
                raise ValueError("violated: s/2 >= previous covering bound + 2^T")
            gadgets = [build_phi_gadget(p, r, kappa, d, layout=layout)
                       for p in grid_points(m, n, 2 * r)]
        elif kind == "psi":
            R = params.get("R", 1.0)
            kappa = params.get("kappa", 1.0)
            eps = params.get("eps", 0.25)
            need = max((psi_ball_count_bound(f.layout, 2 ** T + 1) for f in families), default=0)
            layout = psi_layout(m, n, R, kappa, d, eps, need + 1)
            if layout.large <= need:
                raise ValueError("violated: K > max ball count at radius 2^T + 1")
            gadgets = [build_psi_gadget(p, R, kappa, d, eps, layout=layout)
                       for p in grid_points(m, n, 1.0)]
        else:
            raise ValueError(f"unknown gadget kind {kind!r}")
        families.append(Family(kind, T, m, n, layout, gadgets))
    return families


def _psi_cluster_bound(later: Family, earlier: Family) -> float:
    """Displacement forced on the large cluster of every gadget in ``later``."""
    lay = later.layout
    diam = lay.eps * (lay.large - 1) / lay.large
    radius = 2.0 ** later.T + 1
    # grow the radius while the earlier gadgets still lack K points in such a ball
    if psi_ball_count_bound(earlier.layout, radius) >= lay.large:
        lo, hi = 0.0, radius
        for _ in range(40):
            mid = (lo + hi) / 2
            if psi_ball_count_bound(earlier.layout, mid) < lay.large:
                lo = mid
            else:
                hi = mid
        radius = lo
    return max(0.0, radius - diam)


def certify_disjoint_union(families: list[Family], resolution: float = 0.05) -> DisjointUnionReport:
    """Pairwise d_EB lower bounds between families, each compared against 2^max(T)."""
    if len(families) < 2:
        raise ValueError("need at least two families")
    kind = families[0].kind
    pairs = []
    if kind == "phi":
        cover = [[covering_radius(pps, resolution) for pps, _ in f.gadgets] for f in families]
        for i, j in itertools.combinations(range(len(families)), 2):
            lower = min(max(0.0, cj.lower - ci.upper, ci.lower - cj.upper)
                        for ci in cover[i] for cj in cover[j])
            pairs.append(FamilyPairBound(families[i].T, families[j].T, lower,
                                         2.0 ** max(families[i].T, families[j].T)))
    else:
        for i, j in itertools.combinations(range(len(families)), 2):
            early, late = sorted((families[i], families[j]), key=lambda f: f.T)
            pairs.append(FamilyPairBound(early.T, late.T, _psi_cluster_bound(late, early),
                                         2.0 ** late.T))
    return DisjointUnionReport(kind, families, pairs)

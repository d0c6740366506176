"""Bottleneck distances between finite and periodic point sets.

``d_B`` is the infimum over bijections of the largest displacement; ``d_EB``
additionally minimizes over rigid motions applied to the second set.
"""

from __future__ import annotations

import functools
import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from . import intlattice
from .geometry import (
    INFINITE,
    TOL,
    FinitePointSet,
    Lattice,
    PeriodicPointSet,
    RadiusInterval,
    _max_diagonal,
    covering_radius,
    lattice_coefficients_in_ball,
    points_in_ball,
)
from .matching import bottleneck_assignment


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    cost: float


@dataclass(frozen=True)
class IsometryParams:
    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.orthogonal, dtype=float)
        if not np.allclose(q.T @ q, np.eye(len(q)), atol=1e-7):
            raise ValueError("orthogonal part is not orthogonal")
        object.__setattr__(self, "orthogonal", q)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @classmethod
    def identity(cls, d: int) -> "IsometryParams":
        return cls(np.eye(d), np.zeros(d))

    def apply(self, points) -> np.ndarray:
        return np.atleast_2d(points) @ self.orthogonal.T + self.translation

    def apply_set(self, x):
        if isinstance(x, PeriodicPointSet):
            return x.transformed(self.orthogonal, self.translation)
        return FinitePointSet(self.apply(x.points), dim=x.dim, allow_duplicates=x.allow_duplicates)


@dataclass
class BottleneckResult:
    value: RadiusInterval
    witness: Matching | None = None
    isometry: IsometryParams | None = None
    truncated: bool = False
    nodes: int = 0

    @property
    def lower(self) -> float:
        return self.value.lower

    @property
    def upper(self) -> float:
        return self.value.upper


@dataclass
class Budget:
    """Effort limits for the branch-and-bound searches."""

    max_nodes: int = 200_000
    max_seconds: float = 120.0
    target_width: float = 1e-6
    lower_target: float | None = None


def _points(x) -> np.ndarray:
    if isinstance(x, FinitePointSet):
        return np.array(x.points)
    return np.atleast_2d(np.asarray(x, dtype=float))


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


# ----------------------------------------------------------------------------
# finite sets


def bottleneck_finite(x, y) -> BottleneckResult:
    """Exact bottleneck distance between two finite point sets, with witness."""
    a, b = _points(x), _points(y)
    if len(a) != len(b):
        return BottleneckResult(INFINITE)
    if len(a) == 0:
        return BottleneckResult(RadiusInterval.exact(0.0), Matching((), 0.0))
    cost = _pairwise(a, b)
    n = len(a)
    rows, cols = np.indices(cost.shape)
    value, match = bottleneck_assignment(n, rows.ravel(), cols.ravel(), cost.ravel())
    pairs = tuple((i, int(j)) for i, j in enumerate(match))
    return BottleneckResult(RadiusInterval.exact(value), Matching(pairs, value))


@functools.lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))))


def _fast_bottleneck_value(cost: np.ndarray) -> float:
    """Bottleneck value of a small dense cost matrix (binary search + LSA)."""
    n = cost.shape[0]
    if n == 1:
        return float(cost[0, 0])
    if n <= 5:
        perms = _permutations(n)
        return float(cost[np.arange(n), perms].max(axis=1).min())
    lo_bound = max(cost.min(axis=1).max(), cost.min(axis=0).max())
    values = np.unique(cost[cost >= lo_bound])
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        blocked = (cost > values[mid]).astype(float)
        r, c = linear_sum_assignment(blocked)
        if blocked[r, c].sum() == 0:
            hi = mid
        else:
            lo = mid + 1
    return float(values[hi])


def _rotation_2d(theta: float, sigma: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]]) @ np.diag([1.0, sigma])


def _rotation_3d(rotvec, sigma: float) -> np.ndarray:
    return Rotation.from_rotvec(rotvec).as_matrix() @ np.diag([1.0, 1.0, sigma])


def _rotation(params, sigma: float, d: int) -> np.ndarray:
    if d == 2:
        return _rotation_2d(float(params[0]), sigma)
    return _rotation_3d(params, sigma)


def _chord(angle: float) -> float:
    """Upper bound on |R z - R' z| / |z| for rotations at angle <= ``angle``."""
    return 2 * math.sin(min(angle, math.pi) / 2)


def _arc_distances(p: np.ndarray, y: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Distance from each p_i to the arc {R_theta y_j : lo <= theta <= hi}."""
    rp = np.linalg.norm(p, axis=1)[:, None]
    ry = np.linalg.norm(y, axis=1)[None, :]
    ang_p = np.arctan2(p[:, 1], p[:, 0])[:, None]
    ang_y = np.arctan2(y[:, 1], y[:, 0])[None, :]
    offset = np.mod(ang_p - ang_y - lo, 2 * math.pi)
    inside = offset <= hi - lo
    ends = np.minimum(_pairwise(p, y @ _rotation_2d(lo, 1.0).T),
                      _pairwise(p, y @ _rotation_2d(hi, 1.0).T))
    return np.where(inside, np.abs(rp - ry), ends)


def _euclidean_bottleneck_1d(a: np.ndarray, b: np.ndarray) -> BottleneckResult:
    # sorted matching is optimal in 1D for every translation
    xs = np.sort(a[:, 0])
    best = None
    for sign in (1.0, -1.0):
        ys = np.sort(sign * b[:, 0])
        delta = xs - ys
        value = (delta.max() - delta.min()) / 2
        shift = (delta.max() + delta.min()) / 2
        if best is None or value < best[0] - 1e-15:
            best = (value, sign, shift)
    value, sign, shift = best
    iso = IsometryParams(np.array([[sign]]), np.array([shift]))
    return BottleneckResult(RadiusInterval.exact(float(value)), isometry=iso)


def _alignment_candidates(a: np.ndarray, b: np.ndarray, rng: np.random.Generator, limit: int = 4000):
    """Rigid motions mapping point pairs (d=2) or triples (d=3) of b onto a."""
    n, d = a.shape
    out = []
    if n < 2:
        return out
    k = 2 if d == 2 else 3
    if n < k:
        k = 2
    tuples_a = list(itertools.permutations(range(n), k))
    tuples_b = list(itertools.combinations(range(n), k))
    combos = list(itertools.product(tuples_a, tuples_b))
    if len(combos) > limit:
        idx = rng.choice(len(combos), size=limit, replace=False)
        combos = [combos[i] for i in sorted(idx)]
    for ta, tb in combos:
        pa, pb = a[list(ta)], b[list(tb)]
        ca, cb = pa.mean(axis=0), pb.mean(axis=0)
        for sigma in (1.0, -1.0):
            flip = np.eye(d)
            flip[-1, -1] = sigma
            qb = (pb - cb) @ flip.T
            h = qb.T @ (pa - ca)
            u, _, vt = np.linalg.svd(h)
            rot = vt.T @ u.T
            if np.linalg.det(rot) < 0:
                vt = vt.copy()
                vt[-1] *= -1
                rot = vt.T @ u.T
            q = rot @ flip
            out.append((q, ca - q @ cb))
    return out


def euclidean_bottleneck_finite(x, y, budget: Budget | None = None, seed: int = 0) -> BottleneckResult:
    """Certified interval for ``d_EB`` between finite sets in dimension 1, 2 or 3."""
    budget = budget or Budget()
    a, b = _points(x), _points(y)
    if len(a) != len(b):
        return BottleneckResult(INFINITE)
    d = a.shape[1] if a.size else _points(y).shape[1]
    if d not in (1, 2, 3):
        raise ValueError("unsupported dimension for certified d_EB")
    n = len(a)
    if n <= 1:
        iso = IsometryParams(np.eye(d), (a[0] - b[0]) if n else np.zeros(d))
        return BottleneckResult(RadiusInterval.exact(0.0), isometry=iso)
    if d == 1:
        return _euclidean_bottleneck_1d(a, b)

    rng = np.random.default_rng(seed)
    start = time.monotonic()
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    b0 = b - cb
    a0 = a - ca
    radii = np.linalg.norm(b0, axis=1)

    def value_at(q, tau):
        return _fast_bottleneck_value(_pairwise(a0, b0 @ q.T + tau))

    # ---- upper bound from alignments, a rotation sweep and local refinement
    incumbent = (math.inf, np.eye(d), np.zeros(d))
    cands = _alignment_candidates(a, b, rng)
    if d == 2:
        for theta in np.linspace(0, 2 * math.pi, 72, endpoint=False):
            for sigma in (1.0, -1.0):
                cands.append((_rotation_2d(theta, sigma), ca - _rotation_2d(theta, sigma) @ cb))
    scored = []
    for q, t in cands:
        tau = t + q @ cb - ca
        val = value_at(q, tau)
        scored.append((val, q, tau))
        if val < incumbent[0]:
            incumbent = (val, q, tau)
    scored.sort(key=lambda s: s[0])
    for val, q, tau in scored[:4]:
        incumbent = min(incumbent, _refine_finite(a0, b0, q, tau, d, value_at), key=lambda s: s[0])

    # ---- branch and bound over (reflection, rotation, translation)
    upper = incumbent[0]
    span = upper + 1e-12

    counter = itertools.count()
    if d == 2:
        rot_lo, rot_hi = np.array([0.0]), np.array([2 * math.pi])
        rot_splits = 8
    else:
        rot_lo, rot_hi = np.full(3, -math.pi), np.full(3, math.pi)
        rot_splits = 2
    heap = []

    def evaluate(sigma, lo, hi):
        nonlocal incumbent
        mid = (lo + hi) / 2
        rdim = len(rot_lo)
        q = _rotation(mid[:rdim], sigma, d)
        tau = mid[rdim:]
        moved = b0 @ q.T + tau
        dist = _pairwise(a0, moved)
        val = _fast_bottleneck_value(dist)
        if val < incumbent[0]:
            incumbent = (val, q, tau)
        half = (hi - lo) / 2
        slack = float(np.linalg.norm(half[rdim:]))
        if d == 2:
            flipped = b0 * np.array([1.0, sigma])
            relaxed = _arc_distances(a0 - tau, flipped, lo[0], hi[0]) - slack
        else:
            mu = radii * _chord(math.sqrt(3) * half[:3].max()) + slack
            relaxed = dist - mu[None, :]
        return max(_fast_bottleneck_value(relaxed), 0.0)

    for sigma in (1.0, -1.0):
        grid_axes = [np.linspace(rot_lo[i], rot_hi[i], rot_splits + 1) for i in range(len(rot_lo))]
        for cell in itertools.product(*[range(rot_splits)] * len(rot_lo)):
            lo = np.concatenate([[grid_axes[i][c] for i, c in enumerate(cell)], -np.full(d, span)])
            hi = np.concatenate([[grid_axes[i][c + 1] for i, c in enumerate(cell)], np.full(d, span)])
            lb = evaluate(sigma, lo, hi)
            heapq.heappush(heap, (lb, next(counter), sigma, lo, hi))

    nodes = len(heap)
    rdim = len(rot_lo)
    rmax = float(radii.max())
    truncated = False
    while heap:
        upper = incumbent[0]
        lb, _, sigma, lo, hi = heap[0]
        if lb >= upper - budget.target_width:
            break
        if nodes >= budget.max_nodes or time.monotonic() - start > budget.max_seconds:
            truncated = True
            break
        heapq.heappop(heap)
        half = (hi - lo) / 2
        effect = half.copy()
        effect[:rdim] *= rmax * (1.0 if d == 2 else math.sqrt(3))
        axis = int(np.argmax(effect))
        mid = (lo[axis] + hi[axis]) / 2
        for a_lo, a_hi in ((lo[axis], mid), (mid, hi[axis])):
            clo, chi = lo.copy(), hi.copy()
            clo[axis], chi[axis] = a_lo, a_hi
            clb = evaluate(sigma, clo, chi)
            nodes += 1
            if clb < incumbent[0] - budget.target_width:
                heapq.heappush(heap, (clb, next(counter), sigma, clo, chi))
    upper = incumbent[0]
    lower = min(heap[0][0], upper) if heap else upper
    lower = min(lower, upper)
    q, tau = incumbent[1], incumbent[2]
    iso = IsometryParams(q, ca + tau - q @ cb)
    witness = bottleneck_finite(a, iso.apply(b)).witness
    return BottleneckResult(RadiusInterval(max(lower, 0.0), upper), witness, iso,
                            truncated=truncated, nodes=nodes)


def _refine_finite(a0, b0, q, tau, d, value_at):
    """Nelder-Mead polish of a candidate motion; returns (value, q, tau)."""
    sigma = float(np.sign(np.linalg.det(q)))
    flip = np.eye(d)
    flip[-1, -1] = sigma
    rot = q @ flip
    if d == 2:
        x0 = np.concatenate([[math.atan2(rot[1, 0], rot[0, 0])], tau])
    else:
        x0 = np.concatenate([Rotation.from_matrix(rot).as_rotvec(), tau])
    rdim = 1 if d == 2 else 3

    def obj(p):
        return value_at(_rotation(p[:rdim], sigma, d), p[rdim:])

    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
    qq = _rotation(res.x[:rdim], sigma, d)
    val = value_at(qq, res.x[rdim:])
    base = value_at(q, tau)
    if val < base:
        return val, qq, res.x[rdim:]
    return base, q, tau


# ----------------------------------------------------------------------------
# periodic sets


def common_sublattice(lx: Lattice, ly: Lattice, max_den: int = 64) -> Lattice | None:
    """Intersection of two commensurable lattices, or None."""
    ratio = np.linalg.solve(lx.basis, ly.basis)
    rat = intlattice.rationalize(ratio, max_den, TOL)
    if rat is None:
        return None
    coords = intlattice.intersection_coordinates(rat)
    return Lattice(lx.basis @ np.array(coords, dtype=float))


def lift_motif(x: PeriodicPointSet, sub: Lattice) -> np.ndarray:
    """Motif of ``x`` re-expressed over the sublattice ``sub`` (reduced into its cell)."""
    coords = np.round(np.linalg.solve(x.lattice.basis, sub.basis)).astype(int)
    hnf = intlattice.hermite_columns(coords.tolist())
    reps = intlattice.coset_representatives(hnf) @ x.lattice.basis.T
    pts = (x.motif[None, :, :] + reps[:, None, :]).reshape(-1, x.dim)
    return sub.reduce_points(pts)


def _torus_pairs(a: np.ndarray, b: np.ndarray, basis: np.ndarray, cap: float):
    """All (i, j, dist) with torus distance between a_i and b_j at most ``cap``."""
    lat = Lattice(basis)
    reach = lat.cell_diameter() + cap
    shifts = lattice_coefficients_in_ball(basis, np.zeros(len(basis)), reach) @ basis.T
    nb = len(b)
    expanded = (b[None, :, :] + shifts[:, None, :]).reshape(-1, b.shape[1])
    tree_b = cKDTree(expanded)
    tree_a = cKDTree(a)
    sparse = tree_a.sparse_distance_matrix(tree_b, cap, output_type="ndarray")
    if len(sparse) == 0:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    rows = sparse["i"].astype(np.int64)
    cols = (sparse["j"] % nb).astype(np.int64)
    vals = sparse["v"]
    # keep the smallest translate per (i, j)
    key = rows * nb + cols
    order = np.lexsort((vals, key))
    key, rows, cols, vals = key[order], rows[order], cols[order], vals[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    return rows[first], cols[first], vals[first]


def _nearest_torus(a: np.ndarray, b: np.ndarray, basis: np.ndarray) -> np.ndarray:
    lat = Lattice(basis)
    reach = 0.5 * float(np.linalg.norm(basis, axis=0).sum())
    shifts = lattice_coefficients_in_ball(basis, np.zeros(len(basis)), lat.cell_diameter() + reach) @ basis.T
    expanded = (b[None, :, :] + shifts[:, None, :]).reshape(-1, b.shape[1])
    dist, _ = cKDTree(expanded).query(a)
    return dist


def densities_match(x: PeriodicPointSet, y: PeriodicPointSet) -> bool:
    return abs(x.density - y.density) <= TOL * max(1.0, x.density, y.density)


def bottleneck_periodic_upper(x: PeriodicPointSet, y: PeriodicPointSet, max_den: int = 64) -> BottleneckResult:
    """Optimal equivariant matching over a common sublattice (an upper bound on d_B).

    The interval's lower end is the largest nearest-neighbour distance, which
    every bijection has to pay.
    """
    if not densities_match(x, y):
        return BottleneckResult(INFINITE)
    sub = common_sublattice(x.lattice, y.lattice, max_den)
    if sub is None:
        raise ValueError("no common superlattice within denominator bound")
    sub = Lattice(sub.reduced_basis)
    a = lift_motif(x, sub)
    b = lift_motif(y, sub)
    if len(a) != len(b):
        return BottleneckResult(INFINITE)
    basis = np.array(sub.basis)
    n = len(a)
    floor = max(float(_nearest_torus(a, b, basis).max()), float(_nearest_torus(b, a, basis).max()))
    cap_max = 0.5 * float(np.linalg.norm(basis, axis=0).sum()) + TOL
    cap = min(max(floor * 1.25, floor + 1e-9), cap_max)
    while True:
        rows, cols, vals = _torus_pairs(a, b, basis, cap)
        value, match = bottleneck_assignment(n, rows, cols, vals)
        if match is not None or cap >= cap_max:
            break
        cap = min(cap * 2 + 1e-9, cap_max)
    if match is None:
        return BottleneckResult(INFINITE)
    pairs = tuple((i, int(j)) for i, j in enumerate(match))
    return BottleneckResult(RadiusInterval(min(floor, value), value), Matching(pairs, value))


def _as_pps(x):
    if isinstance(x, Lattice):
        return PeriodicPointSet.from_lattice(x)
    return x


def _counting_one_way(x, y, centers: np.ndarray, radii) -> float:
    best = 0.0
    for c in centers:
        for a in radii:
            need = len(points_in_ball(x, c, a))
            if need == 0:
                continue
            if isinstance(y, FinitePointSet):
                dist = np.sort(np.linalg.norm(np.array(y.points) - c, axis=1))
                if len(dist) < need:
                    return math.inf
                kth = dist[need - 1]
            else:
                reach = a + 1.0
                while True:
                    pts = np.array(points_in_ball(y, c, reach).points)
                    if len(pts) >= need:
                        break
                    reach *= 2
                kth = np.sort(np.linalg.norm(pts - c, axis=1))[need - 1]
            best = max(best, float(kth - a))
    return best


def counting_lower_bound(x, y, centers=None, radii=(0.0,)) -> float:
    """Ball-count lower bound on ``d_B(x, y)``, checked in both directions.

    For a center c and radius a, if the closed ball B(c, a) holds N points of
    x then any bijection with displacement below (distance from c to the
    N-th nearest point of y) - a is impossible.  With a = 0 this is the
    directed Hausdorff distance at the centers.
    """
    x, y = _as_pps(x), _as_pps(y)
    if centers is None:
        parts = []
        for s in (x, y):
            parts.append(np.array(s.points) if isinstance(s, FinitePointSet) else np.array(s.motif))
        centers = np.concatenate(parts)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = [float(r) for r in np.atleast_1d(radii)]
    return max(_counting_one_way(x, y, centers, radii), _counting_one_way(y, x, centers, radii))


def covering_gap_lower_bound(x, y, h: float) -> float:
    """max(0, c(Y) - c(X)) from certified covering intervals, taken in both orders."""
    if not h > 0:
        raise ValueError("resolution must be positive")
    cx = covering_radius(_as_pps(x), h)
    cy = covering_radius(_as_pps(y), h)
    return max(0.0, cy.lower - cx.upper, cx.lower - cy.upper)


# ---- Euclidean bottleneck between periodic sets


def _signed_permutations(d: int):
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1.0, -1.0), repeat=d):
            q = np.zeros((d, d))
            for i, j in enumerate(perm):
                q[j, i] = signs[i]
            yield q


def _short_vectors(lat: Lattice, count: int = 2) -> np.ndarray:
    red = np.array(lat.reduced_basis)
    norms = np.linalg.norm(red, axis=0)
    radius = float(np.sort(norms)[min(count, lat.dim) - 1]) * (1 + 1e-6)
    coeffs = lattice_coefficients_in_ball(red, np.zeros(lat.dim), radius)
    vecs = coeffs @ red.T
    return vecs[np.linalg.norm(vecs, axis=1) > TOL]


def _candidate_orthogonals(lx: Lattice, ly: Lattice, max_den: int) -> list[np.ndarray]:
    d = lx.dim
    cands = list(_signed_permutations(d))
    sx, sy = _short_vectors(lx), _short_vectors(ly)
    if d == 2:
        for u in sy:
            for w in sx:
                if abs(np.linalg.norm(u) - np.linalg.norm(w)) > 1e-9 * max(1, np.linalg.norm(w)):
                    continue
                for sigma in (1.0, -1.0):
                    uu = np.array([u[0], sigma * u[1]])
                    ang = math.atan2(w[1], w[0]) - math.atan2(uu[1], uu[0])
                    cands.append(_rotation_2d(ang, sigma))
    else:
        for u1, u2 in itertools.permutations(sy, 2):
            if np.linalg.norm(np.cross(u1, u2)) < 1e-9:
                continue
            for w1, w2 in itertools.permutations(sx, 2):
                if abs(u1 @ u1 - w1 @ w1) > 1e-9 or abs(u2 @ u2 - w2 @ w2) > 1e-9 or abs(u1 @ u2 - w1 @ w2) > 1e-9:
                    continue
                for sigma in (1.0, -1.0):
                    fu = np.column_stack([u1, u2, sigma * np.cross(u1, u2)])
                    fw = np.column_stack([w1, w2, np.cross(w1, w2)])
                    cands.append(fw @ np.linalg.inv(fu))
    keep = []
    for q in cands:
        if not np.allclose(q.T @ q, np.eye(d), atol=1e-9):
            continue
        if any(np.allclose(q, k, atol=1e-9) for k in keep):
            continue
        if common_sublattice(lx, ly.transformed(q), max_den) is None:
            continue
        keep.append(q)
    return keep


def _periodic_upper(x, y, max_den, seed=0, refine=True):
    """Best equivariant upper bound over candidate rigid motions of ``y``."""
    d = x.dim
    best = (math.inf, None, None)
    for q in _candidate_orthogonals(x.lattice, y.lattice, max_den):
        qy = y.transformed(q)
        shifts = [np.zeros(d)]
        shifts += [p - r for p in x.motif[:8] for r in qy.motif[:8]]
        grid = np.array(list(itertools.product(*[np.linspace(0, 1, 4, endpoint=False)] * d)))
        shifts += list(grid @ qy.lattice.basis.T)

        def value(t):
            try:
                return bottleneck_periodic_upper(x, qy.transformed(np.eye(d), t), max_den).upper
            except ValueError:
                return math.inf

        scored = sorted(((value(t), i) for i, t in enumerate(shifts)), key=lambda s: s[0])
        for val, i in scored[:1]:
            t = shifts[i]
            if refine and val > TOL:
                res = minimize(lambda p: value(p), t, method="Nelder-Mead",
                               options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 200})
                if res.fun < val:
                    val, t = float(res.fun), res.x
            if val < best[0]:
                best = (val, q, t)
    return best


def _centrally_symmetric(y: PeriodicPointSet) -> bool:
    if y.size == 1:
        return True
    neg = y.lattice.reduce_points(-y.motif)
    shift = neg[0] - y.motif
    for s in shift:
        moved = y.lattice.reduce_points(neg - s)
        dists = _nearest_torus(moved, np.array(y.motif), np.array(y.lattice.basis))
        if dists.max() < 1e-9:
            return True
    return False


class _PeriodicBounder:
    """Lower bounds on d_B(X, Q(Y + s)) uniformly over a box of motions.

    A box is described by its center motion (q, s), a factor ``omega`` with
    |Q z - Q' z| <= omega |z| for every rotation Q' in the box, and the radius
    ``delta_s`` of the translation part.  A point z of Y then moves by at most
    delta_s + omega |z + s| across the box.
    """

    def __init__(self, x: PeriodicPointSet, y: PeriodicPointSet, window: float, margin: float):
        self.d = x.dim
        self.window = window
        self.margin = margin
        self.y = y
        cell = y.lattice.cell_diameter()
        xs = np.array(points_in_ball(x, np.zeros(self.d), window + margin).points)
        self.x_tree = cKDTree(xs)
        self.x_window = xs[np.linalg.norm(xs, axis=1) <= window]
        self.y_points = np.array(points_in_ball(y, np.zeros(self.d), window + margin + cell).points)

    def _x_side(self, points, tree, mu, moved_far, k=8):
        # lower bound on the displacement of each x in ``points``
        k = min(k, tree.n)
        dist, idx = tree.query(points, k=k)
        dist = dist.reshape(len(points), k)
        idx = idx.reshape(len(points), k)
        per = (dist - mu[idx]).min(axis=1)
        if k < tree.n:
            per = np.minimum(per, dist[:, -1] - mu.max())
        return np.minimum(per, moved_far)

    def bound(self, q, s, omega, delta_s) -> float:
        y_shift = self.y_points + s
        norms = np.linalg.norm(y_shift, axis=1)
        reach = self.window + self.margin
        near = norms <= reach
        moved = y_shift[near] @ q.T
        mu = delta_s + omega * norms[near]
        # partners outside ``moved`` sit beyond this much displacement
        moved_far = self.margin - delta_s - omega * reach
        best = 0.0
        tree = cKDTree(moved) if len(moved) else None
        if tree is not None and len(self.x_window):
            best = max(best, float(self._x_side(self.x_window, tree, mu, moved_far).max()))
        inner = norms[near] <= self.window
        if inner.any():
            dist, _ = self.x_tree.query(moved[inner])
            per = np.minimum(dist, self.margin) - mu[inner]
            best = max(best, float(per.max()))
        return best


def euclidean_bottleneck_periodic(x: PeriodicPointSet, y: PeriodicPointSet, window: float,
                                  budget: Budget | None = None, max_den: int = 64,
                                  resolution: float = 0.02) -> BottleneckResult:
    """Certified interval for d_EB between periodic sets in dimension 2 or 3.

    The upper end is the best equivariant matching over candidate motions
    (infinite when no candidate is commensurable).  The lower end is the
    covering-radius gap combined with a branch and bound over reflection x
    rotation x translation (modulo the unit cell of ``y``) that bounds
    nearest-neighbour distances inside the window.
    """
    budget = budget or Budget()
    x, y = _as_pps(x), _as_pps(y)
    d = x.dim
    if d not in (2, 3):
        raise ValueError("unsupported dimension for certified d_EB")
    if not densities_match(x, y):
        return BottleneckResult(INFINITE)
    start = time.monotonic()

    upper, q_best, t_best = _periodic_upper(x, y, max_den)
    iso = None if q_best is None else IsometryParams(q_best, t_best)
    cx = covering_radius(x, resolution)
    cy = covering_radius(y, resolution)
    gap = max(0.0, cy.lower - cx.upper, cx.lower - cy.upper)
    if upper <= gap + budget.target_width:
        return BottleneckResult(RadiusInterval(min(gap, upper), upper), isometry=iso)

    margin = cx.upper + cy.upper + 1.0
    bounder = _PeriodicBounder(x, y, window, margin)
    sym = _centrally_symmetric(y)
    sigmas = (1.0,) if (sym and d == 3) else (1.0, -1.0)
    rdim = 1 if d == 2 else 3
    if d == 2:
        rot_lo, rot_hi, rot_splits = np.array([0.0]), np.array([math.pi if sym else 2 * math.pi]), 16
    else:
        rot_lo, rot_hi, rot_splits = np.full(3, -math.pi), np.full(3, math.pi), 4
    ylengths = np.linalg.norm(y.lattice.basis, axis=0)
    reach = window + margin

    def evaluate(sigma, lo, hi):
        mid = (lo + hi) / 2
        half = (hi - lo) / 2
        q = _rotation(mid[:rdim], sigma, d)
        s = y.lattice.basis @ mid[rdim:]
        ang = half[0] if d == 2 else math.sqrt(3) * half[:3].max()
        omega = _chord(ang)
        delta_s = _max_diagonal(y.lattice.basis * half[rdim:]) if d > 0 else 0.0
        return bounder.bound(q, s, omega, delta_s)

    heap = []
    counter = itertools.count()
    for sigma in sigmas:
        axes = [np.linspace(rot_lo[i], rot_hi[i], rot_splits + 1) for i in range(rdim)]
        for cell in itertools.product(*[range(rot_splits)] * rdim):
            lo = np.concatenate([[axes[i][c] for i, c in enumerate(cell)], np.zeros(d)])
            hi = np.concatenate([[axes[i][c + 1] for i, c in enumerate(cell)], np.ones(d)])
            heapq.heappush(heap, (evaluate(sigma, lo, hi), next(counter), sigma, lo, hi))
    nodes = len(heap)
    closed = math.inf
    truncated = False
    goal = budget.lower_target
    while heap:
        lb = heap[0][0]
        if goal is not None and lb >= goal:
            break
        if lb >= upper - budget.target_width:
            break
        if nodes >= budget.max_nodes or time.monotonic() - start > budget.max_seconds:
            truncated = True
            break
        _, _, sigma, lo, hi = heapq.heappop(heap)
        half = (hi - lo) / 2
        effect = np.concatenate([half[:rdim] * reach * (1.0 if d == 2 else math.sqrt(3)),
                                 half[rdim:] * ylengths])
        axis = int(np.argmax(effect))
        cut = (lo[axis] + hi[axis]) / 2
        for a_lo, a_hi in ((lo[axis], cut), (cut, hi[axis])):
            clo, chi = lo.copy(), hi.copy()
            clo[axis], chi[axis] = a_lo, a_hi
            clb = evaluate(sigma, clo, chi)
            nodes += 1
            if clb >= upper:
                closed = min(closed, clb)
                continue
            heapq.heappush(heap, (clb, next(counter), sigma, clo, chi))
    bb = min(heap[0][0] if heap else math.inf, closed, upper)
    lower = min(max(gap, bb), upper)
    return BottleneckResult(RadiusInterval(lower, upper), isometry=iso, truncated=truncated, nodes=nodes)

"""Lattices, periodic point sets, and their basic metric invariants.

Conventions: a basis is a ``d x d`` array whose *columns* are the basis
vectors; point collections are ``n x d`` arrays with one point per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# ----------------------------------------------------------------------------
# basis reduction


def _gauss_reduce(basis: np.ndarray) -> np.ndarray:
    b1, b2 = basis[:, 0].copy(), basis[:, 1].copy()
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    while True:
        mu = round((b1 @ b2) / (b1 @ b1))
        b2 = b2 - mu * b1
        if b2 @ b2 >= b1 @ b1 - 1e-15 * (b1 @ b1):
            break
        b1, b2 = b2, b1
    return np.column_stack([b1, b2])


def _lll_reduce(basis: np.ndarray, delta: float = 0.99) -> np.ndarray:
    b = basis.copy()
    d = b.shape[1]

    def gso(b):
        bstar = np.zeros_like(b)
        mu = np.zeros((d, d))
        for i in range(d):
            v = b[:, i].copy()
            for j in range(i):
                mu[i, j] = (b[:, i] @ bstar[:, j]) / (bstar[:, j] @ bstar[:, j])
                v -= mu[i, j] * bstar[:, j]
            bstar[:, i] = v
        return bstar, mu

    bstar, mu = gso(b)
    k = 1
    guard = 0
    while k < d:
        guard += 1
        if guard > 10000:
            break
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                b[:, k] -= q * b[:, j]
                bstar, mu = gso(b)
        lhs = bstar[:, k] @ bstar[:, k]
        rhs = (delta - mu[k, k - 1] ** 2) * (bstar[:, k - 1] @ bstar[:, k - 1])
        if lhs >= rhs:
            k += 1
        else:
            b[:, [k, k - 1]] = b[:, [k - 1, k]]
            bstar, mu = gso(b)
            k = max(k - 1, 1)
    return b


def reduce_basis(basis: np.ndarray) -> np.ndarray:
    """Return a reduced basis of the same lattice (Gauss for d=2, LLL above)."""
    basis = np.asarray(basis, dtype=float)
    d = basis.shape[0]
    if d == 1:
        return np.abs(basis)
    if d == 2:
        return _gauss_reduce(basis)
    return _lll_reduce(basis)


def lattice_coefficients_in_ball(basis: np.ndarray, center, radius: float) -> np.ndarray:
    """Integer coefficient vectors ``a`` with ``|basis @ a - center| <= radius``.

    The search box comes from the rows of the inverse basis: the i-th
    coordinate of any point of the ball differs from that of the center by
    at most ``radius * |row_i(basis^-1)|``.  Pass a reduced basis to keep
    the box small.
    """
    basis = np.asarray(basis, dtype=float)
    d = basis.shape[0]
    center = np.asarray(center, dtype=float).reshape(d)
    inv = np.linalg.inv(basis)
    mid = inv @ center
    spread = radius * np.linalg.norm(inv, axis=1)
    lo = np.ceil(mid - spread - TOL).astype(int)
    hi = np.floor(mid + spread + TOL).astype(int)
    if np.any(hi < lo):
        return np.zeros((0, d), dtype=int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = grid @ basis.T
    keep = np.linalg.norm(pts - center, axis=1) <= radius + TOL
    return grid[keep]


# ----------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class RadiusInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower < 0 or self.lower > self.upper:
            raise ValueError(f"invalid interval [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    @classmethod
    def exact(cls, value: float) -> "RadiusInterval":
        return cls(value, value)


INFINITE = RadiusInterval(math.inf, math.inf)


class Lattice:
    """Full-rank lattice spanned by the columns of ``basis``."""

    def __init__(self, basis):
        basis = np.array(basis, dtype=float)
        if basis.ndim == 0:
            basis = basis.reshape(1, 1)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise ValueError("basis must be a square d x d matrix")
        det = abs(float(np.linalg.det(basis)))
        scale = float(np.prod(np.linalg.norm(basis, axis=0)))
        if not np.all(np.isfinite(basis)) or scale == 0 or det <= TOL * scale:
            raise ValueError("singular basis")
        self.basis = _frozen(basis)
        self.det = det
        self._reduced = None

    @classmethod
    def integer(cls, d: int) -> "Lattice":
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def density(self) -> float:
        return 1.0 / self.det

    @property
    def reduced_basis(self) -> np.ndarray:
        if self._reduced is None:
            self._reduced = _frozen(reduce_basis(np.array(self.basis)))
        return self._reduced

    def cell_coordinates(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.solve(self.basis, points.T).T

    def reduce_points(self, points) -> np.ndarray:
        """Reduce points into the half-open unit cell of this basis."""
        coords = self.cell_coordinates(points)
        frac = coords - np.floor(coords)
        frac[frac > 1 - TOL] = 0.0
        return frac @ self.basis.T

    def contains(self, points, tol: float = 1e-6) -> np.ndarray:
        coords = self.cell_coordinates(points)
        return np.all(np.abs(coords - np.round(coords)) <= tol, axis=1)

    def shortest_vector(self) -> np.ndarray:
        red = self.reduced_basis
        norms = np.linalg.norm(red, axis=0)
        best = red[:, int(np.argmin(norms))]
        if self.dim <= 2:
            return np.array(best)
        coeffs = lattice_coefficients_in_ball(red, np.zeros(self.dim), float(norms.min()))
        vecs = coeffs @ red.T
        lengths = np.linalg.norm(vecs, axis=1)
        nonzero = lengths > TOL
        vecs, lengths = vecs[nonzero], lengths[nonzero]
        ties = vecs[lengths <= lengths.min() * (1 + 1e-12)]
        # deterministic choice among ties: lexicographically largest
        return ties[np.lexsort(ties.T[::-1])[-1]]

    def scaled(self, c: float) -> "Lattice":
        return Lattice(self.basis * c)

    def transformed(self, mat) -> "Lattice":
        return Lattice(np.asarray(mat, dtype=float) @ self.basis)

    def cell_diameter(self) -> float:
        corners = np.array(list(product((0.0, 1.0), repeat=self.dim))) @ self.basis.T
        return float(max(np.linalg.norm(corners[i] - corners[j])
                         for i in range(len(corners)) for j in range(i, len(corners))))

    def __repr__(self):
        return f"Lattice({self.basis.tolist()})"


class PeriodicPointSet:
    """Lattice plus a finite motif reduced into the half-open unit cell."""

    def __init__(self, lattice: Lattice, motif):
        if not isinstance(lattice, Lattice):
            lattice = Lattice(lattice)
        motif = np.atleast_2d(np.asarray(motif, dtype=float))
        if motif.size == 0:
            raise ValueError("motif must be nonempty")
        if motif.shape[1] != lattice.dim:
            raise ValueError("motif dimension does not match lattice")
        coords = lattice.cell_coordinates(motif)
        shift = np.floor(coords)
        coords -= shift
        wrapped = coords > 1 - TOL
        coords[wrapped] = 0.0
        # points already inside the cell are kept verbatim so reduction is idempotent
        inside = ~(shift != 0).any(axis=1) & ~wrapped.any(axis=1)
        if len(coords) > 1:
            tree = cKDTree(np.mod(coords, 1.0), boxsize=1.0)
            if tree.query_pairs(r=TOL):
                raise ValueError("motif points coincide after reduction")
        self.lattice = lattice
        reduced = coords @ lattice.basis.T
        reduced[inside] = motif[inside]
        self.motif = _frozen(reduced)

    @classmethod
    def from_lattice(cls, lattice: Lattice) -> "PeriodicPointSet":
        return cls(lattice, np.zeros((1, lattice.dim)))

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def size(self) -> int:
        return len(self.motif)

    @property
    def density(self) -> float:
        return self.size / self.lattice.det

    def scaled(self, c: float) -> "PeriodicPointSet":
        return PeriodicPointSet(self.lattice.scaled(c), self.motif * c)

    def transformed(self, orthogonal, translation=None) -> "PeriodicPointSet":
        """Image under ``x -> orthogonal @ x + translation``."""
        q = np.asarray(orthogonal, dtype=float)
        t = np.zeros(self.dim) if translation is None else np.asarray(translation, dtype=float)
        return PeriodicPointSet(self.lattice.transformed(q), self.motif @ q.T + t)

    def in_reduced_cell(self) -> "PeriodicPointSet":
        """Same point set described with the reduced basis."""
        lat = Lattice(self.lattice.reduced_basis)
        return PeriodicPointSet(lat, self.motif)

    def __repr__(self):
        return f"PeriodicPointSet(basis={self.lattice.basis.tolist()}, motif={self.motif.tolist()})"


class FinitePointSet:
    def __init__(self, points, dim: int | None = None, allow_duplicates: bool = False):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            if dim is None:
                raise ValueError("dimension required for an empty point set")
            pts = pts.reshape(0, dim)
        pts = np.atleast_2d(pts)
        if pts.ndim == 2 and pts.shape[0] == 1 and dim is not None and pts.shape[1] != dim:
            pts = pts.reshape(-1, dim)
        if dim is not None and pts.shape[1] != dim:
            raise ValueError("points do not match the stated dimension")
        if not allow_duplicates and len(pts) > 1:
            if cKDTree(pts).query_pairs(r=TOL):
                raise ValueError("duplicate points (pass allow_duplicates=True)")
        self.points = _frozen(pts)
        self.allow_duplicates = allow_duplicates

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self):
        return f"FinitePointSet({self.points.tolist()})"


# ----------------------------------------------------------------------------
# invariants


def density(x: PeriodicPointSet) -> float:
    return x.density


def _translates_near_cell(lattice_basis: np.ndarray, reach: float) -> np.ndarray:
    """Lattice vectors whose shifted cell comes within ``reach`` of the cell."""
    lat = Lattice(lattice_basis)
    # a point p + λ (p in the cell) is within reach of the cell only if
    # |λ| <= diam + reach
    radius = lat.cell_diameter() + reach
    coeffs = lattice_coefficients_in_ball(lattice_basis, np.zeros(lat.dim), radius)
    return coeffs @ lattice_basis.T


def expanded_points(x: PeriodicPointSet, reach: float) -> np.ndarray:
    """All points of ``x`` within ``reach`` of the closed reduced unit cell (and a few more)."""
    red = x.in_reduced_cell()
    shifts = _translates_near_cell(np.array(red.lattice.basis), reach)
    return (red.motif[None, :, :] + shifts[:, None, :]).reshape(-1, x.dim)


def packing_radius(x: PeriodicPointSet) -> float:
    """Half the minimum distance between distinct points of ``x``."""
    if not isinstance(x, PeriodicPointSet):
        x = PeriodicPointSet.from_lattice(x)
    shortest = float(np.linalg.norm(x.lattice.shortest_vector()))
    if x.size == 1:
        return shortest / 2
    red = x.in_reduced_cell()
    pts = expanded_points(red, shortest)
    tree = cKDTree(pts)
    dist, _ = tree.query(red.motif, k=2)
    return float(min(shortest, dist[:, 1].min())) / 2


def _max_diagonal(edges: np.ndarray) -> float:
    """Longest diagonal of the parallelepiped spanned by the columns of ``edges``."""
    d = edges.shape[1]
    best = 0.0
    for signs in product((1.0, -1.0), repeat=d - 1):
        v = edges @ np.array((1.0,) + signs)
        best = max(best, float(np.linalg.norm(v)))
    return best


def covering_radius(x: PeriodicPointSet, resolution: float) -> RadiusInterval:
    """Certified enclosure of the covering radius at grid step ``resolution``.

    The closed reduced unit cell is subdivided into sub-cells of edge length
    at most ``resolution``; the distance to ``x`` is 1-Lipschitz, so a
    sub-cell whose center value plus half its diagonal cannot beat the best
    value found so far is discarded without refinement.  For rectangular
    cells the final width is at most ``resolution * sqrt(d) / 2``.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if not isinstance(x, PeriodicPointSet):
        x = PeriodicPointSet.from_lattice(x)
    red = x.in_reduced_cell()
    basis = np.array(red.lattice.basis)
    d = x.dim
    reach = 0.5 * float(np.linalg.norm(basis, axis=0).sum())
    tree = cKDTree(expanded_points(red, reach))

    lengths = np.linalg.norm(basis, axis=0)
    # start from a coarse grid of roughly cubical boxes
    coarse = max(lengths.max() / 8, resolution)
    splits = np.maximum(1, np.ceil(lengths / coarse).astype(int))
    corners = np.stack(np.meshgrid(*[np.arange(k) / k for k in splits], indexing="ij"),
                       axis=-1).reshape(-1, d)
    size = 1.0 / splits.astype(float)

    best = 0.0
    leaves_upper = 0.0
    while len(corners):
        edges = basis * size
        half_diag = _max_diagonal(edges) / 2
        centers = (corners + size / 2) @ basis.T
        vals, _ = tree.query(centers)
        # corners of the closed cell are sampled too
        best = max(best, float(vals.max()))
        upper = vals + half_diag
        live = upper > best
        corners = corners[live]
        upper = upper[live]
        edge_len = lengths * size
        if edge_len.max() <= resolution or not len(corners):
            if len(upper):
                leaves_upper = max(leaves_upper, float(upper.max()))
            break
        axis = int(np.argmax(edge_len))
        size = size.copy()
        size[axis] /= 2
        shifted = corners.copy()
        shifted[:, axis] += size[axis]
        corners = np.concatenate([corners, shifted])
    return RadiusInterval(best, max(best, leaves_upper))


def points_in_ball(x, center, radius: float, open: bool = False) -> FinitePointSet:
    """Points of a PPS or finite set inside the ball ``B(center, radius)``."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    center = np.asarray(center, dtype=float)
    if isinstance(x, Lattice):
        x = PeriodicPointSet.from_lattice(x)
    if isinstance(x, FinitePointSet):
        pts = np.array(x.points)
    else:
        center = center.reshape(x.dim)
        pts = _periodic_ball_candidates(x, center, radius)
    dist = np.linalg.norm(pts - center, axis=1)
    keep = dist < radius - TOL if open else dist <= radius + TOL
    pts = pts[keep]
    order = np.lexsort(pts.T[::-1]) if len(pts) else np.arange(0)
    return FinitePointSet(pts[order], dim=pts.shape[1], allow_duplicates=True)


def _periodic_ball_candidates(x: PeriodicPointSet, center: np.ndarray, radius: float) -> np.ndarray:
    red = x.in_reduced_cell()
    basis = np.array(red.lattice.basis)
    if red.size <= 4:
        chunks = []
        for p in red.motif:
            coeffs = lattice_coefficients_in_ball(basis, center - p, radius)
            chunks.append(coeffs @ basis.T + p)
        return np.concatenate(chunks)
    # translated cells that can meet the ball: every cell point is within
    # half the longest diagonal of the cell center
    half = _max_diagonal(basis) / 2
    mid = basis.sum(axis=1) / 2
    coeffs = lattice_coefficients_in_ball(basis, center - mid, radius + half)
    shifts = coeffs @ basis.T
    return (red.motif[None, :, :] + shifts[:, None, :]).reshape(-1, x.dim)


def ball_count(x, center, radius: float, open: bool = False) -> int:
    return len(points_in_ball(x, center, radius, open))


def nearest_distance(x: PeriodicPointSet, points) -> np.ndarray:
    """Exact distance from each query point to the periodic set ``x``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    red = x.in_reduced_cell()
    basis = np.array(red.lattice.basis)
    coords = np.linalg.solve(basis, points.T).T
    base = np.floor(coords) @ basis.T
    local = points - base
    reach = 0.5 * float(np.linalg.norm(basis, axis=0).sum())
    tree = cKDTree(expanded_points(red, reach))
    dist, _ = tree.query(local)
    return dist


# ----------------------------------------------------------------------------
# projection


def hyperplane_frame(normal) -> np.ndarray:
    """Orthonormal basis (as columns, ``d x (d-1)``) of the hyperplane ``normal^⊥``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    d = len(n)
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(d)]))
    frame = q[:, 1:d]
    return frame


def primitive_basis_with(lattice: Lattice, v) -> np.ndarray:
    """A basis of ``lattice`` whose first column is the primitive vector ``v``."""
    from .intlattice import unimodular_with_first_column

    coeffs = np.linalg.solve(lattice.basis, np.asarray(v, dtype=float))
    ints = np.round(coeffs)
    if np.max(np.abs(coeffs - ints)) > 1e-6:
        raise ValueError("vector is not in the lattice")
    u = unimodular_with_first_column([int(c) for c in ints])
    out = lattice.basis @ u
    out[:, 0] = v
    return out


def project_along(lattice: Lattice, v, normal) -> tuple[Lattice, np.ndarray]:
    """Project ``lattice`` along its primitive vector ``v`` onto ``normal^⊥``.

    Returns the projected lattice in the coordinates of an orthonormal frame
    of the hyperplane, together with that frame.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    v = np.asarray(v, dtype=float)
    if abs(n @ v) <= TOL * np.linalg.norm(v):
        raise ValueError("shortest vector parallel to hyperplane")
    basis = primitive_basis_with(lattice, v)
    rest = basis[:, 1:]
    projected = rest - np.outer(v, (n @ rest) / (n @ v))
    frame = hyperplane_frame(n)
    return Lattice(frame.T @ projected), frame


def project_along_shortest(lattice: Lattice, hyperplane_normal) -> Lattice:
    """Project along a shortest lattice vector onto the hyperplane ``normal^⊥``."""
    if lattice.dim < 2:
        raise ValueError("projection needs dimension at least 2")
    v = lattice.shortest_vector()
    projected, _ = project_along(lattice, v, hyperplane_normal)
    return projected


def hexagonal_lattice(density_value: float = 1.0) -> Lattice:
    side = math.sqrt(2 / (math.sqrt(3) * density_value))
    return Lattice(side * np.array([[1.0, 0.5], [0.0, math.sqrt(3) / 2]]))


def fcc_lattice(density_value: float = 1.0) -> Lattice:
    basis = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    scale = (2 * density_value) ** (-1 / 3)
    return Lattice(basis * scale)


def densest_packing_radius(d: int) -> float:
    """Upper bound on the packing radius of a density-1 lattice in dimension d.

    Exact (hexagonal, face-centred cubic) for d = 2, 3; Minkowski's bound
    sqrt(d)/2 for d >= 4.
    """
    if d == 1:
        return 0.5
    if d == 2:
        return packing_radius(PeriodicPointSet.from_lattice(hexagonal_lattice()))
    if d == 3:
        return packing_radius(PeriodicPointSet.from_lattice(fcc_lattice()))
    return math.sqrt(d) / 2


def random_unimodular(d: int, rng: np.random.Generator, steps: int = 6) -> np.ndarray:
    u = np.eye(d)
    for _ in range(steps):
        i, j = rng.choice(d, size=2, replace=False)
        u[:, i] += int(rng.integers(-2, 3)) * u[:, j]
    return u


def max_ball_count(x: PeriodicPointSet, radius: float, pad: float = 0.01) -> tuple[int, int]:
    """Bounds (achieved, certified) on the largest |x ∩ B̄(c, radius)| over all centers c.

    Centers range over sub-cells of the reduced unit cell.  A sub-cell whose
    inflated count cannot beat the best achieved count is dropped; the rest
    are split until every center lies within ``pad`` of a sample.
    """
    if not pad > 0:
        raise ValueError("pad must be positive")
    if not isinstance(x, PeriodicPointSet):
        x = PeriodicPointSet.from_lattice(x)
    red = x.in_reduced_cell()
    basis = np.array(red.lattice.basis)
    d = x.dim
    reach = radius + _max_diagonal(basis)
    tree = cKDTree(expanded_points(red, reach))
    lengths = np.linalg.norm(basis, axis=0)
    splits = np.maximum(1, np.ceil(lengths / max(lengths.max() / 8, pad)).astype(int))
    corners = np.stack(np.meshgrid(*[np.arange(k) / k for k in splits], indexing="ij"),
                       axis=-1).reshape(-1, d)
    size = 1.0 / splits.astype(float)
    # balls centred on points of x are natural maximisers
    best = int(tree.query_ball_point(red.motif, radius + TOL, return_length=True).max())
    certified = 0
    while len(corners):
        half_diag = _max_diagonal(basis * size) / 2
        centers = (corners + size / 2) @ basis.T
        achieved = tree.query_ball_point(centers, radius + TOL, return_length=True)
        best = max(best, int(achieved.max()))
        inflated = tree.query_ball_point(centers, radius + half_diag + TOL, return_length=True)
        live = inflated > best
        corners, inflated = corners[live], inflated[live]
        if half_diag <= pad or not len(corners):
            if len(inflated):
                certified = max(certified, int(inflated.max()))
            break
        axis = int(np.argmax(lengths * size))
        size = size.copy()
        size[axis] /= 2
        shifted = corners.copy()
        shifted[:, axis] += size[axis]
        corners = np.concatenate([corners, shifted])
    return best, max(best, certified)


def random_lattice(d: int, rng: np.random.Generator, min_packing: float = 0.0,
                   max_tries: int = 10_000) -> Lattice:
    """Density-1 lattice with a Gaussian basis, redrawn until the packing radius is large enough."""
    for _ in range(max_tries):
        basis = rng.normal(size=(d, d))
        det = abs(np.linalg.det(basis))
        if det < 1e-6:
            continue
        lat = Lattice(basis / det ** (1 / d))
        if packing_radius(lat) >= min_packing:
            return Lattice(lat.reduced_basis)
    raise ValueError("no lattice with the requested packing radius found")

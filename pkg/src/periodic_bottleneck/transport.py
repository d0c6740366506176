"""Bounded-displacement bijections between lattices built from coset shifts.

A coset shift along a primitive vector ``v`` moves every line ``p + Z v`` of
the lattice rigidly along itself by a fractional multiple of ``v``, so each
point moves by less than ``|v|``.  Chaining shifts turns any density-1
lattice into the integer lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bottleneck import BottleneckResult, bottleneck_periodic_upper
from .geometry import (
    TOL,
    Lattice,
    PeriodicPointSet,
    densest_packing_radius,
    lattice_coefficients_in_ball,
    packing_radius,
    primitive_basis_with,
)


@dataclass(frozen=True)
class ShiftStep:
    """p(a) -> p(a) + frac(w . a) v, with a the coordinates of p in ``basis_before``.

    By convention the first column of ``basis_before`` is ``v`` and ``w[0] == 0``;
    ``basis_after`` is ``basis_before`` with column i replaced by b_i + w_i v.
    """

    v: np.ndarray
    w: np.ndarray
    basis_before: np.ndarray
    basis_after: np.ndarray

    @property
    def bound(self) -> float:
        return float(np.linalg.norm(self.v))

    def apply(self, points: np.ndarray) -> np.ndarray:
        coeffs = np.linalg.solve(self.basis_before, np.atleast_2d(points).T).T
        ints = np.round(coeffs)
        if np.abs(coeffs - ints).max(initial=0.0) > 1e-6:
            raise ValueError("point is not in the source lattice of the step")
        t = ints @ self.w
        return points + np.outer(t - np.floor(t), self.v)

    def inverse(self) -> "ShiftStep":
        before = np.array(self.basis_after)
        after = np.array(self.basis_before)
        before[:, 0] = -self.v
        after[:, 0] = -self.v
        return ShiftStep(-self.v, np.array(self.w), before, after)

    def scaled(self, c: float) -> "ShiftStep":
        return ShiftStep(self.v * c, np.array(self.w), self.basis_before * c, self.basis_after * c)

    def lifted(self, axes, extra: np.ndarray, dim: int) -> "ShiftStep":
        """Embed a lower-dimensional step on coordinate ``axes`` of R^dim.

        ``extra`` holds fixed basis vectors (columns) completing the basis;
        the step acts on every coset of the embedded sublattice alike.
        """
        def embed(m):
            out = np.zeros((dim, m.shape[1]))
            out[list(axes)] = m
            return out

        extra = np.asarray(extra, dtype=float).reshape(dim, -1)
        before = np.column_stack([embed(self.basis_before), extra])
        after = np.column_stack([embed(self.basis_after), extra])
        w = np.concatenate([self.w, np.zeros(extra.shape[1])])
        return ShiftStep(embed(self.v[:, None])[:, 0], w, before, after)


@dataclass
class ShiftPlan:
    source: np.ndarray
    target: np.ndarray
    steps: list[ShiftStep] = field(default_factory=list)

    @property
    def bound(self) -> float:
        return float(sum(s.bound for s in self.steps))

    def apply(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        for step in self.steps:
            pts = step.apply(pts)
        return pts

    def inverse(self) -> "ShiftPlan":
        return ShiftPlan(np.array(self.target), np.array(self.source),
                         [s.inverse() for s in reversed(self.steps)])

    def scaled(self, c: float) -> "ShiftPlan":
        return ShiftPlan(self.source * c, self.target * c, [s.scaled(c) for s in self.steps])

    def then(self, other: "ShiftPlan") -> "ShiftPlan":
        return ShiftPlan(np.array(self.source), np.array(other.target), self.steps + other.steps)


def coset_shift(lattice: Lattice, v, target: Lattice) -> tuple[Lattice, ShiftStep]:
    """Shift the cosets of ``lattice`` along ``v`` so that they line up with ``target``.

    ``target`` must contain ``v`` as a primitive vector and have the same
    projection along ``v``; the result has the lattice of ``target``.
    """
    v = np.asarray(v, dtype=float)
    coeffs = np.linalg.solve(lattice.basis, v)
    ints = np.round(coeffs)
    if np.abs(coeffs - ints).max() > 1e-6 or math.gcd(*[int(c) for c in ints]) != 1:
        raise ValueError("shift vector must be primitive in the lattice")
    before = primitive_basis_with(lattice, v)
    tbasis = primitive_basis_with(target, v)
    rel = np.linalg.solve(tbasis, before)
    tail = rel[1:, 1:]
    if np.abs(tail - np.round(tail)).max(initial=0.0) > 1e-6 or abs(abs(np.linalg.det(np.round(tail))) - 1) > 1e-6:
        raise ValueError("target does not share the projection along the shift vector")
    w = np.zeros(lattice.dim)
    w[1:] = -rel[0, 1:]
    after = before + np.outer(v, w)
    step = ShiftStep(v, w, before, after)
    return Lattice(after), step


def _same_lattice(a: np.ndarray, b: np.ndarray) -> bool:
    rel = np.linalg.solve(a, b)
    return bool(np.abs(rel - np.round(rel)).max() < 1e-6 and abs(abs(np.linalg.det(rel)) - 1) < 1e-6)


def _shift_or_skip(plan_steps, current: Lattice, v, target: Lattice) -> Lattice:
    new, step = coset_shift(current, v, target)
    if np.abs(step.w - np.round(step.w)).max() > TOL:
        plan_steps.append(step)
    return target


def _check_density(lattice: Lattice):
    if abs(lattice.density - 1) > 1e-9:
        raise ValueError("rescale to density 1 first")


def u_length_bound(r: float) -> float:
    r2 = densest_packing_radius(2)
    return (1 + 2 * r2) / (r * math.sqrt(2))


def _normalize_2d(lattice: Lattice) -> ShiftPlan:
    plan = ShiftPlan(np.array(lattice.basis), np.eye(2))
    if _same_lattice(lattice.basis, np.eye(2)):
        return plan
    v = lattice.shortest_vector()
    # the axis playing the role of e2 makes an angle in [pi/4, pi/2] with v
    axis = 0 if abs(v[0]) <= abs(v[1]) else 1
    e = np.zeros(2)
    e[axis] = 1.0 if v[axis] >= 0 else -1.0
    w = v - e
    # u is parallel to w and joins consecutive lines of the cosets along v
    vperp = np.array([-v[1], v[0]]) / np.linalg.norm(v)
    spacing = 1.0 / np.linalg.norm(v)
    u = w * (spacing / abs(w @ vperp))
    r = packing_radius(PeriodicPointSet.from_lattice(lattice))
    assert np.linalg.norm(u) <= u_length_bound(r) + 1e-9, "coset-shift vector u exceeds its bound"
    current = lattice
    current = _shift_or_skip(plan.steps, current, v, Lattice(np.column_stack([v, u])))
    current = _shift_or_skip(plan.steps, current, u, Lattice(np.column_stack([u, e])))
    _shift_or_skip(plan.steps, current, e, Lattice(np.eye(2)))
    return plan


def normalize_to_integer_lattice(lattice: Lattice) -> ShiftPlan:
    """Plan of coset shifts carrying a density-1 lattice onto Z^d."""
    _check_density(lattice)
    d = lattice.dim
    if d == 1:
        return ShiftPlan(np.array(lattice.basis), np.eye(1))
    if d == 2:
        return _normalize_2d(lattice)
    plan = ShiftPlan(np.array(lattice.basis), np.eye(d))
    if _same_lattice(lattice.basis, np.eye(d)):
        return plan

    v = lattice.shortest_vector()
    k = int(np.argmax(np.abs(v)))
    j = 0 if k != 0 else 1
    others = [i for i in range(d) if i != k]

    # 1. shift along v so that the cosets sit over their projection onto x_k = 0
    basis = primitive_basis_with(lattice, v)
    rest = basis[:, 1:] - np.outer(v, basis[k, 1:] / v[k])
    current = _shift_or_skip(plan.steps, lattice, v, Lattice(np.column_stack([v, rest])))

    # 2. inside every coset, carry the projection onto a diagonal lattice
    proj = Lattice(rest[others])
    diag = np.eye(d - 1)
    diag[others.index(j), others.index(j)] = 1.0 / abs(v[k])
    rho = abs(v[k]) ** (1.0 / (d - 1))
    there = normalize_to_integer_lattice(proj.scaled(rho)).scaled(1 / rho)
    back = normalize_to_integer_lattice(Lattice(diag * rho)).scaled(1 / rho).inverse()
    for step in there.steps + back.steps:
        plan.steps.append(step.lifted(others, v, d))
    diag_full = np.zeros((d, d - 1))
    diag_full[others] = diag
    current = Lattice(np.column_stack([v, diag_full]))

    # 3. remove the components of v off the (k, j) plane, one axis at a time
    flat_v = np.array(v)
    for i in others:
        if i == j:
            continue
        moved_v = np.array(flat_v)
        moved_v[i] = 0.0
        e = np.zeros(d)
        e[i] = 1.0
        target = Lattice(np.column_stack([moved_v, diag_full]))
        current = _shift_or_skip(plan.steps, current, e, target)
        flat_v = moved_v

    # 4. two-dimensional normalization in the (k, j) plane, coset by coset
    plane = [min(j, k), max(j, k)]
    sub = np.column_stack([flat_v[plane], diag_full[plane][:, others.index(j)]])
    fixed = np.eye(d)[:, [i for i in range(d) if i not in plane]]
    for step in _normalize_2d(Lattice(sub)).steps:
        plan.steps.append(step.lifted(plane, fixed, d))
    return plan


def lattice_points_in_ball(basis: np.ndarray, radius: float) -> np.ndarray:
    reduced = Lattice(basis).reduced_basis
    coeffs = lattice_coefficients_in_ball(reduced, np.zeros(len(basis)), radius)
    pts = coeffs @ reduced.T
    return pts[np.linalg.norm(pts, axis=1) <= radius]


@dataclass
class WindowReport:
    window: float
    max_displacement: float
    injective: bool
    into_target: bool
    surjective: bool

    @property
    def ok(self) -> bool:
        return self.injective and self.into_target and self.surjective


def verify_plan(plan: ShiftPlan, window: float | None = None, bound: float | None = None) -> WindowReport:
    """Replay ``plan`` on B(0, window) and check it against the target lattice."""
    bound = plan.bound if bound is None else bound
    if window is None:
        window = 10 * max(bound, 1.0)
    src = lattice_points_in_ball(plan.source, window)
    img = plan.apply(src)
    disp = float(np.linalg.norm(img - src, axis=1).max(initial=0.0))
    coords = np.linalg.solve(plan.target, img.T).T
    ints = np.round(coords)
    into = bool(np.abs(coords - ints).max(initial=0.0) < 1e-6)
    keys = {tuple(int(c) for c in row) for row in ints}
    injective = len(keys) == len(src)
    inner = lattice_points_in_ball(plan.target, max(window - bound - 1e-9, 0.0))
    inner_keys = {tuple(int(c) for c in row) for row in np.round(np.linalg.solve(plan.target, inner.T).T)}
    surjective = inner_keys <= keys
    return WindowReport(window, disp, injective, into, surjective)


def flatten_motif(x: PeriodicPointSet) -> tuple[Lattice, BottleneckResult]:
    """Lattice with basis (v1/n, v2, ...) and an equivariant matching onto it."""
    n = x.size
    basis = np.array(x.lattice.basis)
    basis[:, 0] /= n
    flat = Lattice(basis)
    return flat, bottleneck_periodic_upper(x, PeriodicPointSet.from_lattice(flat))


# ----------------------------------------------------------------------------
# closed-form boundedness constants


def _packing_constant_unit(d: int, r: float) -> float:
    """Displacement bound to Z^d for density-1 lattices with packing radius >= r."""
    if r <= 0:
        raise ValueError("packing radius bound must be positive")
    if d == 1:
        return 0.0
    r2 = densest_packing_radius(2)
    if d == 2:
        return 2 * r2 + (1 + 2 * r2) / (r * math.sqrt(2)) + 1
    rd = densest_packing_radius(d)
    sub_r = min(r / 2, 0.5, 1 / (4 * rd))
    return (2 * rd + 2 * packing_constant(d - 1, sub_r, r / math.sqrt(d)) + math.sqrt(d)
            + _packing_constant_unit(2, min(1 / (2 * r), r / math.sqrt(d))))


def packing_constant(d: int, r: float, kappa: float) -> float:
    """Bound on d_B(lattice, scaled Z^d) for density ``kappa`` and packing radius >= r."""
    if kappa <= 0:
        raise ValueError("density must be positive")
    rho = kappa ** (1.0 / d)
    return _packing_constant_unit(d, rho * r) / rho


def packing_from_covering(d: int, R: float, kappa: float) -> float:
    """Lower bound on the packing radius of a lattice with covering radius <= R.

    Projecting along a shortest vector (length 2r) gives a (d-1)-lattice of
    density 2 r kappa whose covering radius is still <= R, so it has a point
    in every cube of side 2R and 2 r kappa >= (2R)^-(d-1).
    """
    if R <= 0 or kappa <= 0:
        raise ValueError("covering radius and density must be positive")
    return 1.0 / (2 * kappa * (2 * R) ** (d - 1))


def boundedness_constant(kind: str, d: int, kappa: float, value: float, motif_size: int | None = None) -> float:
    """Upper bound on the d_EB diameter of a family of periodic sets.

    kind ``packing``: lattices with packing radius >= value;
    ``covering``: lattices with covering radius <= value;
    ``motif``: sets with covering radius <= value and at most ``motif_size`` motif points;
    ``cell``: sets with unit-cell diameter <= value.
    """
    if d < 1 or kappa <= 0 or value <= 0:
        raise ValueError("inconsistent parameters")
    if kind == "packing":
        return 2 * packing_constant(d, value, kappa)
    if kind == "covering":
        return boundedness_constant("packing", d, kappa, packing_from_covering(d, value, kappa))
    if kind == "motif":
        if motif_size is None or motif_size < 1:
            raise ValueError("motif kind needs motif_size >= 1")
        lattice_cover = (motif_size + 1) * value
        # a lattice of covering radius R' has a basis with |b_i| <= max(1, i/2) 2R'
        flatten = sum(max(1.0, i / 2) * 2 * lattice_cover for i in range(1, d + 1))
        return 2 * flatten + boundedness_constant("covering", d, kappa, lattice_cover)
    if kind == "cell":
        return 2 * value + boundedness_constant("covering", d, kappa, value)
    raise ValueError(f"unknown kind {kind!r}")

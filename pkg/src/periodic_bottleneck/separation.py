"""The sheared lattices Gamma_alpha and certificates that they stay 1/4 apart."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bottleneck import Budget, IsometryParams, euclidean_bottleneck_periodic
from .geometry import TOL, Lattice, PeriodicPointSet, nearest_distance

QUARTER = (0.25, 0.75)


@dataclass(frozen=True)
class GammaLattice:
    alpha: float
    dim: int
    lattice: Lattice


def gamma_lattice(alpha: float, d: int = 2) -> GammaLattice:
    """Lattice spanned by e1, e2 + alpha e1, e3, ..., ed."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    basis = np.eye(d)
    basis[0, 1] = alpha
    return GammaLattice(float(alpha), d, Lattice(basis))


def _in_arc(value: float, target) -> bool:
    lo, hi = target
    return (value - lo) % 1.0 <= (hi - lo) + TOL


def fractional_hit(a: float, lam: float, target=QUARTER, bound: int = 8, max_bound: int = 1 << 22) -> int:
    """Integer b with frac(a + b lam) in the closed arc ``target`` of R/Z.

    Candidates are scanned as 0, 1, -1, 2, -2, ...; the scan bound doubles
    until a hit is found or ``max_bound`` is exceeded.
    """
    if abs(lam - round(lam)) <= TOL:
        raise ValueError("integer step")
    lo, hi = target
    if hi - lo < 0.5 - TOL:
        raise ValueError("target arc must have length at least 1/2")
    checked = -1
    while bound <= max_bound:
        for m in range(checked + 1, bound + 1):
            for b in ((0,) if m == 0 else (m, -m)):
                if _in_arc((a + b * lam) % 1.0, target):
                    return b
        checked = bound
        bound *= 2
    raise ValueError(f"no hit within |b| <= {max_bound}; step {lam!r} is too close to an integer")


def distance_to_gamma(alpha: float, points, d: int | None = None) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g = gamma_lattice(alpha, d or pts.shape[1])
    return nearest_distance(PeriodicPointSet.from_lattice(g.lattice), pts)


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) <= TOL


def far_point_on_line(alpha: float, x, u, d: int | None = None,
                      max_step: int = 1 << 22) -> tuple[np.ndarray, float]:
    """A point y = x + n u at distance >= 1/4 from Gamma_alpha."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = d or len(x)
    u = u / np.linalg.norm(u)
    if not 0 < alpha <= 0.5 + TOL:
        raise ValueError("alpha must lie in (0, 1/2]")
    for i in [0] + list(range(2, d)):
        if abs(abs(u[i]) - 1) <= TOL:
            raise ValueError(f"direction is parallel to axis {i + 1}")
    n = None
    # a coordinate that must be an integer on Gamma_alpha but drifts along the line
    for i in list(range(2, d)) + [1]:
        if not _is_integer(u[i]):
            n = fractional_hit(x[i], u[i], max_bound=max_step)
            break
    if n is None:
        # the line is parallel to e2: walk to a layer whose offset is far from x1
        if _is_integer(x[1] - 0.5):
            n = 0
        else:
            step = round(u[1])
            layer = round(x[1])
            n = fractional_hit(x[0] - layer * alpha, -step * alpha, max_bound=max_step)
    y = x + n * u
    dist = float(distance_to_gamma(alpha, y, d)[0])
    return y, dist


@dataclass(frozen=True)
class Witness:
    """A point of one set at distance >= 1/4 from the other.

    ``side`` is "X" for a point of Gamma_alpha and "Y" for a point of iso(Gamma_beta).
    """

    point: np.ndarray
    distance: float
    side: str
    case: str


def _axis_of(vec) -> int | None:
    i = int(np.argmax(np.abs(vec)))
    return i if abs(abs(vec[i]) - 1) <= TOL else None


def _candidates(alpha: float, beta: float, iso: IsometryParams, max_step: int):
    """Witness constructions as (name, thunk) pairs; a thunk may raise ValueError."""
    q, c = iso.orthogonal, iso.translation
    d = len(c)
    lateral = [0] + list(range(2, d))
    forbidden = set(lateral)
    e = np.eye(d)
    out = []

    def line(v):
        return lambda: far_point_on_line(alpha, c, v, d, max_step)[0]

    # lines through iso(0) along images of the layer directions
    for i in lateral:
        ax = _axis_of(q[:, i])
        if ax is None or ax not in forbidden:
            out.append((f"line along image of e{i + 1}", line(q[:, i])))
    v2 = q[:, 1]
    if _is_integer(beta):
        # e2 lies in Gamma_0, so its image line lies in iso(Gamma_0)
        if _axis_of(v2) not in forbidden:
            out.append(("line along image of e2", line(v2)))
        return out
    ax1 = _axis_of(q[:, 0])
    if ax1 is not None and ax1 >= 2:
        def lateral_axis():
            s = float(np.sign(q[ax1, 0]))
            b = fractional_hit(c[ax1], s * beta, max_bound=max_step)
            return iso.apply(b * (e[:, 1] + beta * e[:, 0]))[0]
        out.append((f"image of e1 along axis {ax1 + 1}", lateral_axis))
    if ax1 == 0 and _axis_of(v2) == 1:
        def drift():
            if _is_integer(c[1] - 0.5):
                return np.array(c)
            s1, s2 = float(np.sign(q[0, 0])), float(np.sign(q[1, 1]))
            layer = round(c[1])
            n = fractional_hit(c[0] - layer * alpha, s1 * beta - s2 * alpha, max_bound=max_step)
            return iso.apply(n * (e[:, 1] + beta * e[:, 0]))[0]
        out.append(("layer offset drift", drift))
    return out


def separation_witness(alpha: float, beta: float, iso: IsometryParams, window: float = math.inf) -> Witness:
    """Point showing that Gamma_alpha and iso(Gamma_beta) are at d_B >= 1/4."""
    if abs(alpha - beta) <= TOL:
        raise ValueError("alpha and beta must differ")
    if not (-TOL <= alpha <= 0.5 + TOL and -TOL <= beta <= 0.5 + TOL):
        raise ValueError("alpha and beta must lie in [0, 1/2]")
    if abs(alpha) <= TOL:
        inverse = IsometryParams(iso.orthogonal.T, -iso.orthogonal.T @ iso.translation)
        inner = separation_witness(beta, alpha, inverse, window)
        side = "Y" if inner.side == "X" else "X"
        return Witness(iso.apply(inner.point)[0], inner.distance, side, inner.case + " (roles swapped)")
    max_step = 1 << 22 if math.isinf(window) else int(2 * window + 2 * np.linalg.norm(iso.translation)) + 8
    needed = math.inf
    for case, build in _candidates(alpha, beta, iso, max_step):
        try:
            point = build()
        except ValueError:
            continue
        radius = float(np.linalg.norm(point))
        dist = _distance_from_gamma_alpha(alpha, point)
        if dist < 0.25 - TOL:
            continue
        if radius > window:
            needed = min(needed, radius)
            continue
        return Witness(np.asarray(point, dtype=float), dist, "Y", case)
    if math.isfinite(needed):
        raise ValueError(f"window too small: witness needs radius {needed:.6g}")
    raise ValueError(f"window too small: no witness within radius {window:.6g}")


def _distance_from_gamma_alpha(alpha: float, point) -> float:
    return float(distance_to_gamma(alpha, point, len(point))[0])


def build_separated_family(kappa: float, count: int, d: int = 2, alphas=None) -> list[Lattice]:
    """``count`` lattices of density ``kappa``: rescaled Gamma_alpha."""
    if count < 2:
        raise ValueError("family needs at least two members")
    if alphas is None:
        alphas = [i / (2 * count + 1) for i in range(count)]
    alphas = list(alphas)
    if len(alphas) != count or len(set(alphas)) != count:
        raise ValueError("need distinct alpha values, one per member")
    scale = kappa ** (-1.0 / d)
    return [gamma_lattice(a, d).lattice.scaled(scale) for a in alphas]


def certify_family(lattices: list[Lattice], window: float = 8.0, target: float = 0.2,
                   budget: Budget | None = None) -> dict[tuple[int, int], float]:
    """Certified pairwise d_EB lower bounds.

    ``window`` and ``target`` refer to density 1 and are rescaled with the family.
    """
    d = lattices[0].dim
    scale = lattices[0].det ** (1.0 / d)
    out = {}
    for i, j in itertools.combinations(range(len(lattices)), 2):
        b = Budget(**{**(budget.__dict__ if budget else {}), "lower_target": target * scale})
        res = euclidean_bottleneck_periodic(PeriodicPointSet.from_lattice(lattices[i]),
                                            PeriodicPointSet.from_lattice(lattices[j]),
                                            window * scale, b)
        out[(i, j)] = res.lower
    return out

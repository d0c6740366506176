import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from periodic_bottleneck.bottleneck import IsometryParams
from periodic_bottleneck.geometry import PeriodicPointSet, packing_radius
from periodic_bottleneck.separation import (
    build_separated_family,
    certify_family,
    far_point_on_line,
    fractional_hit,
    gamma_lattice,
    separation_witness,
)


def brute_distance(alpha, point, box=6):
    """Distance from ``point`` to Gamma_alpha by enumerating coefficients near it."""
    point = np.asarray(point, dtype=float)
    d = len(point)
    basis = np.array(gamma_lattice(alpha, d).lattice.basis)
    base = np.round(np.linalg.solve(basis, point))
    coeffs = np.array(list(itertools.product(range(-box, box + 1), repeat=d)), dtype=float) + base
    return float(np.linalg.norm(coeffs @ basis.T - point, axis=1).min())


def in_arc(value, lo, hi):
    return (value - lo) % 1.0 <= hi - lo + 1e-12


def random_isometry(rng, d):
    q = Rotation.random(random_state=rng.integers(1 << 31)).as_matrix() if d == 3 else None
    if d == 2:
        t = rng.uniform(0, 2 * math.pi)
        q = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    if rng.random() < 0.5:
        q = q @ np.diag([1.0] * (d - 1) + [-1.0])
    return IsometryParams(q, rng.uniform(-3, 3, d))


# ---- gamma lattices


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.25, 1 / 3, 0.5])
@pytest.mark.parametrize("d", [2, 3])
def test_gamma_density_and_layers(alpha, d):
    g = gamma_lattice(alpha, d)
    assert g.lattice.density == pytest.approx(1.0, abs=1e-12)
    basis = np.array(g.lattice.basis)
    assert np.allclose(basis[1:], np.round(basis[1:]))
    # the whole family shares packing radius 1/2
    assert packing_radius(PeriodicPointSet.from_lattice(g.lattice)) == pytest.approx(0.5, abs=1e-12)


# ---- fractional hits


def test_fractional_hit_examples():
    assert fractional_hit(0.0, 0.5, (0.25, 0.75)) == 1
    b = fractional_hit(0.1, math.sqrt(2) - 1, (0.5, 1.0))
    assert abs(b) <= 10 and in_arc((0.1 + b * (math.sqrt(2) - 1)) % 1, 0.5, 1.0)
    # linear scan oracle: the first hit in the order 0, 1, -1, 2, -2, ...
    order = [0] + [s * k for k in range(1, 11) for s in (1, -1)]
    first = next(k for k in order if in_arc((0.1 + k * (math.sqrt(2) - 1)) % 1, 0.5, 1.0))
    assert b == first


def test_fractional_hit_errors():
    with pytest.raises(ValueError, match="integer step"):
        fractional_hit(0.3, 2.0)
    with pytest.raises(ValueError):
        fractional_hit(0.3, 0.5, (0.1, 0.2))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.integers(1, 40), st.integers(2, 40), st.floats(0, 1))
def test_fractional_hit_rational_steps(a, p, q, lo):
    step = Fraction(p, q)
    if step.denominator == 1:
        return
    b = fractional_hit(a, float(step), (lo, lo + 0.5))
    assert in_arc((a + b * float(step)) % 1.0, lo, lo + 0.5)
    assert abs(b) <= step.denominator


# ---- far points


def test_far_point_vertical_line():
    y, dist = far_point_on_line(0.5, [0.25, 0.0], [0.0, 1.0])
    assert dist >= 0.25 - 1e-9
    assert brute_distance(0.5, y) == pytest.approx(dist, abs=1e-12)


def test_far_point_three_dimensions():
    u = np.array([0.3, 0.2, math.sqrt(2) / 2])
    y, dist = far_point_on_line(0.25, [0.1, 0.2, 0.3], u)
    n = (y - np.array([0.1, 0.2, 0.3])) @ u / (u @ u)
    assert abs(n) <= 20
    assert brute_distance(0.25, y) >= 0.25 - 1e-9


def test_far_point_rejects_forbidden_axes():
    with pytest.raises(ValueError, match="parallel"):
        far_point_on_line(0.5, [0.0, 0.0], [1.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_far_point_distance_is_at_least_a_quarter(alpha, theta, x1, x2):
    u = np.array([math.cos(theta), math.sin(theta)])
    if abs(abs(u[0]) - 1) < 1e-6:
        return
    y, dist = far_point_on_line(alpha, [x1, x2], u)
    assert brute_distance(alpha, y) >= 0.25 - 1e-9


# ---- witnesses


def test_witness_identity():
    w = separation_witness(0.0, 0.5, IsometryParams.identity(2))
    assert w.distance >= 0.25 - 1e-9


def test_witness_axes_permuted():
    quarter = IsometryParams(np.array([[0.0, -1.0], [1.0, 0.0]]), np.zeros(2))
    w = separation_witness(0.25, 0.5, quarter)
    assert w.distance >= 0.25 - 1e-9


def witness_gap(alpha, beta, iso, w):
    if w.side == "Y":
        # a point of iso(Gamma_beta) far from Gamma_alpha
        return brute_distance(alpha, w.point)
    pre = iso.orthogonal.T @ (w.point - iso.translation)
    return brute_distance(beta, pre)


@pytest.mark.parametrize("pair", [(0.0, 0.5), (0.1, 0.3), (1 / 3, math.sqrt(2) / 2 - 0.25), (0.5, 0.2)])
def test_witnesses_for_random_isometries(pair):
    alpha, beta = pair
    rng = np.random.default_rng(int(alpha * 1000 + beta * 10))
    for _ in range(100):
        iso = random_isometry(rng, 2)
        w = separation_witness(alpha, beta, iso)
        assert w.distance >= 0.25 - 1e-9
        assert witness_gap(alpha, beta, iso, w) >= 0.25 - 1e-6


def test_witnesses_in_three_dimensions():
    rng = np.random.default_rng(8)
    for _ in range(20):
        iso = random_isometry(rng, 3)
        w = separation_witness(0.2, 0.4, iso)
        assert witness_gap(0.2, 0.4, iso, w) >= 0.25 - 1e-6


def test_witness_errors():
    with pytest.raises(ValueError, match="differ"):
        separation_witness(0.2, 0.2, IsometryParams.identity(2))
    with pytest.raises(ValueError, match="window too small"):
        separation_witness(0.0, 0.5, IsometryParams(np.eye(2), [30.0, 30.0]), window=1.0)


# ---- families


def test_family_density_and_size():
    fam = build_separated_family(4.0, 5, 2)
    assert len(fam) == 5
    for lat in fam:
        assert lat.density == pytest.approx(4.0, abs=1e-9)
    with pytest.raises(ValueError):
        build_separated_family(1.0, 1, 2)


def test_family_pair_is_certified():
    fam = build_separated_family(1.0, 2, 2)
    bounds = certify_family(fam)
    assert bounds[(0, 1)] >= 0.2


def test_scaled_family_lower_bound_scales():
    fam = build_separated_family(4.0, 5, 2)
    bounds = certify_family(fam[:2])
    assert bounds[(0, 1)] >= 0.5 * 0.2

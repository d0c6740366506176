import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodic_bottleneck.geometry import Lattice, PeriodicPointSet, random_lattice
from periodic_bottleneck.separation import gamma_lattice
from periodic_bottleneck.transport import (
    boundedness_constant,
    coset_shift,
    flatten_motif,
    lattice_points_in_ball,
    normalize_to_integer_lattice,
    packing_constant,
    packing_from_covering,
    verify_plan,
)

R2 = 0.537284965911771


def closed_form_2d(r):
    return 2 * R2 + (1 + 2 * R2) / (r * math.sqrt(2)) + 1


def window_points(basis, half):
    coeffs = np.array(list(itertools.product(range(-half, half + 1), repeat=len(basis))), dtype=float)
    return coeffs @ np.array(basis).T


# ---- coset shifts


def test_coset_shift_already_aligned_is_identity():
    lat = gamma_lattice(0.5).lattice
    new, step = coset_shift(lat, [1.0, 0.0], lat)
    assert np.allclose(step.w, np.round(step.w))
    pts = window_points(lat.basis, 5)
    assert np.abs(step.apply(pts) - pts).max() == 0


def test_coset_shift_rejects_non_primitive():
    with pytest.raises(ValueError, match="primitive"):
        coset_shift(Lattice.integer(2), [2.0, 0.0], Lattice.integer(2))


@pytest.mark.parametrize("shear", np.random.default_rng(2).uniform(-3, 3, 50))
def test_coset_shift_window_bijective(shear):
    lat = Lattice(np.array([[1.0, shear], [0.0, 1.0]]))
    _, step = coset_shift(lat, [1.0, 0.0], Lattice.integer(2))
    src = lattice_points_in_ball(lat.basis, 40)
    img = step.apply(src)
    assert np.linalg.norm(img - src, axis=1).max() <= 1 + 1e-9
    assert np.allclose(img, np.round(img), atol=1e-9)
    keys = {tuple(p) for p in np.round(img).astype(int)}
    assert len(keys) == len(src)
    assert all((a, b) in keys for a in range(-20, 21) for b in range(-20, 21))


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.lists(st.integers(-6, 6), min_size=2, max_size=2))
def test_shift_step_inverse(shear, coeffs):
    lat = Lattice(np.array([[1.0, shear], [0.0, 1.0]]))
    _, step = coset_shift(lat, [1.0, 0.0], Lattice.integer(2))
    p = np.array(coeffs, dtype=float) @ np.array(lat.basis).T
    back = step.inverse().apply(step.apply(p[None]))
    assert np.allclose(back, p[None], atol=1e-9)


# ---- normalization


def test_integer_lattice_has_empty_plan():
    plan = normalize_to_integer_lattice(Lattice.integer(2))
    assert plan.steps == [] and plan.bound == 0


def test_density_must_be_one():
    with pytest.raises(ValueError, match="rescale to density 1 first"):
        normalize_to_integer_lattice(Lattice(2 * np.eye(2)))


def test_three_step_sequence_respects_step_bounds():
    lat = Lattice(np.array([[0.9, 0.35], [0.1, 1.15]]))
    lat = lat.scaled(lat.det ** -0.5)
    plan = normalize_to_integer_lattice(lat)
    assert 1 <= len(plan.steps) <= 3
    pts = lattice_points_in_ball(plan.source, 15)
    for step in plan.steps:
        moved = step.apply(pts)
        assert np.linalg.norm(moved - pts, axis=1).max() <= step.bound + 1e-9
        pts = moved


@pytest.mark.parametrize("seed", range(10))
def test_random_2d_plans(seed):
    lat = random_lattice(2, np.random.default_rng(seed), min_packing=0.3)
    plan = normalize_to_integer_lattice(lat)
    assert plan.bound <= closed_form_2d(0.3) + 1e-9
    rep = verify_plan(plan, window=30 * math.sqrt(2))
    assert rep.ok and rep.max_displacement <= plan.bound + 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_random_3d_plans_window_verified(seed):
    lat = random_lattice(3, np.random.default_rng(100 + seed), min_packing=0.3)
    plan = normalize_to_integer_lattice(lat)
    rep = verify_plan(plan, window=2 * plan.bound + 4)
    assert rep.ok and rep.max_displacement <= plan.bound + 1e-9


def test_plan_inverse_and_scaling():
    lat = random_lattice(2, np.random.default_rng(9), min_packing=0.3)
    plan = normalize_to_integer_lattice(lat)
    pts = lattice_points_in_ball(plan.source, 10)
    assert np.allclose(plan.inverse().apply(plan.apply(pts)), pts, atol=1e-8)
    scaled = plan.scaled(2.5)
    assert scaled.bound == pytest.approx(2.5 * plan.bound)
    assert verify_plan(scaled, window=40).ok


def test_bound_is_monotone_in_packing_radius():
    values = [packing_constant(2, r, 1.0) for r in np.linspace(0.05, R2, 40)]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


# ---- flattening


def test_flatten_single_point_motif():
    lat = Lattice(np.array([[1.0, 0.4], [0.0, 1.3]]))
    flat, res = flatten_motif(PeriodicPointSet.from_lattice(lat))
    assert np.allclose(flat.basis, lat.basis) and res.upper == 0


def test_flatten_two_point_motif():
    x = PeriodicPointSet(Lattice.integer(2), [[0, 0], [0.5, 0.5]])
    flat, res = flatten_motif(x)
    assert np.allclose(flat.basis, [[0.5, 0], [0, 1]])
    assert flat.density == pytest.approx(2.0)
    assert res.upper <= x.lattice.cell_diameter() + 1e-9


@pytest.mark.parametrize("seed", range(50))
def test_flatten_cost_at_most_cell_diameter(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    lat = random_lattice(d, rng, min_packing=0.2)
    k = int(rng.integers(1, 4))
    motif = np.sort(rng.uniform(0, 1, (k, d)), axis=0) @ np.array(lat.basis).T
    x = PeriodicPointSet(lat, motif)
    flat, res = flatten_motif(x)
    assert flat.density == pytest.approx(x.density, rel=1e-12)
    assert res.upper <= lat.cell_diameter() + 1e-9


# ---- boundedness constants


def test_packing_constant_example():
    assert boundedness_constant("packing", 2, 1.0, 0.3) == pytest.approx(2 * closed_form_2d(0.3), rel=1e-12)


def test_covering_delegates_to_packing():
    r = packing_from_covering(2, 1.0, 1.0)
    assert r == pytest.approx(0.25)
    assert boundedness_constant("covering", 2, 1.0, 1.0) == boundedness_constant("packing", 2, 1.0, r)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_cell_constant_is_finite_and_at_least_side(d):
    value = boundedness_constant("cell", d, 1.0, 2.0)
    assert math.isfinite(value) and value >= 2.0


def test_motif_constant_needs_size():
    assert math.isfinite(boundedness_constant("motif", 2, 1.0, 1.0, motif_size=3))
    with pytest.raises(ValueError):
        boundedness_constant("motif", 2, 1.0, 1.0)


def test_constants_reject_bad_parameters():
    with pytest.raises(ValueError):
        boundedness_constant("packing", 2, 0.0, 0.3)
    with pytest.raises(ValueError):
        boundedness_constant("nonsense", 2, 1.0, 0.3)


def test_density_scaling_of_plans():
    # a plan for rho * L, scaled back by 1/rho, normalizes L onto (1/rho) Z^2
    lat = random_lattice(2, np.random.default_rng(12), min_packing=0.3)
    rho = 1.7
    big = normalize_to_integer_lattice(lat)
    small = big.scaled(1 / rho)
    assert small.bound == pytest.approx(big.bound / rho, abs=1e-9)
    assert np.allclose(small.target, np.eye(2) / rho)
    assert verify_plan(small, window=20).ok

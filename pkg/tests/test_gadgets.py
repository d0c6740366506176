import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodic_bottleneck import gadgets as gz
from periodic_bottleneck.bottleneck import Budget, bottleneck_finite
from periodic_bottleneck.geometry import covering_radius, max_ball_count, packing_radius


def random_space(rng, size, d=2):
    return gz.FiniteMetricSpace.from_points(rng.uniform(0, 3, (size, d)))


# ---- pairing


def test_pairing_examples():
    assert gz.pairing_T(1, 1) == 1
    assert gz.pairing_T(1, 2) == 2
    assert gz.pairing_T(2, 1) == 3


def test_pairing_round_trip_and_order():
    values = {}
    for m, n in itertools.product(range(1, 51), repeat=2):
        T = gz.pairing_T(m, n)
        assert gz.pairing_T_inverse(T) == (m, n)
        values[T] = (m, n)
    # a bijection onto an initial segment along each diagonal
    assert set(range(1, 51 * 50 // 2 + 1)) <= set(values)
    for m, n in itertools.product(range(1, 100), repeat=2):
        assert gz.pairing_T(m + 1, n) > gz.pairing_T(m, n)
        assert gz.pairing_T(m, n + 1) > gz.pairing_T(m, n)


def test_pairing_rejects_nonpositive():
    with pytest.raises(ValueError):
        gz.pairing_T(0, 1)
    with pytest.raises(ValueError):
        gz.pairing_T_inverse(0)


# ---- grids and metric spaces


def test_grid_point_validation():
    with pytest.raises(ValueError):
        gz.GridPoint(2, 2, 1.0, (0.5, 1.0))
    with pytest.raises(ValueError):
        gz.GridPoint(2, 2, 1.0, (3.0, 1.0))
    p = gz.GridPoint.from_indices(3, 2, 0.5, (1, 3))
    assert p.coords == (0.5, 1.5) and p.indices == (1, 3)
    assert len(gz.grid_points(2, 3)) == 27


def test_metric_space_validation():
    with pytest.raises(ValueError, match="triangle"):
        gz.FiniteMetricSpace([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(ValueError, match="symmetric"):
        gz.FiniteMetricSpace([[0, 1], [2, 0]])
    with pytest.raises(ValueError, match="zero"):
        gz.FiniteMetricSpace([[0, 0], [0, 0]])


def test_kuratowski_two_points():
    space = gz.FiniteMetricSpace([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(gz.kuratowski(space), [[1, 1], [2, 0]])
    points, m, n = gz.embed_metric_space(space)
    assert [p.coords for p in points] == [(1.0, 1.0), (2.0, 0.0)]
    assert (m, n) == (2, 2)
    assert gz.sup_distance(*points) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_kuratowski_is_isometric(size, seed):
    space = random_space(np.random.default_rng(seed), size)
    image = gz.kuratowski(space)
    sup = np.abs(image[:, None] - image[None]).max(axis=2)
    np.testing.assert_allclose(sup, space.distances, atol=1e-12)
    assert image.min() >= -1e-12 and image.max() <= 2 * space.diameter + 1e-12


def test_embedding_distortion_band():
    rng = np.random.default_rng(17)
    for _ in range(100):
        t = float(rng.choice([0.5, 1.0, 2.0]))
        space = random_space(rng, int(rng.integers(2, 7)))
        points, m, n = gz.embed_metric_space(space, t)
        assert m == max(1, math.floor(2 * space.diameter)) and n == space.size
        for i, j in itertools.combinations(range(space.size), 2):
            got = gz.sup_distance(points[i], points[j])
            dist = space.distances[i, j]
            assert gz.control_lower(dist, t) - 1e-9 <= got <= gz.control_upper(dist, t) + 1e-9


# ---- interval encoding


def test_interval_encoding_example():
    p = gz.GridPoint(2, 2, 1.0, (1.0, 2.0))
    assert gz.encode_grid_to_interval(p).points[:, 0].tolist() == [7.0, 16.0]
    assert gz.interval_length(1.0, 2, 2) == 16


@pytest.mark.parametrize("m,n", [(1, 1), (2, 2), (3, 2), (2, 3)])
def test_interval_encoding_is_isometric(m, n):
    pts = gz.grid_points(m, n)
    codes = [gz.encode_grid_to_interval(p) for p in pts]
    M = gz.interval_length(1.0, m, n)
    for c in codes:
        assert 0 <= c.points.min() and c.points.max() <= M
    for i, j in itertools.combinations(range(len(pts)), 2):
        assert abs(bottleneck_finite(codes[i], codes[j]).upper - gz.sup_distance(pts[i], pts[j])) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.sampled_from([0.5, 1.0, 1.5]), st.data())
def test_interval_encoding_isometric_for_any_spacing(m, n, t, data):
    idx = st.lists(st.integers(0, m), min_size=n, max_size=n)
    p = gz.GridPoint.from_indices(m, n, t, data.draw(idx))
    q = gz.GridPoint.from_indices(m, n, t, data.draw(idx))
    got = bottleneck_finite(gz.encode_grid_to_interval(p), gz.encode_grid_to_interval(q)).upper
    assert got == pytest.approx(gz.sup_distance(p, q), abs=1e-12)


# ---- packing-constrained gadgets


@pytest.fixture(scope="module")
def phi_11():
    layout = gz.phi_layout(1, 1, 0.5, 0.02, 2)
    return layout, [(p,) + gz.build_phi_gadget(p, 0.5, 0.02, 2, layout=layout) for p in gz.grid_points(1, 1, 1.0)]


def test_phi_gadget_invariants(phi_11):
    layout, built = phi_11
    lo, hi = layout.covering_bounds
    for p, pps, spec in built:
        assert pps.density == pytest.approx(0.02, abs=1e-9)
        assert packing_radius(pps) > 0.5
        cover = covering_radius(pps, 0.02)
        assert lo - 0.01 <= cover.lower and cover.upper <= hi + 0.01
        assert spec.params["s"] >= 7 * spec.params["M"] + 3 * p.m
        assert pps.size == layout.motif_size
        json.dumps(spec.to_dict())


def test_phi_pair_is_exact(phi_11):
    _, built = phi_11
    (p, x, sx), (q, y, sy) = built
    iv = gz.phi_pair_bounds(x, sx, y, sy)
    assert iv.lower == pytest.approx(1.0, abs=1e-9) and iv.upper == pytest.approx(1.0, abs=1e-9)


def test_phi_errors():
    with pytest.raises(ValueError, match="density incompatible"):
        gz.phi_layout(1, 1, 0.5, 1.0, 2)
    with pytest.raises(ValueError, match="t must equal 2r"):
        gz.build_phi_gadget(gz.GridPoint(1, 1, 1.0, (0.0,)), r=0.25)


# ---- covering-constrained gadgets


def test_cluster_and_interval_length():
    np.testing.assert_allclose(gz.cluster(4, 0.5), [0, 0.125, 0.25, 0.375])
    assert gz.psi_interval_length(1, 1, 0.5) == 14.5


def test_psi_layout_constraints():
    layout = gz.psi_layout(1, 1, 1.0, 1.0, 2, 0.25)
    spacing_lattice = gz.Lattice(np.eye(2) * layout.spacing)
    assert layout.small == max_ball_count(gz.PeriodicPointSet.from_lattice(spacing_lattice), 2.0)[1] + 1
    assert layout.large >= 2 * layout.small
    assert layout.side >= 4 * layout.interval + 1
    assert layout.spacing <= 2 / math.sqrt(2)


@pytest.fixture(scope="module")
def psi_11():
    layout = gz.psi_layout(1, 1, 1.0, 1.0, 2, 0.25)
    return layout, [(p,) + gz.build_psi_gadget(p, 1.0, 1.0, 2, 0.25, layout=layout) for p in gz.grid_points(1, 1)]


def test_psi_gadget_invariants(psi_11):
    layout, built = psi_11
    for p, pps, spec in built:
        assert pps.density == pytest.approx(1.0, abs=1e-9)
        assert covering_radius(pps, 0.05).upper <= 1.0
        blocks = gz.psi_blocks(pps, spec)
        assert [len(b) for b in blocks] == [layout.small, layout.large]
        json.dumps(spec.to_dict())


def test_psi_pair_interval(psi_11):
    _, built = psi_11
    (p, x, sx), (q, y, sy) = built
    upper = gz.psi_matching(x, sx, y, sy).cost
    assert upper <= 1 + 1e-9
    lower, _, _ = gz.psi_euclidean_lower(x, sx, y, sy, Budget(max_seconds=30, lower_target=0.21), upper)
    assert lower >= max(0.5 - 0.25, 0) - 0.05
    assert lower <= upper


# ---- disjoint unions


def test_phi_family_separation():
    families = gz.build_families("phi", [(1, 1), (1, 2)], 2)
    report = gz.certify_disjoint_union(families)
    assert [(p.earlier, p.later) for p in report.pairs] == [(1, 2)]
    assert report.pairs[0].lower >= 4 - 0.1


def test_psi_family_separation():
    families = gz.build_families("psi", [(1, 1), (2, 1)], 2)
    report = gz.certify_disjoint_union(families)
    assert report.pairs[0].required == 8
    assert report.pairs[0].lower >= 8 - 0.1


def test_disjoint_union_needs_two_families():
    with pytest.raises(ValueError):
        gz.certify_disjoint_union(gz.build_families("psi", [(1, 1)], 2))

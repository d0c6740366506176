import numpy as np
import pytest

from periodic_bottleneck import export
from periodic_bottleneck.geometry import FinitePointSet, Lattice, PeriodicPointSet, random_lattice
from periodic_bottleneck.transport import normalize_to_integer_lattice


def z2():
    return PeriodicPointSet.from_lattice(Lattice.integer(2))


def test_integer_window_has_121_dots():
    svg = export.svg_points(z2(), 5)
    assert svg.count("<circle") == 121
    assert svg == export.svg_points(z2(), 5)


def test_window_points_sorted_and_boxed():
    pts = export.window_points(z2(), 2)
    assert len(pts) == 25 and np.abs(pts).max() == 2
    assert [tuple(p) for p in pts] == sorted(tuple(p) for p in pts)


def test_matching_segments():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    svg = export.svg_matching(x, x + 0.1, [(0, 0), (1, 1), (2, 2)], 3)
    assert svg.count("<line") == 3


def test_plan_arrows_respect_bound():
    lat = random_lattice(2, np.random.default_rng(1), min_packing=0.3)
    plan = normalize_to_integer_lattice(lat)
    layers = export.plan_arrows(plan, 4)
    assert len(layers) == len(plan.steps)
    for step, arrows in zip(plan.steps, layers):
        for a, b in arrows:
            assert np.linalg.norm(b - a) <= step.bound + 1e-9
    assert export.svg_plan(plan, 4).count("<line") == sum(len(a) for a in layers)


def test_non_planar_svg_rejected():
    with pytest.raises(ValueError, match="planar"):
        export.svg_points(PeriodicPointSet.from_lattice(Lattice.integer(3)), 2)


def test_csv_outputs():
    text = export.csv_points(FinitePointSet([[0.5, -0.25], [0.0, 0.0]]), 1)
    assert text.splitlines() == ["x1,x2", "0,0", "0.5,-0.25"]
    assert export.csv_pairs([(0, 1), (1, 0)]).splitlines() == ["i,j", "0,1", "1,0"]


def test_number_format():
    assert export.format_number(-0.00001) == "0"
    assert export.format_number(2.5) == "2.5"
    assert export.format_number(3.0) == "3"

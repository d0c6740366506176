"""The ten acceptance criteria, each at its stated tolerance and time limit.

Every test records one PASS/FAIL line, echoed in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest

from periodic_bottleneck import gadgets as gz
from periodic_bottleneck.bottleneck import Budget, bottleneck_finite, euclidean_bottleneck_finite
from periodic_bottleneck.geometry import (
    FinitePointSet,
    PeriodicPointSet,
    covering_radius,
    hexagonal_lattice,
    packing_radius,
    project_along_shortest,
    random_lattice,
)
from periodic_bottleneck.separation import build_separated_family, certify_family
from periodic_bottleneck.transport import normalize_to_integer_lattice
from periodic_bottleneck.verify import suite_disjoint_union, suite_psi

pytestmark = pytest.mark.acceptance


def all_permutations_bottleneck(a, b):
    cost = np.linalg.norm(a[:, None] - b[None], axis=2)
    perms = np.array(list(itertools.permutations(range(len(a)))))
    return float(cost[np.arange(len(a)), perms].max(axis=1).min())


def test_1_solver_matches_factorial_oracle(acceptance):
    rng = np.random.default_rng(2024)
    started = time.monotonic()
    worst = 0.0
    for _ in range(200):
        n, d = int(rng.integers(1, 8)), int(rng.integers(1, 4))
        a, b = rng.uniform(-1, 1, (n, d)), rng.uniform(-1, 1, (n, d))
        got = bottleneck_finite(FinitePointSet(a), FinitePointSet(b)).upper
        worst = max(worst, abs(got - all_permutations_bottleneck(a, b)))
    elapsed = time.monotonic() - started
    ok = worst <= 1e-12 and elapsed < 30
    acceptance(1, "finite bottleneck equals n! oracle on 200 instances", ok,
               f"max error {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_2_concentric_triangles(acceptance):
    s = math.sqrt(3)
    x = FinitePointSet([[1, -s / 3], [-1, -s / 3], [0, 2 * s / 3]])
    y = FinitePointSet([[0.5, -s / 6], [-0.5, -s / 6], [0, s / 3]])
    started = time.monotonic()
    res = euclidean_bottleneck_finite(x, y, Budget(target_width=1e-4, max_seconds=10))
    elapsed = time.monotonic() - started
    ok = res.lower <= s / 3 <= res.upper and res.upper - res.lower <= 1e-4 and elapsed < 10
    acceptance(2, "Euclidean bottleneck of the concentric triangles contains sqrt(3)/3", ok,
               f"[{res.lower:.7f}, {res.upper:.7f}], {elapsed:.1f}s")
    assert ok


def test_3_grid_encoding_isometry(acceptance):
    started = time.monotonic()
    worst, pairs = 0.0, 0
    for m, n in itertools.product(range(1, 4), repeat=2):
        pts = gz.grid_points(m, n, 1.0)
        codes = [gz.encode_grid_to_interval(p) for p in pts]
        for i, j in itertools.combinations(range(len(pts)), 2):
            sup = max(abs(u - v) for u, v in zip(pts[i].coords, pts[j].coords))
            worst = max(worst, abs(bottleneck_finite(codes[i], codes[j]).upper - sup))
            pairs += 1
    elapsed = time.monotonic() - started
    ok = worst <= 1e-12 and elapsed < 60
    acceptance(3, "interval encoding is isometric for m, n <= 3", ok,
               f"{pairs} pairs, max error {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_4_projection(acceptance):
    rng = np.random.default_rng(31)
    started = time.monotonic()
    worst_density, worst_packing = 0.0, math.inf
    for k in range(100):
        d = 2 if k < 50 else 3
        lat = random_lattice(d, rng)
        v = lat.shortest_vector()
        r = float(np.linalg.norm(v)) / 2
        while True:
            normal = rng.normal(size=d)
            normal /= np.linalg.norm(normal)
            sin_alpha = abs(normal @ v) / (2 * r)
            if sin_alpha > 0.05:
                break
        proj = project_along_shortest(lat, normal)
        worst_density = max(worst_density, abs(proj.density - 2 * lat.density * r * sin_alpha))
        pack = packing_radius(PeriodicPointSet.from_lattice(proj))
        worst_packing = min(worst_packing, pack - r * math.sqrt(3) / 2)
    elapsed = time.monotonic() - started
    ok = worst_density <= 1e-9 and worst_packing >= -1e-9 and elapsed < 60
    acceptance(4, "projected density and packing radius on 100 lattices", ok,
               f"density error {worst_density:.1e}, packing margin {worst_packing:.3g}, {elapsed:.1f}s")
    assert ok


def box_check(plan, half=30):
    """Replay the plan on the source points in [-half, half]^2 and test it against Z^2."""
    basis = np.array(plan.source)
    inv = np.linalg.inv(basis)
    corners = np.array(list(itertools.product((-half, half), repeat=2)), dtype=float)
    reach = np.abs(corners @ inv.T).max(axis=0)
    ranges = [range(-int(c) - 2, int(c) + 3) for c in reach]
    coeffs = np.array(list(itertools.product(*ranges)), dtype=float)
    src = coeffs @ basis.T
    src = src[np.all(np.abs(src) <= half, axis=1)]
    img = plan.apply(src)
    disp = float(np.linalg.norm(img - src, axis=1).max())
    rounded = np.round(img)
    into = np.abs(img - rounded).max() < 1e-6
    keys = {tuple(p) for p in rounded.astype(int)}
    injective = len(keys) == len(src)
    inner = math.floor(half - disp)
    onto = all((a, b) in keys for a in range(-inner, inner + 1) for b in range(-inner, inner + 1))
    return disp, into and injective and onto


def test_5_normalization(acceptance):
    r2 = packing_radius(PeriodicPointSet.from_lattice(hexagonal_lattice()))
    bound = 2 * r2 + (1 + 2 * r2) / (0.3 * math.sqrt(2)) + 1
    rng = np.random.default_rng(55)
    started = time.monotonic()
    worst, bijective = 0.0, True
    for _ in range(100):
        plan = normalize_to_integer_lattice(random_lattice(2, rng, min_packing=0.3))
        disp, ok = box_check(plan)
        worst = max(worst, disp)
        bijective &= ok
    elapsed = time.monotonic() - started
    ok = bijective and worst <= bound and elapsed < 300
    acceptance(5, "coset-shift plans on 100 lattices stay within the closed-form bound", ok,
               f"max displacement {worst:.3f} <= {bound:.3f}, bijective={bijective}, {elapsed:.1f}s")
    assert ok


def test_6_separation_family(acceptance):
    alphas = (0.0, 1 / 9, 2 / 9, 1 / 3, math.sqrt(2) / 2 - 0.25)
    started = time.monotonic()
    family = build_separated_family(1.0, len(alphas), 2, alphas)
    bounds = certify_family(family, window=8.0, target=0.2, budget=Budget(max_seconds=120))
    elapsed = time.monotonic() - started
    worst = min(bounds.values())
    ok = len(bounds) == 10 and worst >= 0.2 and elapsed < 600
    acceptance(6, "sheared lattices pairwise certified at least 0.20 apart", ok,
               f"min lower bound {worst:.4f} over {len(bounds)} pairs, {elapsed:.1f}s")
    assert ok


def test_7_phi_gadget(acceptance):
    r, kappa, d = 0.5, 0.02, 2
    started = time.monotonic()
    failures, count = [], 0
    for m, n in ((1, 1), (1, 2), (2, 1)):
        layout = gz.phi_layout(m, n, r, kappa, d)
        s, s1 = layout.gap, layout.side
        lo, hi = s / 2 - 0.01, (s1 + 2 * r * math.sqrt(d - 1)) / 2 + 0.01
        for p in gz.grid_points(m, n, 2 * r):
            pps, _ = gz.build_phi_gadget(p, r, kappa, d, layout=layout)
            cover = covering_radius(pps, 0.01)
            count += 1
            if not (abs(pps.density - kappa) <= 1e-9 and packing_radius(pps) > r
                    and lo <= cover.lower and cover.upper <= hi):
                failures.append((m, n, p.coords))
    elapsed = time.monotonic() - started
    ok = not failures and elapsed < 300
    acceptance(7, "packing gadgets: density, packing radius and covering window", ok,
               f"{count} gadgets, {len(failures)} failures, {elapsed:.1f}s")
    assert ok


def test_8_phi_isometry(acceptance):
    r, kappa, d = 0.5, 0.02, 2
    started = time.monotonic()
    worst, count = 0.0, 0
    for m, n in itertools.product((1, 2), repeat=2):
        layout = gz.phi_layout(m, n, r, kappa, d)
        built = [(p,) + gz.build_phi_gadget(p, r, kappa, d, layout=layout) for p in gz.grid_points(m, n, 2 * r)]
        for (p, x, sx), (q, y, sy) in itertools.combinations(built, 2):
            want = max(abs(u - v) for u, v in zip(p.coords, q.coords))
            iv = gz.phi_pair_bounds(x, sx, y, sy)
            worst = max(worst, abs(iv.lower - want), abs(iv.upper - want))
            count += 1
    elapsed = time.monotonic() - started
    ok = worst <= 1e-9 and elapsed < 600
    acceptance(8, "packing gadgets realize the grid distance exactly", ok,
               f"{count} pairs, max error {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_9_psi_gadget(acceptance):
    started = time.monotonic()
    reports = suite_psi(R=1.0, kappa=1.0, d=2, eps=0.25)
    elapsed = time.monotonic() - started
    pairs = [r for r in reports if r.lemma == "psi-euclidean"]
    covers = [r for r in reports if r.lemma == "psi-covering"]
    ok = all(r.passed for r in reports) and pairs and covers and elapsed < 600
    low = min(r.measured["lower"] - r.bounds["within"][0] for r in pairs)
    acceptance(9, "covering gadgets: Euclidean bottleneck window and covering radius", ok,
               f"{len(pairs)} pairs, {len(covers)} gadgets, min lower-bound margin {low:.3f}, {elapsed:.1f}s")
    assert ok


def test_10_disjoint_union(acceptance):
    started = time.monotonic()
    reports = suite_disjoint_union("phi", upto=4) + suite_disjoint_union("psi", upto=4)
    elapsed = time.monotonic() - started
    margin = min(r.measured["lower"] - r.bounds["lower"] for r in reports)
    ok = all(r.passed for r in reports) and len(reports) == 12 and elapsed < 900
    acceptance(10, "gadget families drift apart at least 2^T - 0.1", ok,
               f"{len(reports)} family pairs, min margin {margin:.3f}, {elapsed:.1f}s")
    assert ok

"""Verification suites: each returns one report per checked instance."""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import gadgets as gz
from .bottleneck import Budget, bottleneck_finite, euclidean_bottleneck_finite
from .geometry import (
    FinitePointSet,
    covering_radius,
    densest_packing_radius,
    packing_radius,
    project_along,
    random_lattice,
)
from .separation import build_separated_family, certify_family
from .transport import normalize_to_integer_lattice, verify_plan

GAMMA_ALPHAS = (0.0, 1 / 9, 2 / 9, 1 / 3, math.sqrt(2) / 2 - 0.25)


@dataclass
class VerificationReport:
    lemma: str
    params: dict
    passed: bool
    measured: dict
    bounds: dict
    seconds: float = 0.0
    repro: str | None = None

    def to_dict(self) -> dict:
        return {"lemma": self.lemma, "params": self.params, "passed": self.passed,
                "measured": self.measured, "bounds": self.bounds,
                "seconds": round(self.seconds, 3), "repro": self.repro}


def _sorted(reports: list[VerificationReport]) -> list[VerificationReport]:
    return sorted(reports, key=lambda r: (r.lemma, json.dumps(r.params, sort_keys=True)))


def _report(lemma, params, passed, measured, bounds, started, repro):
    return VerificationReport(lemma, params, bool(passed), measured, bounds,
                              time.monotonic() - started, None if passed else repro)


# ---- finite solver


def brute_force_bottleneck(a: np.ndarray, b: np.ndarray) -> float:
    n = len(a)
    cost = np.linalg.norm(a[:, None] - b[None], axis=2)
    return min(max(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def suite_solver_oracle(seed: int = 42, count: int = 200, **_) -> list[VerificationReport]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        started = time.monotonic()
        n = int(rng.integers(1, 8))
        d = int(rng.integers(1, 4))
        a, b = rng.uniform(-1, 1, (n, d)), rng.uniform(-1, 1, (n, d))
        got = bottleneck_finite(FinitePointSet(a), FinitePointSet(b)).upper
        want = brute_force_bottleneck(a, b)
        err = abs(got - want)
        out.append(_report("solver-oracle", {"seed": seed, "instance": k, "n": n, "d": d},
                           err <= 1e-12, {"value": got, "error": err}, {"error": 1e-12},
                           started, f"ppsb verify solver-oracle --seed {seed}"))
    return out


def concentric_triangles() -> tuple[FinitePointSet, FinitePointSet]:
    s = math.sqrt(3)
    x = FinitePointSet([[1, -s / 3], [-1, -s / 3], [0, 2 * s / 3]])
    y = FinitePointSet([[0.5, -s / 6], [-0.5, -s / 6], [0, s / 3]])
    return x, y


def suite_triangles(budget: Budget | None = None, **_) -> list[VerificationReport]:
    started = time.monotonic()
    x, y = concentric_triangles()
    b = budget or Budget(target_width=1e-4, max_seconds=10)
    res = euclidean_bottleneck_finite(x, y, b)
    target = math.sqrt(3) / 3
    ok = res.lower - 1e-12 <= target <= res.upper + 1e-12 and res.upper - res.lower <= 1e-4
    return [_report("triangles", {}, ok, {"lower": res.lower, "upper": res.upper},
                    {"contains": target, "width": 1e-4}, started, "ppsb verify triangles")]


def suite_interval(max_m: int = 3, max_n: int = 3, **_) -> list[VerificationReport]:
    out = []
    for m, n in itertools.product(range(1, max_m + 1), range(1, max_n + 1)):
        started = time.monotonic()
        pts = gz.grid_points(m, n, 1.0)
        codes = [gz.encode_grid_to_interval(p) for p in pts]
        worst = 0.0
        for i, j in itertools.combinations(range(len(pts)), 2):
            got = bottleneck_finite(codes[i], codes[j]).upper
            worst = max(worst, abs(got - gz.sup_distance(pts[i], pts[j])))
        out.append(_report("grid-interval-isometry", {"m": m, "n": n}, worst <= 1e-12,
                           {"max_error": worst}, {"max_error": 1e-12}, started,
                           "ppsb verify interval"))
    return out


# ---- lattices


def suite_projection(seed: int = 7, count: int = 100, **_) -> list[VerificationReport]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        started = time.monotonic()
        d = 2 if k < count // 2 else 3
        lat = random_lattice(d, rng)
        v = lat.shortest_vector()
        r = float(np.linalg.norm(v)) / 2
        while True:
            normal = rng.normal(size=d)
            normal /= np.linalg.norm(normal)
            sin_alpha = abs(normal @ v) / np.linalg.norm(v)
            if sin_alpha > 0.05:
                break
        proj, _ = project_along(lat, v, normal)
        expected = 2 * lat.density * r * sin_alpha
        err = abs(proj.density - expected)
        pack = packing_radius(proj)
        floor = r * math.sqrt(3) / 2
        ok = err <= 1e-9 and pack >= floor - 1e-9
        out.append(_report("projection", {"seed": seed, "instance": k, "d": d}, ok,
                           {"density_error": err, "packing": pack},
                           {"density_error": 1e-9, "packing_floor": floor}, started,
                           f"ppsb verify projection --seed {seed}"))
    return out


def normalize_bound_2d(r: float) -> float:
    r2 = densest_packing_radius(2)
    return 2 * r2 + (1 + 2 * r2) / (r * math.sqrt(2)) + 1


def suite_normalize(seed: int = 5, count: int = 100, window: float = 30.0,
                    min_packing: float = 0.3, **_) -> list[VerificationReport]:
    rng = np.random.default_rng(seed)
    bound = normalize_bound_2d(min_packing)
    out = []
    for k in range(count):
        started = time.monotonic()
        lat = random_lattice(2, rng, min_packing)
        plan = normalize_to_integer_lattice(lat)
        # the ball of radius window * sqrt(2) contains the box [-window, window]^2
        rep = verify_plan(plan, window=window * math.sqrt(2))
        ok = rep.ok and rep.max_displacement <= bound
        out.append(_report("normalize", {"seed": seed, "instance": k}, ok,
                           {"max_displacement": rep.max_displacement, "plan_bound": plan.bound,
                            "bijective": rep.ok},
                           {"max_displacement": bound}, started,
                           f"ppsb verify normalize --seed {seed}"))
    return out


def suite_gamma(seed: int = 1, window: float = 8.0, target: float = 0.2,
                budget: Budget | None = None, **_) -> list[VerificationReport]:
    family = build_separated_family(1.0, len(GAMMA_ALPHAS), 2, GAMMA_ALPHAS)
    budget = budget or Budget(max_seconds=120)
    out = []
    for (i, j), lower in sorted(certify_family(family, window, target, budget).items()):
        out.append(VerificationReport("gamma", {"seed": seed, "alpha": [GAMMA_ALPHAS[i], GAMMA_ALPHAS[j]]},
                                      lower >= target, {"lower": lower}, {"lower": target},
                                      repro=None if lower >= target else f"ppsb verify gamma --seed {seed}"))
    return out


# ---- gadgets


def suite_phi(r: float = 0.5, kappa: float = 0.02, d: int = 2, resolution: float = 0.01,
              **_) -> list[VerificationReport]:
    out = []
    for m, n in ((1, 1), (1, 2), (2, 1)):
        layout = gz.phi_layout(m, n, r, kappa, d)
        lo, hi = layout.covering_bounds
        for p in gz.grid_points(m, n, 2 * r):
            started = time.monotonic()
            pps, spec = gz.build_phi_gadget(p, r, kappa, d, layout=layout)
            cover = covering_radius(pps, resolution)
            pack = packing_radius(pps)
            ok = (abs(pps.density - kappa) <= 1e-9 and pack > r
                  and cover.lower >= lo - 0.01 and cover.upper <= hi + 0.01
                  and spec.params["s"] >= 7 * spec.params["M"] + 3 * m)
            out.append(_report("phi-gadget", {"m": m, "n": n, "coords": list(p.coords)}, ok,
                               {"density": pps.density, "packing": pack,
                                "covering": [cover.lower, cover.upper]},
                               {"density": kappa, "packing_above": r, "covering_within": [lo - 0.01, hi + 0.01]},
                               started, "ppsb verify phi"))
    for m, n in itertools.product((1, 2), repeat=2):
        layout = gz.phi_layout(m, n, r, kappa, d)
        built = [(p,) + gz.build_phi_gadget(p, r, kappa, d, layout=layout)
                 for p in gz.grid_points(m, n, 2 * r)]
        for (p, x, sx), (q, y, sy) in itertools.combinations(built, 2):
            started = time.monotonic()
            iv = gz.phi_pair_bounds(x, sx, y, sy)
            want = gz.sup_distance(p, q)
            ok = abs(iv.lower - want) <= 1e-9 and abs(iv.upper - want) <= 1e-9
            out.append(_report("phi-isometry", {"m": m, "n": n, "x": list(p.coords), "y": list(q.coords)},
                               ok, {"lower": iv.lower, "upper": iv.upper}, {"equals": want},
                               started, "ppsb verify phi"))
    return _sorted(out)


def suite_psi(R: float = 1.0, kappa: float = 1.0, d: int = 2, eps: float = 0.25,
              budget: Budget | None = None, resolution: float = 0.05, **_) -> list[VerificationReport]:
    out = []
    for m, n in itertools.product((1, 2), repeat=2):
        layout = gz.psi_layout(m, n, R, kappa, d, eps)
        built = [(p,) + gz.build_psi_gadget(p, R, kappa, d, eps, layout=layout)
                 for p in gz.grid_points(m, n, 1.0)]
        for p, x, _ in built:
            started = time.monotonic()
            cover = covering_radius(x, resolution)
            out.append(_report("psi-covering", {"m": m, "n": n, "coords": list(p.coords)},
                               cover.upper <= R and layout.large >= 2 * layout.small,
                               {"covering_upper": cover.upper, "L": layout.small, "K": layout.large},
                               {"covering_upper": R}, started, "ppsb verify psi"))
        for (p, x, sx), (q, y, sy) in itertools.combinations(built, 2):
            started = time.monotonic()
            dist = gz.sup_distance(p, q)
            floor = max(dist / 2 - eps, 0.0) - 0.05
            upper = gz.psi_matching(x, sx, y, sy).cost
            b = Budget(**{**(budget.__dict__ if budget else {"max_seconds": 60}),
                          "lower_target": floor + 0.01})
            lower, truncated, nodes = gz.psi_euclidean_lower(x, sx, y, sy, b, upper)
            ok = lower >= floor and upper <= dist + 1e-9
            out.append(_report("psi-euclidean", {"m": m, "n": n, "x": list(p.coords), "y": list(q.coords)},
                               ok, {"lower": lower, "upper": upper, "nodes": nodes, "truncated": truncated},
                               {"within": [floor, dist + 1e-9]}, started, "ppsb verify psi"))
    return _sorted(out)


def suite_disjoint_union(kind: str = "phi", upto: int = 4, d: int = 2, slack: float = 0.1,
                         **params) -> list[VerificationReport]:
    started = time.monotonic()
    pairs = [gz.pairing_T_inverse(T) for T in range(1, upto + 1)]
    families = gz.build_families(kind, pairs, d, **{k: v for k, v in params.items()
                                                   if k in ("r", "R", "kappa", "eps", "margin")})
    report = gz.certify_disjoint_union(families)
    out = []
    for p in report.pairs:
        need = p.required - slack
        out.append(_report(f"disjoint-union-{kind}", {"T": [p.earlier, p.later]}, p.lower >= need,
                           {"lower": p.lower}, {"lower": need}, started,
                           f"ppsb verify disjoint-union --kind {kind} --upto {upto}"))
    return out


SUITES = {
    "solver-oracle": suite_solver_oracle,
    "triangles": suite_triangles,
    "interval": suite_interval,
    "projection": suite_projection,
    "normalize": suite_normalize,
    "gamma": suite_gamma,
    "phi": suite_phi,
    "psi": suite_psi,
    "disjoint-union": suite_disjoint_union,
}


def run_suite(name: str, **options) -> list[VerificationReport]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name](**{k: v for k, v in options.items() if v is not None})

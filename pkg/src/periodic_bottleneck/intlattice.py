"""Exact integer and rational lattice arithmetic.

Matrices are lists of lists (row-major) of ``int`` or ``Fraction``.  Lattices
are spanned by the *columns* of a matrix, matching the float code elsewhere.
"""

from fractions import Fraction
from itertools import product
from math import gcd

import numpy as np


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def hermite_columns(mat: list[list[int]]) -> list[list[int]]:
    """Lower-triangular basis of the column lattice of an integer matrix.

    The input must have full row rank ``d``; the result is ``d x d`` with a
    positive diagonal and entries left of the diagonal reduced modulo it.
    """
    d = len(mat)
    cols = [list(c) for c in zip(*mat)]
    basis = []
    for i in range(d):
        # fold all remaining columns into one pivot column in row i
        pivot = None
        rest = []
        for c in cols:
            if c[i] == 0:
                rest.append(c)
                continue
            if pivot is None:
                pivot = c
                continue
            g, x, y = _xgcd(pivot[i], c[i])
            a, b = pivot[i] // g, c[i] // g
            new_pivot = [x * p + y * q for p, q in zip(pivot, c)]
            killed = [b * p - a * q for p, q in zip(pivot, c)]
            pivot = new_pivot
            if any(killed):
                rest.append(killed)
        if pivot is None:
            raise ValueError("matrix does not have full row rank")
        if pivot[i] < 0:
            pivot = [-p for p in pivot]
        basis.append(pivot)
        cols = rest
    # reduce off-diagonal entries
    for i in range(d):
        for j in range(i):
            q = basis[j][i] // basis[i][i]
            if q:
                basis[j] = [p - q * r for p, r in zip(basis[j], basis[i])]
    return [[basis[j][i] for j in range(d)] for i in range(d)]


def coset_representatives(hnf: list[list[int]]) -> np.ndarray:
    """Integer vectors forming a complete residue system of Z^d / hnf Z^d."""
    diag = [hnf[i][i] for i in range(len(hnf))]
    reps = list(product(*(range(k) for k in diag)))
    return np.array(reps, dtype=float).reshape(len(reps), len(diag))


def unimodular_with_first_column(c: list[int]) -> np.ndarray:
    """Integer unimodular matrix whose first column is the primitive vector ``c``."""
    d = len(c)
    c = [int(v) for v in c]
    if gcd(*c) != 1:
        raise ValueError(f"vector {c} is not primitive")
    # inverse of the accumulated row operations; we track the matrix U with
    # U^{-1} c = e1, i.e. columns of U transform along with c
    u = [[int(i == j) for j in range(d)] for i in range(d)]
    vec = list(c)
    for k in range(d - 1, 0, -1):
        # make vec[k] zero by combining entries k-1 and k
        a, b = vec[k - 1], vec[k]
        if b == 0:
            continue
        g, x, y = _xgcd(a, b)
        # new (vec[k-1], vec[k]) = M (a, b) with M = [[x, y], [-b/g, a/g]]
        p, q = a // g, b // g
        vec[k - 1], vec[k] = g, 0
        # U <- U M^{-1};  M^{-1} = [[p, -y], [q, x]]
        for row in u:
            r0, r1 = row[k - 1], row[k]
            row[k - 1], row[k] = r0 * p + r1 * q, -r0 * y + r1 * x
    if vec[0] == -1:
        for row in u:
            row[0] = -row[0]
    out = np.array(u, dtype=float)
    assert np.allclose(out[:, 0], c)
    return out


def rationalize(mat: np.ndarray, max_den: int, tol: float) -> list[list[Fraction]] | None:
    """Continued-fraction reconstruction of every entry, or None if one fails."""
    out = []
    for row in np.asarray(mat, dtype=float):
        new_row = []
        for v in row:
            f = Fraction(float(v)).limit_denominator(max_den)
            if abs(float(f) - v) > tol * max(1.0, abs(v)):
                return None
            new_row.append(f)
        out.append(new_row)
    return out


def rational_inverse(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    d = len(mat)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(d)]
           for i, row in enumerate(mat)]
    for col in range(d):
        piv = next(r for r in range(col, d) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(d):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[d:] for row in aug]


def _lcm_den(entries) -> int:
    den = 1
    for f in entries:
        den = den * f.denominator // gcd(den, f.denominator)
    return den


def intersection_coordinates(ratio: list[list[Fraction]]) -> list[list[int]]:
    """Basis (in the coordinates of lattice A) of A ∩ B, where B = A·ratio.

    A point A·a lies in B iff ratio^{-1} a is integral.  The dual of the
    intersection is Z^d + ratio^{-T} Z^d, so we take an HNF of that sum and
    dualize back.
    """
    d = len(ratio)
    s = rational_inverse(ratio)
    gens = [[Fraction(int(i == j)) for j in range(d)] + [s[j][i] for j in range(d)]
            for i in range(d)]
    den = _lcm_den(f for row in gens for f in row)
    int_gens = [[int(f * den) for f in row] for row in gens]
    h = hermite_columns(int_gens)
    dual = [[Fraction(h[i][j], den) for j in range(d)] for i in range(d)]
    inv = rational_inverse(dual)
    basis = [[inv[j][i] for j in range(d)] for i in range(d)]  # transpose
    for row in basis:
        for f in row:
            if f.denominator != 1:
                raise ArithmeticError("intersection basis is not integral")
    return hermite_columns([[int(f) for f in row] for row in basis])

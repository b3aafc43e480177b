"""Exact Gauss-Jordan elimination over Fractions (small dense systems only)."""

from __future__ import annotations

from fractions import Fraction


def _rref(rows):
    """Reduced row echelon form in place; returns pivot columns."""
    m = [[Fraction(x) for x in row] for row in rows]
    ncols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        lead = m[r][c]
        m[r] = [x / lead for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows) -> int:
    if not rows:
        return 0
    return len(_rref(rows)[1])


def solve(a, b):
    """Solve the square nonsingular system a x = b exactly."""
    n = len(a)
    aug = [list(row) + [bi] for row, bi in zip(a, b)]
    m, pivots = _rref(aug)
    if pivots[:n] != list(range(n)) or len(pivots) > n:
        raise ZeroDivisionError("singular system")
    return [m[i][n] for i in range(n)]


def lstsq(a, b):
    """Least-squares solution of a full-column-rank system via the normal equations."""
    ncols = len(a[0])
    at = [[a[i][j] for i in range(len(a))] for j in range(ncols)]
    ata = [[sum(Fraction(x) * y for x, y in zip(at[i], at[j])) for j in range(ncols)] for i in range(ncols)]
    atb = [sum(Fraction(x) * y for x, y in zip(at[i], b)) for i in range(ncols)]
    return solve(ata, atb)

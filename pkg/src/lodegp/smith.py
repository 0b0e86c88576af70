"""Smith normal form over the operator polynomial ring, with unimodular base
changes, and the controllability test read off the diagonal.

The decomposition satisfies U * A * V = D exactly, with D diagonal, every
nonzero diagonal entry monic, nonzero entries ordered before zero entries,
and the divisibility chain D[i,i] | D[i+1,i+1].  det(U) and det(V) are
nonzero constants, so realizable solution sets are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NotDiagonalError, ShapeMismatchError
from .opalgebra import (
    OperatorMatrix,
    OperatorPoly,
    RatFun,
    mat_det,
    mat_mul,
    op_divmod,
)


@dataclass(frozen=True)
class SmithDecomposition:
    U: OperatorMatrix
    D: OperatorMatrix
    V: OperatorMatrix
    detU: RatFun
    detV: RatFun


def _find_pivot(d, start, rows, cols):
    """Minimal-degree nonzero entry at or after (start, start); ties broken
    by smallest (row, col)."""
    best = None
    best_deg = None
    for i in range(start, rows):
        for j in range(start, cols):
            e = d[i][j]
            if e.is_zero():
                continue
            deg = e.degree()
            if best is None or deg < best_deg:
                best, best_deg = (i, j), deg
    return best


def smith_normal_form(A: OperatorMatrix) -> SmithDecomposition:
    m, n = A.rows, A.cols
    symbols = ()
    for row in A.entries:
        for e in row:
            for c in e.coeffs:
                symbols = tuple(sorted(set(symbols) | set(c.symbols)))
    one = RatFun.const(1, symbols)

    d = [list(row) for row in A.entries]
    u = [list(row) for row in OperatorMatrix.identity(m, symbols).entries]
    v = [list(row) for row in OperatorMatrix.identity(n, symbols).entries]
    det_u = one
    det_v = one

    def swap_rows(i, k):
        nonlocal det_u
        if i == k:
            return
        d[i], d[k] = d[k], d[i]
        u[i], u[k] = u[k], u[i]
        det_u = -det_u

    def swap_cols(j, k):
        nonlocal det_v
        if j == k:
            return
        for row in d:
            row[j], row[k] = row[k], row[j]
        for row in v:
            row[j], row[k] = row[k], row[j]
        det_v = -det_v

    def row_sub(i, k, q: OperatorPoly):
        # row i -= q * row k
        if q.is_zero():
            return
        for j in range(n):
            d[i][j] = d[i][j] - q * d[k][j]
        for j in range(m):
            u[i][j] = u[i][j] - q * u[k][j]

    def col_sub(j, k, q: OperatorPoly):
        # col j -= q * col k
        if q.is_zero():
            return
        for i in range(m):
            d[i][j] = d[i][j] - q * d[i][k]
        for i in range(n):
            v[i][j] = v[i][j] - q * v[i][k]

    def row_add(i, k):
        for j in range(n):
            d[i][j] = d[i][j] + d[k][j]
        for j in range(m):
            u[i][j] = u[i][j] + u[k][j]

    for t in range(min(m, n)):
        while True:
            pivot = _find_pivot(d, t, m, n)
            if pivot is None:
                break
            swap_rows(t, pivot[0])
            swap_cols(t, pivot[1])
            # degree of the pivot strictly decreases whenever elimination
            # leaves a remainder, so this loop terminates
            last_deg = d[t][t].degree()
            clean = True
            for i in range(t + 1, m):
                if d[i][t].is_zero():
                    continue
                q, r = op_divmod(d[i][t], d[t][t])
                row_sub(i, t, q)
                if not r.is_zero():
                    clean = False
            for j in range(t + 1, n):
                if d[t][j].is_zero():
                    continue
                q, r = op_divmod(d[t][j], d[t][t])
                col_sub(j, t, q)
                if not r.is_zero():
                    clean = False
            if not clean:
                assert _min_degree(d, t, m, n) < last_deg
                continue
            # pivot cleared its row and column; enforce that it divides
            # every remaining entry of the working submatrix
            offender = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if d[i][j].is_zero():
                        continue
                    _, r = op_divmod(d[i][j], d[t][t])
                    if not r.is_zero():
                        offender = i
                        break
                if offender is not None:
                    break
            if offender is None:
                break
            row_add(t, offender)

    # monic normalization: absorb the leading unit of each diagonal entry
    # into U (the general form of taking -x to x)
    for t in range(min(m, n)):
        e = d[t][t]
        if e.is_zero():
            continue
        lead = e.leading()
        if lead == one:
            continue
        inv = RatFun.const(1, symbols) / lead
        for j in range(n):
            d[t][j] = d[t][j].scale(inv)
        for j in range(m):
            u[t][j] = u[t][j].scale(inv)
        det_u = det_u * inv

    # normalize the free columns of V (columns whose diagonal entry is zero
    # or that lie beyond the diagonal): make the highest-degree entry monic,
    # choosing the first row on ties.  This pins down the generator scale of
    # the solution module, which the pushforward kernel inherits.
    rank = sum(1 for t in range(min(m, n)) if not d[t][t].is_zero())
    for j in range(n):
        if j < rank:
            continue
        best = None
        for i in range(n):
            e = v[i][j]
            if e.is_zero():
                continue
            if best is None or e.degree() > v[best][j].degree():
                best = i
        if best is None:
            continue
        lead = v[best][j].leading()
        if lead == one:
            continue
        inv = RatFun.const(1, symbols) / lead
        for i in range(n):
            v[i][j] = v[i][j].scale(inv)
        det_v = det_v * inv

    U = OperatorMatrix(u)
    V = OperatorMatrix(v)
    D = OperatorMatrix(d)
    return SmithDecomposition(U=U, D=D, V=V, detU=det_u, detV=det_v)


def _min_degree(d, start, rows, cols):
    degs = [
        d[i][j].degree()
        for i in range(start, rows)
        for j in range(start, cols)
        if not d[i][j].is_zero()
    ]
    return min(degs) if degs else -1


def verify_snf(A: OperatorMatrix, s: SmithDecomposition) -> bool:
    """Exact re-check of the defining identity and unimodularity."""
    try:
        product = mat_mul(mat_mul(s.U, A), s.V)
    except ShapeMismatchError:
        return False
    if product != s.D:
        return False
    for mat in (s.U, s.V):
        det = mat_det(mat)
        if det.is_zero() or det.degree() != 0:
            return False
    return True


def is_controllable(D: OperatorMatrix) -> bool:
    """True iff every diagonal entry is zero or one."""
    if not D.is_diagonal():
        raise NotDiagonalError("controllability test requires a diagonal matrix")
    for t in range(min(D.rows, D.cols)):
        e = D.entries[t][t]
        if e.is_zero():
            continue
        if e.degree() != 0:
            return False
    return True

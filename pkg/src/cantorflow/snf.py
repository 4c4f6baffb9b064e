"""Smith normal form over the integers, with the lattice queries built on it.

Matrices are lists of rows of Python ints, so there is no overflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property


def identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def matmul(A, B):
    if not A or not B:
        return [[0] * (len(B[0]) if B else 0) for _ in A]
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col) if a) for col in Bt] for row in A]


def transpose(A, ncols: int | None = None):
    if not A:
        return [[] for _ in range(ncols or 0)]
    return [list(c) for c in zip(*A)]


def det(A) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    n = len(A)
    M = [row[:] for row in A]
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k]:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[-1][-1] if n else 1


@dataclass
class SNFDecomposition:
    """``U A V = D`` with ``U``, ``V`` unimodular and ``D`` diagonal."""

    A: list[list[int]]
    U: list[list[int]]
    D: list[list[int]]
    V: list[list[int]]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.U), len(self.V)

    @property
    def diagonal(self) -> list[int]:
        m, n = self.shape
        return [self.D[i][i] for i in range(min(m, n))]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d)

    @property
    def invariant_factors(self) -> list[int]:
        return self.diagonal

    def cokernel(self) -> tuple[int, list[int]]:
        """(free rank, torsion coefficients) of ``Z^m / im(A)``."""
        m, _ = self.shape
        torsion = [d for d in self.diagonal if d > 1]
        return m - self.rank, torsion

    @cached_property
    def _sparse_U(self):
        return [[(j, u) for j, u in enumerate(row) if u] for row in self.U]

    def in_image(self, v: list[int]) -> bool:
        nz = {j: x for j, x in enumerate(v) if x}
        if not nz:
            return True
        w = [sum(u * nz[j] for j, u in row if j in nz) for row in self._sparse_U]
        diag = self.diagonal
        for i, x in enumerate(w):
            d = diag[i] if i < len(diag) else 0
            if d == 0:
                if x != 0:
                    return False
            elif x % d:
                return False
        return True

    def kernel_basis(self) -> list[list[int]]:
        """Columns of ``V`` spanning the integer kernel of ``A``."""
        _, n = self.shape
        r = self.rank
        return [[self.V[i][j] for i in range(n)] for j in range(r, n)]


def smith_normal_form(A: list[list[int]], ncols: int | None = None) -> SNFDecomposition:
    """Smith normal form by pivoting on the smallest nonzero entry.

    ``ncols`` is needed only when ``A`` has no rows.
    """
    m = len(A)
    n = len(A[0]) if m else (ncols or 0)
    D = [list(map(int, row)) for row in A]
    U = identity(m)
    V = identity(n)

    def swap_rows(i, j):
        D[i], D[j] = D[j], D[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for M in (D, V):
            for row in M:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):
        # row_dst += q * row_src
        rs, rd = D[src], D[dst]
        for j, x in enumerate(rs):
            if x:
                rd[j] += q * x
        us, ud = U[src], U[dst]
        for j, x in enumerate(us):
            if x:
                ud[j] += q * x

    def add_col(dst, src, q):
        for M in (D, V):
            for row in M:
                x = row[src]
                if x:
                    row[dst] += q * x

    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            row = D[i]
            for j in range(t, n):
                x = row[j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
                    if best[0] == 1:
                        break
            if best and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        if i != t:
            swap_rows(t, i)
        if j != t:
            swap_cols(t, j)
        while True:
            p = D[t][t]
            dirty = False
            for i in range(t + 1, m):
                x = D[i][t]
                if x:
                    q = x // p
                    add_row(i, t, -q)
                    if D[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                x = D[t][j]
                if x:
                    q = x // p
                    add_col(j, t, -q)
                    if D[t][j]:
                        dirty = True
            if dirty:
                cand = [(abs(D[i][t]), i, t) for i in range(t + 1, m) if D[i][t]]
                cand += [(abs(D[t][j]), t, j) for j in range(t + 1, n) if D[t][j]]
                _, i, j = min(cand)
                if i != t:
                    swap_rows(t, i)
                if j != t:
                    swap_cols(t, j)
                continue
            if abs(p) == 1:
                break
            bad = next(
                (i for i in range(t + 1, m) if any(x % p for x in D[i][t + 1:] if x)),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if D[t][t] < 0:
            D[t] = [-x for x in D[t]]
            U[t] = [-x for x in U[t]]
        t += 1
    return SNFDecomposition([list(r) for r in A], U, D, V)


def rank(A, ncols: int | None = None) -> int:
    return smith_normal_form(A, ncols).rank


def columns_to_matrix(cols: list[list[int]], nrows: int) -> list[list[int]]:
    """Matrix (``nrows`` x ``len(cols)``) whose columns are ``cols``."""
    return [[c[i] for c in cols] for i in range(nrows)]


def lattice_contains(gens: list[list[int]], vectors: list[list[int]], dim: int) -> bool:
    """Whether every vector lies in the Z-span of ``gens``."""
    snf = smith_normal_form(columns_to_matrix(gens, dim), ncols=len(gens))
    return all(snf.in_image(v) for v in vectors)


def kernel_basis(A: list[list[int]], ncols: int) -> list[list[int]]:
    return smith_normal_form(A, ncols).kernel_basis()

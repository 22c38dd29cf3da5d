"""Small exact simplex solver over the rationals.

Solves ``max c.x  s.t.  A x = b, x >= 0`` with a two-phase dense tableau and
Bland's rule, so it terminates and every number it returns is exact. Sizes
here are tiny (a few dozen variables), so nothing clever is needed.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


@dataclass
class LPResult:
    status: str
    x: list[Fraction] | None = None
    value: Fraction | None = None
    # for UNBOUNDED: r >= 0 with A r = 0 and c.r > 0
    ray: list[Fraction] | None = None


class _Tableau:
    def __init__(self, rows, rhs, basis):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis

    def pivot(self, r: int, col: int) -> None:
        row = self.rows[r]
        piv = row[col]
        if piv != 1:
            self.rows[r] = row = [v / piv for v in row]
            self.rhs[r] /= piv
        for k, other in enumerate(self.rows):
            if k == r:
                continue
            f = other[col]
            if f:
                self.rows[k] = [a - f * b for a, b in zip(other, row)]
                self.rhs[k] -= f * self.rhs[r]
        self.basis[r] = col

    def reduced_costs(self, cost):
        # c_j - c_B B^-1 A_j ; positive entries improve a maximisation
        red = list(cost)
        for r, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                red = [v - cb * a for v, a in zip(red, self.rows[r])]
        return red

    def run(self, cost, allowed):
        """Maximise cost.x over the current basis; Bland's rule."""
        while True:
            red = self.reduced_costs(cost)
            col = next((j for j in allowed if red[j] > 0), None)
            if col is None:
                return OPTIMAL, None
            best = None
            for r, row in enumerate(self.rows):
                a = row[col]
                if a > 0:
                    ratio = self.rhs[r] / a
                    key = (ratio, self.basis[r])
                    if best is None or key < best[0]:
                        best = (key, r)
            if best is None:
                return UNBOUNDED, col
            self.pivot(best[1], col)


def linprog_max(c: Sequence, A_eq: Sequence[Sequence], b_eq: Sequence) -> LPResult:
    n = len(c)
    c = [Fraction(v) for v in c]
    A = [[Fraction(v) for v in row] for row in A_eq]
    b = [Fraction(v) for v in b_eq]
    if any(len(row) != n for row in A):
        raise ValueError("constraint rows must have one entry per variable")
    m = len(A)
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    # phase 1: artificial columns n..n+m-1
    rows = [A[i] + [Fraction(int(k == i)) for k in range(m)] for i in range(m)]
    tab = _Tableau(rows, list(b), list(range(n, n + m)))
    phase1 = [Fraction(0)] * n + [Fraction(-1)] * m
    tab.run(phase1, list(range(n + m)))
    infeas = sum(tab.rhs[r] for r, bv in enumerate(tab.basis) if bv >= n)
    if infeas > 0:
        return LPResult(INFEASIBLE)
    # drive remaining (zero-level) artificials out, dropping redundant rows
    r = 0
    while r < len(tab.rows):
        if tab.basis[r] >= n:
            col = next((j for j in range(n) if tab.rows[r][j] != 0), None)
            if col is None:
                del tab.rows[r], tab.rhs[r], tab.basis[r]
                continue
            tab.pivot(r, col)
        r += 1
    tab.rows = [row[:n] for row in tab.rows]
    status, col = tab.run(c + [], list(range(n)))
    x = [Fraction(0)] * n
    for r, bv in enumerate(tab.basis):
        x[bv] = tab.rhs[r]
    if status == UNBOUNDED:
        ray = [Fraction(0)] * n
        ray[col] = Fraction(1)
        for r, bv in enumerate(tab.basis):
            ray[bv] = -tab.rows[r][col]
        return LPResult(UNBOUNDED, x=x, ray=ray)
    value = sum(ci * xi for ci, xi in zip(c, x))
    return LPResult(OPTIMAL, x=x, value=value)

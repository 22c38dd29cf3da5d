"""Exact finite metric spaces and sup-norm helpers.

Distances are stored as :class:`fractions.Fraction` so that all of the
combinatorics built on top (tight spans, matching inequalities, LPs) stays
exact.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, NamedTuple, Sequence

import numpy as np

Scalar = Fraction


class Violation(NamedTuple):
    kind: str  # "diagonal" | "symmetry" | "positivity" | "triangle"
    indices: tuple
    defect: Fraction


class MetricError(ValueError):
    """Raised when a square matrix fails one of the metric axioms."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        head = ", ".join(f"{v.kind}{v.indices}={v.defect}" for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"not a metric: {head}{more}")


def to_scalar(value) -> Fraction:
    """Convert ints, Fractions and "p/q" / decimal strings to Fraction.

    Floats are refused: a binary float silently carries representation error.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not distances")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected int, Fraction or rational string, got {type(value).__name__}")


def scalar_to_json(x: Fraction):
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class FiniteMetricSpace:
    labels: tuple[str, ...]
    dist: tuple[tuple[Fraction, ...], ...]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def d(self, i: int, j: int) -> Fraction:
        return self.dist[i][j]

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.dist[i]

    def diameter(self) -> Fraction:
        return max((max(r) for r in self.dist), default=Fraction(0))

    def as_float(self) -> np.ndarray:
        return np.array([[float(v) for v in r] for r in self.dist], dtype=float)

    def as_scaled_int(self) -> tuple[np.ndarray, int]:
        """Integer matrix ``D * scale`` with ``scale`` the lcm of denominators."""
        scale = 1
        for r in self.dist:
            for v in r:
                scale = lcm(scale, v.denominator)
        vals = [[int(v * scale) for v in r] for r in self.dist]
        big = max((abs(v) for r in vals for v in r), default=0)
        # 2^62 / 16 leaves room for sums over up to 16 entries
        dtype = np.int64 if big < 2**58 else object
        return np.array(vals, dtype=dtype), scale

    def subspace(self, indices: Iterable[int]) -> "FiniteMetricSpace":
        return subspace(self, indices)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "dist": [[scalar_to_json(v) for v in r] for r in self.dist],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def metric_violations(dist: Sequence[Sequence[Fraction]]) -> list[Violation]:
    n = len(dist)
    out: list[Violation] = []
    for i in range(n):
        if dist[i][i] != 0:
            out.append(Violation("diagonal", (i,), dist[i][i]))
    for i, j in itertools.combinations(range(n), 2):
        if dist[i][j] != dist[j][i]:
            out.append(Violation("symmetry", (i, j), dist[j][i] - dist[i][j]))
        if dist[i][j] <= 0:
            out.append(Violation("positivity", (i, j), dist[i][j]))
    # (i, j, k): path i -> j -> k shorter than the direct i -> k
    for i in range(n):
        for k in range(i + 1, n):
            for j in range(n):
                if j == i or j == k:
                    continue
                defect = dist[i][k] - dist[i][j] - dist[j][k]
                if defect > 0:
                    out.append(Violation("triangle", (i, j, k), defect))
    return out


def validate_metric(dist, labels: Sequence[str] | None = None) -> FiniteMetricSpace:
    """Build a :class:`FiniteMetricSpace`, raising :class:`MetricError` on any
    failed axiom. ``ValueError`` for non-square input or negative entries."""
    rows = [list(r) for r in dist]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("distance matrix must be square and non-empty")
    mat = [[to_scalar(v) for v in r] for r in rows]
    neg = [(i, j) for i in range(n) for j in range(n) if mat[i][j] < 0]
    if neg:
        raise ValueError(f"negative distance entries at {neg[:5]}")
    if labels is None:
        labels = [str(i) for i in range(n)]
    labels = tuple(str(l) for l in labels)
    if len(labels) != n:
        raise ValueError("label count does not match matrix size")
    if len(set(labels)) != n:
        raise ValueError("labels must be distinct")
    bad = metric_violations(mat)
    if bad:
        raise MetricError(bad)
    return FiniteMetricSpace(labels, tuple(tuple(r) for r in mat))


def from_json(obj) -> FiniteMetricSpace:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "dist" not in obj:
        raise ValueError('space JSON must be an object with a "dist" key')
    return validate_metric(obj["dist"], obj.get("labels"))


def load(path) -> FiniteMetricSpace:
    with open(path) as fh:
        return from_json(json.load(fh))


def subspace(X: FiniteMetricSpace, indices: Iterable[int]) -> FiniteMetricSpace:
    idx = list(indices)
    if not idx:
        raise ValueError("subspace index set is empty")
    if any(not (0 <= i < X.n) for i in idx):
        raise IndexError(f"subspace indices out of range for a {X.n}-point space")
    if len(set(idx)) != len(idx):
        raise ValueError("subspace indices must be distinct")
    return FiniteMetricSpace(
        tuple(X.labels[i] for i in idx),
        tuple(tuple(X.dist[i][j] for j in idx) for i in idx),
    )


def linf_distance(p, q):
    if len(p) != len(q):
        raise ValueError(f"dimension mismatch: {len(p)} vs {len(q)}")
    return max((abs(a - b) for a, b in zip(p, q)), default=0)


def four_point_defect(X: FiniteMetricSpace, quad: Sequence[int]) -> Fraction:
    """d(x,x') + d(y,y') - max{d(x,y)+d(x',y'), d(x,y')+d(x',y)}.

    Non-positive exactly when the quadruple satisfies the 0-hyperbolic
    (tree-like) inequality for this pairing.
    """
    x, xp, y, yp = quad
    for i in quad:
        if not 0 <= i < X.n:
            raise IndexError(i)
    d = X.d
    return d(x, xp) + d(y, yp) - max(d(x, y) + d(xp, yp), d(x, yp) + d(xp, y))


def max_four_point_defect(X: FiniteMetricSpace) -> tuple[Fraction, tuple | None]:
    best, arg = None, None
    for quad in itertools.product(range(X.n), repeat=4):
        v = four_point_defect(X, quad)
        if best is None or v > best:
            best, arg = v, quad
    return best, arg


def is_tree_like(X: FiniteMetricSpace) -> bool:
    best, _ = max_four_point_defect(X)
    return best <= 0

"""Isbell's injective hull (tight span) of a finite metric space.

Functions on X are plain tuples indexed like ``X.labels``. Exact routines
take and return Fractions; the ``*_float`` variants work on numpy arrays of
shape ``(N, n)`` and are what the bicombing code calls in its inner loops.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .metric import FiniteMetricSpace

DEFAULT_CAP = 8


class CapExceeded(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, last=None, iterations=None, defect=None):
        super().__init__(msg)
        self.last = last
        self.iterations = iterations
        self.defect = defect


# --------------------------------------------------------------------------
# pointwise operators


def star_dual(f: Sequence, X: FiniteMetricSpace) -> tuple:
    n = X.n
    return tuple(max(X.d(x, y) - f[y] for y in range(n)) for x in range(n))


def is_in_delta(f: Sequence, X: FiniteMetricSpace) -> bool:
    n = X.n
    return all(f[x] + f[y] >= X.d(x, y) for x in range(n) for y in range(x, n))


def is_in_delta1(f: Sequence, X: FiniteMetricSpace) -> bool:
    n = X.n
    lip = all(abs(f[x] - f[y]) <= X.d(x, y) for x in range(n) for y in range(x + 1, n))
    return lip and is_in_delta(f, X)


def is_extremal(f: Sequence, X: FiniteMetricSpace) -> bool:
    return tuple(star_dual(f, X)) == tuple(f)


def extremality_defect(f: Sequence, X: FiniteMetricSpace):
    fs = star_dual(f, X)
    return max(abs(a - b) for a, b in zip(f, fs))


def kuratowski_embed(X: FiniteMetricSpace, x: int) -> tuple:
    if not 0 <= x < X.n:
        raise IndexError(x)
    return tuple(X.row(x))


def sup_distance(f: Sequence, g: Sequence):
    return max(abs(a - b) for a, b in zip(f, g))


def retract_to_delta(g: Sequence, X: FiniteMetricSpace) -> tuple:
    """1-Lipschitz retraction of R^X onto Delta(X): g -> max(g, g*)."""
    gs = star_dual(g, X)
    return tuple(max(a, b) for a, b in zip(g, gs))


@dataclass
class RetractionResult:
    form: tuple
    iterations: int
    defect: object
    defects: list = field(default_factory=list)


def retract_to_tight_span(f: Sequence, X: FiniteMetricSpace, tol=None,
                          max_iter: int = 10_000, check_delta: bool = True) -> RetractionResult:
    """Iterate ``T(f) = (f + f*)/2`` from ``f`` in Delta(X).

    With ``tol=None`` the stop rule is exact equality ``f == f*`` (use
    Fractions); otherwise stop once ``|f - f*|_inf <= tol``. Raises
    :class:`ConvergenceError` when ``max_iter`` is hit.
    """
    f = tuple(f)
    if check_delta and not is_in_delta(f, X):
        raise ValueError("retract_to_tight_span expects f in Delta(X)")
    defects = []
    for it in range(max_iter + 1):
        fs = star_dual(f, X)
        defect = max(abs(a - b) for a, b in zip(f, fs))
        defects.append(defect)
        if (defect == 0) if tol is None else (defect <= tol):
            return RetractionResult(f, it, defect, defects)
        if it == max_iter:
            break
        f = tuple((a + b) / 2 for a, b in zip(f, fs))
    raise ConvergenceError(
        f"T-iteration not converged after {max_iter} steps (defect {float(defect):.3g})",
        last=f, iterations=max_iter, defect=defect)


def lower_to_tight_span(f: Sequence, X: FiniteMetricSpace, order: Sequence[int] | None = None) -> tuple:
    """Finite 1-Lipschitz retraction of Delta(X) onto E(X): lower f(x), one
    coordinate at a time, to the least value keeping f in Delta, namely
    max(0, max_{y != x} d(x,y) - f(y)). Lowering a coordinate only raises the
    other duals, and membership in Delta caps them at the current values, so
    every coordinate already visited stays tight."""
    f = list(f)
    for x in (order if order is not None else range(X.n)):
        f[x] = max([Fraction(0)] + [X.d(x, y) - f[y] for y in range(X.n) if y != x])
    return tuple(f)


def lower_to_tight_span_float(F: np.ndarray, D: np.ndarray, order=None) -> np.ndarray:
    F = np.atleast_2d(np.array(F, dtype=float))
    n = D.shape[0]
    for x in (order if order is not None else range(n)):
        others = [y for y in range(n) if y != x]
        F[:, x] = np.maximum((D[x, others][None, :] - F[:, others]).max(axis=1, initial=0.0), 0.0)
    return F


def star_dual_float(G: np.ndarray, D: np.ndarray) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    return (D[None, :, :] - G[:, None, :]).max(axis=2)


def retract_to_delta_float(G: np.ndarray, D: np.ndarray) -> np.ndarray:
    G = np.atleast_2d(np.asarray(G, dtype=float))
    return np.maximum(G, star_dual_float(G, D))


def retract_to_tight_span_float(F: np.ndarray, D: np.ndarray, tol: float = 1e-12,
                                max_iter: int = 10_000):
    """Batched T-iteration; returns ``(forms, iterations, final_defect)``."""
    F = np.atleast_2d(np.array(F, dtype=float))
    for it in range(max_iter + 1):
        Fs = star_dual_float(F, D)
        gap = np.abs(F - Fs).max() if F.size else 0.0
        if gap <= tol:
            return F, it, gap
        F = 0.5 * (F + Fs)
    raise ConvergenceError(f"T-iteration not converged after {max_iter} steps "
                           f"(defect {gap:.3g})", last=F, iterations=max_iter, defect=gap)


# --------------------------------------------------------------------------
# admissible graphs


@dataclass(frozen=True)
class AdmissibleGraph:
    n: int
    edges: frozenset  # of (i, j) with i <= j; (i, i) is a loop

    def adjacency(self) -> list[set]:
        adj = [set() for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def components(self) -> list[tuple[frozenset, bool]]:
        """Connected components with an ``odd`` flag (contains an odd cycle;
        a loop counts as a cycle of length one)."""
        adj = self.adjacency()
        color = [None] * self.n
        out = []
        for s in range(self.n):
            if color[s] is not None:
                continue
            color[s] = 0
            comp, odd = [s], False
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in adj[u]:
                    if color[v] is None:
                        color[v] = 1 - color[u]
                        comp.append(v)
                        queue.append(v)
                    elif color[v] == color[u]:
                        odd = True
            out.append((frozenset(comp), odd))
        return out

    @property
    def rank(self) -> int:
        return sum(1 for _, odd in self.components() if not odd)

    def covers(self) -> bool:
        seen = set()
        for i, j in self.edges:
            seen.add(i)
            seen.add(j)
        return len(seen) == self.n

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def equality_edges(f: Sequence, X: FiniteMetricSpace) -> frozenset:
    n = X.n
    return frozenset((x, y) for x in range(n) for y in range(x, n)
                     if f[x] + f[y] == X.d(x, y))


def admissible_graph(f: Sequence, X: FiniteMetricSpace) -> AdmissibleGraph:
    if not is_extremal(f, X):
        raise ValueError("admissible_graph needs an extremal function")
    return AdmissibleGraph(X.n, equality_edges(f, X))


def rank(A: AdmissibleGraph) -> int:
    return A.rank


# --------------------------------------------------------------------------
# face enumeration


@dataclass(frozen=True)
class Face:
    graph: AdmissibleGraph
    rank: int
    representative: tuple
    vertices: tuple  # tuple of extremal vertex functions spanning the face

    @property
    def edges(self) -> list[tuple[int, int]]:
        return self.graph.sorted_edges()

    def is_face_of(self, other: "Face") -> bool:
        """P(self) is a face of P(other) iff A(other) is a subset of A(self)."""
        return other.graph.edges <= self.graph.edges


@lru_cache(maxsize=None)
def _sign_vectors(n: int) -> np.ndarray:
    vecs = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8)
    return vecs[np.any(vecs != 0, axis=1)]


def _pairs(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def tight_span_vertices(X: FiniteMetricSpace) -> list[tuple]:
    """Vertices of E(X), found by walking bounded edges of Delta(X) from d_0.

    At a vertex v every edge direction is a sign vector u in {-1,0,1}^X that
    alternates on a single even component of the tight graph and vanishes
    elsewhere; the walk moves along u until a new inequality becomes tight.
    """
    n = X.n
    pairs = _pairs(n)
    I = np.array([p[0] for p in pairs])
    J = np.array([p[1] for p in pairs])
    U = _sign_vectors(n)
    S = U[:, I].astype(np.int16) + U[:, J]
    dpair = [X.d(i, j) for i, j in pairs]

    start = kuratowski_embed(X, 0)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        v = queue.popleft()
        slack = [v[i] + v[j] - dp for (i, j), dp in zip(pairs, dpair)]
        tight = np.array([s == 0 for s in slack])
        feasible = np.all(S[:, tight] >= 0, axis=1)
        for k in np.nonzero(feasible)[0]:
            srow = S[k]
            sub = frozenset(pairs[p] for p in range(len(pairs)) if tight[p] and srow[p] == 0)
            g = AdmissibleGraph(n, sub)
            comps = g.components()
            even = [c for c, odd in comps if not odd]
            if len(even) != 1:
                continue
            u = U[k]
            if not all(u[x] != 0 for x in even[0]):
                continue
            steps = [slack[p] / int(-srow[p]) for p in range(len(pairs))
                     if not tight[p] and srow[p] < 0]
            if not steps:
                continue  # unbounded ray of Delta(X)
            t = min(steps)
            w = tuple(v[x] + t * int(u[x]) for x in range(n))
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def enumerate_faces(X: FiniteMetricSpace, cap: int = DEFAULT_CAP) -> list[Face]:
    """All bounded faces P(A) of Delta(X), i.e. the cells of E(X).

    Each face comes with its admissible graph, rank (number of even
    components), vertex list, and the vertex average as a relative-interior
    representative. Output is sorted by (rank, edges).
    """
    n = X.n
    if n > cap:
        raise CapExceeded(f"{n}-point space exceeds face enumeration cap {cap}")
    pairs = _pairs(n)
    pindex = {p: k for k, p in enumerate(pairs)}
    verts = tight_span_vertices(X)
    vmask = []
    for v in verts:
        m = 0
        for e in equality_edges(v, X):
            m |= 1 << pindex[e]
        vmask.append(m)
    pt_mask = [0] * n
    for k, (i, j) in enumerate(pairs):
        pt_mask[i] |= 1 << k
        pt_mask[j] |= 1 << k

    def covering(m):
        return all(m & pm for pm in pt_mask)

    def closure(m):
        members = [k for k, vm in enumerate(vmask) if vm & m == m]
        c = ~0
        for k in members:
            c &= vmask[k]
        return c, members

    faces: dict[int, list[int]] = {}
    queue = deque()
    for k, m in enumerate(vmask):
        if m not in faces:
            faces[m] = [k]
            queue.append(m)
    while queue:
        m = queue.popleft()
        members = faces[m]
        for k, vm in enumerate(vmask):
            if k in members:
                continue
            m2 = m & vm
            if not covering(m2):
                continue
            c, mem2 = closure(m2)
            if c not in faces:
                faces[c] = mem2
                queue.append(c)

    out = []
    for m, members in faces.items():
        edges = frozenset(pairs[k] for k in range(len(pairs)) if m >> k & 1)
        g = AdmissibleGraph(n, edges)
        vs = tuple(verts[k] for k in members)
        rep = tuple(sum(v[x] for v in vs) / len(vs) for x in range(n))
        out.append(Face(g, g.rank, rep, vs))
    out.sort(key=lambda f: (f.rank, f.edges))
    return out


def tight_span_dim(X: FiniteMetricSpace, cap: int = DEFAULT_CAP) -> int:
    if X.n == 1:
        return 0
    return max(f.rank for f in enumerate_faces(X, cap))


def faces_to_json(faces: list[Face]) -> list[dict]:
    from .metric import scalar_to_json
    return [{"edges": [list(e) for e in f.edges], "rank": f.rank,
             "rep": [scalar_to_json(v) for v in f.representative]} for f in faces]

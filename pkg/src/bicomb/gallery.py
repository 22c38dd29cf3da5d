"""Example spaces: regular polygons, the discrete bigon, trees, random metrics,
the butterfly retract, and grid samples of the convex cap set."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .metric import FiniteMetricSpace, validate_metric


def two_point(d=1) -> FiniteMetricSpace:
    d = Fraction(d)
    return validate_metric([[0, d], [d, 0]], ["a", "b"])


def ngon(two_n: int) -> FiniteMetricSpace:
    """Vertices of a regular polygon with ``two_n`` sides, arc-length metric
    (unit edges)."""
    if two_n < 2 or two_n % 2:
        raise ValueError("ngon expects an even vertex count >= 2")
    k = two_n
    dist = [[min(abs(i - j), k - abs(i - j)) for j in range(k)] for i in range(k)]
    return validate_metric(dist, [f"v{i}" for i in range(k)])


@dataclass(frozen=True)
class Bigon:
    space: FiniteMetricSpace
    m: int
    alpha: tuple[int, ...]  # indices of alpha(k/m), k = 0..m
    beta: tuple[int, ...]   # indices of beta(k/m),  k = 0..m
    involution: tuple[int, ...]  # index permutation swapping alpha and beta

    def param(self, idx: int) -> tuple[str, Fraction]:
        if idx in self.alpha:
            return "alpha", Fraction(self.alpha.index(idx), self.m)
        return "beta", Fraction(self.beta.index(idx), self.m)


def bigon(m: int) -> Bigon:
    """Grid points of the bigon made of the linear segment alpha from d_0 to
    d_1 and the Kuratowski curve beta(t) = d_t, endpoints shared.

    Cross distances are s + t - 2st; distances along each curve are |s - s'|.
    """
    if m < 1:
        raise ValueError("bigon needs m >= 1")
    params = [Fraction(k, m) for k in range(m + 1)]
    labels = ["d0"] + [f"alpha({s})" for s in params[1:-1]] + ["d1"]
    labels += [f"beta({t})" for t in params[1:-1]]
    alpha = tuple(range(m + 1))
    beta = (0,) + tuple(range(m + 1, 2 * m)) + (m,)
    N = 2 * m
    coord = {}
    for k in range(m + 1):
        coord[alpha[k]] = ("a", params[k])
        coord[beta[k]] = coord.get(beta[k], ("b", params[k]))
    dist = [[Fraction(0)] * N for _ in range(N)]
    for i in range(N):
        for j in range(N):
            (ci, si), (cj, sj) = coord[i], coord[j]
            if i == j:
                continue
            if ci == cj:
                dist[i][j] = abs(si - sj)
            else:
                dist[i][j] = si + sj - 2 * si * sj
    space = validate_metric(dist, labels)
    inv = list(range(N))
    for k in range(m + 1):
        inv[alpha[k]] = beta[k]
        inv[beta[k]] = alpha[k]
    return Bigon(space, m, alpha, beta, tuple(inv))


def bigon_linf_vectors(m: int) -> dict[tuple[str, Fraction], tuple[Fraction, ...]]:
    """alpha(s), beta(t) as functions on the grid {k/m}: explicit vectors in
    l_inf^(m+1) used to cross-check the bigon distances."""
    grid = [Fraction(k, m) for k in range(m + 1)]
    out = {}
    for k in range(m + 1):
        s = grid[k]
        out[("alpha", s)] = tuple((1 - s) * u + s * (1 - u) for u in grid)
        out[("beta", s)] = tuple(abs(s - u) for u in grid)
    return out


def tree_metric(edges: Sequence[tuple], points: Sequence | None = None) -> FiniteMetricSpace:
    """Path-length metric of a weighted tree restricted to ``points``
    (default: every node, in first-appearance order)."""
    nodes = []
    adj: dict = {}
    for u, v, w in edges:
        w = Fraction(w)
        if w <= 0:
            raise ValueError("tree edge lengths must be positive")
        for a in (u, v):
            if a not in adj:
                adj[a] = []
                nodes.append(a)
        adj[u].append((v, w))
        adj[v].append((u, w))
    if len(edges) != len(nodes) - 1:
        raise ValueError("edge list is not a tree")
    if points is None:
        points = nodes
    dist = []
    for p in points:
        depth = {p: Fraction(0)}
        stack = [p]
        while stack:
            a = stack.pop()
            for b, w in adj[a]:
                if b not in depth:
                    depth[b] = depth[a] + w
                    stack.append(b)
        if len(depth) != len(nodes):
            raise ValueError("edge list is not connected")
        dist.append([depth[q] for q in points])
    return validate_metric(dist, [str(p) for p in points])


def star_tree(leaves: int = 3, length=1) -> FiniteMetricSpace:
    return tree_metric([("c", f"l{i}", length) for i in range(leaves)],
                       [f"l{i}" for i in range(leaves)])


def random_tree_metric(n_points: int, seed: int) -> FiniteMetricSpace:
    """Random weighted tree on ``2 * n_points - 2`` nodes; the metric is taken
    on ``n_points`` of them (leaves and some inner nodes)."""
    rng = np.random.default_rng(seed)
    total = max(2, 2 * n_points - 2)
    edges = []
    for v in range(1, total):
        u = int(rng.integers(0, v))
        edges.append((u, v, Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 4)))))
    chosen = sorted(int(c) for c in rng.choice(total, size=n_points, replace=False))
    return tree_metric(edges, chosen)


def random_metric(n: int, seed: int, low: int = 1, high: int = 10) -> FiniteMetricSpace:
    """Shortest-path closure of a random complete graph with rational weights
    in ``[low, high]`` (quarter steps). A narrow range gives generic spaces
    with large tight spans; a wide one gives graph-like, sparser ones."""
    if n < 2:
        raise ValueError("random_metric needs n >= 2")
    if not 0 < low <= high:
        raise ValueError("need 0 < low <= high")
    rng = np.random.default_rng(seed)
    w = [[Fraction(0)] * n for _ in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        w[i][j] = w[j][i] = Fraction(int(rng.integers(4 * low, 4 * high + 1)), 4)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                via = w[i][k] + w[k][j]
                if via < w[i][j]:
                    w[i][j] = via
    return validate_metric(w, [f"p{i}" for i in range(n)])


# --------------------------------------------------------------------------
# the convex cap set C on a grid


def cap_grid(g: int) -> list[Fraction]:
    if g < 2:
        raise ValueError("grid needs at least 2 points")
    return [Fraction(k, g - 1) for k in range(g)]


def in_convex_cap(f: Sequence, grid: Sequence) -> bool:
    """f(0)+f(1) = 1, discrete convexity, and f in Delta_1 of the grid."""
    g = len(grid)
    if f[0] + f[-1] != 1:
        return False
    for k in range(1, g - 1):
        h0, h1 = grid[k] - grid[k - 1], grid[k + 1] - grid[k]
        # slope non-decreasing
        if (f[k] - f[k - 1]) * h1 > (f[k + 1] - f[k]) * h0:
            return False
    for a in range(g):
        for b in range(a, g):
            duv = abs(grid[a] - grid[b])
            if f[a] + f[b] < duv or abs(f[a] - f[b]) > duv:
                return False
    return True


def convex_cap_set(g: int, extra: int = 24, seed: int = 0):
    """Grid samples of C and the curve gamma(t) = d_t.

    Returns ``(grid, members, gamma)`` where ``gamma[k]`` is d_{grid[k]}.
    Members are the hinges |u - c| at grid nodes, their midpoints, and seeded
    convex combinations of hinges, all re-checked against the constraints.
    """
    grid = cap_grid(g)
    gamma = [tuple(abs(u - t) for u in grid) for t in grid]
    cands = list(gamma)
    cands += [tuple(abs(u - c) for u in grid)
              for c in (Fraction(1, 3), Fraction(2, 7), Fraction(5, 9))]
    cands += [tuple((a + b) / 2 for a, b in zip(gamma[i], gamma[-1 - i]))
              for i in range(g // 2)]
    rng = np.random.default_rng(seed)
    for _ in range(extra):
        idx = rng.choice(g, size=3, replace=False)
        wts = [Fraction(int(x), 1) for x in rng.integers(1, 6, size=3)]
        tot = sum(wts)
        cands.append(tuple(sum(w * gamma[i][k] for w, i in zip(wts, idx)) / tot
                           for k in range(g)))
    members = []
    seen = set()
    for f in cands:
        if f not in seen and in_convex_cap(f, grid):
            seen.add(f)
            members.append(f)
    return grid, members, gamma


def butterfly():
    from .bicombing import butterfly_space
    return butterfly_space()


CATALOG = {
    "two-point": "two points at distance 1",
    "ngon": "regular 2n-gon vertices, arc metric (param n)",
    "bigon": "discrete bigon with m subdivisions (param m)",
    "star-tree": "star tree with unit edges (param leaves)",
    "random": "random rational metric (params n, seed)",
    "random-tree": "random tree metric (params n, seed)",
    "butterfly": "retract space of the conical-not-convex example (bicombing only)",
}


def build(gid: str, **params) -> FiniteMetricSpace:
    if gid == "two-point":
        return two_point()
    if gid == "ngon":
        return ngon(2 * int(params.get("n", 3)))
    if gid == "bigon":
        return bigon(int(params.get("m", 2))).space
    if gid == "star-tree":
        return star_tree(int(params.get("leaves", 3)))
    if gid == "random":
        return random_metric(int(params.get("n", 5)), int(params.get("seed", 0)),
                             int(params.get("low", 1)), int(params.get("high", 10)))
    if gid == "random-tree":
        return random_tree_metric(int(params.get("n", 5)), int(params.get("seed", 0)))
    if gid == "butterfly":
        raise ValueError("butterfly is a retract space, not a finite metric space")
    raise KeyError(f"unknown gallery id {gid!r}")

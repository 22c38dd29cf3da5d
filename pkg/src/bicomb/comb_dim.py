"""Combinatorial dimension through the 2(n+1)-point matching criterion.

``dress_check`` scans every even subset and pairing by brute force;
``dress_witness`` builds an exact certificate for a single (Z, i) from the
flow LP mu(h) = sup{S(w) : w in W(h)}, either a strictly better bijection
(mu(0) unbounded) or an extremal function together with an equal-sum
involution (mu(0) = 0).
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .exact_lp import OPTIMAL, UNBOUNDED, linprog_max
from .metric import FiniteMetricSpace, subspace
from .tight_span import (AdmissibleGraph, CapExceeded, enumerate_faces, equality_edges,
                         is_extremal, tight_span_dim)

MAX_POINTS = 12
MAX_N = 3


class InternalInconsistency(RuntimeError):
    """A certificate failed its own exact re-verification."""


# --------------------------------------------------------------------------
# involutions and bijections


@dataclass(frozen=True)
class Involution:
    """Fixed-point-free involution on a point set, stored as sorted pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        flat = [z for p in self.pairs for z in p]
        if len(flat) != len(set(flat)):
            raise ValueError("pairs of an involution must be disjoint")
        if any(a == b for a, b in self.pairs):
            raise ValueError("involution must be fixed-point free")
        object.__setattr__(self, "pairs", tuple(sorted(tuple(sorted(p)) for p in self.pairs)))

    @classmethod
    def from_map(cls, mapping: dict) -> "Involution":
        pairs = set()
        for a, b in mapping.items():
            if mapping.get(b) != a:
                raise ValueError("map is not an involution")
            pairs.add(tuple(sorted((a, b))))
        return cls(tuple(pairs))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(z for p in self.pairs for z in p))

    def as_map(self) -> dict:
        m = {}
        for a, b in self.pairs:
            m[a], m[b] = b, a
        return m

    def __call__(self, z: int) -> int:
        return self.as_map()[z]


def matching_sum(X: FiniteMetricSpace, mapping: dict) -> Fraction:
    return sum((X.d(z, w) for z, w in mapping.items()), Fraction(0))


def is_derangement(mapping: dict) -> bool:
    return (all(z != w for z, w in mapping.items())
            and sorted(mapping.values()) == sorted(mapping))


@lru_cache(maxsize=None)
def _derangements(k: int) -> np.ndarray:
    return np.array([p for p in itertools.permutations(range(k))
                     if all(p[a] != a for a in range(k))], dtype=np.int64)


@lru_cache(maxsize=None)
def _involution_rows(k: int) -> tuple[int, ...]:
    D = _derangements(k)
    return tuple(r for r, p in enumerate(D) if all(p[p[a]] == a for a in range(k)))


# --------------------------------------------------------------------------
# the brute-force criterion


@dataclass
class DressResult:
    holds: bool
    n: int
    violation: tuple | None = None  # (Z, Involution) in global indices
    checked: int = 0


def _scan_subsets(Dint, subsets, k):
    ders = _derangements(k)
    inv_rows = _involution_rows(k)
    cols = np.arange(k)
    checked = 0
    for Z in subsets:
        sub = Dint[np.ix_(Z, Z)]
        sums = sub[cols[None, :], ders].sum(axis=1)
        top = int(np.argmax(sums))
        top_val = sums[top]
        second = np.max(np.delete(sums, top)) if len(sums) > 1 else None
        for r in inv_rows:
            checked += 1
            best = top_val if top != r else second
            if best is None or best < sums[r]:
                return Z, r, checked
    return None, None, checked


def dress_check(X: FiniteMetricSpace, n: int, max_points: int = MAX_POINTS,
                max_n: int = MAX_N, threads: int | None = None) -> DressResult:
    """Does every 2(n+1)-subset Z with every fixed-point-free involution i
    admit a fixed-point-free bijection j != i with sum d(z,j(z)) >= sum
    d(z,i(z))? On failure the lexicographically first (Z, i) is returned."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if X.n > max_points or n > max_n:
        raise CapExceeded(f"dress_check budget: |X| <= {max_points}, n <= {max_n}")
    k = 2 * (n + 1)
    if X.n < k:
        return DressResult(True, n)
    Dint, _ = X.as_scaled_int()
    subsets = [list(Z) for Z in itertools.combinations(range(X.n), k)]
    if threads is None:
        threads = int(os.environ.get("BICOMB_THREADS", "1") or 1)
    if threads > 1 and len(subsets) > threads:
        size = math.ceil(len(subsets) / threads)
        chunks = [subsets[a:a + size] for a in range(0, len(subsets), size)]
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda c: _scan_subsets(Dint, c, k), chunks))
    else:
        results = [_scan_subsets(Dint, subsets, k)]
    checked = 0
    for Z, r, c in results:
        checked += c
        if Z is not None:
            perm = _derangements(k)[r]
            inv = Involution(tuple((Z[a], Z[int(perm[a])]) for a in range(k) if a < perm[a]))
            return DressResult(False, n, (tuple(Z), inv), checked)
    return DressResult(True, n, None, checked)


def comb_dim_exhaustive(X: FiniteMetricSpace, cap: int = 8) -> int:
    return comb_dim_sweep(X, cap)[0]


def comb_dim_sweep(X: FiniteMetricSpace, cap: int = 8) -> tuple[int, tuple]:
    """Max of dim E(Y) over all subsets Y (largest first). Subsets with
    |Y| // 2 <= current best cannot raise the maximum and are skipped."""
    if X.n > cap:
        raise CapExceeded(f"{X.n}-point space exceeds exhaustive cap {cap}")
    best, arg = 0, (0,)
    for size in range(X.n, 1, -1):
        if size // 2 <= best:
            break
        for Y in itertools.combinations(range(X.n), size):
            dim = tight_span_dim(subspace(X, Y), cap)
            if dim > best:
                best, arg = dim, Y
    return best, arg


# --------------------------------------------------------------------------
# the flow LP


@dataclass
class FlowVector:
    """Weights on unordered pairs of Z (global indices, a < b)."""

    w: dict

    def support(self) -> set:
        return {p for p, v in self.w.items() if v != 0}

    def S(self, X: FiniteMetricSpace) -> Fraction:
        return sum((v * X.d(*p) for p, v in self.w.items()), Fraction(0))

    def row_sums(self, Z) -> dict:
        out = {z: Fraction(0) for z in Z}
        for (a, b), v in self.w.items():
            out[a] += v
            out[b] += v
        return out

    def in_W(self, Z, inv: Involution, h: dict) -> bool:
        ipairs = set(inv.pairs)
        signs = all((v <= 0) if p in ipairs else (v >= 0) for p, v in self.w.items())
        rows = self.row_sums(Z)
        return signs and all(rows[z] == h.get(z, 0) for z in Z)

    def to_json(self):
        from .metric import scalar_to_json
        return [[a, b, scalar_to_json(v)] for (a, b), v in sorted(self.w.items()) if v != 0]


@dataclass
class MuResult:
    value: object  # Fraction or math.inf
    argmax: FlowVector | None = None
    ray: FlowVector | None = None

    @property
    def unbounded(self) -> bool:
        return self.value == math.inf


def _check_pairing(Z, inv: Involution):
    Z = tuple(Z)
    if len(Z) % 2 or len(set(Z)) != len(Z):
        raise ValueError("Z must be an even set of distinct points")
    if inv.support != tuple(sorted(Z)):
        raise ValueError("involution must pair up exactly the points of Z")
    return Z


def _flow_lp(X, Z, inv, h, allowed=None, normalize=False):
    """Set up and solve the LP in x >= 0 with w_p = sign_p * x_p."""
    ipairs = set(inv.pairs)
    pairs = [p for p in itertools.combinations(sorted(Z), 2) if allowed is None or p in allowed]
    signs = [-1 if p in ipairs else 1 for p in pairs]
    nv = len(pairs) + (1 if normalize else 0)
    A, b = [], []
    for z in sorted(Z):
        row = [0] * nv
        for k, p in enumerate(pairs):
            if z in p:
                row[k] = signs[k]
        A.append(row)
        b.append(h.get(z, 0))
    if normalize:  # sum |w| + slack = 1
        A.append([1] * nv)
        b.append(1)
    c = [s * X.d(*p) for s, p in zip(signs, pairs)] + ([0] if normalize else [])
    res = linprog_max(c, A, b)
    return res, pairs, signs


def mu_lp(X: FiniteMetricSpace, Z: Sequence[int], inv: Involution, h: dict | None = None) -> MuResult:
    """Exact value of mu(h); ``h`` maps points of Z to rationals (default 0)."""
    Z = _check_pairing(Z, inv)
    h = {z: Fraction(v) for z, v in (h or {}).items()}
    res, pairs, signs = _flow_lp(X, Z, inv, h)
    if res.status == UNBOUNDED:
        ray = FlowVector({p: s * v for p, s, v in zip(pairs, signs, res.ray)})
        return MuResult(math.inf, ray=ray)
    if res.status != OPTIMAL:
        raise InternalInconsistency("W(h) reported empty; it is never empty")
    w = FlowVector({p: s * v for p, s, v in zip(pairs, signs, res.x)})
    return MuResult(res.value, argmax=w)


def minimal_positive_flow(X, Z, inv) -> FlowVector | None:
    """A w in W(0) with S(w) > 0 whose support has no proper subset carrying
    another such flow; None when mu(0) = 0."""
    Z = _check_pairing(Z, inv)
    res, pairs, signs = _flow_lp(X, Z, inv, {}, normalize=True)
    if res.value <= 0:
        return None

    def to_flow(r, prs, sg):
        return {p: s * v for p, s, v in zip(prs, sg, r.x)}

    w = to_flow(res, pairs, signs)
    support = {p for p, v in w.items() if v != 0}
    shrunk = True
    while shrunk:
        shrunk = False
        for p in sorted(support):
            r2, prs, sg = _flow_lp(X, Z, inv, {}, allowed=support - {p}, normalize=True)
            if r2.status == OPTIMAL and r2.value > 0:
                w = to_flow(r2, prs, sg)
                support = {q for q, v in w.items() if v != 0}
                shrunk = True
                break
    return FlowVector({p: v for p, v in w.items() if v != 0})


def _alternating_cycle(inv: Involution, edges: set, involution_swap: bool):
    """Points z_0..z_l with distinct i-pairs and {i(z_k), z_{k+1}} in
    ``edges`` (cyclically). DFS in lexicographic order."""
    imap = inv.as_map()
    adj: dict = {}
    for a, b in edges:
        if a == b or imap.get(a) == b:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)

    def pair(z):
        return tuple(sorted((z, imap[z])))

    for z0 in sorted(imap):
        stack = [(z0, [z0], {pair(z0)})]
        while stack:
            z, path, used = stack.pop()
            for nxt in sorted(adj.get(imap[z], ()), reverse=True):
                if nxt == z0 and len(path) >= 2:
                    return path
                if pair(nxt) in used:
                    continue
                stack.append((nxt, path + [nxt], used | {pair(nxt)}))
    return None


# --------------------------------------------------------------------------
# witnesses


@dataclass
class StrictBijection:
    Z: tuple
    i: Involution
    j: dict
    flow: FlowVector
    cycle: list
    variant: str = field(default="StrictBijection", init=False)

    def verify(self, X) -> bool:
        imap = self.i.as_map()
        return (is_derangement(self.j) and set(self.j) == set(self.Z) and self.j != imap
                and matching_sum(X, imap) < matching_sum(X, self.j))

    def to_json(self):
        return {"variant": self.variant, "Z": list(self.Z),
                "i": [list(p) for p in self.i.pairs],
                "j": [[z, self.j[z]] for z in sorted(self.j)],
                "cycle": self.cycle, "flow": self.flow.to_json()}


@dataclass
class EqualityCertificate:
    Z: tuple
    i: Involution
    f: tuple  # extremal function on Z (ordered like Z)
    j: Involution
    nu: tuple  # nu(delta_z) for z in Z
    f_seed: tuple  # f built directly from nu, before rank maximisation
    rank: int
    variant: str = field(default="EqualityCertificate", init=False)

    def verify(self, X) -> bool:
        Y = subspace(X, self.Z)
        loc = {z: k for k, z in enumerate(self.Z)}
        A = equality_edges(self.f, Y)
        ipairs_local = {tuple(sorted((loc[a], loc[b]))) for a, b in self.i.pairs}
        seed_ok = (all(a >= b for a, b in zip(self.f_seed, self.nu))
                   and ipairs_local <= equality_edges(self.f_seed, Y))
        return (is_extremal(self.f, Y) and ipairs_local <= A and seed_ok
                and self.j != self.i
                and matching_sum(X, self.i.as_map()) == matching_sum(X, self.j.as_map()))

    def to_json(self):
        from .metric import scalar_to_json
        return {"variant": self.variant, "Z": list(self.Z),
                "i": [list(p) for p in self.i.pairs], "j": [list(p) for p in self.j.pairs],
                "f": [scalar_to_json(v) for v in self.f],
                "nu": [scalar_to_json(v) for v in self.nu], "rank": self.rank}


@dataclass
class DressViolation:
    """(Z, i) admits no j: f in E(Z) has A(f) = Z_i, so every other
    fixed-point-free bijection has strictly smaller sum."""

    Z: tuple
    i: Involution
    f: tuple
    variant: str = field(default="DressViolation", init=False)

    def verify(self, X) -> bool:
        Y = subspace(X, self.Z)
        loc = {z: k for k, z in enumerate(self.Z)}
        ipairs_local = {tuple(sorted((loc[a], loc[b]))) for a, b in self.i.pairs}
        return is_extremal(self.f, Y) and equality_edges(self.f, Y) == ipairs_local

    def to_json(self):
        from .metric import scalar_to_json
        return {"variant": self.variant, "Z": list(self.Z),
                "i": [list(p) for p in self.i.pairs],
                "f": [scalar_to_json(v) for v in self.f]}


def _nu(X, Z, inv):
    out = []
    for z in Z:
        up = mu_lp(X, Z, inv, {z: 1}).value
        down = mu_lp(X, Z, inv, {z: -1}).value
        out.append((up - down) / 2)
    return tuple(out)


def dress_witness(X: FiniteMetricSpace, Z: Sequence[int], inv: Involution, cap: int = 8):
    Z = tuple(sorted(_check_pairing(Z, inv)))
    if len(Z) < 4:
        raise ValueError("|Z| must be 2(n+1) with n >= 1")
    imap = inv.as_map()
    flow = minimal_positive_flow(X, Z, inv)
    if flow is not None:
        pos = {p for p, v in flow.w.items() if v > 0}
        cycle = _alternating_cycle(inv, pos, involution_swap=False)
        if cycle is None:
            raise InternalInconsistency("no alternating cycle in a minimal positive flow")
        j = dict(imap)
        for k, z in enumerate(cycle):
            j[imap[z]] = cycle[(k + 1) % len(cycle)]
        cert = StrictBijection(Z, inv, j, flow, cycle)
    else:
        cert = _equality_branch(X, Z, inv, imap, cap)
    if not cert.verify(X):
        raise InternalInconsistency(f"{cert.variant} failed re-verification for Z={Z}")
    return cert


def _equality_branch(X, Z, inv, imap, cap):
    loc = {z: k for k, z in enumerate(Z)}
    nu = _nu(X, Z, inv)
    seed = list(nu)
    for a, b in inv.pairs:
        ka, kb = loc[a], loc[b]
        gap = X.d(a, b) - nu[ka] - nu[kb]
        if gap < 0:
            raise InternalInconsistency("nu exceeds d on a pair of Z_i")
        seed[ka] = nu[ka] + gap / 2
        seed[kb] = nu[kb] + gap / 2
    seed = tuple(seed)
    Y = subspace(X, Z)
    ipairs_local = frozenset(tuple(sorted((loc[a], loc[b]))) for a, b in inv.pairs)
    # the face P(Z_i) itself: largest-rank face whose graph contains Z_i
    faces = [fc for fc in enumerate_faces(Y, cap) if ipairs_local <= fc.graph.edges]
    if not faces:
        raise InternalInconsistency("seed function lies on no face containing Z_i")
    best = min(faces, key=lambda fc: (-fc.rank, fc.edges))
    f = best.representative
    half = len(Z) // 2
    if best.rank == half:
        return DressViolation(Z, inv, f)
    edges = {(Z[a], Z[b]) for a, b in best.graph.edges}
    cycle = _alternating_cycle(inv, edges, involution_swap=True)
    if cycle is None:
        raise InternalInconsistency("no alternating cycle in A(f) although rank < |Z|/2")
    jmap = dict(imap)
    for k, z in enumerate(cycle):
        nxt = cycle[(k + 1) % len(cycle)]
        jmap[imap[z]] = nxt
        jmap[nxt] = imap[z]
    return EqualityCertificate(Z, inv, f, Involution.from_map(jmap), nu, seed, best.rank)


# --------------------------------------------------------------------------
# local quadrilateral inequality


def quadrilateral_holds(X: FiniteMetricSpace, x0: int, y0: int, delta) -> bool:
    d = X.d
    xs = [x for x in range(X.n) if d(x, x0) <= delta]
    ys = [y for y in range(X.n) if d(y, y0) <= delta]
    base = d(x0, y0)
    return all(base + d(x, y) <= d(x, y0) + d(x0, y) for x in xs for y in ys)


def local_quadrilateral_delta(X: FiniteMetricSpace, x0: int, y0: int, candidates):
    """Largest candidate radius for which the quadrilateral inequality holds
    on the closed balls around x0 and y0, or None."""
    for delta in sorted((Fraction(c) for c in candidates), reverse=True):
        if quadrilateral_holds(X, x0, y0, delta):
            return delta
    return None


def quadrilateral_threshold(X: FiniteMetricSpace, x0: int, y0: int):
    """Smallest radius at which the inequality first fails (every smaller
    radius passes), or None if it never fails."""
    radii = sorted({X.d(x0, z) for z in range(X.n)} | {X.d(y0, z) for z in range(X.n)})
    for r in radii:
        if not quadrilateral_holds(X, x0, y0, r):
            return r
    return None

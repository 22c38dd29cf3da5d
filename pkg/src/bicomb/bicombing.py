"""Geodesic bicombings on subsets of l-infinity^d, in binary64.

Points are numpy arrays; every evaluator is batched over a leading axis, so
``eval(X, Y, t)`` takes (N, d) arrays and returns (N, d). A bicombing on a
retract space is built as pi o (linear); ``CatsCradle`` upgrades a conical,
1/n-discretely convex bicombing to a 1/(2n-1)-discretely convex one by the
alternating fixed-point iteration, and ``convexify`` stacks those steps.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

FP_TOL = 1e-12
DEFECT_TOL = 1e-9


def linf(a, b) -> np.ndarray:
    return np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)), axis=-1)


def _batch(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    return P[None, :] if P.ndim == 1 else P


# --------------------------------------------------------------------------
# spaces


@dataclass
class RetractSpace:
    """A closed subset of l-infinity^d together with a retraction of a convex
    superset onto it (claimed 1-Lipschitz, spot-checked on request)."""

    name: str
    ambient_dim: int
    contains: Callable[[np.ndarray], np.ndarray]
    retract: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]
    special_points: tuple = ()

    def lipschitz_spot_check(self, rng: np.random.Generator, count: int = 2000) -> float:
        """Largest sampled value of d(pi a, pi b) - d(a, b) on the convex hull
        of sampled points, plus the idempotence gap."""
        A, B, C = (self.sample(rng, count) for _ in range(3))
        lam = rng.uniform(size=(count, 1))
        P = (1 - lam) * A + lam * B
        Q = (1 - lam) * B + lam * C
        RP = self.retract(P)
        gap = float(np.max(linf(RP, self.retract(Q)) - linf(P, Q)))
        return max(gap, float(np.max(linf(self.retract(RP), RP))))


def linf_space(dim: int, radius: float = 4.0) -> RetractSpace:
    return RetractSpace(
        f"l-inf:{dim}", dim,
        contains=lambda P: np.ones(len(_batch(P)), bool),
        retract=lambda P: np.array(P, float),
        sample=lambda rng, N: rng.uniform(-radius, radius, size=(N, dim)),
    )


def butterfly_space() -> RetractSpace:
    """The set {|u| <= 2, |u|-1 <= v <= ||u|-1|} with the vertical retraction
    v -> min(v, ||u|-1|) of the triangle above |u|-1 <= v <= 1."""

    def contains(P):
        P = _batch(P)
        u, v = P[:, 0], P[:, 1]
        b = np.abs(u) - 1
        return (np.abs(u) <= 2 + 1e-12) & (b - 1e-12 <= v) & (v <= np.abs(b) + 1e-12)

    def retract(P):
        P = np.array(P, float)
        out = P.copy()
        out[..., 1] = np.minimum(P[..., 1], np.abs(np.abs(P[..., 0]) - 1))
        return out

    def sample(rng, N):
        out = np.empty((0, 2))
        while len(out) < N:
            C = rng.uniform([-2, -1], [2, 1], size=(2 * N, 2))
            out = np.vstack([out, C[contains(C)]])
        return out[:N]

    special = ((-2.0, 1.0), (2.0, 1.0), (0.0, -1.0), (0.0, 1.0), (-1.0, 0.0), (1.0, 0.0))
    return RetractSpace("butterfly", 2, contains, retract, sample, special)


def tight_span_space(X, order: Sequence[int] | None = None) -> RetractSpace:
    """E(X) inside l-infinity^|X|: push into Delta(X) by g -> max(g, g*), then
    lower coordinates one at a time to their dual values. Both steps are
    1-Lipschitz and the composite fixes E(X), so it is a retraction. Different
    lowering orders give different retractions."""
    from .tight_span import lower_to_tight_span_float, retract_to_delta_float, star_dual_float

    D = X.as_float()
    n = X.n

    def retract(P):
        P = np.array(P, float)
        F = lower_to_tight_span_float(retract_to_delta_float(P.reshape(-1, n), D), D, order)
        return F.reshape(P.shape)

    def contains(P):
        P = _batch(P)
        return np.max(np.abs(star_dual_float(P, D) - P), axis=1) <= 1e-9

    def sample(rng, N):
        return retract(rng.uniform(-1, 1.5 * D.max(), size=(N, n)))

    special = tuple(tuple(row) for row in D)  # the embedded points of X
    return RetractSpace(f"tight-span:{n}", n, contains, retract, sample, special)


# --------------------------------------------------------------------------
# bicombings


class Bicombing:
    provenance = "abstract"
    m: int | None = None  # grid 1/m on which the bicombing is specified, if any

    def __init__(self, space: RetractSpace):
        self.space = space
        self.dim = space.ambient_dim

    def eval(self, X, Y, t) -> np.ndarray:
        raise NotImplementedError

    def grid(self, X, Y, n: int | None = None) -> np.ndarray:
        """Values at k/n, k = 0..n, shape (N, n+1, d)."""
        n = n or self.m
        X, Y = np.broadcast_arrays(_batch(X), _batch(Y))
        ts = np.arange(n + 1) / n
        N = len(X)
        vals = self.eval(np.repeat(X, n + 1, 0), np.repeat(Y, n + 1, 0), np.tile(ts, N))
        return vals.reshape(N, n + 1, self.dim)

    def __call__(self, x, y, t) -> np.ndarray:
        return self.eval(_batch(x), _batch(y), np.atleast_1d(float(t)))[0]


class LinearBicombing(Bicombing):
    provenance = "linear"

    def __init__(self, space_or_dim):
        space = space_or_dim if isinstance(space_or_dim, RetractSpace) else linf_space(space_or_dim)
        super().__init__(space)

    def eval(self, X, Y, t):
        X, Y = _batch(X), _batch(Y)
        t = np.asarray(t, float).reshape(-1, 1)
        return (1 - t) * X + t * Y


class RetractBicombing(Bicombing):
    """pi o base on the retract space; conical whenever base is and pi is
    1-Lipschitz, which is spot-checked at construction."""

    provenance = "retract"

    def __init__(self, space: RetractSpace, base: Bicombing | None = None,
                 check_seed: int | None = 0):
        super().__init__(space)
        self.base = base or LinearBicombing(space.ambient_dim)
        self.warnings = []
        if check_seed is not None:
            gap = space.lipschitz_spot_check(np.random.default_rng(check_seed), 500)
            if gap > 1e-9:
                msg = f"retraction of {space.name} failed 1-Lipschitz spot check by {gap:.3g}"
                self.warnings.append(msg)
                warnings.warn(msg)

    def eval(self, X, Y, t):
        return self.space.retract(self.base.eval(X, Y, t))


@dataclass
class ContractionLog:
    """Per-iteration check of d(p_i, p_{i+1}) <= (1-1/n) d(q_{i-1}, q_i)."""

    checks: int = 0
    worst_excess: float = -math.inf  # max of lhs - rhs seen
    max_iterations: int = 0
    slack: float = FP_TOL

    @property
    def ok(self) -> bool:
        return self.checks == 0 or self.worst_excess <= self.slack


class ConvergenceError(RuntimeError):
    pass


class CatsCradle(Bicombing):
    """One refinement step: from a conical 1/n-discretely convex ``base`` to
    a 1/(2n-1)-discretely convex bicombing. Grid values come from the fixed
    point p = base_{xq}(1-1/n), q = base_{py}(1/n); between grid points the
    base bicombing fills in."""

    provenance = "cats_cradle"

    def __init__(self, base: Bicombing, n: int, fp_tol: float = FP_TOL, max_iter: int = 10_000):
        if n < 2:
            raise ValueError("need n >= 2")
        super().__init__(base.space)
        self.base, self.n, self.m = base, n, 2 * n - 1
        self.level = getattr(base, "level", 1) + 1
        self.fp_tol, self.max_iter = fp_tol, max_iter
        self.log = ContractionLog()

    def fixed_point(self, X, Y):
        n, m = self.n, self.m
        base = self.base
        Q = base.eval(X, Y, np.full(len(X), n / m))
        P = None
        dq_prev = None
        for it in range(1, self.max_iter + 1):
            P_new = base.grid(X, Q, n)[:, n - 1]
            Q_new = base.grid(P_new, Y, n)[:, 1]
            dq = linf(Q, Q_new)
            if P is not None:
                dp = linf(P, P_new)
                excess = dp - (1 - 1 / n) * dq_prev
                self.log.checks += len(dp)
                self.log.worst_excess = max(self.log.worst_excess, float(excess.max()))
                done = max(dp.max(), dq.max()) <= self.fp_tol
            else:
                done = False
            P, Q, dq_prev = P_new, Q_new, dq
            if done:
                self.log.max_iterations = max(self.log.max_iterations, it)
                return P, Q
        raise ConvergenceError(f"fixed point not reached in {self.max_iter} iterations")

    def grid(self, X, Y, n: int | None = None):
        if n is not None and n != self.m:
            return super().grid(X, Y, n)
        X, Y = np.broadcast_arrays(_batch(X), _batch(Y))
        X, Y = X.copy(), Y.copy()
        P, Q = self.fixed_point(X, Y)
        left = self.base.grid(X, Q, self.n)  # s = j/m -> base_xq(j/n), j <= n
        right = self.base.grid(P, Y, self.n)  # s = j/m -> base_py((j-n+1)/n), j >= n-1
        return np.concatenate([left, right[:, 2:]], axis=1)

    def eval(self, X, Y, t):
        X, Y = np.broadcast_arrays(_batch(X), _batch(Y))
        t = np.broadcast_to(np.asarray(t, float), (len(X),))
        G = self.grid(X, Y)
        m = self.m
        pos = t * m
        near = np.rint(pos)
        on_grid = np.abs(pos - near) <= 1e-12 * m
        j = np.clip(np.floor(pos), 0, m - 1).astype(int)
        lam = pos - j
        rows = np.arange(len(X))
        out = self.base.eval(G[rows, j], G[rows, j + 1], lam)
        k = near.astype(int)
        out[on_grid] = G[rows[on_grid], k[on_grid]]
        return out


def cats_cradle_step(sigma: Bicombing, n: int, fp_tol: float = FP_TOL) -> CatsCradle:
    return CatsCradle(sigma, n, fp_tol)


def cascade_n(level: int) -> int:
    """Discreteness index of level k in the cascade n_1 = 2, n_{k+1} = 2 n_k - 1."""
    return 2 ** (level - 1) + 1


@dataclass
class ConvexifyResult:
    bicombing: Bicombing
    chain: list
    uniform_gaps: list = field(default_factory=list)  # sup-distance sigma^{k-1} vs sigma^k on samples

    @property
    def contraction_ok(self) -> bool:
        return all(s.log.ok for s in self.chain[1:])


def convexify(sigma: Bicombing, levels: int, fp_tol: float = FP_TOL,
              samples: int = 0, rng_seed: int = 0) -> ConvexifyResult:
    """Level ``levels`` of the cascade started at sigma (level 1, which is
    1/2-discretely convex because it is conical)."""
    chain = [sigma]
    for k in range(1, levels):
        chain.append(CatsCradle(chain[-1], cascade_n(k), fp_tol))
    gaps = []
    if samples:
        rng = np.random.default_rng(rng_seed)
        X, Y = sigma.space.sample(rng, samples), sigma.space.sample(rng, samples)
        t = rng.uniform(size=samples)
        prev = chain[0].eval(X, Y, t)
        for s in chain[1:]:
            cur = s.eval(X, Y, t)
            gaps.append(float(linf(prev, cur).max()))
            prev = cur
    return ConvexifyResult(chain[-1], chain, gaps)


# --------------------------------------------------------------------------
# defect diagnostics


@dataclass
class DefectReport:
    max_defect: float
    witness: dict | None
    samples: int

    def to_json(self):
        return {"max_defect": self.max_defect, "witness": self.witness, "samples": self.samples}


def _listify(v):
    return np.asarray(v, float).tolist()


def _sample_quads(sigma: Bicombing, samples: int, rng_seed: int, structured: bool = True):
    rng = np.random.default_rng(rng_seed)
    S = sigma.space.sample
    quads = [S(rng, samples) for _ in range(4)]
    if structured and sigma.space.special_points:
        sp = np.array(sigma.space.special_points, float)
        k = len(sp)
        idx = np.array(np.meshgrid(*[np.arange(k)] * 4, indexing="ij")).reshape(4, -1)
        quads = [np.vstack([sp[idx[a]], quads[a]]) for a in range(4)]
    return quads, rng


def _report(defects, witness_fn, total):
    defects = np.maximum(np.asarray(defects, float), 0.0)
    if defects.size == 0:
        return DefectReport(0.0, None, 0)
    k = int(np.argmax(defects))
    w = witness_fn(np.unravel_index(k, defects.shape))
    return DefectReport(float(defects.flat[k]), w, total)


def conical_defect(sigma: Bicombing, samples: int = 1000, rng_seed: int = 0,
                   structured: bool = True) -> DefectReport:
    (X, Y, X2, Y2), rng = _sample_quads(sigma, samples, rng_seed, structured)
    t = rng.uniform(size=len(X))
    t[: min(len(t), 5)] = [0.25, 0.5, 0.75, 0.0, 1.0][: min(len(t), 5)]
    lhs = linf(sigma.eval(X, Y, t), sigma.eval(X2, Y2, t))
    rhs = (1 - t) * linf(X, X2) + t * linf(Y, Y2)

    def wit(ix):
        k = ix[0]
        return {"x": _listify(X[k]), "y": _listify(Y[k]), "x2": _listify(X2[k]),
                "y2": _listify(Y2[k]), "t": float(t[k])}
    return _report(lhs - rhs, wit, len(X))


def _midpoint_defects(D):
    """D has shape (N, g+1): values at k/g. Returns defect of D(s) against the
    average of D(s-h), D(s+h) for every s and h on the grid, shape (N, g+1, g//2+1)."""
    N, L = D.shape
    g = L - 1
    out = np.full((N, L, g // 2 + 1), -np.inf)
    for h in range(1, g // 2 + 1):
        out[:, h:L - h, h] = D[:, h:L - h] - 0.5 * (D[:, :L - 2 * h] + D[:, 2 * h:])
    return out


def discrete_convexity_defect(sigma: Bicombing, n: int, samples: int = 1000,
                              rng_seed: int = 0, structured: bool = True,
                              all_spacings: bool = False) -> DefectReport:
    """Largest D(s) - (D(s-1/n) + D(s+1/n))/2 for D(s) = d(sigma_xy(s),
    sigma_x'y'(s)) on the grid (1/n)Z, over sampled pairs of pairs."""
    (X, Y, X2, Y2), _ = _sample_quads(sigma, samples, rng_seed, structured)
    D = linf(sigma.grid(X, Y, n), sigma.grid(X2, Y2, n))
    M = _midpoint_defects(D)
    if not all_spacings:
        M = M[:, :, 1:2]

    def wit(ix):
        k, s, h = ix
        if not all_spacings:
            h = 1
        return {"x": _listify(X[k]), "y": _listify(Y[k]), "x2": _listify(X2[k]),
                "y2": _listify(Y2[k]), "s": float(s / n), "h": float(h / n)}
    return _report(M, wit, len(X))


def convexity_defect(sigma: Bicombing, samples: int = 1000, rng_seed: int = 0,
                     grid: int = 16, structured: bool = True) -> DefectReport:
    """Midpoint convexity at every spacing of a uniform grid; a grid-scale
    stand-in for convexity on [0, 1]."""
    return discrete_convexity_defect(sigma, grid, samples, rng_seed, structured, all_spacings=True)


def consistency_defect(sigma: Bicombing, samples: int = 1000, rng_seed: int = 0) -> DefectReport:
    rng = np.random.default_rng(rng_seed)
    X, Y = sigma.space.sample(rng, samples), sigma.space.sample(rng, samples)
    st = np.sort(rng.uniform(size=(samples, 2)), axis=1)
    s, t = st[:, 0], st[:, 1]
    lam = rng.uniform(size=samples)
    if sigma.space.special_points:
        # quarter-point subsegments between special points
        sp = np.array(sigma.space.special_points, float)
        q = [(a / 4, b / 4, c / 4) for a in range(5) for b in range(a + 1, 5) for c in (1, 2, 3)]
        pairs = [(i, j) for i in range(len(sp)) for j in range(len(sp)) if i != j]
        X = np.vstack([sp[[i for i, _ in pairs for _ in q]], X])
        Y = np.vstack([sp[[j for _, j in pairs for _ in q]], Y])
        s = np.concatenate([[a for _ in pairs for a, _, _ in q], s])
        t = np.concatenate([[b for _ in pairs for _, b, _ in q], t])
        lam = np.concatenate([[c for _ in pairs for _, _, c in q], lam])
    A, B = sigma.eval(X, Y, s), sigma.eval(X, Y, t)
    gap = linf(sigma.eval(A, B, lam), sigma.eval(X, Y, (1 - lam) * s + lam * t))

    def wit(ix):
        k = ix[0]
        return {"x": _listify(X[k]), "y": _listify(Y[k]), "s": float(s[k]), "t": float(t[k]),
                "lambda": float(lam[k])}
    return _report(gap, wit, len(X))


def reversibility_defect(sigma: Bicombing, samples: int = 1000, rng_seed: int = 0) -> DefectReport:
    rng = np.random.default_rng(rng_seed)
    X, Y = sigma.space.sample(rng, samples), sigma.space.sample(rng, samples)
    t = rng.uniform(size=samples)
    gap = linf(sigma.eval(X, Y, t), sigma.eval(Y, X, 1 - t))

    def wit(ix):
        k = ix[0]
        return {"x": _listify(X[k]), "y": _listify(Y[k]), "t": float(t[k])}
    return _report(gap, wit, samples)


def geodesic_defect(sigma: Bicombing, samples: int = 1000, rng_seed: int = 0) -> DefectReport:
    rng = np.random.default_rng(rng_seed)
    X, Y = sigma.space.sample(rng, samples), sigma.space.sample(rng, samples)
    s, t = rng.uniform(size=samples), rng.uniform(size=samples)
    gap = np.abs(linf(sigma.eval(X, Y, s), sigma.eval(X, Y, t)) - np.abs(s - t) * linf(X, Y))

    def wit(ix):
        k = ix[0]
        return {"x": _listify(X[k]), "y": _listify(Y[k]), "s": float(s[k]), "t": float(t[k])}
    return _report(gap, wit, samples)


AXIOMS = {
    "conical": conical_defect,
    "convex": convexity_defect,
    "consistent": consistency_defect,
    "reversible": reversibility_defect,
    "geodesic": geodesic_defect,
}


# --------------------------------------------------------------------------
# straight curves


def _sup_dist(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return float(linf(a, b))
    from .metric import linf_distance
    return linf_distance(a, b)


def _all_float(seq) -> bool:
    return len(seq) > 0 and all(isinstance(v, np.ndarray) and v.dtype.kind == "f" for v in seq)


class NotStraight(ValueError):
    def __init__(self, which, report):
        super().__init__(f"curve {which} is not straight (defect {report.max_defect})")
        self.which, self.report = which, report


def straightness_defect(curve: Sequence, witnesses: Sequence, dist=None) -> DefectReport:
    """Max over witnesses z and consecutive parameter triples of
    d(z, c_k) - (d(z, c_{k-1}) + d(z, c_{k+1}))/2, clamped at 0. With rational
    points and an exact ``dist`` the result is exact."""
    if len(curve) < 3:
        raise ValueError("need at least three curve samples")
    if dist is None and _all_float(curve) and _all_float(witnesses):
        C, W = np.asarray(curve, float), np.asarray(witnesses, float)
        V = linf(W[:, None, :], C[None, :, :])
        M = V[:, 1:-1] - 0.5 * (V[:, :-2] + V[:, 2:])
        if M.size == 0 or M.max() <= 0:
            return DefectReport(0.0, None, len(W))
        zi, k = np.unravel_index(int(np.argmax(M)), M.shape)
        return DefectReport(float(M[zi, k]), {"witness_index": int(zi), "k": int(k) + 1}, len(W))
    dist = dist or _sup_dist
    best, wit = 0, None
    for zi, z in enumerate(witnesses):
        vals = [dist(z, c) for c in curve]
        for k in range(1, len(vals) - 1):
            defect = vals[k] - (vals[k - 1] + vals[k + 1]) / 2
            if defect > best:
                best, wit = defect, {"witness_index": zi, "k": k}
    return DefectReport(best, wit, len(witnesses))


@dataclass
class UniquenessProbe:
    report: DefectReport  # midpoint convexity of s -> d(alpha(s), beta(s))
    max_separation: object


def straight_uniqueness_probe(alpha: Sequence, beta: Sequence, witnesses: Sequence,
                              dist=None, tol: float = DEFECT_TOL) -> UniquenessProbe:
    for name, c in (("alpha", alpha), ("beta", beta)):
        r = straightness_defect(c, witnesses, dist)
        if r.max_defect > tol:
            raise NotStraight(name, r)
    if dist is None and _all_float(alpha) and _all_float(beta):
        sep = [float(v) for v in linf(np.asarray(alpha, float), np.asarray(beta, float))]
    else:
        sep = [(dist or _sup_dist)(a, b) for a, b in zip(alpha, beta)]
    best, wit = 0, None
    for k in range(1, len(sep) - 1):
        defect = sep[k] - (sep[k - 1] + sep[k + 1]) / 2
        if defect > best:
            best, wit = defect, {"k": k}
    return UniquenessProbe(DefectReport(best, wit, len(sep)), max(sep))

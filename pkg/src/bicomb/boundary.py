"""Generalized rays, radial retractions and the exponentially weighted ray
metric on the closure of l-infinity^d with its linear bicombing.

A point of the closure is either an interior point or a boundary direction
(sup-normalized). Rays are piecewise linear in this setting, so the distance
between two rays is piecewise linear in the parameter and the weighted
integral is evaluated piece by piece with the antiderivative
-(a s + a + b) e^{-s} of (a s + b) e^{-s}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

INTERIOR, BOUNDARY = "interior", "boundary"


def _norm(v) -> float:
    return float(np.max(np.abs(v))) if len(v) else 0.0


@dataclass(frozen=True)
class ClosurePoint:
    kind: str
    vec: tuple  # the point, or the unit sup-norm direction

    @classmethod
    def interior(cls, p) -> "ClosurePoint":
        return cls(INTERIOR, tuple(float(v) for v in p))

    @classmethod
    def boundary(cls, direction) -> "ClosurePoint":
        d = np.asarray(direction, float)
        n = _norm(d)
        if n == 0:
            raise ValueError("a boundary direction must be nonzero")
        return cls(BOUNDARY, tuple((d / n).tolist()))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.vec, float)

    @property
    def is_boundary(self) -> bool:
        return self.kind == BOUNDARY

    def to_json(self):
        return {"kind": self.kind, "vec": list(self.vec)}


def as_closure_point(x) -> ClosurePoint:
    return x if isinstance(x, ClosurePoint) else ClosurePoint.interior(x)


@dataclass(frozen=True)
class GeneralizedRay:
    """t -> o + min(t, R) u with |u| = 1 (or u = 0 when o = x)."""

    origin: tuple
    velocity: tuple
    reach: float  # d(o, x), or inf for a ray to the boundary

    def __call__(self, t):
        t = np.minimum(np.asarray(t, float), self.reach)
        return np.asarray(self.origin) + np.multiply.outer(t, np.asarray(self.velocity))

    @property
    def endpoint(self) -> ClosurePoint:
        if math.isinf(self.reach):
            return ClosurePoint.boundary(self.velocity)
        return ClosurePoint.interior(self(self.reach))


def generalized_ray(o, x) -> GeneralizedRay:
    o, x = np.asarray(o, float), np.asarray(x, float)
    R = _norm(x - o)
    u = (x - o) / R if R > 0 else np.zeros_like(o)
    return GeneralizedRay(tuple(o.tolist()), tuple(u.tolist()), R)


def ray_to_boundary(o, direction) -> GeneralizedRay:
    xb = ClosurePoint.boundary(direction)
    return GeneralizedRay(tuple(float(v) for v in o), xb.vec, math.inf)


def ray_from_basepoint(o, xbar) -> GeneralizedRay:
    xbar = as_closure_point(xbar)
    if xbar.is_boundary:
        return ray_to_boundary(o, xbar.vec)
    return generalized_ray(o, xbar.vec)


def radial_retraction(o, r: float, x) -> np.ndarray:
    """phi_r(x) = rho_ox(r); fixes the closed ball B(o, r)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    return generalized_ray(o, x)(r)


# --------------------------------------------------------------------------
# distance profiles


@dataclass
class DistanceProfile:
    """Pieces (s0, s1, slope, intercept): value slope*s + intercept on [s0, s1];
    the last piece extends to s1 = inf."""

    pieces: list

    def __call__(self, s):
        s = float(s)
        for s0, s1, a, b in self.pieces:
            if s0 <= s <= s1:
                return a * s + b
        raise ValueError("parameter outside profile")

    @property
    def breakpoints(self):
        return [p[0] for p in self.pieces[1:]]

    def weighted_integral(self) -> float:
        """int_0^inf value(s) e^{-s} ds, exact per piece."""
        def anti(a, b, s):
            return 0.0 if math.isinf(s) else -(a * s + a + b) * math.exp(-s)
        return math.fsum(anti(a, b, s1) - anti(a, b, s0) for s0, s1, a, b in self.pieces)

    def is_convex(self, tol: float = 1e-12) -> bool:
        slopes = [a for _, _, a, _ in self.pieces]
        return all(b >= a - tol for a, b in zip(slopes, slopes[1:]))


def _envelope(lines, lo, hi):
    """Upper envelope of lines (a, b) -> a s + b on [lo, hi] as pieces."""
    cuts = {lo, hi} if not math.isinf(hi) else {lo}
    for (a1, b1), (a2, b2) in ((p, q) for i, p in enumerate(lines) for q in lines[i + 1:]):
        if a1 != a2:
            s = (b2 - b1) / (a1 - a2)
            if lo < s < hi:
                cuts.add(s)
    cuts = sorted(cuts)
    if math.isinf(hi):
        cuts.append(math.inf)
    pieces = []
    for s0, s1 in zip(cuts, cuts[1:]):
        probe = s0 + 1.0 if math.isinf(s1) else 0.5 * (s0 + s1)
        a, b = max(lines, key=lambda ab: (ab[0] * probe + ab[1], ab[0]))
        if pieces and pieces[-1][2] == a and pieces[-1][3] == b:
            pieces[-1] = (pieces[-1][0], s1, a, b)
        else:
            pieces.append((s0, s1, a, b))
    return pieces


def distance_profile(r1: GeneralizedRay, r2: GeneralizedRay) -> DistanceProfile:
    o1, o2 = np.asarray(r1.origin), np.asarray(r2.origin)
    u1, u2 = np.asarray(r1.velocity), np.asarray(r2.velocity)
    cuts = sorted({0.0} | {R for R in (r1.reach, r2.reach) if not math.isinf(R)})
    bounds = list(zip(cuts, cuts[1:] + [math.inf]))
    pieces = []
    for lo, hi in bounds:
        # on (lo, hi) each ray is o + s u or constant at its endpoint
        v1 = u1 if r1.reach > lo else np.zeros_like(u1)
        v2 = u2 if r2.reach > lo else np.zeros_like(u2)
        c1 = o1 if r1.reach > lo else o1 + r1.reach * u1
        c2 = o2 if r2.reach > lo else o2 + r2.reach * u2
        slope, icpt = v1 - v2, c1 - c2
        lines = sorted({(float(sg * a), float(sg * b)) for a, b in zip(slope, icpt) for sg in (1, -1)})
        for piece in _envelope(lines, lo, hi):
            if pieces and pieces[-1][2:] == piece[2:]:
                pieces[-1] = (pieces[-1][0], piece[1]) + piece[2:]
            else:
                pieces.append(piece)
    return DistanceProfile(pieces)


def d_o_metric(xbar, ybar, o) -> float:
    """D_o(x, y) = int_0^inf d(rho_ox(s), rho_oy(s)) e^{-s} ds."""
    return distance_profile(ray_from_basepoint(o, xbar), ray_from_basepoint(o, ybar)).weighted_integral()


def ray_gap(o, xbar, ybar, t: float) -> float:
    return _norm(ray_from_basepoint(o, xbar)(t) - ray_from_basepoint(o, ybar)(t))


def sandwich_bounds(o, xbar, ybar, t: float) -> tuple[float, float]:
    """Lower and upper estimates of D_o from a = d(rho_ox(t), rho_oy(t))."""
    a = ray_gap(o, xbar, ybar, t)
    e = math.exp(-t)
    return 0.5 * a * e, 2 * a * (1 - e) + 2 * (t + 1) * e


def psi_retraction(lam: float, xbar, o) -> ClosurePoint:
    """Radial retraction onto the D_o-ball of radius lam about o."""
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    xbar = as_closure_point(xbar)
    if lam == 1:
        return xbar
    t = -math.log1p(-lam)
    return ClosurePoint.interior(ray_from_basepoint(o, xbar)(t))


def contraction(xbar, lam: float, o) -> ClosurePoint:
    """The homotopy from the identity (lam = 0) to the constant o (lam = 1)."""
    return psi_retraction(1 - lam, xbar, o)


def cone_neighborhood_contains(o, xbar, t: float, eps: float, ybar) -> bool:
    if t <= 0 or eps <= 0:
        raise ValueError("t and eps must be positive")
    return ray_gap(o, xbar, ybar, t) < eps


def basepoint_change_horizon(d_op: float, t: float, eps: float) -> float:
    """A horizon T with U_p(x, T, eps/4) inside U_o(x, t, eps) for a
    boundary point x, chosen so that the ray-comparison bound
    2 t d(o,p) / (T - d(o,p)) is at most eps/4 and the far points stay
    beyond distance t from o."""
    need = d_op + (8 * t * d_op / eps if d_op > 0 else 0.0)
    return max(need, t + 2 * d_op + eps, 1.0) * (1 + 1e-9)


def ray_comparison_bound(t: float, d_op: float, T: float) -> float:
    if T <= 2 * d_op:
        raise ValueError("need T > 2 d(o,p)")
    return 2 * t * d_op / (T - d_op)


class HorizonError(ValueError):
    def __init__(self, required: float, horizon: float):
        super().__init__(f"horizon {horizon:g} too small, need T >= {required:g}")
        self.required, self.horizon = required, horizon


def approximate_ray_point(eval_sigma: Callable, dist: Callable, o, xi: Callable, p, t: float,
                          horizon: float, accuracy: float):
    """rho_{o xbar}(t) for the class of the sigma-ray xi (xi(0) = p) in a space
    without closed-form rays: take rho_{o xi(T)}(t) at T = horizon. The
    ray-comparison lemma bounds the error by 2 t d(o,p)/(T - d(o,p)); a
    horizon too small for ``accuracy`` raises with the required T."""
    d_op = float(dist(o, p))
    required = max(2 * d_op + t, d_op + (2 * t * d_op / accuracy if d_op > 0 else 0.0))
    if horizon < required:
        raise HorizonError(required, horizon)
    x = xi(horizon)
    R = float(dist(o, x))
    point = x if t >= R else eval_sigma(o, x, t / R)
    bound = ray_comparison_bound(t, d_op, horizon) if d_op > 0 else 0.0
    return point, bound


# --------------------------------------------------------------------------
# sampled inequality checks


@dataclass
class CheckReport:
    name: str
    samples: int
    violations: int
    worst: float  # largest lhs - rhs seen
    witness: dict | None

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self):
        return {"check": self.name, "samples": self.samples, "violations": self.violations,
                "worst_excess": self.worst, "witness": self.witness}


class _Tally:
    def __init__(self, name, tol):
        self.name, self.tol = name, tol
        self.n = self.bad = 0
        self.worst, self.wit = -math.inf, None

    def add(self, lhs, rhs, **wit):
        self.n += 1
        ex = float(lhs - rhs)
        if ex > self.tol:
            self.bad += 1
        if ex > self.worst:
            self.worst = ex
            self.wit = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                        for k, v in wit.items()}

    def report(self):
        return CheckReport(self.name, self.n, self.bad, self.worst, self.wit)


def _rand_closure(rng, d, scale=4.0, p_boundary=0.3):
    if rng.uniform() < p_boundary:
        return ClosurePoint.boundary(rng.normal(size=d) + 1e-3)
    return ClosurePoint.interior(rng.uniform(-scale, scale, size=d))


def check_phi_r(samples: int, rng: np.random.Generator, tol: float = 1e-9) -> CheckReport:
    tal = _Tally("phi-r", tol)
    while tal.n < samples:
        d = int(rng.integers(1, 5))
        o, x, y = (rng.uniform(-4, 4, size=d) for _ in range(3))
        if _norm(x - o) < _norm(y - o):
            x, y = y, x
        R = _norm(x - o)
        if R == 0:
            continue
        r = rng.uniform(0, R)
        lhs = _norm(radial_retraction(o, r, x) - radial_retraction(o, r, y))
        tal.add(lhs, 2 * r / R * _norm(x - y), o=o, x=x, y=y, r=r)
    return tal.report()


def check_rho_r_t(samples: int, rng: np.random.Generator, tol: float = 1e-9) -> CheckReport:
    tal = _Tally("rho-r-t", tol)
    for _ in range(samples):
        d = int(rng.integers(1, 5))
        o = rng.uniform(-4, 4, size=d)
        xb, yb = _rand_closure(rng, d), _rand_closure(rng, d)
        t = rng.uniform(0, 10)
        r = rng.uniform(0, t)
        tal.add(ray_gap(o, xb, yb, r), 2 * ray_gap(o, xb, yb, t), o=o, x=xb.to_json(),
                y=yb.to_json(), r=r, t=t)
    return tal.report()


def check_psi(samples: int, rng: np.random.Generator, tol: float = 1e-9) -> list[CheckReport]:
    lip, lm, eq = _Tally("psi-2-lipschitz", tol), _Tally("psi-lam-mu", tol), _Tally("psi-equality", tol)
    for _ in range(samples):
        d = int(rng.integers(1, 5))
        o = rng.uniform(-4, 4, size=d)
        xb, yb = _rand_closure(rng, d), _rand_closure(rng, d)
        lam, mu = rng.uniform(size=2)
        D = d_o_metric(xb, yb, o)
        lhs = d_o_metric(psi_retraction(lam, xb, o), psi_retraction(lam, yb, o), o)
        lip.add(lhs, 2 * D, o=o, x=xb.to_json(), y=yb.to_json(), lam=lam)
        gap = d_o_metric(psi_retraction(lam, xb, o), psi_retraction(mu, xb, o), o)
        lm.add(gap, abs(lam - mu), o=o, x=xb.to_json(), lam=lam, mu=mu)
        # equality needs lam, mu <= D_o(o, x); rescale so every draw qualifies
        l2, m2 = d_o_metric(o, xb, o) * rng.uniform(size=2)
        g2 = d_o_metric(psi_retraction(l2, xb, o), psi_retraction(m2, xb, o), o)
        eq.add(abs(g2 - abs(l2 - m2)), 0.0, o=o, x=xb.to_json(), lam=l2, mu=m2)
    return [lip.report(), lm.report(), eq.report()]


def check_sandwich(samples: int, rng: np.random.Generator, tol: float = 1e-9) -> list[CheckReport]:
    lo, hi = _Tally("sandwich-lower", tol), _Tally("sandwich-upper", tol)
    for _ in range(samples):
        d = int(rng.integers(1, 5))
        o = rng.uniform(-4, 4, size=d)
        xb, yb = _rand_closure(rng, d), _rand_closure(rng, d)
        t = rng.uniform(0, 8)
        D = d_o_metric(xb, yb, o)
        a, b = sandwich_bounds(o, xb, yb, t)
        lo.add(a, D, o=o, x=xb.to_json(), y=yb.to_json(), t=t)
        hi.add(D, b, o=o, x=xb.to_json(), y=yb.to_json(), t=t)
    return [lo.report(), hi.report()]


def check_ray_comparison(samples: int, rng: np.random.Generator, tol: float = 1e-9) -> CheckReport:
    """Points x, y beyond T on a ray from p: rays from o towards them stay
    within 2 t d(o,p)/(T - d(o,p)) up to time T - 2 d(o,p)."""
    tal = _Tally("t-T", tol)
    for _ in range(samples):
        d = int(rng.integers(1, 5))
        o, p = rng.uniform(-3, 3, size=d), rng.uniform(-3, 3, size=d)
        xi = ray_to_boundary(p, rng.normal(size=d) + 1e-3)
        d_op = _norm(o - p)
        T = 2 * d_op + rng.uniform(0.1, 20)
        a, b = T + rng.uniform(0, 20, size=2)
        t = rng.uniform(0, T - 2 * d_op)
        x, y = xi(a), xi(b)
        lhs = _norm(generalized_ray(o, x)(t) - generalized_ray(o, y)(t))
        tal.add(lhs, ray_comparison_bound(t, d_op, T), o=o, p=p, T=T, t=t, x=x, y=y)
    return tal.report()


def check_cone(samples: int, rng: np.random.Generator, tol: float = 1e-9) -> list[CheckReport]:
    """Basepoint change: members of U_p(x, T, eps/4) lie in U_o(x, t, eps);
    and U_o(x, t, eps) is the ball U(x, eps) once t >= d(o,x) + eps."""
    change, ball = _Tally("cone-basepoint", tol), _Tally("cone-ball", 0.0)
    # draws whose y misses U_p(x, T, eps/4) say nothing, so keep drawing
    attempts = 0
    while change.n < samples and attempts < 20 * samples:
        attempts += 1
        d = int(rng.integers(1, 5))
        o, p = rng.uniform(-3, 3, size=d), rng.uniform(-3, 3, size=d)
        xb = ClosurePoint.boundary(rng.normal(size=d) + 1e-3)
        t, eps = rng.uniform(0.1, 5), rng.uniform(0.05, 2)
        T = basepoint_change_horizon(_norm(o - p), t, eps)
        # a nearby closure point: perturb the direction or take a far point
        if rng.uniform() < 0.5:
            yb = ClosurePoint.boundary(np.array(xb.vec) + rng.normal(scale=eps / (4 * T), size=d))
        else:
            yb = ClosurePoint.interior(ray_from_basepoint(p, xb)(T * rng.uniform(1, 3))
                                       + rng.uniform(-eps / 8, eps / 8, size=d))
        if cone_neighborhood_contains(p, xb, T, eps / 4, yb):
            change.add(ray_gap(o, xb, yb, t), eps, o=o, p=p, x=xb.to_json(), y=yb.to_json(),
                       t=t, eps=eps, T=T)
    for _ in range(samples):
        d = int(rng.integers(1, 5))
        o = rng.uniform(-3, 3, size=d)
        eps = rng.uniform(0.05, 2)
        x, y = rng.uniform(-3, 3, size=d), rng.uniform(-3, 3, size=d)
        t2 = _norm(x - o) + eps + rng.uniform(0, 2)
        inside = cone_neighborhood_contains(o, x, t2, eps, y)
        ball.add(float(inside != (_norm(x - y) < eps)), 0.0, o=o, x=x, y=y, t=t2, eps=eps)
    return [change.report(), ball.report()]


CHECKS = {
    "phi-r": lambda n, rng: [check_phi_r(n, rng)],
    "rho-r-t": lambda n, rng: [check_rho_r_t(n, rng)],
    "psi": check_psi,
    "sandwich": check_sandwich,
    "t-T": lambda n, rng: [check_ray_comparison(n, rng)],
    "cone": check_cone,
}

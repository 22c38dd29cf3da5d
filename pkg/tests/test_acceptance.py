"""Acceptance gate: one test group per criterion, each at its stated tolerance
and time budget. The conftest prints a PASS/FAIL line per criterion at the end
of the run."""
import itertools
import math
import subprocess
import sys
import time
from contextlib import contextmanager
from fractions import Fraction as F

import numpy as np
import pytest

from bicomb import bicombing as bc
from bicomb import boundary as bd
from bicomb import comb_dim as cd
from bicomb import gallery
from bicomb import tight_span as ts
from bicomb.metric import is_tree_like, linf_distance, subspace

from oracles import brute_faces, derangements


@contextmanager
def budget(seconds):
    t0 = time.perf_counter()
    yield
    spent = time.perf_counter() - t0
    assert spent < seconds, f"took {spent:.2f} s, budget {seconds} s"


# -------------------------------------------------------------------- 1

BUTTERFLY = bc.butterfly_space()
X0, Y0 = np.array([-2.0, 1.0]), np.array([2.0, 1.0])


@pytest.mark.criterion(1, "butterfly retract bicombing")
def test_c1_butterfly():
    with budget(1.0):
        sigma = bc.RetractBicombing(BUTTERFLY)
        assert np.array_equal(sigma(X0, Y0, 0.25), [-1, 0])
        assert np.array_equal(sigma(X0, Y0, 0.5), [0, 1])
        assert np.array_equal(sigma(X0, Y0, 0.75), [1, 0])
        assert bc.conical_defect(sigma, 10_000, rng_seed=1).max_defect <= 1e-9
        r = bc.convexity_defect(sigma, 500)
        assert r.max_defect >= 1
        # the second geodesic is the constant one at z = (0, -1)
        assert r.witness["x2"] == [0.0, -1.0] == r.witness["y2"]


# -------------------------------------------------------------------- 2


@pytest.mark.criterion(2, "convexification of the butterfly, k = 4")
def test_c2_convexify_butterfly():
    with budget(120.0):
        res = bc.convexify(bc.RetractBicombing(BUTTERFLY), 4, samples=200)
        s = res.bicombing
        assert s.m == 9
        r = bc.discrete_convexity_defect(s, 9, 1000, rng_seed=2, all_spacings=True)
        assert r.max_defect <= 1e-9, r.to_json()
        assert bc.conical_defect(s, 1000, rng_seed=3).max_defect <= 1e-9
        for step in res.chain[1:]:
            assert step.log.checks > 0
            assert step.log.ok, step.log
        assert res.contraction_ok


# -------------------------------------------------------------------- 3


@pytest.mark.criterion(3, "linear input is a fixed point of the cascade")
@pytest.mark.parametrize("dim", [2, 3])
def test_c3_linear_unchanged(dim):
    L = bc.LinearBicombing(dim)
    s = bc.convexify(L, 3).bicombing
    rng = np.random.default_rng(dim)
    A, B = L.space.sample(rng, 1000), L.space.sample(rng, 1000)
    t = rng.uniform(size=1000)
    assert bc.linf(s.eval(A, B, t), L.eval(A, B, t)).max() <= 1e-12


# -------------------------------------------------------------------- 4


@pytest.mark.criterion(4, "tight span faces, dimension bound, isometry")
def test_c4_tight_span_exactness():
    with budget(60.0):
        for seed in range(50):
            n = 2 + seed % 4
            X = gallery.random_metric(n, seed, 1, 30)
            faces = ts.enumerate_faces(X)
            assert {f.graph.edges: f.rank for f in faces} == brute_faces(X), seed
            assert ts.tight_span_dim(X) <= n // 2
            emb = [ts.kuratowski_embed(X, x) for x in range(n)]
            for x, y in itertools.product(range(n), repeat=2):
                assert ts.sup_distance(emb[x], emb[y]) == X.d(x, y)
            for f in faces:
                rep = f.representative
                assert ts.is_extremal(rep, X)
                for x in range(n):
                    assert ts.sup_distance(rep, emb[x]) == rep[x]


# -------------------------------------------------------------------- 5


def _dress_spaces():
    out = []
    for seed in range(100):
        kind = seed % 4
        if kind == 3:
            out.append(gallery.random_tree_metric(4 + seed % 4, seed))
        else:
            out.append(gallery.random_metric(4 + seed % 4, seed, 1, 12 + seed % 20))
    return out


@pytest.mark.criterion(5, "pairing criterion equals exhaustive dimension")
def test_c5_dress_equivalence():
    with budget(300.0):
        discrepancies = []
        for k, X in enumerate(_dress_spaces()):
            dim = cd.comb_dim_exhaustive(X)
            for n in (1, 2):
                if cd.dress_check(X, n).holds != (dim <= n):
                    discrepancies.append((k, n, dim))
        assert discrepancies == []


@pytest.mark.criterion(5, "pairing criterion equals exhaustive dimension")
def test_c5_hexagon_antipodal():
    res = cd.dress_check(gallery.ngon(6), 2)
    assert not res.holds
    Z, inv = res.violation
    assert tuple(Z) == tuple(range(6))
    assert set(inv.pairs) == {(0, 3), (1, 4), (2, 5)}


@pytest.mark.criterion(5, "pairing criterion equals exhaustive dimension")
def test_c5_trees_pass_at_one():
    trees = [gallery.random_tree_metric(k, s) for k in (4, 5, 6, 7) for s in range(8)]
    trees += [gallery.star_tree(k) for k in (3, 4, 5)]
    for T in trees:
        assert is_tree_like(T)
        assert cd.dress_check(T, 1).holds


# -------------------------------------------------------------------- 6


def _pairing_instances(count=50):
    rng = np.random.default_rng(2024)
    out = []
    for s in range(count):
        k = 4 if s % 2 else 6
        if s % 3 == 0:
            X = gallery.random_tree_metric(k + 1, s)
        elif s % 5 == 0:
            X = gallery.ngon(k)
        else:
            X = gallery.random_metric(k + 1, s, 1, 6 + s % 9)
        Z = tuple(sorted(rng.choice(X.n, size=k, replace=False).tolist()))
        perm = rng.permutation(Z).tolist()
        out.append((X, Z, cd.Involution(tuple((perm[2 * a], perm[2 * a + 1]) for a in range(k // 2)))))
    return out


@pytest.mark.criterion(6, "pairing certificates re-verify exactly")
def test_c6_certificates():
    kinds = set()
    for X, Z, inv in _pairing_instances():
        mu0 = cd.mu_lp(X, Z, inv).value
        assert mu0 == 0 or mu0 == math.inf
        w = cd.dress_witness(X, Z, inv)
        assert w.verify(X)
        kinds.add(type(w).__name__)
        base = cd.matching_sum(X, inv.as_map())
        Y = subspace(X, Z)
        loc = {z: a for a, z in enumerate(Z)}
        ipairs = {tuple(sorted((loc[a], loc[b]))) for a, b in inv.pairs}
        if isinstance(w, cd.StrictBijection):
            assert cd.matching_sum(X, w.j) > base
            assert mu0 == math.inf
        elif isinstance(w, cd.EqualityCertificate):
            assert ts.is_extremal(w.f, Y)
            assert ipairs <= ts.equality_edges(w.f, Y)
            assert cd.matching_sum(X, w.j.as_map()) == base
            assert mu0 == 0
        else:
            assert ts.is_extremal(w.f, Y) and ts.equality_edges(w.f, Y) == ipairs
            sums = [cd.matching_sum(X, {Z[a]: Z[p[a]] for a in range(len(Z))})
                    for p in derangements(len(Z))]
            assert sorted(sums)[-1] == base and sorted(sums)[-2] < base
    assert {"StrictBijection", "EqualityCertificate"} <= kinds


# -------------------------------------------------------------------- 7


@pytest.mark.criterion(7, "straight curves")
def test_c7_cap_curve_exact():
    grid, members, gamma = gallery.convex_cap_set(33)
    r = bc.straightness_defect(gamma, members, linf_distance)
    assert r.max_defect == 0 and isinstance(r.max_defect, (int, F))


@pytest.mark.criterion(7, "straight curves")
def test_c7_bent_geodesic():
    rng = np.random.default_rng(7)
    h = float(rng.uniform(0.3, 0.9))
    a, m, b = np.array([0.0, 0.0]), np.array([1.0, h]), np.array([2.0, 0.0])
    ts_ = np.linspace(0, 1, 33)
    curve = [(1 - 2 * t) * a + 2 * t * m if t <= 0.5 else (2 - 2 * t) * m + (2 * t - 1) * b
             for t in ts_]
    # a geodesic for the sup metric
    assert all(abs(bc.linf(curve[i], curve[j]) - 2 * abs(ts_[i] - ts_[j])) <= 1e-12
               for i in range(33) for j in range(33))
    wits = rng.uniform(-1, 3, size=(500, 2))
    r = bc.straightness_defect(curve, wits)
    assert r.max_defect > 1e-3
    assert r.witness is not None and "witness_index" in r.witness


@pytest.mark.criterion(7, "straight curves")
def test_c7_bigon_two_straight_curves():
    B = gallery.bigon(8)
    X = B.space
    ea = [ts.kuratowski_embed(X, i) for i in B.alpha]
    eb = [ts.kuratowski_embed(X, i) for i in B.beta]
    assert ts.sup_distance(ea[4], eb[4]) == F(1, 2)
    alpha = [np.array(v, float) for v in ea]
    beta = [np.array(v, float) for v in eb]
    S = bc.tight_span_space(X)
    wits = list(S.sample(np.random.default_rng(8), 1000)) + alpha + beta
    assert bc.straightness_defect(alpha, wits).max_defect <= 1e-9
    assert bc.straightness_defect(beta, wits).max_defect <= 1e-9
    # same endpoints, separation 2t(1 - t) is concave: midpoint defect 2/m^2 at spacing 1/m
    probe = bc.straight_uniqueness_probe(alpha, beta, wits)
    assert probe.max_separation == 0.5
    assert abs(probe.report.max_defect - 2 / 64) <= 1e-12


@pytest.mark.criterion(7, "straight curves")
@pytest.mark.parametrize("seed", range(4))
def test_c7_straight_pairs_four_points(seed):
    X = gallery.random_metric(4, seed, 1, 30)
    rng = np.random.default_rng(seed)
    sigmas = [bc.RetractBicombing(bc.tight_span_space(X)),
              bc.RetractBicombing(bc.tight_span_space(X, order=[3, 2, 1, 0]))]
    S = sigmas[0].space
    A, B = S.sample(rng, 10), S.sample(rng, 10)
    # a 16-point grid certified a kinked curve as straight; 128 points do not
    curves = []
    for sg in sigmas:
        G = sg.grid(A, B, 128)
        curves += [list(G[k]) for k in range(len(A))]
    wits = list(S.sample(rng, 300)) + [np.array(v, float) for v in ts.tight_span_vertices(X)]
    wits += [p for c in curves for p in c[::8]]
    straight = [c for c in curves if bc.straightness_defect(c, wits).max_defect <= 1e-9]
    assert len(straight) >= len(A)
    for a, b in itertools.combinations(straight, 2):
        assert bc.straight_uniqueness_probe(a, b, wits).report.max_defect <= 1e-9


# -------------------------------------------------------------------- 8


@pytest.mark.criterion(8, "boundary formulas")
def test_c8_phi_formula():
    rng = np.random.default_rng(81)
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        o, x = rng.uniform(-4, 4, size=d), rng.uniform(-4, 4, size=d)
        R = bd._norm(x - o)
        r = rng.uniform(0, R)
        D = bd.d_o_metric(x, bd.radial_retraction(o, r, x), o)
        assert abs(D - (math.exp(-r) - math.exp(-R))) <= 1e-12


@pytest.mark.criterion(8, "boundary formulas")
@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_c8_phi_ratio(eps):
    o = np.zeros(2)
    x, y = np.array([1 + eps, 1 - eps]), np.array([1.0, 1.0])
    ratio = (bd._norm(bd.radial_retraction(o, 1, x) - bd.radial_retraction(o, 1, y))
             / bd._norm(x - y))
    assert abs(ratio - 2 / (1 + eps)) <= 1e-9


@pytest.mark.criterion(8, "boundary formulas")
def test_c8_inequalities():
    with budget(60.0):
        for name in sorted(bd.CHECKS):
            for rep in bd.CHECKS[name](10_000, np.random.default_rng(88)):
                assert rep.samples >= 10_000
                assert rep.violations == 0, rep.to_json()


# -------------------------------------------------------------------- 9


CLI_RUNS = [
    ["validate", "{hex}"],
    ["tight-span", "{rand}"],
    ["comb-dim", "{hex}", "--n", "2"],
    ["comb-dim", "{rand}", "--exhaustive"],
    ["dress-witness", "{rand}", "--Z", "0,1,2,3", "--pairs", "0-2,1-3"],
    ["bicombing", "check", "--axiom", "conical", "--samples", "200", "--rng-seed", "4"],
    ["bicombing", "build", "--levels", "3", "--samples", "50", "--rng-seed", "5"],
    ["bicombing", "check", "--space", "random:n=4,seed=2", "--axiom", "discrete:3",
     "--levels", "2", "--samples", "50"],
    ["boundary", "dist", "--o", "0,0", "--x", "1,2", "--y", "dir:1,-1"],
    ["boundary", "check", "--lemma", "psi", "--samples", "300", "--rng-seed", "9"],
    ["gallery", "emit", "random", "n=5", "seed=3"],
    ["gallery", "list"],
]


@pytest.mark.criterion(9, "byte-reproducible CLI output")
@pytest.mark.parametrize("argv", CLI_RUNS, ids=lambda a: " ".join(a[:2]))
def test_c9_cli_deterministic(argv, tmp_path):
    hexf, randf = tmp_path / "hex.json", tmp_path / "rand.json"
    hexf.write_text(gallery.ngon(6).dumps())
    randf.write_text(gallery.random_metric(5, 11, 1, 20).dumps())
    cmd = [sys.executable, "-m", "bicomb"] + [a.format(hex=hexf, rand=randf) for a in argv]
    outs = [subprocess.run(cmd, capture_output=True, timeout=300) for _ in range(2)]
    assert outs[0].returncode in (0, 2), outs[0].stderr.decode()
    assert outs[0].returncode == outs[1].returncode
    assert outs[0].stdout == outs[1].stdout and outs[0].stdout

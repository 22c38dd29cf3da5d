from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from bicomb import gallery
from bicomb.metric import (MetricError, four_point_defect, from_json, is_tree_like,
                           linf_distance, subspace, validate_metric)


def test_two_point_is_valid():
    X = validate_metric([[0, 1], [1, 0]])
    assert X.n == 2 and X.d(0, 1) == 1


def test_asymmetry_reported():
    with pytest.raises(MetricError) as exc:
        validate_metric([[0, 1], [2, 0]])
    kinds = {(v.kind, v.indices) for v in exc.value.violations}
    assert ("symmetry", (0, 1)) in kinds


def test_triangle_violation_defect():
    with pytest.raises(MetricError) as exc:
        validate_metric([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    tri = [v for v in exc.value.violations if v.kind == "triangle"]
    # 0 -> 1 -> 2 beats the direct 0 -> 2 by 3 - 1 - 1
    assert [(v.indices, v.defect) for v in tri] == [((0, 1, 2), 1)]


@pytest.mark.parametrize("bad", [[[0, 1]], [[0, 1], [1]], []])
def test_non_square_rejected(bad):
    with pytest.raises(ValueError):
        validate_metric(bad)


def test_negative_rejected():
    with pytest.raises(ValueError, match="negative"):
        validate_metric([[0, -1], [-1, 0]])


def test_zero_off_diagonal_is_violation():
    with pytest.raises(MetricError):
        validate_metric([[0, 0], [0, 0]])


def test_json_roundtrip_rationals():
    X = from_json({"labels": ["x", "y"], "dist": [[0, "3/2"], ["3/2", 0]]})
    assert X.d(0, 1) == F(3, 2)
    assert from_json(X.dumps()) == X


def test_floats_refused():
    with pytest.raises(TypeError):
        validate_metric([[0, 0.5], [0.5, 0]])


def test_linf_distance_examples():
    assert linf_distance((0, 0), (0, 0)) == 0
    assert linf_distance((-2, 1), (2, 1)) == 4
    eps = F(1, 10)
    assert linf_distance((1, 1), (1 + eps, 1 - eps)) == F(1, 10)
    with pytest.raises(ValueError):
        linf_distance((0, 0), (0, 0, 0))


rats = st.fractions(min_value=-10, max_value=10, max_denominator=12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4).flatmap(lambda d: st.lists(
    st.lists(rats, min_size=d, max_size=d), min_size=3, max_size=3)))
def test_linf_metric_axioms(pts):
    p, q, r = pts
    assert linf_distance(p, q) == linf_distance(q, p)
    assert linf_distance(p, p) == 0
    assert linf_distance(p, r) <= linf_distance(p, q) + linf_distance(q, r)
    assert (linf_distance(p, q) == 0) == (list(p) == list(q))


def test_subspace_identity_and_antipodes():
    H = gallery.ngon(6)
    assert subspace(H, range(6)) == H
    S = subspace(H, [0, 3])
    assert S.n == 2 and S.d(0, 1) == 3 and S.labels == ("v0", "v3")


def test_subspace_errors():
    H = gallery.ngon(6)
    with pytest.raises(ValueError):
        subspace(H, [])
    with pytest.raises(IndexError):
        subspace(H, [0, 6])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sets(st.integers(0, 6), min_size=3, max_size=7))
def test_subspace_of_subspace(seed, outer):
    X = gallery.random_metric(7, seed)
    outer = sorted(outer)
    inner = outer[::2]
    Y = subspace(X, outer)
    assert subspace(Y, [outer.index(i) for i in inner]) == subspace(X, inner)


def test_tree_subspace_stays_tree():
    T = gallery.tree_metric([("c", "a", 1), ("c", "b", 2), ("c", "m", 1), ("m", "e", 3)],
                            ["a", "b", "e", "m"])
    assert is_tree_like(T)
    assert is_tree_like(subspace(T, [0, 1, 2]))


def test_four_point_examples():
    S = gallery.tree_metric([("c", "a", 1), ("c", "b", 1), ("c", "e", 1)])
    idx = {l: k for k, l in enumerate(S.labels)}
    assert four_point_defect(S, (idx["a"], idx["b"], idx["e"], idx["c"])) <= 0
    # unit square corners; sqrt(2) replaced by the rational 99/70 < sqrt(2)
    r = F(99, 70)
    sq = validate_metric([[0, 1, r, 1], [1, 0, 1, r], [r, 1, 0, 1], [1, r, 1, 0]])
    assert four_point_defect(sq, (0, 2, 1, 3)) == 2 * r - 2
    assert four_point_defect(sq, (0, 0, 1, 1)) == -2 * sq.d(0, 1)


@pytest.mark.parametrize("seed", range(10))
def test_random_tree_metrics_are_zero_hyperbolic(seed):
    assert is_tree_like(gallery.random_tree_metric(6, seed))

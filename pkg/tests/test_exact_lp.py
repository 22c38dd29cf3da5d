from fractions import Fraction as F

import numpy as np
import pytest
from scipy.optimize import linprog

from bicomb.exact_lp import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog_max


def test_small_optimum():
    # max x + y, x + 2y + s = 4, 3x + y + t = 6
    res = linprog_max([1, 1, 0, 0], [[1, 2, 1, 0], [3, 1, 0, 1]], [4, 6])
    assert res.status == OPTIMAL
    assert res.value == F(14, 5)
    assert res.x[:2] == [F(8, 5), F(6, 5)]


def test_unbounded_ray():
    res = linprog_max([1, 0], [[1, -1]], [1])
    assert res.status == UNBOUNDED
    r = res.ray
    assert all(v >= 0 for v in r) and r[0] == r[1] and r[0] > 0


def test_unbounded_ray_improves():
    A = [[1, -1, 0], [0, 1, -1]]
    res = linprog_max([0, 0, 1], A, [0, 0])
    assert res.status == UNBOUNDED
    r = res.ray
    assert all(v >= 0 for v in r)
    assert all(sum(a * v for a, v in zip(row, r)) == 0 for row in A)
    assert r[2] > 0


def test_infeasible():
    assert linprog_max([1], [[1], [1]], [1, 2]).status == INFEASIBLE


def test_redundant_rows():
    res = linprog_max([1, 0], [[1, 1], [2, 2]], [3, 6])
    assert res.status == OPTIMAL and res.value == 3


@pytest.mark.parametrize("seed", range(25))
def test_agrees_with_floating_solver(seed):
    rng = np.random.default_rng(seed)
    m, n = 3, 6
    A = rng.integers(-3, 4, size=(m, n))
    b = rng.integers(0, 6, size=m)
    c = rng.integers(-4, 5, size=n)
    ref = linprog(-c, A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    res = linprog_max(c.tolist(), A.tolist(), b.tolist())
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert res.status == status
    if status == OPTIMAL:
        assert abs(float(res.value) + ref.fun) < 1e-7
        x = res.x
        assert all(v >= 0 for v in x)
        assert all(sum(F(int(a)) * v for a, v in zip(row, x)) == bv for row, bv in zip(A, b))
    if status == UNBOUNDED:
        r = res.ray
        assert all(v >= 0 for v in r)
        assert all(sum(int(a) * v for a, v in zip(row, r)) == 0 for row in A)
        assert sum(int(a) * v for a, v in zip(c, r)) > 0

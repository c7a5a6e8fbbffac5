import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxsga.data import SparseDataset
from proxsga.losses import ErmObjective, dc_parts, lorenz_deriv, lorenz_value
from proxsga.synthetic import make_gaussian

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_lorenz_values():
    assert lorenz_value(2.0) == 0.0
    assert lorenz_value(1.0) == 0.0
    assert lorenz_value(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert isinstance(lorenz_value(0.5), float)


def test_lorenz_deriv_values():
    assert lorenz_deriv(1.5) == 0.0
    assert lorenz_deriv(1.0) == 0.0
    assert lorenz_deriv(0.0) == -1.0


def test_lorenz_deriv_finite_difference():
    h = 1e-5
    fd = (lorenz_value(-2 + h) - lorenz_value(-2 - h)) / (2 * h)
    assert abs(fd - lorenz_deriv(-2.0)) <= 1e-6


@given(finite)
def test_lorenz_range(v):
    assert lorenz_value(v) >= 0.0
    assert -1.0 <= lorenz_deriv(v) <= 0.0


@given(finite, finite)
def test_lorenz_deriv_is_2_lipschitz(u, v):
    assert abs(lorenz_deriv(u) - lorenz_deriv(v)) <= 2 * abs(u - v) + 1e-12


def test_dc_parts_examples():
    assert dc_parts(2.0) == (0.5, 0.5)
    l1, l2 = dc_parts(0.0)
    assert l1 == pytest.approx(math.log(2), abs=1e-15) and l2 == 0.0


@given(st.floats(-100, 100, allow_nan=False))
def test_dc_parts_difference(v):
    l1, l2 = dc_parts(v)
    assert abs((l1 - l2) - lorenz_value(v)) <= 1e-12 * max(1.0, l1)


def test_dc_first_part_convex():
    rng = np.random.default_rng(0)
    u = rng.uniform(-10, 10, 10_000)
    v = rng.uniform(-10, 10, 10_000)
    t = rng.uniform(0, 1, 10_000)
    lhs, _ = dc_parts(t * u + (1 - t) * v)
    rhs = t * dc_parts(u)[0] + (1 - t) * dc_parts(v)[0]
    assert np.all(lhs <= rhs + 1e-10)


# ---- ERM -------------------------------------------------------------------

def _single(x, y):
    return ErmObjective(SparseDataset.from_matrix(np.array([x], dtype=float), np.array([y])))


def test_full_gradient_at_zero():
    obj = _single([1.0, 0.0], 1.0)
    np.testing.assert_array_equal(obj.full_gradient(np.zeros(2)), [-1.0, 0.0])


def test_full_gradient_flat_region():
    X = np.array([[1.0], [2.0], [-1.5]])
    y = np.array([1.0, 1.0, -1.0])
    flat = ErmObjective(SparseDataset.from_matrix(X, y))
    w = np.array([5.0])
    assert np.all(flat.margins(w) > 1)
    np.testing.assert_array_equal(flat.full_gradient(w), [0.0])
    assert flat.value(w) == 0.0


def test_full_gradient_finite_differences():
    obj = ErmObjective(make_gaussian(20, 5, seed=2))
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(10):
        w = rng.normal(size=5)
        fd = np.array([(obj.value(w + h * e) - obj.value(w - h * e)) / (2 * h)
                       for e in np.eye(5)])
        g = obj.full_gradient(w)
        assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_dimension_mismatch():
    obj = ErmObjective(make_gaussian(5, 3))
    with pytest.raises(ValueError):
        obj.full_gradient(np.zeros(4))
    with pytest.raises(ValueError):
        obj.value(np.zeros(2))


def test_minibatch_all_indices_is_full_gradient_bitwise():
    obj = ErmObjective(make_gaussian(40, 6, seed=4))
    w = np.random.default_rng(5).normal(size=6)
    full = obj.full_gradient(w)
    assert np.array_equal(obj.minibatch_gradient(w, np.arange(40)), full)
    assert np.array_equal(obj.minibatch_gradient(w, np.arange(40)[::-1]), full)


def test_minibatch_single_index():
    ds = make_gaussian(10, 4, seed=6)
    obj = ErmObjective(ds)
    w = np.random.default_rng(7).normal(size=4)
    j = 3
    xj = ds.X.toarray()[j]
    yj = ds.labels[j]
    expect = lorenz_deriv(yj * (w @ xj)) * yj * xj
    np.testing.assert_allclose(obj.minibatch_gradient(w, [j]), expect, rtol=1e-14, atol=1e-16)


def test_minibatch_repeated_indices_weight():
    obj = ErmObjective(make_gaussian(10, 4, seed=8))
    w = np.ones(4) * 0.1
    g = obj.minibatch_gradient(w, [2, 2, 5])
    expect = (2 * obj.sample_gradient(w, 2) + obj.sample_gradient(w, 5)) / 3
    np.testing.assert_allclose(g, expect, rtol=1e-13, atol=1e-16)


def test_minibatch_errors():
    obj = ErmObjective(make_gaussian(5, 3))
    with pytest.raises(ValueError):
        obj.minibatch_gradient(np.zeros(3), [])
    with pytest.raises(IndexError):
        obj.minibatch_gradient(np.zeros(3), [5])


def test_minibatch_unbiased_monte_carlo():
    obj = ErmObjective(make_gaussian(15, 4, seed=9))
    w = np.random.default_rng(10).normal(size=4)
    table = np.stack([obj.sample_gradient(w, j) for j in range(obj.n)])
    draws = table[np.random.default_rng(11).integers(0, obj.n, 100_000)]
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
    assert np.all(np.abs(mean - obj.full_gradient(w)) <= 3 * se + 1e-15)


def test_smoothness_constants():
    X = np.array([[1.0, 1.0], [2.0, 0.0]])
    obj = ErmObjective(SparseDataset.from_matrix(X, np.array([1.0, -1.0])))
    assert obj.L_mean == 6.0 and obj.L_max == 8.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_full_gradient_lipschitz(seed):
    obj = ErmObjective(make_gaussian(12, 3, seed=seed % 7))
    rng = np.random.default_rng(seed)
    w, x = rng.normal(size=(2, 3)) * 3
    lhs = np.linalg.norm(obj.full_gradient(w) - obj.full_gradient(x))
    assert lhs <= obj.L_mean * np.linalg.norm(w - x) * (1 + 1e-12) + 1e-15


def test_gradient_variance_two_points():
    X = np.array([[1.0, 0.0], [0.0, 2.0]])
    obj = ErmObjective(SparseDataset.from_matrix(X, np.array([1.0, 1.0])))
    w = np.zeros(2)
    p, q = obj.sample_gradient(w, 0), obj.sample_gradient(w, 1)
    assert obj.gradient_variance(w) == pytest.approx(np.sum((p - q) ** 2) / 4, rel=1e-14)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxsga.regularizers import LogSumRegularizer


def test_value_examples():
    g = LogSumRegularizer(1.0, 1.0, 3)
    assert g.value(np.zeros(3)) == 0.0
    assert g.value(np.array([math.e - 1, 0.0, 0.0])) == pytest.approx(1.0, abs=1e-15)
    assert g.value(np.array([-(math.e - 1), 0.0, 0.0])) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        g.value(np.zeros(2))


def test_constructor_validation():
    with pytest.raises(ValueError):
        LogSumRegularizer(-1.0, 1.0, 2)
    with pytest.raises(ValueError):
        LogSumRegularizer(1.0, 0.0, 2)
    with pytest.raises(ValueError):
        LogSumRegularizer(1.0, 1.0, 0)


def test_lipschitz_examples():
    assert LogSumRegularizer(1.0, 2.0, 9).lipschitz_const() == 1.5
    for d in (1, 4, 123):
        assert LogSumRegularizer(1.0 / d, 1.0, d).lipschitz_const() == pytest.approx(d ** -0.5)
    assert LogSumRegularizer(0.7, 0.7, 1).lipschitz_const() == 1.0


@settings(max_examples=200)
@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4),
       st.lists(st.floats(-50, 50), min_size=4, max_size=4),
       st.floats(1e-3, 10), st.floats(1e-2, 10))
def test_value_is_lipschitz(z, w, kappa, nu):
    g = LogSumRegularizer(kappa, nu, 4)
    z, w = np.array(z), np.array(w)
    assert abs(g.value(z) - g.value(w)) <= g.lipschitz_const() * np.linalg.norm(z - w) * (1 + 1e-12) + 1e-12


def test_prox_examples():
    g = LogSumRegularizer(1.0, 1.0, 1)
    assert g.prox_scalar(1.0, 0.0) == 0.0
    x = g.prox_scalar(1.0, 3.0)
    assert x == pytest.approx(1 + math.sqrt(3), abs=1e-12)
    assert g.prox_objective(1.0, 3.0, 0.0) == 4.5
    assert float(g.prox_objective(1.0, 3.0, x)) == pytest.approx(1.353, abs=1e-3)
    assert g.prox_scalar(1.0, -3.0) == pytest.approx(-(1 + math.sqrt(3)), abs=1e-12)


def test_prox_example_against_grid():
    g = LogSumRegularizer(1.0, 1.0, 1)
    grid = np.arange(0, 3_000_001) * 1e-6
    grid_min = float(np.min(g.prox_objective(1.0, 3.0, grid)))
    assert float(g.prox_objective(1.0, 3.0, g.prox_scalar(1.0, 3.0))) <= grid_min + 1e-8


def test_prox_kappa_zero_is_identity():
    g = LogSumRegularizer(0.0, 1.0, 5)
    w = np.array([-3.0, -1e-9, 0.0, 2.5, 17.0])
    np.testing.assert_array_equal(g.prox_coords(0.3, w), w)


def test_prox_rejects_bad_lambda():
    g = LogSumRegularizer(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        g.prox_scalar(0.0, 1.0)
    with pytest.raises(ValueError):
        g.prox_coords(-1.0, np.ones(1))


def test_prox_vector_zero():
    g = LogSumRegularizer(0.5, 1.0, 4)
    res = g.prox_vector(0.7, np.zeros(4))
    np.testing.assert_array_equal(res.point, np.zeros(4))
    assert res.envelope_value == 0.0


def test_prox_vector_separable():
    rng = np.random.default_rng(0)
    g = LogSumRegularizer(2.0, 0.5, 50)
    w = rng.uniform(-10, 10, 50)
    res = g.prox_vector(0.8, w)
    for i in range(50):
        assert res.point[i] == g.prox_scalar(0.8, w[i])
    expect = np.sum((res.point - w) ** 2) / 1.6 + g.value(res.point)
    assert res.envelope_value == pytest.approx(expect, rel=1e-14)


def test_envelope_below_g():
    rng = np.random.default_rng(1)
    for _ in range(10_000 // 100):
        d = 100
        g = LogSumRegularizer(rng.uniform(1e-3, 10), rng.uniform(1e-2, 10), d)
        lam = rng.uniform(1e-3, 10)
        w = rng.uniform(-20, 20, d)
        assert g.moreau_envelope(lam, w) <= g.value(w) + 1e-12


def test_prox_is_odd_and_shrinks():
    rng = np.random.default_rng(2)
    g = LogSumRegularizer(1.3, 0.4, 1)
    w = rng.uniform(-20, 20, 1000)
    z = g.prox_coords(0.9, w)
    np.testing.assert_array_equal(g.prox_coords(0.9, -w), -z)
    assert np.all(np.abs(z) <= np.abs(w))


def test_oracle_zero_and_sign():
    g = LogSumRegularizer(1.0, 1.0, 1)
    assert g.prox_oracle_scalar(1.0, 0.0, 1e-3) == 0.0
    assert g.prox_oracle_scalar(1.0, -3.0, 1e-3) < 0
    with pytest.raises(ValueError):
        g.prox_oracle_scalar(1.0, 1.0, 0.0)


def test_closed_form_vs_oracle_small_sample():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = LogSumRegularizer(rng.uniform(1e-3, 10), rng.uniform(1e-2, 10), 1)
        lam = rng.uniform(1e-3, 10)
        w = rng.uniform(-5, 5)
        x_cf = g.prox_scalar(lam, w)
        x_or = g.prox_oracle_scalar(lam, w, 1e-6)
        assert g.prox_objective(lam, w, x_cf) <= g.prox_objective(lam, w, x_or) + 1e-8


def test_oracle_coarse_to_fine_matches_full_grid():
    g = LogSumRegularizer(4.0, 0.3, 1)
    lam, w = 0.6, 3.7
    full = g.prox_oracle_scalar(lam, w, 1e-5)
    staged = g.prox_oracle_scalar(lam, w, 1e-5, max_points=1000)
    assert staged == pytest.approx(full, abs=1e-12)


def test_oracle_monotone_in_magnitude():
    g = LogSumRegularizer(2.0, 0.5, 1)
    ws = np.linspace(0, 6, 200)
    xs = [abs(g.prox_oracle_scalar(1.0, w, 1e-4)) for w in ws]
    assert all(b >= a for a, b in zip(xs, xs[1:]))


def test_prox_thresholds_then_grows():
    # small nu gives a hard-threshold shape: zero up to a jump, then increasing
    g = LogSumRegularizer(1.0, 0.1, 1)
    ws = np.linspace(0, 5, 5001)
    z = g.prox_coords(1.0, ws)
    nz = np.flatnonzero(z > 0)
    assert nz.size and np.all(z[:nz[0]] == 0)
    assert np.all(np.diff(z) >= 0)

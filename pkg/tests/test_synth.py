import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_panel
from retirement_eval.did import DesignSpec, project_simplex, simplex_least_squares, synthetic_control
from retirement_eval.errors import NoDonors

SPEC = DesignSpec("T", policy_year=2012)
YEARS = np.arange(2007, 2022)


def grid_search(X, y, step=0.01):
    """Brute-force oracle over the simplex on a regular grid (two or three donors)."""
    k = X.shape[1]
    ticks = np.round(np.arange(0, 1 + step / 2, step), 10)
    best, best_w = np.inf, None
    for head in itertools.product(ticks, repeat=k - 1):
        last = 1 - sum(head)
        if last < -1e-12:
            continue
        w = np.array(head + (max(last, 0.0),))
        loss = np.sum((X @ w - y) ** 2)
        if loss < best:
            best, best_w = loss, w
    return best_w, best


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
def test_projection_lands_on_simplex(v):
    w = project_simplex(v)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-9)


def test_projection_is_nearest_point(rng):
    for _ in range(50):
        v = rng.normal(size=4)
        w = project_simplex(v)
        for _ in range(20):
            u = rng.dirichlet(np.ones(4))
            assert np.sum((w - v) ** 2) <= np.sum((u - v) ** 2) + 1e-12


def test_exact_donor(rng):
    donors = rng.normal(0.05, 0.01, (4, 15))
    treated = donors[2].copy()
    res = synthetic_control(make_panel(np.vstack([treated, donors]), years=YEARS), SPEC)
    assert res.weights["C03"] == pytest.approx(1.0, abs=1e-6)
    assert res.pre_fit_rmse == pytest.approx(0.0, abs=1e-8)
    assert res.converged


def test_planted_combination_against_grid(rng):
    A, B = rng.normal(0.05, 0.01, (2, 15))
    treated = 0.3 * A + 0.7 * B
    res = synthetic_control(make_panel(np.vstack([treated, A, B]), years=YEARS), SPEC)
    pre = YEARS < 2012
    grid_w, _ = grid_search(np.column_stack([A[pre], B[pre]]), treated[pre])
    w = np.array([res.weights["C01"], res.weights["C02"]])
    np.testing.assert_allclose(w, [0.3, 0.7], atol=1e-4)
    np.testing.assert_allclose(w, grid_w, atol=1e-4)


def test_outside_hull_gives_boundary_weights(rng):
    donors = rng.normal(0.05, 0.003, (3, 15))
    treated = donors.min(axis=0) - 0.02
    res = synthetic_control(make_panel(np.vstack([treated, donors]), years=YEARS), SPEC)
    pre = YEARS < 2012
    X = donors[:, pre].T
    grid_w, grid_loss = grid_search(X, treated[pre], step=0.005)
    w = np.array(list(res.weights.values()))
    assert np.min(w) < 1e-8  # at least one donor dropped: a face of the simplex
    assert res.pre_fit_rmse > 0
    assert np.sum((X @ w - treated[pre]) ** 2) <= grid_loss + 1e-10


def test_random_instances_respect_simplex(rng):
    for _ in range(100):
        k = int(rng.integers(2, 8))
        X = rng.normal(size=(int(rng.integers(3, 10)), k))
        y = rng.normal(size=X.shape[0])
        sol = simplex_least_squares(X, y)
        assert np.all(sol.weights >= 0)
        assert sol.weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert sol.converged


def test_adding_a_donor_never_hurts(rng):
    for _ in range(20):
        X = rng.normal(size=(6, 4))
        y = rng.normal(size=6)
        small = simplex_least_squares(X[:, :3], y).weights
        large = simplex_least_squares(X, y).weights
        assert np.sum((X @ large - y) ** 2) <= np.sum((X[:, :3] @ small - y) ** 2) + 1e-6


def test_fixture_is_below_donors(calibrated, cam_spec):
    res = synthetic_control(calibrated, cam_spec)
    assert res.pre_fit_rmse > 0
    assert sum(res.weights.values()) == pytest.approx(1.0)
    assert set(res.gap_series) == set(range(2007, 2022))


def test_no_donors():
    with pytest.raises(NoDonors):
        synthetic_control(make_panel(np.ones((1, 15)), years=YEARS), SPEC)

import math

import numpy as np
import pytest

from catlift.robustness import (
    SuddenSwitch,
    SwitchingErrorModel,
    defect_jacobian,
    humpty_visibility_analytic,
    humpty_visibility_mc,
    sigma_eps_bound,
    sudden_bound,
    sudden_variance,
    sudden_variance_moments,
)


def test_models_validate():
    with pytest.raises(ValueError):
        SwitchingErrorModel(-1.0)
    with pytest.raises(ValueError):
        SuddenSwitch(f_avg=2.0)
    assert np.allclose(SwitchingErrorModel(1.0).scales, [1, 1, math.sqrt(2)])


def test_sudden_variance_examples():
    assert sudden_variance(0.0, 0.0, 0.0) == pytest.approx(0.5)
    dx, t = 100.0, 8.0
    lead = (2 * dx**2 + 1) * math.exp(4 * t) / 8
    assert sudden_variance(dx, t) == pytest.approx(lead, rel=1e-6)


@pytest.mark.parametrize("dx,t,f", [(0, 0, 0), (3, 1.2, 0.4), (5, 2, -0.7), (100, 4 * math.pi, 0.0), (10, 3.0, 1.0)])
def test_sudden_variance_moment_route(dx, t, f):
    assert sudden_variance_moments(dx, t, f) == pytest.approx(sudden_variance(dx, t, f), rel=1e-8)
    assert sudden_variance_moments(dx, t, f, ordering="operator") == pytest.approx(
        sudden_variance(dx, t, f) - f, rel=1e-8, abs=1e-12
    )


def test_operator_ordering_exact_for_number_operator():
    # x^2 + p^2 on the vacuum has zero variance
    assert sudden_variance_moments(0.0, 0.0, 1.0, ordering="operator") == pytest.approx(0.0, abs=1e-15)


def test_sudden_variance_monotone():
    ts = np.linspace(0, 10, 50)
    assert np.all(np.diff([sudden_variance(10.0, t) for t in ts]) > 0)
    dxs = np.linspace(0, 100, 50)
    assert np.all(np.diff([sudden_variance(d, 2.0) for d in dxs]) > 0)


def test_sudden_bound_examples():
    assert sudden_bound(100.0, 4 * math.pi, 100.0) == pytest.approx(2.4e-15, rel=0.05)
    assert sudden_bound(0.0, 1.5, 3.0) == pytest.approx(2 * math.sqrt(2) * math.exp(-3.0) / 3.0)
    assert sudden_bound(0.0, 0.0, 2.0) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        sudden_bound(1.0, 1.0, 0.0)


def test_sigma_eps_bound():
    assert sigma_eps_bound(100.0, 4 * math.pi, 100.0) == pytest.approx(1.8e-15, rel=0.05)
    assert sigma_eps_bound(200.0, 3.0) == pytest.approx(0.5 * sigma_eps_bound(100.0, 3.0))
    assert sigma_eps_bound(0.0, 3.0) == math.inf


def test_bound_from_leading_form_inversion():
    # the leading form at fixed visibility scales like e^{-2t}/dx, as the bound does
    ratios = []
    for dx, t in ((50.0, 6.0), (100.0, 8.0), (400.0, 10.0)):
        b = sigma_eps_bound(dx, t)
        ratios.append(humpty_visibility_analytic(dx, t, b, leading=True))
    assert np.ptp(ratios) < 1e-6


def test_analytic_basics():
    assert humpty_visibility_analytic(100.0, 3.0, 0.0) == 1.0
    with pytest.warns(UserWarning):
        humpty_visibility_analytic(1.0, 0.1, 0.2)
    with pytest.raises(ValueError):
        humpty_visibility_analytic(1.0, 1.0, 1e-3, form="x")


def test_leading_vs_full():
    # the large-t form drops the constant term, so it only applies once
    # the visibility has already dropped well below one
    checked = 0
    for dx in (10.0, 50.0, 200.0):
        for s in (1e-7, 1e-6, 1e-5, 1e-4):
            for t in np.linspace(2 * math.pi, 5 * math.pi, 5):
                full = humpty_visibility_analytic(dx, t, s)
                if full > 0.2:
                    continue
                lead = humpty_visibility_analytic(dx, t, s, leading=True)
                assert abs(lead - full) / full < 0.05
                checked += 1
    assert checked > 40


def test_leading_form_breaks_down_near_unit_visibility():
    full = humpty_visibility_analytic(10.0, 2 * math.pi, 1e-7)
    lead = humpty_visibility_analytic(10.0, 2 * math.pi, 1e-7, leading=True)
    assert full > 0.9 and lead > 1.0


def test_printed_form_differs_but_shares_scaling():
    # the published closed form is off by a constant factor at large t
    a = humpty_visibility_analytic(100.0, 10.0, 1e-8, form="printed")
    b = humpty_visibility_analytic(100.0, 10.0, 1e-8)
    assert 0.3 < a / b < 3 and abs(a / b - 1) > 0.01


def test_analytic_monotone():
    for s in (1e-6, 1e-5):
        v = [humpty_visibility_analytic(50.0, t, s) for t in np.linspace(0, 10, 40)]
        assert np.all(np.diff(v) <= 0)
    v = [humpty_visibility_analytic(50.0, 5.0, s) for s in np.logspace(-8, -3, 30)]
    assert np.all(np.diff(v) <= 0)
    v = [humpty_visibility_analytic(d, 5.0, 1e-6) for d in np.linspace(1, 500, 30)]
    assert np.all(np.diff(v) <= 0)


def test_mc_basics_and_determinism():
    assert humpty_visibility_mc(100.0, 3.0, 0.0, 1000) == (1.0, 0.0)
    assert humpty_visibility_mc(100.0, 3.0, 0.0, 1000, method="plain")[0] == 1.0
    a = humpty_visibility_mc(100.0, 5.0, 1e-6, 20_000, seed=5)
    b = humpty_visibility_mc(100.0, 5.0, 1e-6, 20_000, seed=5)
    assert a == b
    with pytest.raises(ValueError):
        humpty_visibility_mc(100.0, 5.0, 1e-6, 100)
    with pytest.raises(ValueError):
        humpty_visibility_mc(100.0, 5.0, 1e-6, 1000, method="x")


def test_mc_thread_independent(monkeypatch):
    monkeypatch.setenv("CATLIFT_THREADS", "1")
    a = humpty_visibility_mc(30.0, 4.0, 1e-5, 30_000, seed=2)
    monkeypatch.setenv("CATLIFT_THREADS", "4")
    b = humpty_visibility_mc(30.0, 4.0, 1e-5, 30_000, seed=2, workers=4)
    assert a == b


@pytest.mark.parametrize("t", [1.0, 2.0, 3.0])
def test_plain_and_importance_agree_where_plain_works(t):
    v1, s1 = humpty_visibility_mc(100.0, t, 1e-5, 50_000, seed=1, method="plain")
    v2, s2 = humpty_visibility_mc(100.0, t, 1e-5, 50_000, seed=1)
    assert abs(v1 - v2) < 3 * math.hypot(s1, s2) + 1e-15


def test_mc_vs_analytic_small_grid():
    for t in (1.0, 2 * math.pi, 3 * math.pi):
        for s in (1e-6, 1e-4):
            v, se = humpty_visibility_mc(100.0, t, s, 20_000, seed=4)
            assert abs(v - humpty_visibility_analytic(100.0, t, s)) <= 3 * se + 1e-15


def test_jacobian_matches_linear_response():
    J = defect_jacobian(100.0, 2.0)
    assert J.shape == (2, 3)
    from catlift import kernels

    e = np.array([[1e-9, -2e-9, 5e-10]])
    d = kernels.closure_defect(np.zeros((1, 4)), kernels._humpty_eps4(e), 2.0)[0]
    lin = J @ e[0]
    assert np.allclose(100.0 * np.array([d[1, 1], d[1, 0]]), lin, rtol=1e-5)


def test_visibility_at_bound_is_order_one():
    for dx, t in ((100.0, 4 * math.pi), (50.0, 2 * math.pi)):
        v, _ = humpty_visibility_mc(dx, t, sigma_eps_bound(dx, t), 20_000, seed=0)
        assert v >= 0.3

import warnings

import numpy as np
import pytest

from conftest import make_panel, random_panel
from retirement_eval.did import (
    DesignSpec,
    FirstStageWarning,
    detrend_pre,
    did_of_means,
    implied_hire_growth,
    student_adjust,
)
from retirement_eval.errors import InsufficientPrePeriod, NonpositiveStudentFTE, RankDeficient

SPEC = DesignSpec("T", policy_year=2012)
YEARS = np.arange(2007, 2022)

pytestmark = pytest.mark.filterwarnings("ignore::retirement_eval.did.FirstStageWarning")


def test_linear_pre_period_gives_zero_pre_residuals(rng):
    a, b = rng.normal(size=(2, 4, 1))
    Y = a + b * (YEARS - 2007) + np.where(YEARS >= 2012, rng.normal(size=(4, 15)), 0.0)
    res = detrend_pre(make_panel(Y, years=YEARS), SPEC)
    np.testing.assert_allclose(res.panel.values[:, YEARS < 2012], 0, atol=1e-10)
    assert res.n_pre == 5 and not res.se_propagated


def test_fully_linear_unit_zero_everywhere():
    Y = 0.03 + 0.002 * (YEARS - 2007)
    res = detrend_pre(make_panel(np.vstack([Y, Y * 2]), years=YEARS), SPEC)
    np.testing.assert_allclose(res.panel.values, 0, atol=1e-10)


def test_post_residuals_follow_extrapolation():
    # slope 0.01 up to 2011 then flat at the 2011 level
    pre_line = 0.01 * (YEARS - 2007)
    Y = np.minimum(pre_line, 0.04)
    res = detrend_pre(make_panel(np.vstack([Y, Y]), years=YEARS), SPEC)
    expected = np.where(YEARS >= 2012, 0.04 - pre_line, 0.0)
    np.testing.assert_allclose(res.panel.values[0], expected, atol=1e-12)
    assert np.all(np.diff(res.panel.values[0, YEARS >= 2012]) < 0)
    assert res.slopes["T"] == pytest.approx(0.01) and res.intercepts["T"] == pytest.approx(-20.07)


def test_global_trend_is_absorbed(rng):
    panel = random_panel(rng, 8, 15)
    trend = panel.with_values(panel.values + 0.003 * (panel.years - 2007)[None], "trend")
    raw = did_of_means(detrend_pre(panel, SPEC).panel, SPEC)
    assert abs(did_of_means(detrend_pre(trend, SPEC).panel, SPEC) - raw) < 1e-8


def test_detrend_needs_three_pre_years(rng):
    panel = random_panel(rng, 3, 7)  # 2007..2013
    with pytest.raises(InsufficientPrePeriod):
        detrend_pre(panel, DesignSpec("T", policy_year=2009))


def test_first_stage_warning_is_emitted(rng):
    with pytest.warns(FirstStageWarning):
        detrend_pre(random_panel(rng, 3, 10), SPEC)


def _student_panel(rng, beta, n_units=6, per_unit_beta=None):
    S = rng.uniform(10_000, 30_000, (n_units, 1)) * np.exp(np.cumsum(rng.normal(0.02, 0.03, (n_units, 15)), axis=1))
    b = beta if per_unit_beta is None else np.asarray(per_unit_beta)[:, None]
    return make_panel(0.01 + b * np.log(S), years=YEARS, student_fte=S), S


def test_planted_pooled_beta(rng):
    panel, S = _student_panel(rng, 0.004)
    res = student_adjust(panel, SPEC)
    assert res.beta == pytest.approx(0.004, abs=1e-8)
    assert res.intercept == pytest.approx(0.01, abs=1e-7)
    np.testing.assert_allclose(res.panel.values, 0.01, atol=1e-8)


def test_per_unit_betas_and_pooled_between(rng):
    # equal pre means of log S across units keep the pooled slope a weighted average of the unit slopes
    base = np.cumsum(rng.normal(0.02, 0.03, 15))
    base -= base[:5].mean()
    S = np.exp(10 + np.vstack([base, base[::-1] - base[::-1][:5].mean()]))
    Y = 0.02 + np.array([[0.01], [-0.006]]) * np.log(S)
    panel = make_panel(Y, years=YEARS, student_fte=S)
    per = student_adjust(panel, SPEC, per_unit=True)
    assert per.beta["T"] == pytest.approx(0.01, abs=1e-8)
    assert per.beta["C01"] == pytest.approx(-0.006, abs=1e-8)
    pooled = student_adjust(panel, SPEC).beta
    assert -0.006 < pooled < 0.01


def test_constant_students_is_rank_deficient():
    S = np.full((3, 15), 20_000.0)
    with pytest.raises(RankDeficient):
        student_adjust(make_panel(np.ones((3, 15)), years=YEARS, student_fte=S), SPEC)


def test_nonpositive_students():
    S = np.full((3, 15), 20_000.0)
    S[1, 3] = 0.0
    with pytest.raises(NonpositiveStudentFTE):
        student_adjust(make_panel(np.ones((3, 15)), years=YEARS, student_fte=S), SPEC)


def test_student_adjust_on_fixture_warns(calibrated, cam_spec):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = student_adjust(calibrated, cam_spec)
    assert any(issubclass(w.category, FirstStageWarning) for w in caught)
    assert res.notes and not res.se_propagated


def test_implied_hire_growth():
    np.testing.assert_allclose(implied_hire_growth([5.0, 5.0, 5.0]), [0.0, 0.0], atol=0)
    g = implied_hire_growth(100 * 1.02 ** np.arange(6))
    np.testing.assert_allclose(g, np.log(1.02), atol=1e-12)
    assert implied_hire_growth({2010: 100.0, 2011: 110.0})[0] == pytest.approx(np.log(1.1), abs=1e-12)
    with pytest.raises(NonpositiveStudentFTE):
        implied_hire_growth([1.0, 0.0])
    with pytest.raises(NonpositiveStudentFTE):
        implied_hire_growth([1.0])

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retirement_eval.cohort import (
    CohortState,
    PolicyScenario,
    compare_scenarios,
    dump_scenario,
    expected_residence,
    initialize_uniform,
    littles_law_check,
    load_scenario,
    parse_age_values,
    run,
    stationary_state,
    steady_state,
    step,
    summarize_window,
)
from retirement_eval.errors import DataError, EmptyWindow, IncompatibleScenarios, UnboundedAges
from retirement_eval.proportionality import QueueParameters, vcr_uplift


@pytest.fixture
def mandate67():
    return PolicyScenario({40: 1.0}, 270, mandatory_age=67, name="m67")


@pytest.fixture
def abolished():
    return PolicyScenario({40: 1.0}, 270, voluntary_retirement_hazard={70: 1.0}, name="abolished")


def test_uniform_initialisation():
    s = initialize_uniform(PolicyScenario({40: 1.0}, 270, mandatory_age=67))
    assert np.all(s.headcount_by_age[40:67] == 10) and s.headcount_by_age.sum() == 270
    assert s.headcount_by_age[:40].sum() == 0 and s.headcount_by_age[67:].sum() == 0
    s = initialize_uniform(PolicyScenario({40: 1.0}, 290, mandatory_age=69))
    assert np.all(s.headcount_by_age[40:69] == 10)
    with pytest.raises(UnboundedAges):
        initialize_uniform(PolicyScenario({40: 1.0}, 270))


def test_uniform_state_is_fixed_point(mandate67):
    state = initialize_uniform(mandate67)
    new, rec = step(state, mandate67)
    assert rec.mandatory == 10 and rec.hires == 10 and rec.vacancies == 10
    assert rec.vcr == pytest.approx(1 / 27, abs=1e-15)
    assert new.year_index == 1 and np.array_equal(new.headcount_by_age, state.headcount_by_age)
    trace = run(mandate67, 50, state)
    assert np.all(trace.column("hires") == 10)
    assert trace.final_state.headcount_by_age.tolist() == state.headcount_by_age.tolist()
    assert littles_law_check(trace) < 1e-9


def test_event_order_mandatory_before_hazards():
    # a hazard at the mandatory age never fires: the mandate removes everyone first
    sc = PolicyScenario({40: 1.0}, 270, mandatory_age=67, voluntary_retirement_hazard={67: 0.5})
    _, rec = step(initialize_uniform(sc), sc)
    assert rec.mandatory == 10 and rec.voluntary == 0


def test_event_order_voluntary_before_attrition():
    sc = PolicyScenario({40: 1.0}, 270, mandatory_age=67, voluntary_retirement_hazard={50: 0.5},
                        attrition_hazard={50: 0.5})
    _, rec = step(initialize_uniform(sc), sc)
    assert rec.voluntary == pytest.approx(5.0) and rec.attrition == pytest.approx(2.5)


def test_refill_at_entry_distribution():
    sc = PolicyScenario({38: 0.25, 42: 0.75}, 100, mandatory_age=60)
    new, rec = step(CohortState(np.r_[np.zeros(59), [100.0]], 0), sc)
    assert rec.hires == 100
    assert new.headcount_by_age[38] == 25 and new.headcount_by_age[42] == 75


def test_raise_mandate_gives_two_zero_years(mandate67):
    raised = mandate67.replace(mandatory_age=69)
    trace = run(mandate67, 12, initialize_uniform(mandate67), changes={6: raised})
    mand = trace.column("mandatory")
    assert mand[:5].tolist() == [10] * 5
    assert mand[5:7].tolist() == [0, 0]
    assert mand[7:].tolist() == [10] * 5


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_raise_by_k_gives_k_zero_years(mandate67, k):
    trace = run(mandate67, 20, initialize_uniform(mandate67), changes={3: mandate67.replace(mandatory_age=67 + k)})
    mand = trace.column("mandatory")
    assert np.count_nonzero(mand == 0) == k
    assert np.all(mand[2:2 + k] == 0)


def test_abolition_converges_from_own_uniform_start(abolished):
    trace = run(abolished, 60, initialize_uniform(abolished))
    assert np.allclose(trace.column("vcr"), 1 / 30, atol=1e-12)
    assert steady_state(abolished).vcr == pytest.approx(1 / 30, abs=1e-12)
    assert littles_law_check(trace, (31, 60)) < 1e-9


def test_abolition_after_mandate_is_periodic(mandate67, abolished):
    trace = run(abolished, 90, initialize_uniform(mandate67))
    hires = trace.column("hires")
    assert hires[:3].tolist() == [0, 0, 0]
    assert np.allclose(hires[3:30], 10)
    np.testing.assert_allclose(hires[30:60], hires[:30])
    s = summarize_window(trace, (31, 60))
    assert s.vcr == pytest.approx(1 / 30, abs=1e-12)
    assert s.littles_residual < 1e-9


def test_relative_uplift_matches_closed_form(mandate67, abolished):
    uplift = steady_state(mandate67).vcr / steady_state(abolished).vcr - 1
    closed = vcr_uplift(QueueParameters(40, 67, 3)).gross_uplift
    assert uplift == pytest.approx(closed, abs=1e-12)


def test_expected_residence():
    assert expected_residence(PolicyScenario({40: 1.0}, 10, mandatory_age=67)) == 27
    sc = PolicyScenario({40: 1.0}, 10, max_age=44)
    assert expected_residence(sc) == 5
    geometric = PolicyScenario({40: 1.0}, 10, attrition_hazard={a: 0.1 for a in range(41, 121)})
    # survival 0.9**k summed over 0..80
    assert expected_residence(geometric) == pytest.approx(sum(0.9 ** k for k in range(81)), rel=1e-12)
    assert isinstance(expected_residence(geometric), float)


def test_growth_compounding():
    sc = PolicyScenario({40: 1.0}, 1669, mandatory_age=67, post_growth_rate=0.01)
    trace = run(sc, 10, initialize_uniform(sc))
    assert trace.records[-1].total_headcount == pytest.approx(1669 * 1.01 ** 10, rel=1e-12)
    assert np.allclose(trace.column("growth_additions")[0], 16.69)


def test_balanced_growth_steady_state():
    # the balanced-growth profile has cohorts shrinking by 1/(1+g) per year of age
    g = 0.02
    sc = PolicyScenario({40: 1.0}, 100, mandatory_age=67, post_growth_rate=g)
    n = np.zeros(121)
    n[40:67] = (1 + g) ** -np.arange(27.0)
    n *= 100 / n.sum()
    state = CohortState(n, 0)
    for _ in range(5):
        new, rec = step(state, sc)
        assert rec.vcr == pytest.approx(steady_state(sc).vcr, rel=1e-12)
        np.testing.assert_allclose(new.headcount_by_age, state.headcount_by_age * (1 + g), rtol=1e-12)
        state = new
    # from the uniform start the damped transient approaches the same value
    trace = run(sc.replace(entry_age_distribution={37: 0.2, 39: 0.3, 40: 0.3, 43: 0.2}), 600)
    target = steady_state(sc.replace(entry_age_distribution={37: 0.2, 39: 0.3, 40: 0.3, 43: 0.2})).vcr
    assert trace.records[-1].vcr == pytest.approx(target, rel=1e-6)


def test_stationary_state_is_fixed_point():
    sc = PolicyScenario({38: 0.5, 42: 0.5}, 200, mandatory_age=67, attrition_hazard={a: 0.02 for a in range(39, 67)})
    s0 = stationary_state(sc)
    s1, rec = step(s0, sc)
    np.testing.assert_allclose(s1.headcount_by_age, s0.headcount_by_age, atol=1e-9)
    assert rec.vcr == pytest.approx(steady_state(sc).vcr, rel=1e-12)


def test_income_weights_do_not_change_dynamics(mandate67):
    w = np.linspace(1.0, 2.0, 121)
    a = run(mandate67, 5, initialize_uniform(mandate67))
    b = run(mandate67, 5, initialize_uniform(mandate67), income_weights=w)
    assert np.array_equal(a.column("hires"), b.column("hires"))
    assert b.records[0].weighted_exits == pytest.approx(10 * w[67])
    assert a.records[0].weighted_exits is None


def test_determinism(bundled_scenarios):
    sc = bundled_scenarios["abolished_illustrative"]
    buf1, buf2 = io.StringIO(), io.StringIO()
    run(sc, 40).to_csv(buf1)
    run(sc, 40).to_csv(buf2)
    assert buf1.getvalue() == buf2.getvalue()


def test_littles_law_errors(mandate67):
    trace = run(mandate67, 5)
    with pytest.raises(EmptyWindow):
        littles_law_check(trace, (10, 20))


def test_compare(mandate67, abolished):
    cmp = compare_scenarios(mandate67, abolished, 60)
    assert cmp.decade_means[0] == 3.0
    assert cmp.steady_state_hires_a == pytest.approx(10) and cmp.steady_state_hires_b == pytest.approx(9)
    assert cmp.steady_state_delta == pytest.approx(1.0)
    assert abs(cmp.decade_means[0]) > abs(cmp.steady_state_delta)
    same = compare_scenarios(mandate67, mandate67, 30)
    assert np.all(same.difference == 0)


def test_compare_incompatible(mandate67):
    with pytest.raises(IncompatibleScenarios):
        compare_scenarios(mandate67, mandate67.replace(total_posts=300), 10)
    with pytest.raises(IncompatibleScenarios):
        compare_scenarios(mandate67, mandate67.replace(entry_age_distribution={41: 1.0}), 10)


@pytest.mark.parametrize("kwargs", [
    dict(entry_age_distribution={40: 0.5}),
    dict(entry_age_distribution={}),
    dict(voluntary_retirement_hazard={50: 1.5}),
    dict(mandatory_age=30),
    dict(total_posts=0),
    dict(post_growth_rate=-1.0),
])
def test_scenario_validation(kwargs):
    base = dict(entry_age_distribution={40: 1.0}, total_posts=10, mandatory_age=67)
    with pytest.raises(DataError):
        PolicyScenario(**{**base, **kwargs})


def test_scenario_file_round_trip(bundled_scenarios):
    for sc in bundled_scenarios.values():
        again = load_scenario(io.StringIO(dump_scenario(sc)))
        assert dump_scenario(again) == dump_scenario(sc)
        assert again.entry_age_distribution == sc.entry_age_distribution


def test_scenario_file_errors():
    with pytest.raises(DataError):
        load_scenario(io.StringIO("[scenario]\nentry_ages = 40:1\n"))
    with pytest.raises(DataError):
        load_scenario(io.StringIO("[scenario]\nentry_ages = 40:1\ntotal_posts = 1\ncolour = red\n"))
    assert parse_age_values("55-57:0.1, 60") == {55: 0.1, 56: 0.1, 57: 0.1, 60: 1.0}
    with pytest.raises(DataError):
        parse_age_values("50:0.1, 50:0.2")


hazard = st.floats(0.0, 0.3)


@settings(max_examples=40, deadline=None)
@given(v=hazard, a=hazard, g=st.floats(-0.05, 0.05), m=st.integers(55, 75), years=st.integers(1, 40))
def test_conservation(v, a, g, m, years):
    sc = PolicyScenario({35: 0.5, 45: 0.5}, 500, mandatory_age=m,
                        voluntary_retirement_hazard={x: v for x in range(50, 80)},
                        attrition_hazard={x: a for x in range(36, 80)}, post_growth_rate=g)
    state = initialize_uniform(sc)
    for _ in range(years):
        before = state.total
        state, rec = step(state, sc)
        survivors = state.total - rec.hires
        assert survivors + rec.vacancies == pytest.approx(before, rel=1e-12)
        assert rec.hires == pytest.approx(rec.vacancies + rec.growth_additions, rel=1e-12, abs=1e-12)
        assert np.all(state.headcount_by_age >= 0)
    assert state.total == pytest.approx(500 * (1 + g) ** years, rel=1e-9)

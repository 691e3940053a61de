import pytest

from app.core.index_core import ProbTable
from app.errors import ConfigError, InvalidTable
from app.sim.approximation import approximation_study, expected_counts
from app.sim.trials import (
    Scenario,
    derive_design,
    operating_characteristics,
    predictive_for,
    run_scenarios,
    simulate_trial,
)
from app.utils.rng import STREAM_TRIAL, make_rng

GOOD = Scenario(label="good", p_true=[0.05, 0.90, 0.01, 0.04])
NULL = Scenario(label="null", p_true=[0.15, 0.30, 0.15, 0.40])
BAD = Scenario(label="bad", p_true=[0.30, 0.05, 0.60, 0.05])


def test_scenario_validation():
    assert NULL.p_true == ProbTable.of((0.15, 0.30, 0.15, 0.40))
    with pytest.raises(InvalidTable):
        Scenario(p_true=[0.5, 0.5, 0.5, 0.5])


def test_simulate_trial_is_reproducible(small_design):
    predictive = predictive_for(small_design)
    a = simulate_trial(small_design, NULL, make_rng(5, STREAM_TRIAL, 0), predictive)
    b = simulate_trial(small_design, NULL, make_rng(5, STREAM_TRIAL, 0), predictive)
    assert a == b
    assert small_design.n_min <= a.sample_size <= small_design.n_max
    if not a.stopped_early:
        assert a.sample_size == small_design.n_max


def test_operating_characteristics_bounds(small_design):
    oc = operating_characteristics(small_design, NULL, n_trials=200, seed=1)
    assert 0.0 <= oc.pet <= 1.0
    # θ_U = 1: заявить об эффективности может только дошедшее до конца испытание
    assert oc.prn <= 1.0 - oc.pet + 1e-12
    assert small_design.n_min <= oc.ass <= small_design.n_max
    assert oc.n_trials == 200


def test_extreme_scenarios(small_design):
    predictive = predictive_for(small_design)
    good = operating_characteristics(small_design, GOOD, 200, seed=2, predictive=predictive)
    bad = operating_characteristics(small_design, BAD, 200, seed=2, predictive=predictive)
    assert good.prn > 0.8
    assert bad.prn < 0.1
    assert bad.pet > 0.5
    assert bad.ass < good.ass


def test_results_do_not_depend_on_workers(small_design):
    single = operating_characteristics(small_design, NULL, 600, seed=3, workers=1)
    threaded = operating_characteristics(small_design, NULL, 600, seed=3, workers=3)
    assert single == threaded


def test_zero_trials_rejected(small_design):
    with pytest.raises(ConfigError):
        operating_characteristics(small_design, NULL, 0, seed=1)


def test_run_scenarios_rows_and_cohort_ordering(small_design):
    results = run_scenarios(small_design, [NULL, GOOD], cohorts=[1, 5], n_trials=150, seed=4)
    assert [(r.scenario.label, r.cohort) for r in results] == [
        ("null", 1),
        ("null", 5),
        ("good", 1),
        ("good", 5),
    ]
    # те же потоки: с когортой 1 анализов больше, поэтому остановок не меньше
    for one, five in ((results[0], results[1]), (results[2], results[3])):
        assert one.oc.pet >= five.oc.pet
        assert one.oc.ass <= five.oc.ass
        assert one.oc.prn <= five.oc.prn

    row = results[0].as_dict()
    assert list(row) == ["scenario", "p11", "p12", "p21", "p22", "cohort", "PET", "PRN", "ASS", "n_trials"]


def test_derive_design_revalidates(small_design):
    assert derive_design(small_design, cohort=5).cohort == 5
    with pytest.raises(ConfigError):
        derive_design(small_design, lam=1.5)


def test_expected_counts_keep_total():
    p = ProbTable.of((0.15, 0.30, 0.15, 0.40))
    assert expected_counts(p, 20).cells == (3, 6, 3, 8)
    assert expected_counts(p, 30).cells == (5, 9, 4, 12)
    for n in (1, 7, 33, 81):
        assert expected_counts(p, n).total() == n


def test_approximation_study_rows(small_design):
    rows = approximation_study(
        small_design,
        hypotheses=[NULL],
        p_S=ProbTable.of((0.15, 0.30, 0.15, 0.40)),
        alpha_S_totals=[100.0],
        current_sizes=[20],
        future_size=5,
        n_sims=3_000,
        seed=6,
    )
    assert len(rows) == 1
    row = rows[0]
    assert row.n == 20
    assert row.x.cells == (3, 6, 3, 8)
    assert 0.0 <= row.pp_asymptotic <= 1.0
    assert abs(row.difference) < 0.1
    assert row.as_dict()["difference"] == row.difference


@pytest.mark.slow
@pytest.mark.parametrize(
    "p_true, pet, prn, ass",
    [
        ([0.15, 0.30, 0.15, 0.40], 0.8287, 0.0531, 27.3005),
        ([0.15, 0.15, 0.15, 0.55], 0.9440, 0.0082, 22.4240),
        ([0.10, 0.50, 0.05, 0.35], 0.0745, 0.8533, 39.3100),
    ],
)
def test_reference_operating_characteristics(simulation_design, p_true, pet, prn, ass):
    design = derive_design(simulation_design, cohort=5)
    oc = operating_characteristics(design, Scenario(p_true=p_true), 10_000, seed=2021, workers=4)
    assert oc.pet == pytest.approx(pet, abs=0.02)
    assert oc.prn == pytest.approx(prn, abs=0.02)
    assert oc.ass == pytest.approx(ass, abs=0.7)

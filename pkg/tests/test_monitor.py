from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from app.core.dirichlet import CountTable, DirichletParams, outcome_array
from app.core.inference import PosteriorSpec, b_asymptotic, b_montecarlo
from app.core.monitor import (
    ClaimKind,
    DecisionKind,
    DesignConfig,
    Method,
    PosteriorCache,
    PredictiveCache,
    final_analysis,
    interim_decision,
    predictive_probability,
)
from app.errors import ConfigError, TrialComplete, WrongSampleSize

# y -> (f_m(y), B(Y), индикатор) для α_S = (10, 9, 11, 30), x = (5, 10, 0, 10), λ = 0.8
DETAIL_GOLDEN = {
    (5, 0, 0, 0): (0.0010619, 0.5239, 0),
    (4, 1, 0, 0): (0.0058683, 0.6415, 0),
    (3, 2, 0, 0): (0.0158789, 0.7490, 0),
    (2, 3, 0, 0): (0.0264649, 0.8388, 1),
    (1, 4, 0, 0): (0.0274828, 0.9069, 1),
    (0, 5, 0, 0): (0.0144909, 0.9530, 1),
    (4, 0, 1, 0): (0.0002794, 0.5235, 0),
    (3, 1, 1, 0): (0.0013808, 0.6412, 0),
    (2, 2, 1, 0): (0.0031758, 0.7487, 0),
    (1, 3, 1, 0): (0.0040715, 0.8386, 1),
    (0, 4, 1, 0): (0.0024984, 0.9067, 1),
    (3, 0, 2, 0): (0.0000986, 0.5227, 0),
    (2, 1, 2, 0): (0.0004142, 0.6403, 0),
    (1, 2, 2, 0): (0.0007329, 0.7479, 0),
    (0, 3, 2, 0): (0.0005552, 0.8378, 1),
    (2, 0, 3, 0): (0.0000329, 0.5212, 0),
    (1, 1, 3, 0): (0.0001062, 0.6387, 0),
    (0, 2, 3, 0): (0.0001110, 0.7462, 0),
    (1, 0, 4, 0): (0.0000089, 0.5187, 0),
    (0, 1, 4, 0): (0.0000169, 0.6359, 0),
    (0, 0, 5, 0): (0.0000014, 0.5148, 0),
    (4, 0, 0, 1): (0.0058683, 0.6414, 0),
    (3, 1, 0, 1): (0.0289963, 0.7489, 0),
    (2, 2, 0, 1): (0.0666916, 0.8388, 1),
    (1, 3, 0, 1): (0.0855020, 0.9069, 1),
    (0, 4, 0, 1): (0.0524672, 0.9530, 1),
    (3, 0, 1, 1): (0.0013808, 0.6408, 0),
    (2, 1, 1, 1): (0.0057993, 0.7484, 0),
    (1, 2, 1, 1): (0.0102602, 0.8384, 1),
    (0, 3, 1, 1): (0.0077729, 0.9066, 1),
    (2, 0, 2, 1): (0.0004142, 0.6393, 0),
    (1, 1, 2, 1): (0.0013383, 0.7470, 0),
    (0, 2, 2, 1): (0.0013991, 0.8370, 1),
    (1, 0, 3, 1): (0.0001062, 0.6365, 0),
    (0, 1, 3, 1): (0.0002028, 0.7442, 0),
    (0, 0, 4, 1): (0.0000169, 0.6320, 0),
    (3, 0, 0, 2): (0.0158789, 0.7489, 0),
    (2, 1, 0, 2): (0.0666916, 0.8388, 1),
    (1, 2, 0, 2): (0.1179928, 0.9069, 1),
    (0, 3, 0, 2): (0.0893885, 0.9530, 1),
    (2, 0, 1, 2): (0.0031758, 0.7479, 0),
    (1, 1, 1, 2): (0.0102602, 0.8380, 1),
    (0, 2, 1, 2): (0.0107266, 0.9063, 1),
    (1, 0, 2, 2): (0.0007329, 0.7454, 0),
    (0, 1, 2, 2): (0.0013991, 0.8357, 1),
    (0, 0, 3, 2): (0.0001110, 0.7408, 0),
    (2, 0, 0, 3): (0.0264649, 0.8388, 1),
    (1, 1, 0, 3): (0.0855020, 0.9069, 1),
    (0, 2, 0, 3): (0.0893885, 0.9529, 1),
    (1, 0, 1, 3): (0.0040715, 0.8373, 1),
    (0, 1, 1, 3): (0.0077729, 0.9058, 1),
    (0, 0, 2, 3): (0.0005552, 0.8334, 1),
    (1, 0, 0, 4): (0.0274828, 0.9068, 1),
    (0, 1, 0, 4): (0.0524672, 0.9529, 1),
    (0, 0, 1, 4): (0.0024984, 0.9048, 1),
    (0, 0, 0, 5): (0.0144909, 0.9529, 1),
}


def test_detail_rows_match_golden(example_design, current_a):
    result = predictive_probability(example_design, current_a)
    assert len(result.rows) == 56

    by_key = {row.y.cells: row for row in result.rows}
    assert set(by_key) == set(DETAIL_GOLDEN)
    for key, (f_m, b, indicator) in DETAIL_GOLDEN.items():
        row = by_key[key]
        assert row.f_m == pytest.approx(f_m, abs=1e-7), key
        assert row.b == pytest.approx(b, abs=1e-3), key
        assert row.indicator == indicator, key

    assert sum(row.indicator for row in result.rows) == 28
    assert result.pp == pytest.approx(0.907, abs=1e-3)


def test_pp_for_second_interim_table(example_design, current_b):
    assert predictive_probability(example_design, current_b).pp == pytest.approx(0.732, abs=2e-3)


def test_pp_montecarlo_route(example_design, current_a):
    design = example_design.model_copy(update={"method": Method.MONTECARLO, "n_sims": 10_000, "seed": 17})
    assert predictive_probability(design, current_a).pp == pytest.approx(0.907, abs=0.02)


def test_detail_row_serialization(example_design, current_a):
    row = predictive_probability(example_design, current_a).rows[0]
    assert list(row.as_dict()) == ["y11", "y12", "y21", "y22", "f_m", "B", "indicator"]


def test_pp_at_maximum_sample_is_final_test(example_design):
    x_full = CountTable.of((5, 13, 2, 10))
    result = predictive_probability(example_design, x_full)
    assert len(result.rows) == 1
    assert result.rows[0].y.cells == (0, 0, 0, 0)
    final = final_analysis(example_design, x_full)
    assert result.pp == (1.0 if final.claim is ClaimKind.CLAIM_EFFECTIVE else 0.0)


def test_pp_past_maximum_sample(example_design):
    with pytest.raises(TrialComplete):
        predictive_probability(example_design, CountTable.of((5, 13, 2, 11)))


def test_interim_decision_thresholds(example_design):
    assert interim_decision(example_design, 0.0005).kind is DecisionKind.STOP_FUTILITY
    assert interim_decision(example_design, 0.001).kind is DecisionKind.CONTINUE
    # θ_U = 1: остановки ради успеха нет
    assert interim_decision(example_design, 1.0).kind is DecisionKind.CONTINUE

    design = example_design.model_copy(update={"theta_U": 0.9})
    decision = interim_decision(design, 0.95)
    assert decision.kind is DecisionKind.STOP_SUCCESS
    assert decision.stops

    with pytest.raises(ValueError):
        interim_decision(example_design, 1.2)


def test_final_analysis(example_design):
    final = final_analysis(example_design, CountTable.of((5, 13, 2, 10)))
    assert final.claim is ClaimKind.CLAIM_EFFECTIVE
    assert final.b == pytest.approx(0.8378, abs=1e-3)

    final = final_analysis(example_design, CountTable.of((10, 10, 0, 10)))
    assert final.claim is ClaimKind.CLAIM_NOT_EFFECTIVE

    with pytest.raises(WrongSampleSize):
        final_analysis(example_design, CountTable.of((5, 10, 0, 10)))


def test_posterior_cache_matches_direct_computation(example_design):
    cache = PosteriorCache(example_design)
    z = CountTable.of((1, 14, 5, 10))
    direct = b_asymptotic(
        PosteriorSpec(
            alpha_E=example_design.alpha_E,
            alpha_S=example_design.alpha_S,
            x=z,
            y=CountTable.zeros(),
            n_max=30,
        )
    )
    assert cache.get(z) == direct
    assert cache.get(z) == direct
    assert cache.computed == 1

    with pytest.raises(WrongSampleSize):
        cache.get(CountTable.of((1, 1, 1, 1)))


def test_predictive_cache_matches_pp(example_design, current_a, current_b):
    cache = PredictiveCache(PosteriorCache(example_design), example_design.lam)
    assert cache.pp(current_a.as_array()) == predictive_probability(example_design, current_a).pp
    assert cache.pp(current_b.as_array()) == predictive_probability(example_design, current_b).pp


def test_pp_is_nonincreasing_in_lambda(example_design, current_a, current_b):
    posterior = PosteriorCache(example_design)
    lambdas = [0.05, 0.5, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99]
    for x in (current_a, current_b):
        values = [PredictiveCache(posterior, lam).pp(x.as_array()) for lam in lambdas]
        assert all(a >= b for a, b in zip(values, values[1:]))
    assert PredictiveCache(posterior, 0.05).pp(current_a.as_array()) == pytest.approx(1.0, abs=1e-10)


def test_posterior_cache_computes_outside_lock(example_design, monkeypatch):
    cache = PosteriorCache(example_design)
    original = cache._compute
    calls = []

    def compute(z):
        assert not cache._lock.locked()
        calls.append(z)
        return original(z)

    monkeypatch.setattr(cache, "_compute", compute)
    tables = outcome_array(5) + np.array([5, 10, 0, 10])
    values = cache.lookup(tables)
    assert len(calls) == 56
    assert cache.lookup(tables).tolist() == values.tolist()
    assert len(calls) == 56


def test_posterior_cache_concurrent_lookups(example_design):
    tables = outcome_array(30)[::7]
    serial = PosteriorCache(example_design).lookup(tables)

    shared = PosteriorCache(example_design)
    chunks = [tables[i::4] for i in range(4)] * 3
    with ThreadPoolExecutor(max_workers=4) as pool:
        list(pool.map(shared.lookup, chunks))

    assert shared.lookup(tables).tolist() == serial.tolist()
    # гонка может посчитать таблицу дважды, но записывает её один раз
    assert shared.computed == len(tables)


@pytest.mark.slow
def test_montecarlo_agrees_with_asymptotic_on_all_outcomes(example_design, current_a):
    for key in DETAIL_GOLDEN:
        spec = PosteriorSpec(
            alpha_E=example_design.alpha_E,
            alpha_S=example_design.alpha_S,
            x=current_a,
            y=CountTable.of(key),
            n_max=example_design.n_max,
        )
        mc = b_montecarlo(spec, 1_000_000, seed=2021, workers=4)
        assert mc == pytest.approx(b_asymptotic(spec), abs=0.02), key


def test_design_config_from_json_shape():
    cfg = DesignConfig.model_validate(
        {
            "alpha_S": [30, 60, 30, 80],
            "n_min": 10,
            "n_max": 40,
            "cohort": 5,
            "lambda": 0.8,
            "theta_L": 0.001,
        }
    )
    assert cfg.alpha_E == DirichletParams.jeffreys()
    assert cfg.lam == 0.8
    assert cfg.look_schedule() == [10, 15, 20, 25, 30, 35]


def test_look_schedule_cohort_one(simulation_design):
    looks = simulation_design.look_schedule()
    assert looks[0] == 10
    assert looks[-1] == 39
    assert len(looks) == 30


@pytest.mark.parametrize(
    "changes",
    [
        {"lambda": 1.0},
        {"theta_L": 0.0},
        {"theta_L": 0.5, "theta_U": 0.4},
        {"n_min": 50},
        {"cohort": 0},
    ],
)
def test_design_config_rejects_bad_values(changes):
    data = {
        "alpha_S": [10, 9, 11, 30],
        "n_min": 10,
        "n_max": 30,
        "lambda": 0.8,
        "theta_L": 0.001,
    }
    data.update(changes)
    with pytest.raises(ConfigError):
        DesignConfig.model_validate(data)

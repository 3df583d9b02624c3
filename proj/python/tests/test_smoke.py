import json
import math

import pytest

import rspi


def test_leqg_closed_form():
    spec = rspi.LeqgSpec()
    assert rspi.leqg_control(spec, 0.0, 1.0) == pytest.approx(-0.5)
    spec.theta = 2.0
    assert not rspi.leqg_wellposed(spec, 0.0)
    assert rspi.leqg_wellposed(spec, 0.5)
    with pytest.raises(rspi.IllPosedError):
        rspi.leqg_control(spec, 0.0, 1.0)


def test_risk_params():
    p = rspi.make_risk_params(1.0, 0.5)
    assert p.lambda_theta == pytest.approx(2.0)
    assert rspi.special_risk_params(1.0).is_special
    with pytest.raises(rspi.ConfigError):
        rspi.make_risk_params(0.0, 1.0)


def test_monte_carlo_matches_closed_form():
    problem = rspi.ControlProblem.scalar(1.0, 1.0, rspi.EndCost.quadratic(1.0, 0.0), 1.0)
    params = rspi.make_risk_params(1.0, 0.0)
    z = rspi.estimate_log_z(problem, params, 0.0, 0.0, n_samples=20000, dt=0.01)
    assert abs(z.log_z + 0.5 * math.log(2.0)) <= 3 * z.std_err_log_z
    u = rspi.estimate_control(problem, params, 0.0, 1.0, n_samples=20000, dt=0.01)
    assert abs(u.control[0] + 0.5) <= 3 * u.std_err[0]


def test_mixture_control_and_zero_crossings():
    regions = [rspi.Region(-1.01, -0.99, -10.0), rspi.Region(0.99, 1.01, -10.0)]
    end_cost = rspi.EndCost.targets_threats(regions)
    params = rspi.risk_params_from_lambda_theta(1.0, 1.0)
    zeros = rspi.find_zero_crossings(
        lambda x: rspi.mixture_control(0.5, x, end_cost, params, 1.0, 1.0, 1.0, 1.0), -3.0, 3.0
    )
    assert len(zeros) == 3
    assert zeros[2] == pytest.approx(0.9575, abs=0.05)


def test_risk_evaluation():
    costs = [1.0, 2.0, 4.0, 8.0]
    values = [rspi.empirical_value(costs, t) for t in (-1.0, 0.0, 1.0)]
    assert values == sorted(values)
    verdict, _, margins = rspi.monotonicity_scan(costs, [-1.0, 0.0, 1.0])
    assert verdict == "strictly_increasing"
    assert all(m > 0 for m in margins)
    stats = rspi.cost_statistics(list(range(1, 101)), [0.99], 10)
    assert stats["median"] == pytest.approx(50.5)
    assert stats["quantiles"][0][1] == pytest.approx(99.01)


def test_run_experiment_is_deterministic():
    cfg = json.dumps({"experiment": "fig4", "n_runs": 20, "dt": 0.02})
    a = rspi.run_experiment(cfg, seed=5, workers=1)
    b = rspi.run_experiment(cfg, seed=5, workers=3)
    assert a == b
    assert a[0].splitlines()[4] == "theta,run_index,cost"
    with pytest.raises(rspi.ConfigError):
        rspi.run_experiment(json.dumps({"experiment": "fig2", "nope": 1}))

import math

import numpy as np
import pytest

import shipcc


def test_layout_constants():
    assert (shipcc.NX, shipcc.NZ, shipcc.NU, shipcc.NY) == (103, 7, 3, 2)


def test_engine_side_oracles():
    co2, F_G = shipcc.flue_gas_rates(1.0)
    assert co2 == pytest.approx(3.311776318900916, rel=1e-10)
    assert F_G == pytest.approx(3.311776318900916 / 0.05462, rel=1e-10)
    Q_rec, Q_turbine, Q_reb = shipcc.heat_supply(10.0, 0.25)
    assert Q_rec == pytest.approx(2310.0, rel=1e-10)
    assert Q_turbine == pytest.approx(7982.102786825913, rel=1e-10)
    assert Q_reb == pytest.approx(Q_rec + Q_turbine, rel=1e-12)
    assert shipcc.seawater_outlet_temperature(330.0, 0.03, 0.03) - 330.0 == pytest.approx(-16.076923076923077)


def test_costs():
    u = shipcc.ControlInput(0.03, 0.25, 0.03)
    assert shipcc.economic_cost(shipcc.PlantOutput(0.4, 390.0), u) == pytest.approx(0.3213)
    assert shipcc.economic_cost(shipcc.PlantOutput(0.6, 390.0), u) == pytest.approx(0.3263)
    tc = shipcc.TrackingConfig()
    tc.y_s = shipcc.PlantOutput(0.8, 390.0)
    tc.u_s = u
    assert shipcc.tracking_cost(tc.y_s, u, tc) == 0.0
    assert shipcc.tracking_cost(shipcc.PlantOutput(0.8, 391.0), u, tc) == pytest.approx(10.0)


def test_domain_errors_map_to_python():
    with pytest.raises(shipcc.InputDomainError):
        shipcc.flue_gas_rates(1.5)
    with pytest.raises(shipcc.Error):
        shipcc.flue_gas_rates(-0.1)
    with pytest.raises(shipcc.ConfigError):
        shipcc.parse_config("not_a_key: 1")


@pytest.fixture(scope="module")
def steady():
    return shipcc.nominal_steady_state(shipcc.PlantParameters.truth())


def test_steady_state_and_step(steady):
    truth = shipcc.PlantParameters.truth()
    assert steady.x.shape == (103,)
    assert steady.max_rate < 1e-6
    z = shipcc.consistent_initialize(steady.x, steady.u, steady.p, truth)
    xdot, g = shipcc.plant_dae(steady.x, z, steady.u, steady.p, truth)
    assert np.max(np.abs(g)) <= 1e-8
    x1, z1 = shipcc.dae_step(steady.x, z, steady.u, steady.p, truth)
    assert np.max(np.abs(x1 - steady.x)) < 1e-6
    y = shipcc.outputs(x1, steady.p)
    assert 0.0 < shipcc.capture_rate(y, steady.p) < 1.0


def test_open_loop_simulation(steady):
    imperfect = shipcc.PlantParameters.imperfect()
    u = [shipcc.ControlInput(0.035, 0.28, 0.03)] * 5
    p = [shipcc.Disturbance(0.5)] * 5
    t = shipcc.simulate_open_loop(steady.x, u, p, imperfect)
    assert t.steps() == 5
    assert t.X.shape == (6, 103)
    assert t.Z.shape == (6, 7)
    assert np.all(np.isfinite(t.X))
    again = shipcc.simulate_open_loop(steady.x, u, p, imperfect)
    assert np.array_equal(t.X, again.X)


def test_config_round_trip(tmp_path):
    cfg = shipcc.parse_config("seed: 4\nsimulate: {samples: 3}\nsettle_samples: 50\n")
    h = cfg.hash()
    cfg.workers = 2
    cfg.output_dir = str(tmp_path)
    assert cfg.hash() == h
    assert shipcc.parse_config(cfg.dump()).hash() == h
    run = shipcc.simulate(cfg)
    assert run.endswith("simulate-" + h)
    with open(f"{run}/trajectory.csv") as f:
        assert len(f.readlines()) == 3 + 2

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from dpffd.errors import ConfigError
from dpffd.scenario import FaultConfig, NodeConfig, Scenario, nine_tank_scenario


def test_defaults_match_benchmark_setup():
    s = nine_tank_scenario()
    assert s.plant.tank_area == 0.0154 and s.plant.pipe_area == 2e-5 and s.plant.gravity == 9.81
    assert s.plant.sampling_period == 0.1 and s.plant.initial_levels == [2.0] * 9
    assert [(f.tank, f.onset_step) for f in s.faults] == [(4, 2000), (5, 2500), (7, 2900)]
    assert [n.tanks for n in s.nodes] == [[1, 2, 3, 4, 5, 6], [4, 5, 6], [4, 5, 6, 7, 8, 9]]
    assert s.filter.n_particles == 1000 and s.filter.alpha == 0.9
    s.validate()


def test_yaml_round_trip_default():
    s = nine_tank_scenario()
    assert Scenario.loads(s.dumps()) == s


@settings(max_examples=30)
@given(hst.integers(0, 2**64 - 1), hst.integers(10, 5000), hst.floats(1e-6, 1.0), hst.sampled_from([1, 2, 3]))
def test_yaml_round_trip_property(seed, steps, var, n_nodes):
    s = Scenario(seed=seed, duration_steps=steps, faults=[FaultConfig("f", 4, steps - 1, "incipient", 3.0)],
                 nodes=[NodeConfig(i + 1, [i + 1, 9], var) for i in range(n_nodes)])
    s.filter.consensus_tolerance = var
    assert Scenario.loads(s.dumps()) == s


def test_numeric_strings_are_coerced():
    s = Scenario.loads("filter:\n  consensus_tolerance: 1e-12\n")
    assert s.filter.consensus_tolerance == 1e-12


def test_save_load(tmp_path):
    s = nine_tank_scenario(seed=99)
    s.save(tmp_path / "s.yaml")
    assert Scenario.load(tmp_path / "s.yaml") == s


@pytest.mark.parametrize("text, field", [
    ("duration_steps: 100\n", "faults[0].onset_step"),
    ("faults:\n  - {name: a, tank: 12, onset_step: 1}\n", "faults[0].tank"),
    ("nodes:\n  - {id: 1, tanks: [0]}\n", "nodes[0].tanks"),
    ("topology: [[1, 2]]\n", "topology"),
    ("filter:\n  alpha: 1.5\n", "filter.alpha"),
    ("filter:\n  particles: 5\n", "filter.particles"),
    ("bogus: 1\n", "bogus"),
    ("seed: -1\n", "seed"),
    ("plant:\n  tank_area: abc\n", "plant.tank_area"),
])
def test_validation_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        Scenario.loads(text).validate()
    assert field in [f for f, _ in exc.value.errors]


def test_validation_collects_every_error():
    s = Scenario(duration_steps=10)
    s.filter.alpha = 0.0
    with pytest.raises(ConfigError) as exc:
        s.validate()
    fields = [f for f, _ in exc.value.errors]
    assert "filter.alpha" in fields and sum(f.endswith("onset_step") for f in fields) == 3


def test_bad_yaml():
    with pytest.raises(ConfigError):
        Scenario.loads("a: [1, 2\n")
    with pytest.raises(ConfigError):
        Scenario.loads("- 1\n- 2\n")


def test_custom_topology_and_pipes():
    s = Scenario.loads("topology: [[1, 2], [2, 3]]\nplant:\n  pipes: [[1, 2], [2, 3]]\n")
    s.validate()
    assert s.comm_topology().edges == {(0, 1), (1, 2)}
    assert s.tank_params().pipes == ((0, 1), (1, 2))

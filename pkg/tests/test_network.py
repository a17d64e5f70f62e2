import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from dpffd.consensus import ConsensusConfig, Topology, metropolis_weights
from dpffd.errors import ContractViolation
from dpffd.experiment import CENTRALIZED, DISTRIBUTED, build_filter, run_experiment
from dpffd.faults import AugmentedState
from dpffd.network import (AlarmEvent, CentralizedFilter, DetectorNode, DistributedFilter, FilterConfig, check_alarm,
                           distributed_weight_update, local_log_likelihood, stacked_node)
from dpffd.pf import weights_from_log
from dpffd.scenario import FaultConfig, NodeConfig, Scenario
from dpffd.streams import RandomStreams
from dpffd.tanks import TankParams, filter_model, leak_mode


def small_scenario(steps=80, particles=200, **filter_kw):
    s = Scenario(seed=11, duration_steps=steps,
                 faults=[FaultConfig("leak-tank-4", 4, steps // 2), FaultConfig("leak-tank-5", 5, steps // 2)])
    s.filter.n_particles = particles
    for k, v in filter_kw.items():
        setattr(s.filter, k, v)
    return s


def oracle_loglik(z, x, var):
    r = np.asarray(z) - np.asarray(x)
    return float(-0.5 * len(r) * math.log(2 * math.pi * var) - 0.5 * np.dot(r, r) / var)


def test_loglik_zero_residual():
    node = DetectorNode(2, (3, 4, 5), 0.2)
    x = np.arange(1.0, 10.0)
    val = local_log_likelihood(node, x[[3, 4, 5]], x)
    assert val == pytest.approx(-1.5 * math.log(0.4 * math.pi), rel=1e-14)


def test_loglik_residual_of_two_a_costs_one():
    node = DetectorNode(1, (0, 1, 2, 3), 0.2)
    x = np.zeros(9)
    peak = local_log_likelihood(node, np.zeros(4), x)
    z = np.array([math.sqrt(0.4), 0.0, 0.0, 0.0])
    assert local_log_likelihood(node, z, x) == pytest.approx(peak - 1.0, rel=1e-14)
    quad = peak - local_log_likelihood(node, z, x)
    assert peak - local_log_likelihood(node, 2 * z, x) == pytest.approx(4 * quad, rel=1e-13)


@settings(max_examples=50)
@given(hst.integers(0, 2**32 - 1))
def test_batch_loglik_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    node = DetectorNode(3, (3, 4, 5, 6, 7, 8), 0.2)
    x = rng.uniform(0, 5, (20, 9))
    z = rng.uniform(0, 5, 6)
    got = node.log_likelihood(z, x)
    for i in range(20):
        assert got[i] == pytest.approx(oracle_loglik(z, x[i, 3:], 0.2), rel=1e-12)


def test_loglik_ignores_binary_part():
    node = DetectorNode(1, (0,), 0.2)
    a = AugmentedState.from_flags([1.0], [False])
    b = AugmentedState.from_flags([1.0], [True])
    assert local_log_likelihood(node, [0.5], a) == local_log_likelihood(node, [0.5], b)


def test_loglik_wrong_measurement_shape():
    with pytest.raises(ContractViolation):
        DetectorNode(1, (0, 1), 0.2).log_likelihood(np.zeros(3), np.zeros((2, 9)))


def test_weight_update_single_node_is_bootstrap():
    rng = np.random.default_rng(0)
    ll = rng.normal(size=50)
    prior = np.full(50, -math.log(50))
    out = distributed_weight_update(ll[None, :], prior, np.array([[1.0]]))
    assert np.array_equal(out[0], weights_from_log(prior + ll))


def test_weight_update_complete_graph_matches_stacked():
    rng = np.random.default_rng(1)
    nodes = [DetectorNode(1, (0, 1, 2, 3, 4, 5), 0.2), DetectorNode(2, (3, 4, 5), 0.2),
             DetectorNode(3, (3, 4, 5, 6, 7, 8), 0.2)]
    x = rng.uniform(1, 3, (300, 9))
    zs = [rng.uniform(1, 3, n.n_z) for n in nodes]
    local = np.vstack([n.log_likelihood(z, x) for n, z in zip(nodes, zs)])
    prior = np.full(300, -math.log(300))
    top = Topology.complete(3)
    out = distributed_weight_update(local, prior, metropolis_weights(top), ConsensusConfig(50, 1e-12), top)
    central = weights_from_log(prior + stacked_node(nodes).log_likelihood(np.concatenate(zs), x))
    for i in range(3):
        assert np.all(np.abs(out[i] - central) <= 1e-9 * central)


def test_weight_update_identical_vectors_is_power_n():
    rng = np.random.default_rng(2)
    ll = rng.normal(size=40)
    prior = np.full(40, -math.log(40))
    top = Topology.path(3)
    out = distributed_weight_update(np.vstack([ll] * 3), prior, metropolis_weights(top), topology=top)
    single = weights_from_log(prior + ll)
    expected = single ** 3 / np.sum(single ** 3)
    assert np.allclose(out, expected, rtol=1e-12, atol=0)


@pytest.mark.parametrize("prob, expected", [(0.0, False), (1.0, True), (0.9, True), (0.8999, False)])
def test_check_alarm(prob, expected):
    assert check_alarm(prob, 0.9) is expected


def test_filter_step_contracts():
    s = small_scenario(steps=30)
    filt = build_filter(s, DISTRIBUTED)
    from dpffd.experiment import simulate_truth
    _, meas = simulate_truth(s)
    for k in range(30):
        res = filt.step(None, [m[k] for m in meas])
        assert res.weights.shape == (3, 200)
        assert np.all(np.abs(res.weights.sum(axis=1) - 1.0) < 1e-12)
        assert np.all(res.estimates == res.estimates[0])
        assert np.all(res.failure_probabilities == res.failure_probabilities[0])
        assert np.all((0 <= res.failure_probabilities) & (res.failure_probabilities <= 1))


def test_node_particles_stay_synchronized():
    s = small_scenario(steps=40)
    filt = build_filter(s, DISTRIBUTED)
    from dpffd.experiment import simulate_truth
    _, meas = simulate_truth(s)
    for k in range(40):
        filt.step(None, [m[k] for m in meas])
        for st in filt.states[1:]:
            assert np.array_equal(st.x, filt.states[0].x)
            assert np.array_equal(st.faulty, filt.states[0].faulty)


def test_single_node_distributed_equals_centralized():
    s = small_scenario(steps=60)
    s.nodes = [NodeConfig(1, [1, 2, 3, 4, 5, 6, 7, 8, 9])]
    a = run_experiment(s, DISTRIBUTED)
    b = run_experiment(s, CENTRALIZED)
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.pfail, b.pfail)


def test_complete_graph_matches_centralized():
    s = small_scenario(steps=60, consensus_tolerance=1e-12)
    a = run_experiment(s, DISTRIBUTED)
    b = run_experiment(s, CENTRALIZED)
    assert np.max(np.abs(a.pfail - b.pfail)) <= 1e-6


def test_threads_do_not_change_results():
    a = run_experiment(small_scenario(steps=30), DISTRIBUTED)
    b = run_experiment(small_scenario(steps=30, threads=3), DISTRIBUTED)
    assert a == b


def test_one_hop_fusion_runs():
    s = small_scenario(steps=20, fusion="one-hop")
    s.topology = [[1, 2], [2, 3]]
    tr = run_experiment(s, DISTRIBUTED)
    assert tr.n_steps == 20 and np.all(tr.consensus_iterations == 0)


def test_precise_model_keeps_healthy_probabilities_low():
    # tight measurements and no process noise: fault hypotheses are quickly refuted
    s = Scenario(seed=5, duration_steps=200, faults=[FaultConfig("leak-tank-4", 4, 199)])
    s.plant.process_noise_variance = 0.0
    s.filter.n_particles = 300
    s.filter.process_noise_variance = 1e-6
    for n in s.nodes:
        n.noise_variance = 1e-4
    tr = run_experiment(s, DISTRIBUTED)
    assert np.all(tr.pfail[:199] < s.filter.alpha)


def test_alarm_events_latch_on_crossings():
    s = small_scenario(steps=80)
    tr = run_experiment(s, DISTRIBUTED)
    for a in tr.alarms:
        assert isinstance(a, AlarmEvent)
        assert tr.pfail[a.step - 1, tr.node_labels.index(str(a.node_id)), a.mode] >= tr.alpha
        if a.step > 1:
            assert tr.pfail[a.step - 2, tr.node_labels.index(str(a.node_id)), a.mode] < tr.alpha


def test_filter_config_validation():
    with pytest.raises(ContractViolation):
        FilterConfig(alpha=1.0)
    with pytest.raises(ContractViolation):
        FilterConfig(fusion="gossip")


def test_topology_size_must_match_nodes():
    params = TankParams()
    model = filter_model(params, [leak_mode(4, params)])
    with pytest.raises(ContractViolation):
        DistributedFilter(model, [DetectorNode(1, (0,), 0.2)], Topology.complete(2), FilterConfig(10), 0, params.x0)

"""Distributed particle filtering fault diagnosis.

Detector nodes run synchronized bootstrap particle filters over a
fault-augmented state model and fuse their local log-likelihoods by average
consensus. A nine-tank benchmark plant and a centralized reference filter are
included.
"""
from .consensus import ConsensusConfig, Topology, is_connected, metropolis_weights, run_consensus
from .errors import (ConfigError, ContractViolation, DegenerateWeightsError, DPFFDError, NumericDivergenceError,
                     TopologyError)
from .experiment import CENTRALIZED, DISTRIBUTED, RunTrace, compare_traces, run_experiment
from .faults import AugmentedModel, FaultMode, FaultProfile, beta, failure_probability, phi
from .kernels import BACKEND
from .network import CentralizedFilter, DetectorNode, DistributedFilter, FilterConfig
from .pf import NoiseSpec, ParticleSet, draw_noise, mmse_estimate, normalize_weights, systematic_resample
from .scenario import Scenario, nine_tank_scenario
from .streams import RandomStreams

__version__ = "0.1.0"

import math

import numpy as np
import pytest

from spincollapse import oracle
from spincollapse.errors import ConfigError
from spincollapse.model import ModelConfig
from spincollapse.validation import oracle_comparison


def test_refuses_large_universes():
    with pytest.raises(ConfigError, match="refuses"):
        oracle.check_size(13)
    oracle.check_size(12)


def test_spin_matrices_in_bit_order():
    # bit 1 = up, so S^z = diag(-1/2, +1/2)
    assert np.allclose(oracle.spin_matrix("z"), np.diag([-0.5, 0.5]))
    assert np.allclose(oracle.spin_matrix("y") @ np.array([0, 1]), np.array([0.5j, 0]))


def test_linear_toy_matches_dense():
    r = oracle_comparison(ModelConfig(n_env=1, mu=0.0), seed=1, dt=0.1, n_steps=30)
    assert r["L"] == 6
    assert r["max_amplitude_error"] < 1e-10


def test_nonlinear_toy_same_freezing_matches_dense():
    r = oracle_comparison(ModelConfig(n_env=1), seed=2, dt=0.05, n_steps=30)
    assert r["max_amplitude_error"] < 1e-10


def test_nonlinear_start_rule_matches_dense():
    r = oracle_comparison(ModelConfig(n_env=1), seed=3, dt=0.05, n_steps=20, field_rule="start")
    assert r["max_amplitude_error"] < 1e-10


def test_dense_evolution_conserves_universe_energy():
    from spincollapse.model import build_couplings
    from spincollapse.experiment import RunSpec, prepare_initial_state

    c = build_couplings(ModelConfig(n_env=1), 4)
    e, v = oracle.dense_ground_state(oracle.dense_hamiltonian(1, c.environment_terms()) + np.zeros((2, 2)))
    spec = RunSpec(theta=math.pi / 4, coupling_seed=4, lanczos_seed=0, model=c.config)
    psi0 = prepare_initial_state(spec, c, np.array([1.0, 0.0]))
    ev = oracle.DenseEvolution(c)
    _, states = oracle.dense_evolve(c, psi0, 0.05, 60)
    energies = [ev.energy(s) for s in states]
    assert max(energies) - min(energies) < 1e-10

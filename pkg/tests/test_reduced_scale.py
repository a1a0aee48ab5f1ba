"""Physics checks at universes small enough for every test run (L = 10, 12).

These exercise the same invariants as the full-scale acceptance runs on a
smaller bath; they are regression guards, not substitutes for them.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from spincollapse.experiment import Outcome, RunSpec, run_single
from spincollapse.model import ModelConfig
from spincollapse.solvers import TrajectoryConfig

pytestmark = pytest.mark.slow


def _run(n_env, mu, seed, dt=0.05, t_max=100.0, **traj):
    tcfg = TrajectoryConfig(dt=dt, t_max=t_max, record_stride=max(1, int(round(0.5 / dt))), **traj)
    spec = RunSpec(theta=math.pi / 4, coupling_seed=seed, lanczos_seed=seed,
                   model=ModelConfig(n_env=n_env, mu=mu), trajectory=tcfg)
    return run_single(spec)


def test_conservation_laws_at_l12():
    traj, _ = _run(7, 12.0, 0, dt=0.01, t_max=10.0, norm_tolerance=math.inf, energy_tolerance=math.inf)
    assert traj.max_norm_drift() < 1e-9
    assert traj.max_energy_drift("E_U") < 1e-6
    # the self-field correction is what makes E_U conserved; <H> alone is not
    assert traj.max_energy_drift("H_mean") > 1e-4


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_linear_persistence_at_l10(seed):
    traj, outcome = _run(5, 0.0, seed)
    assert outcome.classification is Outcome.UNDECIDED
    assert np.mean(np.abs(traj.M)) < 0.3
    assert np.max(np.abs(traj.S_sys_z)) < 0.1


@pytest.mark.parametrize("seed", [0, 1])
def test_self_field_builds_magnetisation_at_l10(seed):
    lin, _ = _run(5, 0.0, seed)
    nonlin, _ = _run(5, 12.0, seed)
    late = slice(len(lin.t) // 2, None)
    assert np.mean(np.abs(nonlin.M[late])) > 2 * np.mean(np.abs(lin.M[late]))

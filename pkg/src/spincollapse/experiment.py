"""Single measurements and Born-rule ensembles."""

from __future__ import annotations

import enum
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.stats import binomtest

from .errors import ConfigError, SpinCollapseError, UsageError
from .hilbert import SiteLayout, tensor_product
from .model import ModelConfig, build_couplings, spectral_bound
from .solvers import (
    ChebyshevConfig,
    LanczosConfig,
    TrajectoryConfig,
    chebyshev_coefficients,
    evolve,
    lanczos_ground_state,
)

log = logging.getLogger(__name__)

__all__ = [
    "Outcome",
    "RunSpec",
    "RunOutcome",
    "RunResult",
    "ThetaPoint",
    "BornCurve",
    "system_state",
    "alternating_apparatus_state",
    "environment_ground_state",
    "prepare_initial_state",
    "classify_outcome",
    "run_single",
    "derive_seeds",
    "born_curve",
    "predicted_probability",
    "wilson_interval",
    "estimate_run_seconds",
]

THREADS_ENV = "SPINCOLLAPSE_THREADS"


class Outcome(str, enum.Enum):
    COLLAPSED_UP = "COLLAPSED_UP"
    COLLAPSED_DOWN = "COLLAPSED_DOWN"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class RunSpec:
    """Everything that determines one trajectory.

    ``theta`` and ``phi`` are in radians; the system spin starts in
    ``cos(theta)|up> + sin(theta) exp(i phi)|down>``.
    """

    theta: float
    coupling_seed: int
    lanczos_seed: int
    phi: float = 0.0
    model: ModelConfig = field(default_factory=ModelConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    chebyshev: ChebyshevConfig = field(default_factory=ChebyshevConfig)
    lanczos: LanczosConfig = field(default_factory=LanczosConfig)
    m_threshold: Optional[float] = None
    dwell: float = 20.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 0.5 * math.pi + 1e-12:
            raise ConfigError(f"theta={self.theta} outside [0, pi/2]")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ConfigError(f"phi={self.phi} outside [0, 2 pi)")
        if self.dwell < 0:
            raise ConfigError("dwell must be >= 0")

    @property
    def threshold(self):
        if self.m_threshold is None:
            return 0.5 * (self.model.n_app / 2.0)
        return self.m_threshold


@dataclass(frozen=True)
class RunOutcome:
    classification: Outcome
    collapse_time: Optional[float]
    final_M: float
    final_S_sys_z: float

    @property
    def decided(self):
        return self.classification is not Outcome.UNDECIDED


@dataclass
class RunResult:
    """One ensemble member: its seeds and either an outcome or an error."""

    theta_index: int
    run_index: int
    coupling_seed: int
    lanczos_seed: int
    outcome: Optional[RunOutcome] = None
    error: Optional[str] = None
    wall_seconds: float = 0.0
    trajectory: object = None


@dataclass
class ThetaPoint:
    theta_deg: float
    n_runs: int
    n_up: int
    n_down: int
    n_undecided: int
    n_failed: int
    p_up_estimate: float
    ci_low: float
    ci_high: float
    reference: float

    @property
    def decided_rate(self):
        return (self.n_up + self.n_down) / self.n_runs if self.n_runs else 0.0


@dataclass
class BornCurve:
    points: List[ThetaPoint]
    runs: List[RunResult]
    base_seed: int
    runs_per_theta: int

    def point(self, theta_deg):
        for p in self.points:
            if math.isclose(p.theta_deg, theta_deg, abs_tol=1e-9):
                return p
        raise KeyError(theta_deg)

    def mean_abs_deviation(self):
        """Mean of ``|p_up - cos^2 theta|`` over grid points with decided runs."""
        dev = [abs(p.p_up_estimate - p.reference) for p in self.points if p.n_up + p.n_down]
        return float(np.mean(dev)) if dev else math.nan


def predicted_probability(theta):
    return math.cos(theta) ** 2


def wilson_interval(k, n, confidence=0.95):
    """Wilson score interval for ``k`` successes in ``n`` trials; ``(0, 1)`` if ``n == 0``."""
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def system_state(theta, phi=0.0):
    """Two-component system spinor indexed by bit value (0 = down, 1 = up)."""
    return np.array([math.sin(theta) * np.exp(1j * phi), math.cos(theta)], dtype=np.complex128)


def alternating_apparatus_state(n_app):
    """``|up down up down ...>`` on the apparatus, up on even apparatus slots.

    Apparatus slot ``k`` sits at hypercube corner ``gray(k)``, whose parity
    is that of ``k``, so this is the Neel state of the lattice.
    """
    if n_app % 2:
        raise ConfigError(f"alternating apparatus state needs even N_A, got {n_app}")
    word = sum(1 << k for k in range(0, n_app, 2))
    v = np.zeros(1 << n_app, dtype=np.complex128)
    v[word] = 1.0
    return v


def environment_ground_state(c, cfg=LanczosConfig()):
    env = c.environment_operator
    return lanczos_ground_state(env.apply, env.dim, cfg)


def prepare_initial_state(spec, c, env_ground):
    env_ground = np.asarray(env_ground, dtype=np.complex128)
    if env_ground.shape != (1 << c.n_env,):
        raise UsageError(f"environment state has shape {env_ground.shape}, expected ({1 << c.n_env},)")
    nrm = np.linalg.norm(env_ground)
    if abs(nrm - 1.0) > 1e-10:
        raise UsageError(f"environment state is not normalised (norm {nrm:.12g})")
    psi = tensor_product(system_state(spec.theta, spec.phi), alternating_apparatus_state(c.n_app), env_ground)
    return psi / np.linalg.norm(psi)


def classify_outcome(traj, m_threshold, dwell):
    """Classify by the sign of the magnetisation plateau that ends the run.

    The plateau is the longest suffix of records on which ``|M| >=
    m_threshold`` with one sign.  The run counts as collapsed when that
    suffix spans at least ``dwell``; ``collapse_time`` is its first record.
    """
    t = np.asarray(traj.t, dtype=float)
    m = np.asarray(traj.M, dtype=float)
    if t.size == 0:
        raise UsageError("cannot classify an empty trajectory")
    s = np.asarray(traj.S_sys_z, dtype=float)
    final_m, final_s = float(m[-1]), float(s[-1])
    undecided = RunOutcome(Outcome.UNDECIDED, None, final_m, final_s)
    if abs(final_m) < m_threshold:
        return undecided
    sign = np.sign(final_m)
    inside = (np.abs(m) >= m_threshold) & (np.sign(m) == sign)
    outside = np.nonzero(~inside)[0]
    start = int(outside[-1]) + 1 if outside.size else 0
    if t[-1] - t[start] < dwell:
        return undecided
    label = Outcome.COLLAPSED_UP if sign > 0 else Outcome.COLLAPSED_DOWN
    return RunOutcome(label, float(t[start]), final_m, final_s)


def run_single(spec, observer=None):
    """Build, prepare, evolve and classify one run.

    Fully determined by ``spec``: the couplings depend only on
    ``coupling_seed`` and the Lanczos start vector only on ``lanczos_seed``.
    """
    c = build_couplings(spec.model, spec.coupling_seed)
    gs = environment_ground_state(c, replace(spec.lanczos, start_seed=spec.lanczos_seed))
    psi0 = prepare_initial_state(spec, c, gs.state)
    traj = evolve(c, psi0, spec.trajectory, spec.chebyshev, observer=observer)
    traj.env_energy = gs.energy
    return traj, classify_outcome(traj, spec.threshold, spec.dwell)


def estimate_run_seconds(spec, samples=3, field_iterations=3.0):
    """Rough wall-clock cost of :func:`run_single` on this machine.

    Times ``samples`` Hamiltonian applications at the size of ``spec`` and
    multiplies by steps, Chebyshev order and field iterations per step
    (about 3 for the midpoint rule, 1 for the start rule).
    """
    c = build_couplings(spec.model, spec.coupling_seed)
    op = c.operator
    psi = np.zeros(op.dim, dtype=np.complex128)
    psi[0] = 1.0
    out = np.empty_like(psi)
    op.apply(psi, out, 0.5)
    start = time.perf_counter()
    for _ in range(samples):
        op.apply(psi, out, 0.5)
    per_apply = (time.perf_counter() - start) / samples
    tcfg = spec.trajectory
    bound = spectral_bound(c, field_cap=spec.threshold)
    order = chebyshev_coefficients(bound * tcfg.dt, spec.chebyshev).shape[0] - 1
    iters = field_iterations if tcfg.field_rule == "midpoint" and c.mu else 1.0
    return tcfg.n_steps * iters * order * per_apply


def derive_seeds(base_seed, theta_index, run_index):
    """``(coupling_seed, lanczos_seed)`` for one ensemble member.

    Both are 32-bit words from ``SeedSequence(base_seed,
    spawn_key=(theta_index, run_index))``, so every member has its own
    coupling realisation and start vector.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(theta_index), int(run_index)))
    a, b = ss.generate_state(2, dtype=np.uint32)
    return int(a), int(b)


def _execute(job):
    spec, theta_index, run_index, keep = job
    start = time.perf_counter()
    res = RunResult(theta_index, run_index, spec.coupling_seed, spec.lanczos_seed)
    try:
        traj, res.outcome = run_single(spec)
        if keep:
            res.trajectory = traj
    except SpinCollapseError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
    res.wall_seconds = time.perf_counter() - start
    return res


def worker_count(requested=None):
    """Process count for ensembles, capped by ``$SPINCOLLAPSE_THREADS``."""
    n = requested if requested is not None else 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def born_curve(theta_grid, runs_per_theta, base_seed, template, workers=None,
               keep_trajectories=False, progress=None):
    """Run ``runs_per_theta`` members at every grid angle and tally outcomes.

    ``theta_grid`` is in degrees.  ``template`` supplies everything except
    the angle and the seeds.  Failed members are recorded with their error
    and left out of the counts.
    """
    if runs_per_theta < 1:
        raise ConfigError("runs_per_theta must be >= 1")
    jobs = []
    for ti, theta_deg in enumerate(theta_grid):
        for r in range(runs_per_theta):
            cs, ls = derive_seeds(base_seed, ti, r)
            spec = replace(template, theta=math.radians(theta_deg), coupling_seed=cs, lanczos_seed=ls)
            jobs.append((spec, ti, r, keep_trajectories))

    n_workers = worker_count(workers)
    results = []
    if n_workers == 1:
        for job in jobs:
            results.append(_execute(job))
            if progress:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for res in pool.map(_execute, jobs):
                results.append(res)
                if progress:
                    progress(res)

    points = []
    for ti, theta_deg in enumerate(theta_grid):
        mine = [r for r in results if r.theta_index == ti]
        done = [r.outcome for r in mine if r.outcome is not None]
        n_up = sum(o.classification is Outcome.COLLAPSED_UP for o in done)
        n_down = sum(o.classification is Outcome.COLLAPSED_DOWN for o in done)
        n_dec = n_up + n_down
        lo, hi = wilson_interval(n_up, n_dec)
        points.append(ThetaPoint(
            theta_deg=float(theta_deg),
            n_runs=len(done),
            n_up=n_up,
            n_down=n_down,
            n_undecided=len(done) - n_dec,
            n_failed=len(mine) - len(done),
            p_up_estimate=n_up / n_dec if n_dec else math.nan,
            ci_low=lo,
            ci_high=hi,
            reference=predicted_probability(math.radians(theta_deg)),
        ))
    return BornCurve(points, results, int(base_seed), int(runs_per_theta))

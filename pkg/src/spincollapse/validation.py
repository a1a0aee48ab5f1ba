"""Invariant checks run by ``spincollapse validate`` and the oracle comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import oracle
from .errors import SpinCollapseError
from .experiment import RunSpec, environment_ground_state, prepare_initial_state
from .model import build_couplings
from .solvers import chebyshev_step, evolve, lanczos_ground_state

__all__ = ["CheckResult", "validate", "oracle_comparison", "small_model"]

# universe used by the checks: N_A from the config plus a small bath (L = 8 at N_A = 4)
SMALL_ENV = {4: 3, 8: 1}


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        v = "n/a" if self.value is None or not math.isfinite(self.value) else f"{self.value:.3e}"
        msg = f"{status}  {self.name:<28} measured {v}  limit {self.threshold:.1e}"
        return msg + (f"  ({self.detail})" if self.detail else "")


def small_model(model_cfg, n_env=None):
    n = SMALL_ENV[model_cfg.n_app] if n_env is None else n_env
    return replace(model_cfg, n_env=n)


def _rng_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _check(name, limit, fn, strict_below=True):
    try:
        value, detail = fn()
    except SpinCollapseError as exc:
        return CheckResult(name, False, math.nan, limit, f"{type(exc).__name__}: {exc}")
    ok = value < limit if strict_below else value <= limit
    return CheckResult(name, bool(ok), float(value), limit, detail)


def validate(cfg, seed=0, t_check=10.0):
    """Run every invariant check on a small universe built from ``cfg``.

    ``cfg`` is a :class:`~spincollapse.config.RootConfig`; the model,
    trajectory and solver settings are taken from it, with the bath shrunk
    so the dense oracle applies and the horizon cut to ``t_check``.
    """
    model_cfg = small_model(cfg.model.to_model_config())
    tcfg = cfg.trajectory.to_trajectory_config()
    tcfg = replace(tcfg, t_max=max(tcfg.dt, min(tcfg.t_max, t_check)), record_stride=1)
    cheb = cfg.chebyshev.to_chebyshev_config()
    lcfg = cfg.lanczos.to_lanczos_config(seed)
    c = build_couplings(model_cfg, seed)
    rng = np.random.default_rng(seed)
    op = c.operator
    results = []

    def hermiticity():
        x, y = _rng_state(op.dim, rng), _rng_state(op.dim, rng)
        err = abs(np.vdot(y, op.apply(x, field_coef=0.7)) - np.vdot(op.apply(y, field_coef=0.7), x))
        return err, f"L={c.n_sites}"

    results.append(_check("hermiticity", 1e-12, hermiticity))

    def unitarity():
        psi = _rng_state(op.dim, rng)
        worst = 0.0
        for b in (0.0, 0.5, -1.3):
            psi = chebyshev_step(c, b, psi, tcfg.dt, cheb)
            worst = max(worst, abs(np.linalg.norm(psi) - 1.0))
        return worst, f"3 steps of dt={tcfg.dt:g}"

    results.append(_check("unitarity", 1e-12, unitarity))

    spec = RunSpec(theta=math.pi / 4, coupling_seed=seed, lanczos_seed=seed, model=model_cfg,
                   trajectory=tcfg, chebyshev=cheb, lanczos=lcfg)
    gs = environment_ground_state(c, lcfg)
    psi0 = prepare_initial_state(spec, c, gs.state)

    def energy():
        # the gate inside evolve is disabled so the measured drift is reported
        loose = replace(tcfg, energy_tolerance=math.inf, norm_tolerance=1e-6)
        tr = evolve(c, psi0, loose, cheb)
        return tr.max_energy_drift("E_U"), (
            f"dt={tcfg.dt:g}, rule={tcfg.field_rule}, t={tr.t[-1]:g}, "
            f"<H> drift {tr.max_energy_drift('H_mean'):.2e}"
        )

    results.append(_check("universe_energy_drift", tcfg.energy_tolerance, energy))

    def dt_convergence():
        n = max(1, int(round(1.0 / tcfg.dt)))
        short = replace(tcfg, t_max=n * tcfg.dt, energy_tolerance=math.inf, norm_tolerance=1e-6)
        half = replace(short, dt=tcfg.dt / 2)
        a = evolve(c, psi0, short, cheb)
        b = evolve(c, psi0, half, cheb)
        return abs(a.M[-1] - b.M[-1]), f"M at t={short.t_max:g}, dt vs dt/2"

    results.append(_check("dt_self_convergence", 1e-6, dt_convergence))

    def lanczos():
        h = oracle.dense_hamiltonian(c.n_env, c.environment_terms())
        e_dense, _ = oracle.dense_ground_state(h)
        env = c.environment_operator
        e_lz = lanczos_ground_state(env.apply, env.dim, lcfg).energy
        return abs(e_lz - e_dense), f"N_E={c.n_env}"

    results.append(_check("lanczos_vs_dense", 1e-8, lanczos))

    comp = None

    def linear():
        nonlocal comp
        comp = oracle_comparison(replace(model_cfg, mu=0.0), seed, dt=0.05, n_steps=40, cheb=cheb)
        return comp["max_amplitude_error"], f"L={comp['L']}, {comp['n_steps']} steps"

    results.append(_check("chebyshev_vs_dense_linear", 1e-8, linear))

    def nonlinear():
        r = oracle_comparison(model_cfg, seed, dt=0.05, n_steps=40, cheb=cheb)
        return r["max_amplitude_error"], f"L={r['L']}, mu={model_cfg.mu:g}, same field freezing"

    results.append(_check("chebyshev_vs_dense_nonlinear", 1e-8, nonlinear))
    return results


def oracle_comparison(model_cfg, seed, dt=0.05, n_steps=40, cheb=None, theta=math.pi / 4,
                      field_rule="midpoint"):
    """Matrix-free and dense trajectories from one prepared state, side by side."""
    from .solvers import ChebyshevConfig, TrajectoryConfig

    c = build_couplings(model_cfg, seed)
    oracle.check_size(c.n_sites)
    cheb = cheb or ChebyshevConfig()
    spec = RunSpec(theta=theta, coupling_seed=seed, lanczos_seed=seed, model=model_cfg)
    e_dense, v_dense = oracle.dense_ground_state(oracle.dense_hamiltonian(c.n_env, c.environment_terms()))
    psi0 = prepare_initial_state(spec, c, v_dense / np.linalg.norm(v_dense))
    tcfg = TrajectoryConfig(dt=dt, t_max=dt * n_steps, record_stride=1, field_rule=field_rule,
                            energy_tolerance=math.inf, norm_tolerance=1e-6)
    states = []
    tr = evolve(c, psi0, tcfg, cheb, observer=None, keep_states=states)
    times, dense = oracle.dense_evolve(c, psi0, dt, tcfg.n_steps, field_rule=field_rule)
    ev = oracle.DenseEvolution(c)
    m_dense = [ev.field(s) for s in dense]
    err = max(oracle.max_amplitude_error(a, b) for a, b in zip(states, dense))
    return {
        "L": c.n_sites,
        "n_steps": tcfg.n_steps,
        "dt": dt,
        "mu": model_cfg.mu,
        "t": list(times),
        "M_matrix_free": list(tr.M),
        "M_dense": m_dense,
        "max_amplitude_error": err,
        "max_M_error": float(np.max(np.abs(np.array(tr.M) - np.array(m_dense)))),
        "env_energy_dense": e_dense,
    }

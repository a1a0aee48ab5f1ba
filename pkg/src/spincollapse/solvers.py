"""Lanczos ground states, Chebyshev propagation and the nonlinear time loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import jv

from . import _kernels
from .errors import ConfigError, ConvergenceError, IntegrityError, UsageError
from .model import spectral_bound

log = logging.getLogger(__name__)

__all__ = [
    "LanczosConfig",
    "ChebyshevConfig",
    "TrajectoryConfig",
    "GroundState",
    "TrajectoryRecord",
    "lanczos_ground_state",
    "chebyshev_coefficients",
    "chebyshev_propagate",
    "chebyshev_step",
    "evolve",
]


@dataclass(frozen=True)
class LanczosConfig:
    max_iterations: int = 500
    residual_tolerance: float = 1e-10
    reorthogonalization: str = "FULL"
    start_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("lanczos.max_iterations must be >= 1")
        if not self.residual_tolerance > 0:
            raise ConfigError("lanczos.residual_tolerance must be > 0")
        if self.reorthogonalization not in ("FULL", "NONE"):
            raise ConfigError("lanczos.reorthogonalization must be FULL or NONE")


@dataclass(frozen=True)
class ChebyshevConfig:
    truncation_tolerance: float = 1e-15
    max_order: int = 2000

    def __post_init__(self):
        if not self.truncation_tolerance > 0:
            raise ConfigError("chebyshev.truncation_tolerance must be > 0")
        if self.max_order < 1:
            raise ConfigError("chebyshev.max_order must be >= 1")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Time grid, drift gates and the per-step field rule.

    ``field_rule="midpoint"`` freezes the field at the self-consistent
    value ``(b(t) + b(t + dt)) / 2``, found by fixed-point iteration to
    ``field_tolerance``; this makes the universe energy exact step by step.
    ``field_rule="start"`` freezes it at ``b(t)``, which drifts the energy
    by ``-mu * (b(t + dt) - b(t))**2 / 2`` per step.
    """

    dt: float = 0.01
    t_max: float = 200.0
    record_stride: int = 10
    norm_tolerance: float = 1e-9
    energy_tolerance: float = 1e-6
    field_rule: str = "midpoint"
    field_tolerance: float = 1e-11
    max_field_iterations: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("trajectory.dt must be > 0")
        if self.t_max < self.dt:
            raise ConfigError("trajectory.t_max must be >= dt")
        if self.record_stride < 1:
            raise ConfigError("trajectory.record_stride must be >= 1")
        if not (self.norm_tolerance > 0 and self.energy_tolerance > 0):
            raise ConfigError("drift tolerances must be > 0")
        if self.field_rule not in ("midpoint", "start"):
            raise ConfigError("trajectory.field_rule must be 'midpoint' or 'start'")

    @property
    def n_steps(self):
        return int(math.floor(self.t_max / self.dt + 1e-9))


@dataclass
class GroundState:
    """Lowest Ritz pair.  Unpacks as ``energy, state``."""

    energy: float
    state: np.ndarray
    residual: float
    iterations: int

    def __iter__(self):
        yield self.energy
        yield self.state


def lanczos_ground_state(apply_h, dim, cfg=LanczosConfig()):
    """Lowest eigenpair of a Hermitian operator given only ``apply_h(v)``.

    The start vector is a real Gaussian vector drawn from PCG64 seeded with
    ``cfg.start_seed``.  Ritz pairs are tested every iteration; the answer
    is accepted once the explicitly recomputed residual
    ``||H v - E v||`` is below ``cfg.residual_tolerance``.
    """
    if dim < 2:
        raise UsageError("Lanczos needs dim >= 2")
    rng = np.random.Generator(np.random.PCG64(cfg.start_seed))
    v = rng.standard_normal(dim).astype(np.complex128)
    v /= np.linalg.norm(v)
    m_max = min(cfg.max_iterations, dim)
    basis = np.empty((m_max, dim), dtype=np.complex128)
    alphas, betas = [], []
    best = math.inf
    v_prev = None
    beta = 0.0
    for k in range(m_max):
        basis[k] = v
        w = np.asarray(apply_h(v), dtype=np.complex128).copy()
        alpha = float(np.vdot(v, w).real)
        w -= alpha * v
        if v_prev is not None:
            w -= beta * v_prev
        if cfg.reorthogonalization == "FULL":
            for _ in range(2):
                w -= basis[: k + 1].T @ (basis[: k + 1].conj() @ w)
        alphas.append(alpha)
        beta = float(np.linalg.norm(w))
        betas.append(beta)

        if k == 0:
            theta, s = np.array([alpha]), np.ones((1, 1))
        else:
            theta, s = eigh_tridiagonal(
                np.array(alphas), np.array(betas[:-1]), select="i", select_range=(0, 0)
            )
        estimate = abs(beta * s[-1, 0])
        exhausted = beta < 1e-14 * max(1.0, abs(alpha)) or k + 1 == m_max
        if estimate <= cfg.residual_tolerance or exhausted:
            x = basis[: k + 1].T @ s[:, 0]
            x /= np.linalg.norm(x)
            hx = np.asarray(apply_h(x))
            energy = float(np.vdot(x, hx).real)
            residual = float(np.linalg.norm(hx - energy * x))
            best = min(best, residual)
            if residual <= cfg.residual_tolerance:
                log.debug("lanczos converged: k=%d E=%.12g r=%.2e", k + 1, energy, residual)
                return GroundState(energy, x, residual, k + 1)
            if exhausted:
                break
        v_prev = v
        v = w / beta
    raise ConvergenceError(
        f"Lanczos did not converge in {m_max} iterations (best residual {best:.3e})",
        best_residual=best,
    )


def chebyshev_coefficients(x, cfg):
    """Expansion weights of ``exp(-i x y)`` in ``T_k(y)`` for ``|y| <= 1``.

    ``exp(-i x y) = J_0(x) + 2 sum_k (-i)^k J_k(x) T_k(y)``; the series is cut
    after the last order whose Bessel weight exceeds the tolerance.
    """
    full = cfg.max_order + 2
    # J_k(x) decays faster than exponentially once k exceeds x by a few x**(1/3)
    n = min(full, int(x + 10.0 * np.cbrt(x) + 60.0))
    bessel = jv(np.arange(n), x)
    if n < full and abs(bessel[-1]) >= cfg.truncation_tolerance:
        bessel = jv(np.arange(full), x)
    above = np.nonzero(np.abs(bessel) >= cfg.truncation_tolerance)[0]
    order = int(above[-1]) + 1 if above.size else 1
    if order > cfg.max_order:
        raise ConfigError(
            f"Chebyshev order {order} exceeds max_order={cfg.max_order} "
            f"for R*dt={x:.4g}; reduce dt"
        )
    k = np.arange(order + 1)
    coef = 2.0 * (-1j) ** k * bessel[: order + 1]
    coef[0] = bessel[0]
    return coef


def chebyshev_propagate(apply_h, psi, dt, bound, cfg=ChebyshevConfig(), buffers=None):
    """exp(-i dt H) psi for Hermitian ``H`` with spectrum inside ``[-bound, bound]``.

    ``apply_h(v, out)`` must write ``H v`` into ``out``.  Returns the new
    vector and the number of operator applications used.
    """
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if bound <= 0.0:
        return psi.copy(), 0
    coef = chebyshev_coefficients(bound * dt, cfg)
    if buffers is None:
        buffers = [np.empty_like(psi) for _ in range(3)]
    prev, cur, hv = buffers
    prev[:] = psi
    apply_h(psi, hv)
    np.multiply(hv, 1.0 / bound, out=cur)
    acc = coef[0] * psi + coef[1] * cur
    inv = 1.0 / bound
    for k in range(2, coef.shape[0]):
        apply_h(cur, hv)
        _kernels.chebyshev_update(hv, prev, acc, inv, coef[k].real, coef[k].imag)
        prev, cur = cur, prev
    return acc, coef.shape[0] - 1


def chebyshev_step(c, frozen_field, psi, dt, cfg=ChebyshevConfig(), buffers=None):
    """exp(-i dt (H_lin + H_B(frozen_field))) psi.

    The rescaling range is the triangle bound of the frozen Hamiltonian.
    """
    op = c.operator
    coef = -c.mu * float(frozen_field)
    bound = spectral_bound(c, field_cap=abs(frozen_field))

    def apply_h(v, out):
        op.apply(v, out, coef)

    return chebyshev_propagate(apply_h, psi, dt, bound, cfg, buffers)[0]


@dataclass
class TrajectoryRecord:
    """Recorded observables plus run diagnostics."""

    t: list = field(default_factory=list)
    M: list = field(default_factory=list)
    E_exch: list = field(default_factory=list)
    S_sys_z: list = field(default_factory=list)
    B_field: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    E_U: list = field(default_factory=list)
    H_mean: list = field(default_factory=list)
    steps: int = 0
    operator_applications: int = 0
    field_iterations: int = 0
    wall_seconds: float = 0.0
    env_energy: Optional[float] = None

    COLUMNS = ("t", "M", "E_exch", "S_sys_z", "B_field", "norm", "E_U")

    def append(self, rec):
        for name in self.COLUMNS + ("H_mean",):
            getattr(self, name).append(getattr(rec, name))

    def __len__(self):
        return len(self.t)

    def column(self, name):
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        return list(zip(*(getattr(self, name) for name in self.COLUMNS)))

    def max_norm_drift(self):
        return float(np.max(np.abs(self.column("norm") - 1.0))) if self.t else 0.0

    def max_energy_drift(self, name="E_U"):
        """Largest ``|X(t) - X(0)| / max(|X(0)|, 1)``."""
        x = self.column(name)
        if x.size == 0:
            return 0.0
        return float(np.max(np.abs(x - x[0])) / max(abs(x[0]), 1.0))


def evolve(c, psi0, traj=TrajectoryConfig(), cheb=ChebyshevConfig(), observer=None, keep_states=None):
    """Integrate the nonlinear Schroedinger equation from ``psi0``.

    Each step freezes the self-induced field (see ``TrajectoryConfig``),
    advances with one Chebyshev propagation, and every ``record_stride``
    steps evaluates all observables, checks the norm and universe-energy
    gates and calls ``observer(record)``.  When ``keep_states`` is a list,
    a copy of the state is appended to it at every record.
    """
    from .observables import observe

    op = c.operator
    psi = np.array(psi0, dtype=np.complex128)
    if abs(np.linalg.norm(psi) - 1.0) > traj.norm_tolerance:
        raise UsageError("initial state is not normalised")
    buffers = [np.empty_like(psi) for _ in range(3)]
    out = TrajectoryRecord()
    start = time.perf_counter()

    def record(step, b):
        rec = observe(c, psi, t=step * traj.dt, b_tilde=b)
        out.append(rec)
        if keep_states is not None:
            keep_states.append(psi.copy())
        if observer is not None:
            observer(rec)
        norm_drift = abs(rec.norm - 1.0)
        if norm_drift > traj.norm_tolerance:
            raise IntegrityError(
                f"norm drift {norm_drift:.3e} exceeds {traj.norm_tolerance:.1e} at step {step}",
                step=step, quantity="norm", drift=norm_drift,
            )
        e_drift = abs(rec.E_U - out.E_U[0]) / max(abs(out.E_U[0]), 1.0)
        if e_drift > traj.energy_tolerance:
            raise IntegrityError(
                f"universe-energy drift {e_drift:.3e} exceeds {traj.energy_tolerance:.1e} "
                f"at step {step}",
                step=step, quantity="E_U", drift=e_drift,
            )

    b = op.field_expectation(psi)
    record(0, b)
    b_last_change = 0.0
    for step in range(1, traj.n_steps + 1):
        if traj.field_rule == "start":
            psi_new = _frozen_step(c, b, psi, traj.dt, cheb, buffers, out)
            b_new = op.field_expectation(psi_new)
        else:
            b_f = b + 0.5 * b_last_change
            for _ in range(traj.max_field_iterations):
                psi_new = _frozen_step(c, b_f, psi, traj.dt, cheb, buffers, out)
                b_new = op.field_expectation(psi_new)
                target = 0.5 * (b + b_new)
                if abs(target - b_f) <= traj.field_tolerance:
                    break
                b_f = target
            else:
                raise ConvergenceError(
                    f"self-consistent field did not settle at step {step}; reduce dt",
                    best_residual=abs(target - b_f),
                )
        b_last_change = b_new - b
        psi, b = psi_new, b_new
        out.steps = step
        if step % traj.record_stride == 0:
            record(step, b)
    out.wall_seconds = time.perf_counter() - start
    return out


def _frozen_step(c, b_f, psi, dt, cheb, buffers, out):
    op = c.operator
    coef = -c.mu * b_f
    bound = spectral_bound(c, field_cap=abs(b_f))

    def apply_h(v, dst):
        op.apply(v, dst, coef)

    new, n_apply = chebyshev_propagate(apply_h, psi, dt, bound, cheb, buffers)
    out.operator_applications += n_apply
    out.field_iterations += 1
    return new

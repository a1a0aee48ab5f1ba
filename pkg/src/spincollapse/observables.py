"""Scalar diagnostics of a universe state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .hilbert import n_sites_of

__all__ = [
    "ObservableRecord",
    "magnetization",
    "exchange_energy",
    "system_spin_z",
    "universe_energy",
    "observe",
]


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    M: float
    E_exch: float
    S_sys_z: float
    B_field: float
    norm: float
    E_U: float
    H_mean: float


def magnetization(psi, c):
    """M = sum_{i in A} <psi|S_i^z|psi>; the same functional as the field b_tilde."""
    return c.operator.field_expectation(psi)


def exchange_energy(c, psi):
    """-sum over apparatus pairs of sum_a J^a <S_i^a S_j^a>.

    Uses the anisotropic weights of the ferromagnet Hamiltonian, so this is
    exactly <H_A>.
    """
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    prob = psi.real**2 + psi.imag**2
    b = np.arange(psi.shape[0], dtype=np.int64)
    e = 0.0
    for (a1, a2), (jx, jy, jz) in zip(c.app_pairs, c.J_app):
        i, j = 1 + int(a1), 1 + int(a2)
        if jz:
            aligned = (((b >> i) ^ (b >> j)) & 1) == 0
            e -= 0.25 * jz * (2.0 * prob[aligned].sum() - 1.0 * prob.sum())
        if jx or jy:
            # H = -(jx SxSx + jy SySy): flip weights of the *negated* term
            e -= _kernels.flip_pair_expectation(psi, i, j, 0.25 * (jx - jy), 0.25 * (jx + jy))
    return float(e)


def system_spin_z(psi):
    n_sites_of(psi)
    prob = np.abs(psi) ** 2
    return float(0.5 * (prob[1::2].sum() - prob[0::2].sum()))


def universe_energy(c, psi, b_tilde=None):
    """E_U = <H_lin> - mu * b_tilde**2 / 2, the conserved energy of the flow.

    ``<H_B> = -mu * b_tilde**2`` at the state's own field, and the conserved
    combination is ``<H> - <H_B> / 2``.
    """
    if b_tilde is None:
        b_tilde = c.operator.field_expectation(psi)
    return c.operator.expectation(psi) - 0.5 * c.mu * b_tilde * b_tilde


def observe(c, psi, t=0.0, b_tilde=None):
    op = c.operator
    if b_tilde is None:
        b_tilde = op.field_expectation(psi)
    h_lin = op.expectation(psi)
    e_u = h_lin - 0.5 * c.mu * b_tilde * b_tilde
    return ObservableRecord(
        t=float(t),
        M=float(b_tilde),
        E_exch=exchange_energy(c, psi),
        S_sys_z=system_spin_z(psi),
        B_field=float(b_tilde),
        norm=float(np.sqrt(np.vdot(psi, psi).real)),
        E_U=float(e_u),
        H_mean=float(h_lin - c.mu * b_tilde * b_tilde),
    )

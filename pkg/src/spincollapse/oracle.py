"""Dense brute-force reference for small universes.

Everything here is built from Kronecker products of 2x2 spin matrices and
shares no code with the matrix-free kernels, so agreement between the two
is a real check.  Limited to ``2**L <= 4096``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ConvergenceError, UsageError

__all__ = [
    "MAX_ORACLE_SITES",
    "check_size",
    "spin_matrix",
    "site_operator",
    "dense_hamiltonian",
    "dense_field_operator",
    "dense_ground_state",
    "DenseEvolution",
    "dense_evolve",
    "max_amplitude_error",
]

MAX_ORACLE_SITES = 12

_SPIN = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128) / 2,
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128) / 2,
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128) / 2,
}
# the matrices above are written in (up, down) order; the basis uses bit 1 = up
_FLIP = np.array([[0, 1], [1, 0]])


def check_size(n_sites):
    if n_sites > MAX_ORACLE_SITES:
        raise ConfigError(
            f"dense oracle refuses L={n_sites}: 2^L = {1 << n_sites} exceeds {1 << MAX_ORACLE_SITES}"
        )


def spin_matrix(alpha):
    """``S^alpha`` in the (bit 0 = down, bit 1 = up) ordering."""
    return _FLIP @ _SPIN[alpha] @ _FLIP


def site_operator(alpha, site, n_sites):
    """``S^alpha`` on one site as a dense ``2**L`` matrix (site 0 = least significant)."""
    check_size(n_sites)
    op = np.ones((1, 1), dtype=np.complex128)
    for s in reversed(range(n_sites)):
        op = np.kron(op, spin_matrix(alpha) if s == site else np.eye(2))
    return op


def dense_hamiltonian(n_sites, terms):
    """``sum (cx SxSx + cy SySy + cz SzSz)`` over ``(i, j, cx, cy, cz)`` terms."""
    check_size(n_sites)
    cache = {}

    def op(alpha, s):
        key = (alpha, s)
        if key not in cache:
            cache[key] = site_operator(alpha, s, n_sites)
        return cache[key]

    h = np.zeros((1 << n_sites, 1 << n_sites), dtype=np.complex128)
    for i, j, cx, cy, cz in terms:
        for alpha, cc in (("x", cx), ("y", cy), ("z", cz)):
            if cc:
                h += cc * (op(alpha, i) @ op(alpha, j))
    return h


def dense_field_operator(n_sites, app_sites):
    check_size(n_sites)
    return sum(site_operator("z", s, n_sites) for s in app_sites)


def dense_ground_state(h):
    w, v = np.linalg.eigh(h)
    return float(w[0]), v[:, 0]


class DenseEvolution:
    """Exact propagator for ``H_lin - mu * b * S^z_A`` at any frozen ``b``.

    ``S^z_A`` is diagonal in the basis but does not commute with ``H_lin``,
    so each new field value is handled by a fresh eigendecomposition.
    """

    def __init__(self, c):
        check_size(c.n_sites)
        self.c = c
        self.h_lin = dense_hamiltonian(c.n_sites, c.bilinear_terms())
        app = range(1, 1 + c.n_app)
        self.sz_app = np.real(np.diag(dense_field_operator(c.n_sites, app))).copy()

    def field(self, psi):
        return float(np.sum(self.sz_app * np.abs(psi) ** 2))

    def step(self, psi, b_frozen, dt):
        h = self.h_lin - self.c.mu * b_frozen * np.diag(self.sz_app)
        w, v = np.linalg.eigh(h)
        return v @ (np.exp(-1j * w * dt) * (v.conj().T @ psi))

    def energy(self, psi):
        b = self.field(psi)
        return float(np.vdot(psi, self.h_lin @ psi).real) - 0.5 * self.c.mu * b * b


def dense_evolve(c, psi0, dt, n_steps, field_rule="midpoint", field_tolerance=1e-11,
                 max_field_iterations=50, record_stride=1):
    """Dense trajectory with the same per-step field freezing as :func:`solvers.evolve`.

    Returns ``(times, states)`` at every ``record_stride`` steps, including t=0.
    """
    if field_rule not in ("midpoint", "start"):
        raise UsageError(f"unknown field rule {field_rule!r}")
    ev = DenseEvolution(c)
    psi = np.array(psi0, dtype=np.complex128)
    if c.mu == 0.0:
        w, v = np.linalg.eigh(ev.h_lin)
        phase = np.exp(-1j * w * dt)
    b = ev.field(psi)
    times, states = [0.0], [psi.copy()]
    last_change = 0.0
    for step in range(1, n_steps + 1):
        if c.mu == 0.0:
            new = v @ (phase * (v.conj().T @ psi))
            b_new = ev.field(new)
        elif field_rule == "start":
            new = ev.step(psi, b, dt)
            b_new = ev.field(new)
        else:
            b_f = b + 0.5 * last_change
            for _ in range(max_field_iterations):
                new = ev.step(psi, b_f, dt)
                b_new = ev.field(new)
                target = 0.5 * (b + b_new)
                if abs(target - b_f) <= field_tolerance:
                    break
                b_f = target
            else:
                raise ConvergenceError(
                    f"dense self-consistent field did not settle at step {step}",
                    best_residual=abs(target - b_f),
                )
        last_change = b_new - b
        psi, b = new, b_new
        if step % record_stride == 0:
            times.append(step * dt)
            states.append(psi.copy())
    return np.array(times), np.array(states)


def max_amplitude_error(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


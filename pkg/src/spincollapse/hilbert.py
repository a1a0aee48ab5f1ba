"""Bitmask computational basis and matrix-free spin-1/2 operators.

Site ``b`` of an ``L``-site register is bit ``b`` of the basis index, with
bit value 1 meaning spin up along z.  Site 0 is the measured system spin,
sites ``1..n_app`` the apparatus and the remaining sites the environment.

Operator conventions: ``S^a = sigma^a / 2`` and
``S^y = (S^+ - S^-) / 2i``, so ``S^y |up> = (i/2) |down>``.

The functions here are the readable reference kernels.  They never modify
their inputs; the fused Hamiltonian kernels in :mod:`spincollapse._kernels`
are checked against them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = [
    "Subsystem",
    "SiteIndex",
    "SiteLayout",
    "n_sites_of",
    "basis_vector",
    "spin_z_values",
    "apply_sz",
    "apply_sx",
    "apply_sy",
    "apply_single",
    "apply_two_site",
    "inner",
    "norm",
    "axpy",
    "scale",
    "tensor_product",
]

AXES = ("x", "y", "z")


class Subsystem(str, enum.Enum):
    SYS = "SYS"
    APP = "APP"
    ENV = "ENV"


@dataclass(frozen=True)
class SiteIndex:
    index: int
    subsystem: Subsystem

    def __index__(self):
        return self.index


@dataclass(frozen=True)
class SiteLayout:
    """Fixed site ordering ``[sys | apparatus | environment]``."""

    n_app: int
    n_env: int

    def __post_init__(self):
        if self.n_app < 0 or self.n_env < 0:
            raise UsageError("subsystem sizes must be non-negative")

    @property
    def n_sites(self):
        return 1 + self.n_app + self.n_env

    @property
    def dim(self):
        return 1 << self.n_sites

    def site(self, index):
        if not 0 <= index < self.n_sites:
            raise UsageError(f"site {index} outside layout of {self.n_sites} sites")
        if index == 0:
            return SiteIndex(0, Subsystem.SYS)
        if index <= self.n_app:
            return SiteIndex(index, Subsystem.APP)
        return SiteIndex(index, Subsystem.ENV)

    @property
    def system(self):
        return SiteIndex(0, Subsystem.SYS)

    @property
    def apparatus(self):
        return [SiteIndex(1 + k, Subsystem.APP) for k in range(self.n_app)]

    @property
    def environment(self):
        return [SiteIndex(1 + self.n_app + k, Subsystem.ENV) for k in range(self.n_env)]

    @property
    def apparatus_mask(self):
        return ((1 << self.n_app) - 1) << 1


def n_sites_of(psi):
    """Number of spin sites encoded by a state vector of length ``2**L``."""
    n = psi.shape[0]
    if psi.ndim != 1 or n < 1 or n & (n - 1):
        raise UsageError(f"state vector length {n} is not a power of two")
    return n.bit_length() - 1


def _site(site, psi):
    idx = int(site.index if isinstance(site, SiteIndex) else site)
    n_sites = n_sites_of(psi)
    if not 0 <= idx < n_sites:
        raise UsageError(f"site {idx} out of range for {n_sites} sites")
    return idx


def basis_vector(n_sites, bits):
    """Unit vector ``|bits>`` in the ``2**n_sites`` dimensional basis."""
    if not 0 <= bits < (1 << n_sites):
        raise UsageError(f"basis word {bits} does not fit in {n_sites} bits")
    v = np.zeros(1 << n_sites, dtype=np.complex128)
    v[bits] = 1.0
    return v


def spin_z_values(n_sites, site):
    """Diagonal of ``S^z_site``: +1/2 where the bit is set, -1/2 elsewhere."""
    b = np.arange(1 << n_sites, dtype=np.int64)
    return ((b >> site) & 1) - 0.5


def apply_sz(site, psi):
    s = _site(site, psi)
    return spin_z_values(n_sites_of(psi), s) * psi


def apply_sx(site, psi):
    s = _site(site, psi)
    idx = np.arange(psi.shape[0], dtype=np.int64) ^ (1 << s)
    return 0.5 * psi[idx]


def apply_sy(site, psi):
    s = _site(site, psi)
    b = np.arange(psi.shape[0], dtype=np.int64)
    # target bit 0 came from up: +i/2; target bit 1 came from down: -i/2
    phase = 0.5j * (1 - 2 * ((b >> s) & 1))
    return phase * psi[b ^ (1 << s)]


_SINGLE = {"x": apply_sx, "y": apply_sy, "z": apply_sz}


def apply_single(alpha, site, psi):
    """Apply ``S^alpha`` on one site; ``alpha`` is one of ``'x', 'y', 'z'``."""
    try:
        op = _SINGLE[alpha]
    except KeyError:
        raise UsageError(f"unknown spin axis {alpha!r}") from None
    return op(site, psi)


def apply_two_site(alpha, i, j, coupling, psi, accumulator=None):
    """Accumulate ``coupling * S_i^alpha S_j^alpha psi`` into ``accumulator``.

    ``accumulator`` is updated in place and returned; a zero vector is
    allocated when it is ``None``.  ``psi`` is never modified.
    """
    si, sj = _site(i, psi), _site(j, psi)
    if si == sj:
        raise UsageError("two-site operator needs distinct sites")
    if accumulator is None:
        accumulator = np.zeros_like(psi, dtype=np.complex128)
    elif accumulator.shape != psi.shape:
        raise UsageError("accumulator and state have different dimensions")
    b = np.arange(psi.shape[0], dtype=np.int64)
    same = (((b >> si) ^ (b >> sj)) & 1) == 0
    if alpha == "z":
        accumulator += coupling * np.where(same, 0.25, -0.25) * psi
    elif alpha == "x":
        accumulator += (0.25 * coupling) * psi[b ^ ((1 << si) | (1 << sj))]
    elif alpha == "y":
        # (i/2)(i/2) = (-i/2)(-i/2) = -1/4 for aligned bits, +1/4 otherwise
        accumulator += coupling * np.where(same, -0.25, 0.25) * psi[b ^ ((1 << si) | (1 << sj))]
    else:
        raise UsageError(f"unknown spin axis {alpha!r}")
    return accumulator


def _check_dims(psi, phi):
    if psi.shape != phi.shape:
        raise UsageError(f"dimension mismatch: {psi.shape} vs {phi.shape}")


def inner(psi, phi):
    """<psi|phi>, conjugate-linear in the first argument."""
    _check_dims(psi, phi)
    return complex(np.vdot(psi, phi))


def norm(psi):
    return float(np.sqrt(np.vdot(psi, psi).real))


def axpy(a, psi, phi):
    """Return ``a * psi + phi`` as a new vector."""
    _check_dims(psi, phi)
    return a * psi + phi


def scale(a, psi):
    return a * psi


def tensor_product(sys, app, env):
    """Product state in the ``[sys | apparatus | environment]`` bit layout.

    The system spin is the least significant bit, so the factor order is
    reversed relative to numpy's Kronecker convention.
    """
    sys, app, env = (np.asarray(v, dtype=np.complex128) for v in (sys, app, env))
    if sys.shape != (2,):
        raise UsageError(f"system factor must have dimension 2, got {sys.shape}")
    for name, v in (("apparatus", app), ("environment", env)):
        if v.ndim != 1:
            raise UsageError(f"{name} factor must be a vector")
        n_sites_of(v)
    return np.kron(env, np.kron(app, sys))

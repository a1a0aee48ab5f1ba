"""Hamiltonian of a system spin, an Ising-like ferromagnet and a spin glass.

The universe Hamiltonian is

    H = H_A + H_E + H_AE + H_SA + H_SE + H_B

with the ferromagnet ``H_A = -sum J^a S_i^a S_j^a`` over apparatus pairs,
random environment couplings ``Omega``, apparatus-environment couplings
``Delta``, system-environment couplings ``Theta``, a z-z system-apparatus
coupling ``Gamma`` and the mean-field self-interaction

    H_B = -mu * <Psi| sum_A S^z |Psi> * sum_A S^z.

Every double sum runs over unordered pairs, each counted once.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, UsageError
from .hilbert import SiteLayout, n_sites_of

__all__ = [
    "GeometryKind",
    "Geometry",
    "ModelConfig",
    "CouplingSet",
    "SpinOperator",
    "RNG_FAMILIES",
    "build_couplings",
    "apply_linear_hamiltonian",
    "magnetization_field",
    "apply_nonlinear_term",
    "degeneracy_split",
    "spectral_bound",
]

# Substream index of each random coupling family; see ``_family_rng``.
RNG_FAMILIES = {"omega": 0, "delta": 1, "theta": 2, "lanczos": 3}


class GeometryKind(str, enum.Enum):
    RECTANGLE4 = "RECTANGLE4"
    CUBE8 = "CUBE8"


@dataclass(frozen=True)
class Geometry:
    """Apparatus lattice.

    Apparatus site ``k`` sits on the corner with coordinates ``gray(k)``
    (``k ^ (k >> 1)``) of a square or cube, so consecutive sites are
    nearest neighbours and the alternating state ``|up down up down ...>``
    is the Neel state.
    """

    kind: GeometryKind
    n_app: int
    nn_pairs: tuple
    nnn_pairs: tuple

    @classmethod
    def for_size(cls, n_app):
        kinds = {4: GeometryKind.RECTANGLE4, 8: GeometryKind.CUBE8}
        if n_app not in kinds:
            raise ConfigError(f"unsupported apparatus size N_A={n_app}; use 4 or 8")
        corner = [k ^ (k >> 1) for k in range(n_app)]
        nn, nnn = [], []
        for a in range(n_app):
            for b in range(a + 1, n_app):
                hamming = bin(corner[a] ^ corner[b]).count("1")
                if hamming == 1:
                    nn.append((a, b))
                elif hamming == 2:
                    nnn.append((a, b))
        return cls(kinds[n_app], n_app, tuple(nn), tuple(nnn))


@dataclass(frozen=True)
class ModelConfig:
    n_app: int = 4
    n_env: int = 15
    gamma: float = 0.1
    delta: float = 0.3
    omega: float = 0.8
    theta: float = 0.5
    mu: float = 12.0
    J: float = 1.0
    sys_app: float = 1.0

    def __post_init__(self):
        if self.n_app not in (4, 8):
            raise ConfigError(f"unsupported apparatus size N_A={self.n_app}; use 4 or 8")
        if self.n_env < 1:
            raise ConfigError("N_E must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        for name in ("delta", "omega", "theta", "mu"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")


def _family_rng(seed, family):
    """Independent PCG64 stream for one coupling family.

    Family ``k`` of seed ``s`` uses ``SeedSequence(s, spawn_key=(k,))``,
    which is stable across numpy versions and platforms.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(RNG_FAMILIES[family],))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class CouplingSet:
    """All Hamiltonian constants for one realisation.

    Index arrays are local to their subsystem (apparatus site ``k`` is
    global site ``1 + k``, environment site ``e`` is ``1 + n_app + e``).
    The last axis of every coupling array is the spin component x, y, z.
    """

    config: ModelConfig
    seed: int
    geometry: Geometry
    app_pairs: np.ndarray  # (P_A, 2)
    J_app: np.ndarray  # (P_A, 3), ferromagnetic magnitudes
    env_pairs: np.ndarray  # (P_E, 2)
    omega: np.ndarray  # (P_E, 3)
    delta: np.ndarray  # (N_A, N_E, 3)
    theta: np.ndarray  # (N_E, 3)
    gamma_sa: np.ndarray  # (N_A,)
    mu: float

    @property
    def layout(self):
        return SiteLayout(self.config.n_app, self.config.n_env)

    @property
    def n_app(self):
        return self.config.n_app

    @property
    def n_env(self):
        return self.config.n_env

    @property
    def n_sites(self):
        return 1 + self.n_app + self.n_env

    def with_mu(self, mu):
        """Same couplings with a different nonlinearity strength."""
        return CouplingSet(
            self.config, self.seed, self.geometry, self.app_pairs, self.J_app,
            self.env_pairs, self.omega, self.delta, self.theta, self.gamma_sa, float(mu),
        )

    def bilinear_terms(self):
        """Every pair term as ``(i, j, cx, cy, cz)`` on global sites, signs included."""
        n_a = self.n_app
        terms = []
        for (a, b), (jx, jy, jz) in zip(self.app_pairs, self.J_app):
            terms.append((1 + a, 1 + b, -jx, -jy, -jz))
        for (e, f), c in zip(self.env_pairs, self.omega):
            terms.append((1 + n_a + e, 1 + n_a + f, *c))
        for a in range(n_a):
            for e in range(self.n_env):
                terms.append((1 + a, 1 + n_a + e, *self.delta[a, e]))
        for e in range(self.n_env):
            terms.append((0, 1 + n_a + e, *self.theta[e]))
        for a in range(n_a):
            terms.append((0, 1 + a, 0.0, 0.0, self.gamma_sa[a]))
        return terms

    def environment_terms(self):
        """Pair terms of the isolated spin glass on local sites ``0..N_E-1``."""
        return [(int(e), int(f), *c) for (e, f), c in zip(self.env_pairs, self.omega)]

    @functools.cached_property
    def operator(self):
        """Compiled linear Hamiltonian with the apparatus field channel."""
        return SpinOperator(self.n_sites, self.bilinear_terms(), self.layout.apparatus_mask)

    @functools.cached_property
    def environment_operator(self):
        return SpinOperator(self.n_env, self.environment_terms(), 0)


class SpinOperator:
    """Matrix-free ``H_lin + f * sum_A S^z`` for a list of pair terms.

    ``apply(psi, field_coef=f)`` evaluates the product; ``field_coef`` is
    the coefficient of the apparatus magnetisation operator, which is
    ``-mu * b_tilde`` for the self-induced field.
    """

    def __init__(self, n_sites, terms, app_mask):
        self.n_sites = n_sites
        self.dim = 1 << n_sites
        self.app_mask = int(app_mask)
        self.half_app = 0.5 * bin(self.app_mask).count("1")
        zi, zj, zc, bi, bj, ws, wd = [], [], [], [], [], [], []
        self.terms = list(terms)
        for i, j, cx, cy, cz in self.terms:
            if i == j or not (0 <= i < n_sites and 0 <= j < n_sites):
                raise UsageError(f"bad pair ({i}, {j}) for {n_sites} sites")
            if cz != 0.0:
                zi.append(i), zj.append(j), zc.append(cz)
            if cx != 0.0 or cy != 0.0:
                bi.append(i), bj.append(j)
                ws.append(0.25 * (cx - cy))
                wd.append(0.25 * (cx + cy))
        lo = np.minimum(bi, bj).astype(np.int64)
        hi = np.maximum(bi, bj).astype(np.int64)
        order = np.lexsort((hi, lo))
        self.flip_i = lo[order]
        self.flip_j = hi[order]
        self.w_same = np.array(ws, dtype=np.float64)[order]
        self.w_diff = np.array(wd, dtype=np.float64)[order]
        glow, gstart = np.unique(self.flip_i, return_index=True)
        self._glow = glow.astype(np.int64)
        self._gstart = np.append(gstart, self.flip_i.shape[0]).astype(np.int64)
        self.diag = _kernels.build_diagonal(
            n_sites,
            np.array(zi, dtype=np.int64),
            np.array(zj, dtype=np.int64),
            np.array(zc, dtype=np.float64),
        )

    def _check(self, psi):
        if psi.shape != (self.dim,):
            raise UsageError(f"state has shape {psi.shape}, operator expects ({self.dim},)")

    def apply(self, psi, out=None, field_coef=0.0):
        self._check(psi)
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        if out is None:
            out = np.empty_like(psi)
        elif out is psi:
            raise UsageError("output buffer must not alias the input")
        _kernels.matvec(
            psi, out, self.diag, float(field_coef), self.app_mask, self.half_app,
            self._gstart, self._glow, self.flip_j, self.w_same, self.w_diff,
        )
        return out

    __call__ = apply

    def expectation(self, psi):
        """Re <psi|H_lin|psi> without allocating ``H psi``."""
        self._check(psi)
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        e = _kernels.diagonal_expectation(psi, self.diag)
        for p in range(self.flip_i.shape[0]):
            e += _kernels.flip_pair_expectation(
                psi, self.flip_i[p], self.flip_j[p], self.w_same[p], self.w_diff[p]
            )
        return float(e)

    def field_expectation(self, psi):
        """<psi| sum_A S^z |psi> (unnormalised)."""
        self._check(psi)
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        return float(_kernels.app_field_expectation(psi, self.app_mask, self.half_app))

    def abs_bound(self):
        """Triangle-inequality bound on ``||H_lin||``."""
        return sum((abs(cx) + abs(cy) + abs(cz)) for _, _, cx, cy, cz in self.terms) / 4.0


def build_couplings(config, seed):
    """Draw one coupling realisation; a pure function of ``(config, seed)``."""
    if not isinstance(config, ModelConfig):
        raise ConfigError("build_couplings expects a ModelConfig")
    geom = Geometry.for_size(config.n_app)
    n_a, n_e = config.n_app, config.n_env

    pairs, jz = [], []
    for a, b in geom.nn_pairs:
        pairs.append((a, b)), jz.append(config.J)
    for a, b in geom.nnn_pairs:
        pairs.append((a, b)), jz.append(config.J / math.sqrt(2.0))
    jz = np.array(jz)
    J_app = np.stack([config.gamma * jz, config.gamma * jz, jz], axis=1)

    env_pairs = np.array(
        [(e, f) for e in range(n_e) for f in range(e + 1, n_e)], dtype=np.int64
    ).reshape(-1, 2)
    omega = _family_rng(seed, "omega").uniform(-config.omega, config.omega, size=(len(env_pairs), 3))
    delta = _family_rng(seed, "delta").uniform(-config.delta, config.delta, size=(n_a, n_e, 3))
    theta = _family_rng(seed, "theta").uniform(-config.theta, config.theta, size=(n_e, 3))

    return CouplingSet(
        config=config,
        seed=int(seed),
        geometry=geom,
        app_pairs=np.array(pairs, dtype=np.int64),
        J_app=J_app,
        env_pairs=env_pairs,
        omega=omega,
        delta=delta,
        theta=theta,
        gamma_sa=np.full(n_a, config.sys_app),
        mu=float(config.mu),
    )


def _check_state(c, psi):
    if n_sites_of(psi) != c.n_sites:
        raise UsageError(f"state encodes {n_sites_of(psi)} sites, model has {c.n_sites}")


def apply_linear_hamiltonian(c, psi):
    """(H_A + H_E + H_AE + H_SA + H_SE) psi as a new vector."""
    _check_state(c, psi)
    return c.operator.apply(psi)


def magnetization_field(psi, c):
    """b_tilde = sum_{i in A} <psi|S_i^z|psi>."""
    _check_state(c, psi)
    return c.operator.field_expectation(psi)


def apply_nonlinear_term(c, field, psi):
    """H_B psi = -mu * field * (sum_A S^z) psi with the field held fixed."""
    _check_state(c, psi)
    layout = c.layout
    b = np.arange(psi.shape[0], dtype=np.int64)
    sz = np.zeros(psi.shape[0])
    for site in layout.apparatus:
        sz += ((b >> site.index) & 1) - 0.5
    return (-c.mu * float(field)) * sz * psi


def degeneracy_split(mu, n_a):
    """Degeneracy lift ``mu * N_A**2 / 4`` of a fully polarised apparatus.

    This is ``|<H_B>|`` of either polarised state in its own field, so the
    self-field singles out whichever polarisation it is built from.
    """
    if n_a < 1:
        raise UsageError("n_a must be positive")
    return mu * n_a * n_a / 4.0


def spectral_bound(c, field_cap=None):
    """Upper bound on ``||H_lin + H_B(b)||`` for every ``|b| <= field_cap``.

    Sums ``(|c_x| + |c_y| + |c_z|) / 4`` over all pair terms and adds
    ``mu * field_cap * N_A / 2`` for the self-field; ``field_cap`` defaults
    to full polarisation ``N_A / 2``.
    """
    if field_cap is None:
        field_cap = c.n_app / 2.0
    return c.operator.abs_bound() + c.mu * abs(field_cap) * c.n_app / 2.0

"""
Conditional Bob states of the star network after the multipartite Bell detection.

Closed forms for the N-mode conferencing state, its two-mode reductions, the
two-mode effective state of a secret-sharing bipartition, and the locally
squeezed versions of both.  :func:`network_conditional_cm_oracle` rebuilds the
N-mode state by brute-force conditioning of the full 2N-mode state and serves
as an independent check on the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gaussian as gs
from .errors import DomainError, SplitError, UnphysicalStateError
from .gaussian import I2, Z2, LinkParams


@dataclass(frozen=True)
class NetworkConfig:
    """Symmetric star network: ``n_users`` Bobs with identical links."""

    n_users: int
    link: LinkParams

    def __post_init__(self):
        if int(self.n_users) != self.n_users or self.n_users < 2:
            raise DomainError(f"a network needs n_users >= 2, got {self.n_users}")

    @property
    def kappa(self) -> float:
        """Pairwise correlation z^2 / (N x)."""
        return self.link.z2 / (self.n_users * self.link.x)

    @property
    def reduced_variance(self) -> float:
        """y - z^2/x, the variance of a Bob quadrature conditioned on its partner A."""
        link = self.link
        # x y - z^2 = (1 - eta) omega mu + eta, free of cancellation near eta = 1
        return ((1.0 - link.eta) * link.omega * link.mu + link.eta) / link.x

    def y_minus(self, m: float) -> float:
        """``y - m kappa``, evaluated without cancellation for 0 <= m <= N."""
        return self.reduced_variance + (self.n_users - m) * self.kappa


@dataclass(frozen=True)
class SplitConfig:
    """Two cooperating ensembles of ``n_a`` and ``n_b`` Bobs inside ``parent``."""

    n_a: int
    n_b: int
    parent: NetworkConfig

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 1:
            raise SplitError(f"both ensembles need at least one member, got ({self.n_a}, {self.n_b})")
        if self.n_a + self.n_b > self.parent.n_users:
            raise SplitError(
                f"split ({self.n_a}, {self.n_b}) exceeds the {self.parent.n_users} users of the network"
            )

    @property
    def full_house(self) -> bool:
        return self.n_a + self.n_b == self.parent.n_users


@dataclass(frozen=True)
class SqueezedParams:
    """Local squeezing parameters for a configuration."""

    kappa: float
    s: float
    s_tilde: float


def network(n_users: int, mu: float, eta: float, nbar: float = 0.0) -> NetworkConfig:
    return NetworkConfig(int(n_users), gs.link_params(mu, eta, nbar))


def split(n_a: int, n_b: int, cfg: NetworkConfig) -> SplitConfig:
    return SplitConfig(int(n_a), int(n_b), cfg)


def _check_physical(cm: np.ndarray) -> np.ndarray:
    if not gs.is_physical(cm):
        raise UnphysicalStateError("conditional state is unphysical for this link")
    return cm


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def network_conditional_cm(cfg: NetworkConfig) -> np.ndarray:
    """N-mode CM of the Bobs conditioned on the broadcast Bell outcome.

    Every diagonal block is ``diag(y - (N-1) kappa, y - kappa)`` and every
    off-diagonal block ``kappa Z`` with ``kappa = z^2 / (N x)``.
    """
    n = cfg.n_users
    k = cfg.kappa
    y = cfg.link.y
    ones = np.ones((n, n))
    eye = np.eye(n)
    vq = k * ones + cfg.reduced_variance * eye
    vp = -k * ones + y * eye
    zero = np.zeros((n, n))
    return _check_physical(np.block([[vq, zero], [zero, vp]]))


def pair_blocks(cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal block Delta and off-diagonal block Gamma of the pair CM."""
    n, k = cfg.n_users, cfg.kappa
    delta = np.diag([cfg.y_minus(n - 1), cfg.y_minus(1)])
    gamma = k * Z2
    return delta, gamma


def pair_conditional_cm(cfg: NetworkConfig) -> np.ndarray:
    """Two-mode CM shared by any pair of Bobs."""
    delta, gamma = pair_blocks(cfg)
    return gs.from_mode_blocks([[delta, gamma], [gamma, delta]])


def secret_sharing_blocks(sp: SplitConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Delta_a, Delta_b, Gamma') of the effective two-mode secret-sharing state."""
    cfg = sp.parent
    n, k = cfg.n_users, cfg.kappa

    def delta(nl):
        return np.diag([cfg.y_minus(n - nl), cfg.y_minus(nl)])

    gamma = np.sqrt(sp.n_a * sp.n_b) * k * Z2
    return delta(sp.n_a), delta(sp.n_b), gamma


def secret_sharing_cm(sp: SplitConfig) -> np.ndarray:
    """Effective two-mode CM (modes a, b) of a bipartition after local concentration."""
    da, db, g = secret_sharing_blocks(sp)
    return _check_physical(gs.from_mode_blocks([[da, g], [g, db]]))


def squeezed_params(cfg: NetworkConfig, sp: SplitConfig | None = None) -> SqueezedParams:
    """Local squeezing factors that equalise q and p variances.

    ``s`` is the per-Bob factor for conferencing.  ``s_tilde`` is the product
    of the two ensemble factors for the split ``sp``; it is 1 for full-house
    splits and when no split is given.
    """
    n = cfg.n_users
    s = np.sqrt(cfg.y_minus(1) / cfg.y_minus(n - 1))
    s_tilde = 1.0
    if sp is not None:
        na, nb = sp.n_a, sp.n_b
        s4 = (cfg.y_minus(na) * cfg.y_minus(nb)) / (cfg.y_minus(n - na) * cfg.y_minus(n - nb))
        s_tilde = s4**0.25
    return SqueezedParams(float(cfg.kappa), float(s), float(s_tilde))


def squeezed_network_cm(cfg: NetworkConfig) -> np.ndarray:
    """N-mode conditional CM after every Bob applies the local squeezer diag(sqrt s, 1/sqrt s)."""
    cm = network_conditional_cm(cfg)
    s = squeezed_params(cfg).s
    n = cfg.n_users
    sq = np.diag(np.concatenate([np.full(n, np.sqrt(s)), np.full(n, 1.0 / np.sqrt(s))]))
    return sq @ cm @ sq.T


def squeezed_pair_blocks(cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    n, k = cfg.n_users, cfg.kappa
    s = squeezed_params(cfg).s
    alpha = np.sqrt(cfg.y_minus(1) * cfg.y_minus(n - 1)) * I2
    eps = k * np.diag([s, 1.0 / s]) @ Z2
    return alpha, eps


def squeezed_pair_cm(cfg: NetworkConfig) -> np.ndarray:
    """Pair CM after local squeezing: ``alpha I`` on the diagonal, ``kappa diag(s, 1/s) Z`` off it."""
    alpha, eps = squeezed_pair_blocks(cfg)
    return gs.from_mode_blocks([[alpha, eps], [eps, alpha]])


def squeezed_ss_blocks(sp: SplitConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(alpha_a, alpha_b, eps) of the squeezed effective secret-sharing state.

    In the full-house case ``alpha_a == alpha_b`` and ``s_tilde == 1`` so the
    off-diagonal block reduces to ``kappa sqrt(N_a N_b) Z``.
    """
    cfg = sp.parent
    n, k = cfg.n_users, cfg.kappa
    na, nb = sp.n_a, sp.n_b
    if sp.full_house:
        abar = np.sqrt(cfg.y_minus(na) * cfg.y_minus(nb))
        return abar * I2, abar * I2, k * np.sqrt(na * nb) * Z2

    def alpha(nl):
        return np.sqrt(cfg.y_minus(n - nl) * cfg.y_minus(nl)) * I2

    st = squeezed_params(cfg, sp).s_tilde
    eps = np.sqrt(na * nb) * k * np.diag([st, -1.0 / st])
    return alpha(na), alpha(nb), eps


def squeezed_ss_cm(sp: SplitConfig) -> np.ndarray:
    aa, ab, eps = squeezed_ss_blocks(sp)
    return gs.from_mode_blocks([[aa, eps], [eps, ab]])


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------


def network_input_cm(cfg: NetworkConfig) -> np.ndarray:
    """2N-mode CM before detection, modes ordered (A_1..A_N, B_1..B_N)."""
    n = cfg.n_users
    x, y, z = cfg.link.x, cfg.link.y, cfg.link.z
    eye = np.eye(n)
    # quadrature order qA, qB, pA, pB
    vq = np.block([[x * eye, z * eye], [z * eye, y * eye]])
    vp = np.block([[x * eye, -z * eye], [-z * eye, y * eye]])
    zz = np.zeros((2 * n, 2 * n))
    return np.block([[vq, zz], [zz, vp]])


def _bell_measure_a_modes(cm: np.ndarray, n: int) -> np.ndarray:
    # A mode 1 in p, A modes 2..N in q; A modes always occupy the leading slots
    cm = gs.homodyne_condition(cm, 0, "p")
    for _ in range(1, n):
        cm = gs.homodyne_condition(cm, 0, "q")
    return cm


def network_conditional_cm_oracle(cfg: NetworkConfig, path: str = "dual") -> np.ndarray:
    """Conditional Bob CM by explicit conditioning of the full 2N-mode state.

    ``direct``: send the A modes through the beam-splitter cascade, then homodyne
    its outputs.  ``dual``: homodyne the A modes first, then apply the
    transposed interferometer to the B modes.
    """
    n = cfg.n_users
    full = network_input_cm(cfg)
    cascade = gs.cascade_interferometer(n)
    if path == "direct":
        s = gs.direct_sum(cascade.symplectic(), np.eye(2 * n))
        full = gs.apply_symplectic(full, s)
        return _bell_measure_a_modes(full, n)
    if path == "dual":
        cm_b = _bell_measure_a_modes(full, n)
        rt = cascade.r_matrix.T
        zero = np.zeros((n, n))
        return gs.apply_symplectic(cm_b, np.block([[rt, zero], [zero, rt]]))
    raise DomainError(f"unknown oracle path {path!r}; expected 'dual' or 'direct'")

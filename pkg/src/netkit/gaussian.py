"""
Dense linear algebra for zero-mean Gaussian states.

Covariance matrices are plain ``numpy`` arrays in shot-noise units (vacuum
variance 1).  Internally every m-mode covariance matrix uses the block
ordering ``(q1, ..., qm, p1, ..., pm)`` ("xxpp").  Per-mode 2x2 blocks as
written in most of the literature use ``(q1, p1, ..., qm, pm)`` ("xpxp");
use :func:`xpxp_to_xxpp` and :func:`xxpp_to_xpxp` at the boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, InvalidModulationError, NetkitError, UnphysicalStateError

ORDERING = "xxpp"

#: Symplectic eigenvalues within this distance below 1 are clamped to 1.
CLAMP_TOL = 1e-9
#: Symplectic eigenvalues further than this below 1 are rejected.
UNPHYSICAL_TOL = 1e-6

Z2 = np.diag([1.0, -1.0])
I2 = np.eye(2)


# ---------------------------------------------------------------------------
# Ordering conversion and bookkeeping
# ---------------------------------------------------------------------------


def n_modes(cm: np.ndarray) -> int:
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] % 2:
        raise NetkitError(f"covariance matrix must be 2m x 2m, got shape {cm.shape}")
    return cm.shape[0] // 2


def _xpxp_permutation(m: int) -> np.ndarray:
    # perm[i] = xxpp index of the i-th xpxp coordinate
    return np.ravel(np.column_stack([np.arange(m), np.arange(m) + m]))


def xpxp_to_xxpp(cm: np.ndarray) -> np.ndarray:
    """Reorder a covariance matrix from (q1,p1,q2,p2,...) to (q1,q2,...,p1,p2,...)."""
    m = n_modes(cm)
    perm = _xpxp_permutation(m)
    out = np.empty_like(np.asarray(cm, dtype=float))
    out[np.ix_(perm, perm)] = cm
    return out


def xxpp_to_xpxp(cm: np.ndarray) -> np.ndarray:
    """Reorder a covariance matrix from (q1,q2,...,p1,p2,...) to (q1,p1,q2,p2,...)."""
    m = n_modes(cm)
    perm = _xpxp_permutation(m)
    return np.asarray(cm, dtype=float)[np.ix_(perm, perm)]


def from_mode_blocks(blocks: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Assemble an xxpp covariance matrix from a grid of per-mode 2x2 blocks."""
    return xpxp_to_xxpp(np.block([[np.asarray(b, dtype=float) for b in row] for row in blocks]))


def mode_block(cm: np.ndarray, i: int, j: int) -> np.ndarray:
    """The 2x2 (q, p) block coupling modes ``i`` and ``j``."""
    m = n_modes(cm)
    idx_i = [i, i + m]
    idx_j = [j, j + m]
    return np.asarray(cm)[np.ix_(idx_i, idx_j)]


def quadrature_indices(m: int, modes: Sequence[int]) -> list[int]:
    modes = list(modes)
    return modes + [k + m for k in modes]


def reduce_modes(cm: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Partial trace: keep only the listed modes, in the listed order."""
    m = n_modes(cm)
    idx = quadrature_indices(m, keep)
    return np.asarray(cm, dtype=float)[np.ix_(idx, idx)]


def permute_modes(cm: np.ndarray, order: Sequence[int]) -> np.ndarray:
    m = n_modes(cm)
    if sorted(order) != list(range(m)):
        raise DomainError(f"{order!r} is not a permutation of {m} modes")
    return reduce_modes(cm, order)


def direct_sum(*mats: np.ndarray) -> np.ndarray:
    """Direct sum of xxpp matrices (covariance or symplectic) of several subsystems."""
    ms = [n_modes(a) for a in mats]
    total = sum(ms)
    out = np.zeros((2 * total, 2 * total))
    offset = 0
    for a, m in zip(mats, ms):
        idx = quadrature_indices(total, range(offset, offset + m))
        out[np.ix_(idx, idx)] = a
        offset += m
    return out


# ---------------------------------------------------------------------------
# Elementary states and transformations
# ---------------------------------------------------------------------------


def symplectic_form(m: int) -> np.ndarray:
    """Standard symplectic form for the xxpp ordering."""
    eye = np.eye(m)
    zero = np.zeros((m, m))
    return np.block([[zero, eye], [-eye, zero]])


def vacuum(m: int = 1) -> np.ndarray:
    return np.eye(2 * m)


def thermal(variance: float, m: int = 1) -> np.ndarray:
    if variance < 1:
        raise DomainError(f"thermal variance must be >= 1, got {variance}")
    return variance * np.eye(2 * m)


def make_tmsv(mu: float) -> np.ndarray:
    """Two-mode squeezed vacuum with local variance ``mu``.

    The diagonal blocks are ``mu * I`` and the off-diagonal blocks
    ``sqrt(mu**2 - 1) * Z`` with ``Z = diag(1, -1)``.
    """
    if not mu >= 1:
        raise InvalidModulationError(f"modulation variance must be >= 1, got {mu}")
    c = np.sqrt(mu * mu - 1.0)
    return from_mode_blocks([[mu * I2, c * Z2], [c * Z2, mu * I2]])


@dataclass(frozen=True)
class LinkParams:
    """Entries of the two-mode covariance matrix after one thermal-loss link.

    ``mu`` is the modulation variance, ``eta`` the transmissivity and ``nbar``
    the mean thermal photon number of the environment.
    """

    mu: float
    eta: float
    nbar: float = 0.0

    @property
    def omega(self) -> float:
        return 2.0 * self.nbar + 1.0

    @property
    def x(self) -> float:
        return self.eta * self.mu + (1.0 - self.eta) * self.omega

    @property
    def y(self) -> float:
        return self.mu

    @property
    def z(self) -> float:
        return float(np.sqrt(self.eta * (self.mu * self.mu - 1.0)))

    @property
    def z2(self) -> float:
        return self.eta * (self.mu * self.mu - 1.0)

    def cm(self) -> np.ndarray:
        """Two-mode CM of (A after the channel, B) with blocks xI, zZ, yI."""
        x, y, z = self.x, self.y, self.z
        return from_mode_blocks([[x * I2, z * Z2], [z * Z2, y * I2]])

    def replace(self, **changes) -> LinkParams:
        fields = {"mu": self.mu, "eta": self.eta, "nbar": self.nbar}
        fields.update(changes)
        return link_params(**fields)


def link_params(mu: float, eta: float, nbar: float = 0.0) -> LinkParams:
    """Validated constructor for :class:`LinkParams`."""
    if not mu >= 1:
        raise InvalidModulationError(f"modulation variance must be >= 1, got {mu}")
    if not 0 < eta <= 1:
        raise DomainError(f"transmissivity must lie in (0, 1], got {eta}")
    if not nbar >= 0:
        raise DomainError(f"thermal photon number must be >= 0, got {nbar}")
    return LinkParams(float(mu), float(eta), float(nbar))


@dataclass(frozen=True)
class InterferometerSpec:
    """Cascade of N-1 beam splitters acting identically on q's and p's."""

    n_modes: int
    r_matrix: np.ndarray

    @property
    def transmissivities(self) -> np.ndarray:
        k = np.arange(2, self.n_modes + 1)
        return 1.0 - 1.0 / k

    def symplectic(self) -> np.ndarray:
        """The xxpp symplectic matrix R (+) R."""
        r = self.r_matrix
        zero = np.zeros_like(r)
        return np.block([[r, zero], [zero, r]])


def cascade_interferometer(n: int) -> InterferometerSpec:
    """Orthogonal mode transformation of the multipartite Bell detection.

    Row 1 maps onto the uniform superposition of all inputs; row k >= 2 is
    the k-th difference mode of the cascade with transmissivity 1 - 1/k.
    """
    if int(n) != n or n < 2:
        raise DomainError(f"interferometer needs an integer n >= 2, got {n}")
    n = int(n)
    r = np.zeros((n, n))
    r[0, :] = 1.0 / np.sqrt(n)
    for k in range(2, n + 1):
        r[k - 1, : k - 1] = -1.0 / np.sqrt(k * (k - 1))
        r[k - 1, k - 1] = np.sqrt(1.0 - 1.0 / k)
    r.setflags(write=False)
    return InterferometerSpec(n, r)


def beam_splitter(transmissivity: float, i: int, j: int, m: int) -> np.ndarray:
    """Real beam splitter mixing modes i and j of an m-mode system.

    Output i is ``sqrt(T) a_i + sqrt(1-T) a_j`` and output j is
    ``sqrt(T) a_j - sqrt(1-T) a_i``, on both quadratures.
    """
    if not 0 <= transmissivity <= 1:
        raise DomainError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    u = np.eye(m)
    u[i, i], u[i, j] = t, r
    u[j, j], u[j, i] = t, -r
    zero = np.zeros((m, m))
    return np.block([[u, zero], [zero, u]])


def squeezer(factor: float, i: int, m: int) -> np.ndarray:
    """Local squeezer scaling q_i by ``factor`` and p_i by ``1/factor``."""
    if factor <= 0:
        raise DomainError(f"squeezing factor must be positive, got {factor}")
    s = np.eye(2 * m)
    s[i, i] = factor
    s[i + m, i + m] = 1.0 / factor
    return s


def is_symplectic(s: np.ndarray, atol: float = 1e-10) -> bool:
    s = np.asarray(s, dtype=float)
    omega = symplectic_form(n_modes(s))
    return bool(np.allclose(s @ omega @ s.T, omega, rtol=0.0, atol=atol))


def apply_symplectic(cm: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Transform a covariance matrix as ``S V S^T``."""
    cm = np.asarray(cm, dtype=float)
    s = np.asarray(s, dtype=float)
    if cm.shape != s.shape:
        raise NetkitError(f"dimension mismatch: CM {cm.shape} vs symplectic {s.shape}")
    if not is_symplectic(s):
        raise NetkitError("matrix is not symplectic")
    return s @ cm @ s.T


# ---------------------------------------------------------------------------
# Gaussian measurements
# ---------------------------------------------------------------------------


def _split(cm: np.ndarray, mode: int):
    m = n_modes(cm)
    if not 0 <= mode < m:
        raise DomainError(f"mode {mode} out of range for {m}-mode state")
    rest = [k for k in range(m) if k != mode]
    ridx = quadrature_indices(m, rest)
    midx = quadrature_indices(m, [mode])
    cm = np.asarray(cm, dtype=float)
    return cm[np.ix_(ridx, ridx)], cm[np.ix_(ridx, midx)], cm[np.ix_(midx, midx)]


def homodyne_condition(cm: np.ndarray, mode: int, quadrature: str = "q") -> np.ndarray:
    """Covariance of the remaining modes after homodyning ``mode``.

    Generalised Schur complement ``V_rest - C (P V_mode P)^+ C^T`` where P
    projects onto the measured quadrature and ``+`` is the pseudo-inverse.
    The result does not depend on the outcome value.
    """
    if quadrature not in ("q", "p"):
        raise DomainError(f"quadrature must be 'q' or 'p', got {quadrature!r}")
    rest, cross, block = _split(cm, mode)
    proj = np.diag([1.0, 0.0]) if quadrature == "q" else np.diag([0.0, 1.0])
    out = rest - cross @ np.linalg.pinv(proj @ block @ proj) @ cross.T
    return 0.5 * (out + out.T)


def heterodyne_condition(cm: np.ndarray, mode: int) -> np.ndarray:
    """Covariance of the remaining modes after heterodyning ``mode``.

    ``V_rest - C (V_mode + I)^{-1} C^T``.
    """
    rest, cross, block = _split(cm, mode)
    out = rest - cross @ np.linalg.solve(block + I2, cross.T)
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# Spectra and entropies
# ---------------------------------------------------------------------------


def _williamson(cm: np.ndarray) -> np.ndarray:
    """Unclamped sorted symplectic eigenvalues; raises if V is not positive definite."""
    cm = np.asarray(cm, dtype=float)
    m = n_modes(cm)
    if not np.allclose(cm, cm.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(cm).max())):
        raise NetkitError("covariance matrix is not symmetric")
    try:
        low = np.linalg.cholesky(0.5 * (cm + cm.T))
    except np.linalg.LinAlgError:
        raise UnphysicalStateError("covariance matrix is not positive definite") from None
    ev = np.linalg.eigvalsh(low.T @ (1j * symplectic_form(m)) @ low)
    return np.sort(ev[m:])


def _noise_floor(cm: np.ndarray) -> float:
    # float64 storage alone perturbs symplectic eigenvalues by about cond(V) eps
    return 16.0 * np.finfo(float).eps * float(np.linalg.cond(cm))


def symplectic_spectrum(cm: np.ndarray) -> np.ndarray:
    """Sorted symplectic eigenvalues (Williamson spectrum) of a covariance matrix.

    Computed as the positive eigenvalues of the Hermitian matrix
    ``L^T (i Omega) L`` with ``V = L L^T`` (Cholesky), which shares its
    spectrum with ``i Omega V``.  The Cholesky factor keeps the absolute error
    near ``|V| eps`` even for the badly conditioned CMs of large modulation.
    Values below 1 that survive the physicality test are clamped to 1.

    Raises
    ------
    UnphysicalStateError
        If the matrix is not positive definite or an eigenvalue is below
        ``1 - UNPHYSICAL_TOL``.  For very badly conditioned matrices the
        threshold widens to the rounding floor ``16 cond(V) eps``.
    """
    nu = _williamson(cm)
    if nu[0] < 1.0 - max(UNPHYSICAL_TOL, _noise_floor(cm)):
        raise UnphysicalStateError(f"symplectic eigenvalue {nu[0]:.12g} below the vacuum level")
    return np.where(nu < 1.0, 1.0, nu)


def entropy_h(x: float) -> float:
    """Entropy in bits of a single-mode thermal state with symplectic eigenvalue ``x``."""
    if x < 1.0 - CLAMP_TOL:
        raise DomainError(f"symplectic eigenvalue must be >= 1, got {x}")
    x = max(float(x), 1.0)
    a = 0.5 * (x + 1.0)
    b = 0.5 * (x - 1.0)
    return float((xlogy(a, a) - xlogy(b, b)) / np.log(2.0))


def von_neumann_entropy(cm: np.ndarray) -> float:
    """von Neumann entropy in bits of a Gaussian state."""
    return float(sum(entropy_h(nu) for nu in symplectic_spectrum(cm)))


def is_physical(cm: np.ndarray, tol: float = CLAMP_TOL) -> bool:
    """Uncertainty principle ``V + i Omega >= 0`` up to ``tol`` plus rounding noise."""
    try:
        nu = _williamson(cm)
    except NetkitError:
        return False
    return bool(nu[0] >= 1.0 - max(tol, _noise_floor(cm)))

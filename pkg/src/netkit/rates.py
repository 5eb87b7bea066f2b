"""
Key rates for conferencing and secret sharing over the star network.

Coherent-state and locally squeezed variants, modulation optimisation,
maximum-distance search, the composable finite-size correction and a few
reference conversions (fiber loss, PLOB bound, clock throughput).

All information quantities are in bits per channel use.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import gaussian as gs
from . import network as nw
from .errors import DomainError
from .gaussian import I2, LinkParams, entropy_h
from .network import NetworkConfig, SplitConfig

PROTOCOLS = ("conference", "secret-sharing", "squeezed-conference", "squeezed-secret-sharing")

MU_MIN = 1.0
MU_MAX = 1e6
#: Rates at or below this value count as zero when locating the maximum distance.
RATE_FLOOR = 1e-10
CHI_ROUNDING = 1e-12


@dataclass(frozen=True)
class ConferencingSpectrum:
    """Symplectic eigenvalues entering the conferencing Holevo bound."""

    nu: float
    nu_n: float
    lam: float
    lam_bar: float
    tau: float
    tau_bar: float


@dataclass(frozen=True)
class RateReport:
    protocol: str
    n_users: int
    mu: float
    eta: float
    nbar: float
    mutual_info: float
    holevo: float
    rate: float
    n_a: Optional[int] = None
    n_b: Optional[int] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FiniteSizeParams:
    """Composable finite-size parameters.

    ``bits`` is the number of discretisation bits per quadrature and
    ``log_base`` the base of the logarithm inside the AEP correction.
    """

    ec_efficiency: float = 0.95
    block_size: float = 1e9
    bits: int = 5
    delta_s: float = 4.3e-10
    delta_ec: float = 4.3e-10
    delta_pe: float = 4.3e-10
    success_prob: float = 0.9
    log_base: float = 2.0

    def __post_init__(self):
        if not 0 < self.ec_efficiency <= 1:
            raise DomainError(f"reconciliation efficiency must lie in (0, 1], got {self.ec_efficiency}")
        if not self.block_size > 0:
            raise DomainError(f"block size must be positive, got {self.block_size}")
        if int(self.bits) != self.bits or self.bits < 1:
            raise DomainError(f"discretisation bits must be a positive integer, got {self.bits}")
        for name in ("delta_s", "delta_ec", "delta_pe"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 0 < self.delta < 1:
            raise DomainError(f"total security parameter must lie in (0, 1), got {self.delta}")
        if not 0 < self.success_prob <= 1:
            raise DomainError(f"success probability must lie in (0, 1], got {self.success_prob}")
        if not self.log_base > 1:
            raise DomainError("log base must exceed 1")

    @property
    def delta(self) -> float:
        return self.delta_s + self.delta_ec + self.delta_pe


@dataclass(frozen=True)
class DistanceMap:
    distance_km: float
    attenuation_db_per_km: float = 0.2


# ---------------------------------------------------------------------------
# Conversions and reference bounds
# ---------------------------------------------------------------------------


def eta_from_distance(distance_km: float | DistanceMap, attenuation_db_per_km: float = 0.2) -> float:
    """Fiber transmissivity ``10^(-att d / 10)``; 0.2 dB/km gives ``10^(-0.02 d)``."""
    if isinstance(distance_km, DistanceMap):
        distance_km, attenuation_db_per_km = distance_km.distance_km, distance_km.attenuation_db_per_km
    if distance_km < 0:
        raise DomainError(f"distance must be non-negative, got {distance_km}")
    return 10.0 ** (-attenuation_db_per_km * distance_km / 10.0)


def plob_bound(eta: float) -> float:
    """Secret-key capacity ``-log2(1 - eta)`` of a pure-loss channel; ``inf`` at eta = 1."""
    if not 0 < eta <= 1:
        raise DomainError(f"transmissivity must lie in (0, 1], got {eta}")
    if eta == 1:
        return math.inf
    return -math.log2(1.0 - eta)


def throughput(rate_bits_per_use: float, clock_hz: float) -> float:
    return rate_bits_per_use * clock_hz


def worst_case_link(links: Sequence[LinkParams]) -> LinkParams:
    """Symmetric link lower-bounding an asymmetric star: minimum eta, maximum nbar."""
    if not links:
        raise DomainError("worst-case reduction needs at least one link")
    mus = {link.mu for link in links}
    if len(mus) != 1:
        raise DomainError(f"links must share a common modulation, got {sorted(mus)}")
    return gs.link_params(mus.pop(), min(link.eta for link in links), max(link.nbar for link in links))


def pessimistic_link(link: LinkParams, d_eta: float = 0.0, d_nbar: float = 0.0) -> LinkParams:
    """Widen a link by parameter-estimation confidence offsets (lower eta, higher nbar)."""
    if d_eta < 0 or d_nbar < 0:
        raise DomainError("confidence offsets must be non-negative")
    eta = link.eta - d_eta
    if eta <= 0:
        raise DomainError("confidence offset leaves no transmissivity")
    return gs.link_params(link.mu, eta, link.nbar + d_nbar)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _sigma(cm: np.ndarray) -> float:
    """``det(V + I) = 1 + det V + Tr V`` for a single-mode CM."""
    return float(1.0 + np.linalg.det(cm) + np.trace(cm))


def _mi_from_blocks(marginal: np.ndarray, conditional: np.ndarray) -> float:
    return 0.5 * math.log2(_sigma(marginal) / _sigma(conditional))


def holevo_from_cm(cm: np.ndarray, mode: int = 0) -> float:
    """Holevo information of a heterodyne on ``mode`` when Eve purifies the whole state.

    ``S(V) - S(V conditioned on the heterodyne)``, straight from the spectra.
    """
    return gs.von_neumann_entropy(cm) - gs.von_neumann_entropy(gs.heterodyne_condition(cm, mode))


def heterodyne_mi(cm: np.ndarray, i: int = 0, j: int = 1) -> float:
    """Mutual information between heterodyne outcomes on modes ``i`` and ``j``."""
    keep = gs.reduce_modes(cm, [i, j])
    return _mi_from_blocks(gs.reduce_modes(keep, [1]), gs.heterodyne_condition(keep, 0))


def _nu(cfg: NetworkConfig) -> float:
    y = cfg.link.y
    return math.sqrt(y * cfg.reduced_variance)


# ---------------------------------------------------------------------------
# Coherent-state conferencing
# ---------------------------------------------------------------------------


def conferencing_spectrum(cfg: NetworkConfig) -> ConferencingSpectrum:
    n = cfg.n_users
    link = cfg.link
    mu, eta, om = link.mu, link.eta, link.omega
    lam = n * om * mu + eta * (1 + (n - 1 - n * om) * mu)
    lam_bar = n * om * mu + eta * (n - 1 - (n * om - 1) * mu)
    tau = n * om * (1 - eta) + eta * (n - 1 + mu)
    tau_bar = n * om * (1 - eta) + eta * ((n - 1) * mu + 1)
    nu_n = math.sqrt(lam * lam_bar / (tau * tau_bar))
    return ConferencingSpectrum(_nu(cfg), nu_n, lam, lam_bar, tau, tau_bar)


def conferencing_holevo(cfg: NetworkConfig) -> float:
    """Eve's information on one Bob's heterodyne: ``2 h(nu) - h(nu_N)``."""
    sp = conferencing_spectrum(cfg)
    return 2.0 * entropy_h(sp.nu) - entropy_h(sp.nu_n)


def conferencing_sigmas(cfg: NetworkConfig) -> tuple[float, float]:
    """(sigma_s, sigma_n): outcome variance determinants without and with the partner's outcome."""
    delta, gamma = nw.pair_blocks(cfg)
    cond = delta - gamma @ np.linalg.solve(delta + I2, gamma)
    return _sigma(delta), _sigma(cond)


def conferencing_mi(cfg: NetworkConfig) -> float:
    s, n = conferencing_sigmas(cfg)
    return 0.5 * math.log2(s / n)


def _report(protocol, cfg, mi, chi, sp=None) -> RateReport:
    link = cfg.link
    if -CHI_ROUNDING < chi < 0.0:
        # entropy differences of equal spectra can round below zero
        chi = 0.0
    return RateReport(
        protocol=protocol,
        n_users=cfg.n_users,
        mu=link.mu,
        eta=link.eta,
        nbar=link.nbar,
        mutual_info=mi,
        holevo=chi,
        rate=mi - chi,
        n_a=None if sp is None else sp.n_a,
        n_b=None if sp is None else sp.n_b,
    )


def conferencing_rate(cfg: NetworkConfig) -> RateReport:
    return _report("conference", cfg, conferencing_mi(cfg), conferencing_holevo(cfg))


# ---------------------------------------------------------------------------
# Coherent-state secret sharing
# ---------------------------------------------------------------------------


def ss_conditional_cm(sp: SplitConfig) -> np.ndarray:
    """Single-mode CM of the effective mode a after the heterodyne on b (closed form)."""
    cfg = sp.parent
    n, na, nb = cfg.n_users, sp.n_a, sp.n_b
    x, y, z2 = cfg.link.x, cfg.link.y, cfg.link.z2
    # D = x y - z^2, expanded so that every term is non-negative
    d = (1.0 - cfg.link.eta) * cfg.link.omega * cfg.link.mu + cfg.link.eta
    q = cfg.reduced_variance + z2 / x * na * (d + x) / (n * (d + x) + nb * z2)
    p_num = n * y * d + n * d + (n - na) * z2 + (n - na - nb) * y * z2
    p = p_num / (n * d + n * x + (n - nb) * z2)
    return np.diag([q, p])


def ensemble_cm(sp: SplitConfig) -> np.ndarray:
    """Effective modes (a, b, c) after each group concentrates onto its uniform mode.

    Mode c collects the ``N - N_a - N_b`` Bobs outside the split and is
    omitted for full-house splits.  The discarded difference modes are
    uncorrelated thermal states with eigenvalue nu.
    """
    cfg = sp.parent
    n, k = cfg.n_users, cfg.kappa
    sizes = [sp.n_a, sp.n_b]
    if not sp.full_house:
        sizes.append(n - sp.n_a - sp.n_b)
    blocks = []
    for i, ni in enumerate(sizes):
        row = []
        for j, nj in enumerate(sizes):
            if i == j:
                row.append(np.diag([cfg.y_minus(n - ni), cfg.y_minus(ni)]))
            else:
                row.append(math.sqrt(ni * nj) * k * gs.Z2)
        blocks.append(row)
    return gs.from_mode_blocks(blocks)


def _ss_conditional_nu(sp: SplitConfig, tq: float = 1.0, tp: float = 1.0) -> float:
    """Non-trivial eigenvalue left after ensemble a measures with added noise diag(tq, tp).

    In the effective (a, b, c) state the q block is ``r I + kappa u u^T`` and the
    p block ``y I - kappa u u^T`` with ``u = (sqrt N_a, sqrt N_b, sqrt N_c)``.
    Conditioning on a preserves that form on (b, c) with ``w = (sqrt N_b, sqrt N_c)``,
    so only the eigenvalue along ``w`` changes; it depends on N_a and N alone.
    Heterodyne is ``tq = tp = 1``.
    """
    cfg = sp.parent
    k, r, y = cfg.kappa, cfg.reduced_variance, cfg.link.y
    na = sp.n_a
    m = cfg.n_users - na
    q = r + k * m * (r + tq) / (r + na * k + tq)
    # y - kappa_p m, rearranged into positive terms
    p = ((y + tp) * r + tp * na * k) / (cfg.y_minus(na) + tp)
    return math.sqrt(q * p)


def secret_sharing_holevo(sp: SplitConfig) -> float:
    """Eve's information on ensemble a's heterodyne, ``2 h(nu) - h(nu'')``.

    Eve purifies all N users, so Bobs outside the split still count.  For
    full-house splits ``nu''`` equals ``sqrt(det V_a|b)`` of :func:`ss_conditional_cm`;
    :func:`ensemble_cm` gives the same value by brute-force conditioning.
    """
    return 2.0 * entropy_h(_nu(sp.parent)) - entropy_h(_ss_conditional_nu(sp))


def secret_sharing_mi(sp: SplitConfig) -> float:
    da, _, _ = nw.secret_sharing_blocks(sp)
    return _mi_from_blocks(da, ss_conditional_cm(sp))


def secret_sharing_rate(sp: SplitConfig) -> RateReport:
    return _report("secret-sharing", sp.parent, secret_sharing_mi(sp), secret_sharing_holevo(sp), sp)


# ---------------------------------------------------------------------------
# Squeezed protocols
# ---------------------------------------------------------------------------


def squeezed_nu_n(cfg: NetworkConfig) -> float:
    n, y = cfg.n_users, cfg.link.y
    r = math.sqrt(cfg.y_minus(1) * cfg.y_minus(n - 1))
    return (y * cfg.reduced_variance + r) / (1.0 + r)


def squeezed_conferencing_holevo(cfg: NetworkConfig) -> float:
    return 2.0 * entropy_h(_nu(cfg)) - entropy_h(squeezed_nu_n(cfg))


def squeezed_conferencing_mi(cfg: NetworkConfig) -> float:
    alpha, eps = nw.squeezed_pair_blocks(cfg)
    cond = alpha - eps @ np.linalg.solve(alpha + I2, eps)
    return _mi_from_blocks(alpha, cond)


def squeezed_conferencing_rate(cfg: NetworkConfig) -> RateReport:
    return _report(
        "squeezed-conference", cfg, squeezed_conferencing_mi(cfg), squeezed_conferencing_holevo(cfg)
    )


def squeezed_ss_nu_prime(sp: SplitConfig) -> float:
    """Eigenvalue of the full-house conditional state ``nu' I``."""
    cfg = sp.parent
    y = cfg.link.y
    abar = math.sqrt(cfg.y_minus(sp.n_a) * cfg.y_minus(sp.n_b))
    return (y * cfg.reduced_variance + abar) / (1.0 + abar)


def squeezed_ss_mi_closed(sp: SplitConfig) -> float:
    cfg = sp.parent
    k = cfg.kappa
    abar = math.sqrt(cfg.y_minus(sp.n_a) * cfg.y_minus(sp.n_b))
    c = math.sqrt(sp.n_a * sp.n_b) * k / (1.0 + abar)
    return -math.log2(1.0 - c * c)


def _squeezed_ensemble_cm(sp: SplitConfig) -> np.ndarray:
    cm = ensemble_cm(sp)
    cfg = sp.parent
    n = cfg.n_users
    m = gs.n_modes(cm)
    sq = np.eye(2 * m)
    for mode, nl in enumerate((sp.n_a, sp.n_b)):
        sq = gs.squeezer((cfg.y_minus(nl) / cfg.y_minus(n - nl)) ** 0.25, mode, m) @ sq
    return gs.apply_symplectic(cm, sq)


def squeezed_ss_rate(sp: SplitConfig) -> RateReport:
    """Squeezed secret sharing: closed forms for full house, CM numerics otherwise."""
    cfg = sp.parent
    if sp.full_house:
        mi = squeezed_ss_mi_closed(sp)
        chi = 2.0 * entropy_h(_nu(cfg)) - entropy_h(squeezed_ss_nu_prime(sp))
    else:
        mi = heterodyne_mi(nw.squeezed_ss_cm(sp), 0, 1)
        # heterodyne after the squeezer diag(g, 1/g) is noise diag(g^-2, g^2) before it
        g2 = math.sqrt(cfg.y_minus(sp.n_a) / cfg.y_minus(cfg.n_users - sp.n_a))
        chi = 2.0 * entropy_h(_nu(cfg)) - entropy_h(_ss_conditional_nu(sp, 1.0 / g2, g2))
    return _report("squeezed-secret-sharing", cfg, mi, chi, sp)


# ---------------------------------------------------------------------------
# Protocol dispatch, optimisation and distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSpec:
    """Everything except the modulation and the channel."""

    protocol: str
    n_users: int
    n_a: Optional[int] = None
    n_b: Optional[int] = None
    nbar: float = 0.0

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise DomainError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.protocol.endswith("secret-sharing"):
            if self.n_a is None or self.n_b is None:
                raise DomainError("secret sharing needs a split (n_a, n_b)")
            # validates the split
            nw.split(self.n_a, self.n_b, nw.network(self.n_users, 1.0, 1.0))
        elif self.n_users < 2:
            raise DomainError(f"a network needs n_users >= 2, got {self.n_users}")


def protocol_rate(spec: ProtocolSpec, mu: float, eta: float) -> RateReport:
    cfg = nw.network(spec.n_users, mu, eta, spec.nbar)
    if spec.protocol == "conference":
        return conferencing_rate(cfg)
    if spec.protocol == "squeezed-conference":
        return squeezed_conferencing_rate(cfg)
    sp = nw.split(spec.n_a, spec.n_b, cfg)
    if spec.protocol == "secret-sharing":
        return secret_sharing_rate(sp)
    return squeezed_ss_rate(sp)


def _golden_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_mu(
    spec: ProtocolSpec,
    eta: float,
    mu_range: tuple[float, float] = (MU_MIN, MU_MAX),
    grid_points: int = 200,
    rtol: float = 1e-6,
) -> tuple[float, RateReport]:
    """Maximise the rate over the modulation variance.

    A log-spaced pre-scan picks the best grid cell, then golden-section
    search on log(mu) refines it to ``rtol`` relative precision in mu.
    """
    lo, hi = mu_range
    if not (MU_MIN <= lo < hi <= MU_MAX):
        raise DomainError(f"mu range must be a non-empty sub-interval of [1, 1e6], got {mu_range}")

    def rate_at(t: float) -> float:
        return protocol_rate(spec, math.exp(t), eta).rate

    ts = np.linspace(math.log(lo), math.log(hi), grid_points)
    values = [rate_at(t) for t in ts]
    best = int(np.argmax(values))
    t_best, r_best = ts[best], values[best]
    left = ts[max(best - 1, 0)]
    right = ts[min(best + 1, grid_points - 1)]
    t_ref, r_ref = _golden_max(rate_at, left, right, rtol)
    if r_ref > r_best:
        t_best = t_ref
    mu_star = min(max(math.exp(t_best), lo), hi)
    return mu_star, protocol_rate(spec, mu_star, eta)


def optimal_rate(
    spec: ProtocolSpec,
    distance_km: float,
    mu: float | None = None,
    attenuation_db_per_km: float = 0.2,
) -> RateReport:
    """Rate at a fiber distance; the modulation is optimised unless ``mu`` is given."""
    eta = eta_from_distance(distance_km, attenuation_db_per_km)
    if mu is not None:
        return protocol_rate(spec, mu, eta)
    return optimize_mu(spec, eta)[1]


def max_distance(
    spec: ProtocolSpec,
    d_max: float = 500.0,
    tol: float = 1e-4,
    mu: float | None = None,
    attenuation_db_per_km: float = 0.2,
) -> float:
    """Largest fiber distance (km) with a positive optimised rate, by bisection.

    Returns 0 when the rate is not positive even at zero distance, and
    ``d_max`` when it is still positive there.
    """

    def positive(d: float) -> bool:
        return optimal_rate(spec, d, mu, attenuation_db_per_km).rate > RATE_FLOOR

    if not positive(0.0):
        return 0.0
    if positive(d_max):
        return d_max
    lo, hi = 0.0, d_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Finite size
# ---------------------------------------------------------------------------


def delta_aep(epsilon: float, bits: int, log_base: float = 2.0) -> float:
    """Upper bound ``4 (d + 1) sqrt(log(2 / eps^2))`` of the AEP correction."""
    if not 0 < epsilon < 1:
        raise DomainError(f"smoothing parameter must lie in (0, 1), got {epsilon}")
    return 4.0 * (bits + 1) * math.sqrt(math.log(2.0 / epsilon**2, log_base))


def finite_size_rate(mutual_info: float, chi_worst: float, fs: FiniteSizeParams | None = None) -> float:
    """Composable rate ``xi I - chi - Delta_AEP(2 p delta_s / 3, d) / sqrt(n)``.

    Negative values are returned unchanged.
    """
    if fs is None:
        fs = FiniteSizeParams()
    eps = 2.0 * fs.success_prob * fs.delta_s / 3.0
    correction = delta_aep(eps, fs.bits, fs.log_base) / math.sqrt(fs.block_size)
    return fs.ec_efficiency * mutual_info - chi_worst - correction

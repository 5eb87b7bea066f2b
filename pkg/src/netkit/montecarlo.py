"""
Outcome-level Monte Carlo of the star network.

Every measurement in the protocol (relay homodynes, Bob heterodynes) reads
out mutually commuting quadratures, and all states are Gaussian with positive
Wigner functions.  Drawing classical samples from the Wigner functions and
pushing them through the linear optics therefore reproduces the joint outcome
distribution exactly.  A heterodyne adds one unit of vacuum noise per
quadrature.

Samples are produced in fixed-size chunks, each with its own
``numpy.random.SeedSequence`` child, so results do not depend on the number
of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gaussian as gs
from . import network as nw
from .errors import DomainError
from .network import NetworkConfig

CHUNK = 1 << 16
RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence.spawn"


def rng_metadata() -> dict:
    return {"rng": RNG_ALGORITHM, "numpy": np.__version__, "chunk": CHUNK}


def default_workers() -> int:
    cap = os.environ.get("NETKIT_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise DomainError(f"NETKIT_THREADS must be an integer, got {cap!r}") from None
    return n


@dataclass
class SimRun:
    """Per-shot outcomes.

    ``gamma`` has columns ``(q_2, ..., q_N, p)`` of the relay broadcast;
    ``beta`` has shape (shots, N, 2) holding each Bob's (q, p) readout.
    """

    config: NetworkConfig
    shots: int
    seed: int
    gamma: np.ndarray
    beta: np.ndarray
    bob_detection: str = "heterodyne"
    metadata: dict = field(default_factory=rng_metadata)

    def beta_xxpp(self) -> np.ndarray:
        """Bob readouts as (shots, 2N) in the (q_1..q_N, p_1..p_N) ordering."""
        return np.concatenate([self.beta[:, :, 0], self.beta[:, :, 1]], axis=1)


def _sample_chunk(cfg: NetworkConfig, shots: int, seed_seq: np.random.SeedSequence, heterodyne: bool):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    n = cfg.n_users
    link = cfg.link
    mu, eta, omega = link.mu, link.eta, link.omega
    c = math.sqrt(mu * mu - 1.0)

    # TMSV Wigner samples per Bob: qA,qB correlated by +c, pA,pB by -c
    def tmsv_pair(sign):
        u = rng.standard_normal((shots, n))
        v = rng.standard_normal((shots, n))
        # [[mu, s c], [s c, mu]] = L L^T with L = [[a, 0], [b, d]]
        a = math.sqrt(mu)
        b = sign * c / a
        d = math.sqrt(max(mu - b * b, 0.0))
        return a * u, b * u + d * v

    qa, qb = tmsv_pair(+1.0)
    pa, pb = tmsv_pair(-1.0)

    # thermal-loss channel: beam splitter with an environment of variance omega
    se = math.sqrt(omega)
    qa = math.sqrt(eta) * qa + math.sqrt(1.0 - eta) * se * rng.standard_normal((shots, n))
    pa = math.sqrt(eta) * pa + math.sqrt(1.0 - eta) * se * rng.standard_normal((shots, n))

    r = gs.cascade_interferometer(n).r_matrix
    q_out = qa @ r.T
    p_out = pa @ r.T
    gamma = np.concatenate([q_out[:, 1:], p_out[:, :1]], axis=1)

    if heterodyne:
        qb = qb + rng.standard_normal((shots, n))
        pb = pb + rng.standard_normal((shots, n))
    beta = np.stack([qb, pb], axis=2)
    return gamma, beta


def sample_protocol(
    config: NetworkConfig,
    shots: int,
    seed: int,
    workers: int | None = None,
    bob_detection: str = "heterodyne",
) -> SimRun:
    """Draw ``shots`` joint outcomes of the relay and the Bobs.

    ``bob_detection="none"`` returns the Bobs' raw quadrature samples
    instead of heterodyne readouts (no vacuum unit added).
    """
    if int(shots) != shots or shots < 1:
        raise DomainError(f"shots must be a positive integer, got {shots}")
    if bob_detection not in ("heterodyne", "none"):
        raise DomainError(f"bob_detection must be 'heterodyne' or 'none', got {bob_detection!r}")
    shots = int(shots)
    sizes = [CHUNK] * (shots // CHUNK)
    if shots % CHUNK:
        sizes.append(shots % CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    het = bob_detection == "heterodyne"
    workers = workers or default_workers()

    def job(args):
        size, child = args
        return _sample_chunk(config, size, child, het)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, zip(sizes, children)))
    else:
        parts = [job(a) for a in zip(sizes, children)]
    gamma = np.concatenate([p[0] for p in parts])
    beta = np.concatenate([p[1] for p in parts])
    return SimRun(config, shots, seed, gamma, beta, bob_detection)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def _joint_cov(gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    z = np.concatenate([gamma, beta], axis=1)
    z = z - z.mean(axis=0)
    return z.T @ z / (len(z) - 1)


def _regress(gamma: np.ndarray, beta: np.ndarray):
    """Linear map gamma -> beta and residual covariance (with intercept)."""
    k = gamma.shape[1]
    cov = _joint_cov(gamma, beta)
    sgg = cov[:k, :k]
    sgb = cov[:k, k:]
    sbb = cov[k:, k:]
    coef = np.linalg.solve(sgg, sgb)
    n = len(gamma)
    resid = (sbb - sgb.T @ coef) * (n - 1) / (n - 1 - k)
    return coef.T, resid


@dataclass
class EmpiricalStats:
    """Empirical versus analytic conditional covariance of Bob readouts (xxpp order)."""

    empirical_cov: np.ndarray
    analytic_cov: np.ndarray
    standard_errors: np.ndarray
    gamma_map: np.ndarray
    shots: int

    @property
    def deviation(self) -> np.ndarray:
        return self.empirical_cov - self.analytic_cov

    @property
    def max_abs_dev(self) -> float:
        return float(np.abs(self.deviation).max())

    @property
    def z_scores(self) -> np.ndarray:
        return self.deviation / self.standard_errors

    @property
    def max_z(self) -> float:
        return float(np.abs(self.z_scores).max())

    def fraction_within(self, k: float = 5.0) -> float:
        iu = np.triu_indices_from(self.z_scores)
        return float(np.mean(np.abs(self.z_scores[iu]) <= k))


def analytic_readout_cov(config: NetworkConfig, bob_detection: str = "heterodyne") -> np.ndarray:
    """Conditional covariance of Bob readouts given gamma: V_B|gamma (+ I for heterodyne)."""
    cm = nw.network_conditional_cm(config)
    if bob_detection == "heterodyne":
        cm = cm + np.eye(len(cm))
    return cm


def covariance_standard_errors(cov: np.ndarray, shots: int) -> np.ndarray:
    """Standard error of Gaussian sample covariances: sqrt((S_ii S_jj + S_ij^2) / n)."""
    d = np.diag(cov)
    return np.sqrt((np.outer(d, d) + cov**2) / shots)


def verify_conditional_cm(
    config: NetworkConfig,
    shots: int,
    seed: int,
    workers: int | None = None,
    bob_detection: str = "heterodyne",
    run: SimRun | None = None,
) -> EmpiricalStats:
    """Regress Bob readouts on gamma and compare the residual covariance with theory."""
    n = config.n_users
    if shots < 10 * n:
        raise DomainError(f"need at least {10 * n} shots to regress on {n} outcomes, got {shots}")
    if run is None:
        run = sample_protocol(config, shots, seed, workers, bob_detection)
    coef, resid = _regress(run.gamma, run.beta_xxpp())
    analytic = analytic_readout_cov(config, run.bob_detection)
    return EmpiricalStats(
        empirical_cov=resid,
        analytic_cov=analytic,
        standard_errors=covariance_standard_errors(analytic, run.shots),
        gamma_map=coef,
        shots=run.shots,
    )


def residual_dependence(run: SimRun) -> float:
    """Largest |correlation| between out-of-sample residuals and gamma, gamma^2 features.

    The linear map is fitted on the first half of the shots and applied to the
    second half; correlations there are O(shots^-1/2) if conditioning is fully
    linear with Gaussian residuals.
    """
    half = run.shots // 2
    g, b = run.gamma, run.beta_xxpp()
    coef, _ = _regress(g[:half], b[:half])
    g2, b2 = g[half:], b[half:]
    mg = g[:half].mean(axis=0)
    mb = b[:half].mean(axis=0)
    res = (b2 - mb) - (g2 - mg) @ coef.T
    feats = np.concatenate([g2, (g2 - g2.mean(axis=0)) ** 2], axis=1)
    fz = (feats - feats.mean(axis=0)) / feats.std(axis=0)
    rz = (res - res.mean(axis=0)) / res.std(axis=0)
    corr = fz.T @ rz / len(fz)
    return float(np.abs(corr).max())


@dataclass(frozen=True)
class MIEstimate:
    estimate: float
    standard_error: float
    batches: int


def _gaussian_mi(cov4: np.ndarray) -> float:
    a = cov4[:2, :2]
    b = cov4[2:, 2:]
    return 0.5 * math.log2(np.linalg.det(a) * np.linalg.det(b) / np.linalg.det(cov4))


def _pair_mi(run: SimRun, i: int, j: int, sl=slice(None)) -> float:
    beta = run.beta[sl]
    sub = np.concatenate([beta[:, i, :], beta[:, j, :]], axis=1)
    _, resid = _regress(run.gamma[sl], sub)
    return _gaussian_mi(resid)


def estimate_pair_mi(
    config: NetworkConfig,
    shots: int,
    seed: int,
    i: int = 0,
    j: int = 1,
    batches: int = 20,
    workers: int | None = None,
    run: SimRun | None = None,
) -> MIEstimate:
    """Gaussian plug-in estimate of I(beta_i : beta_j | gamma) in bits.

    The standard error comes from the spread of independent batch estimates.
    """
    n = config.n_users
    if not (0 <= i < n and 0 <= j < n and i != j):
        raise DomainError(f"need two distinct Bobs among {n}, got ({i}, {j})")
    if shots < 10 * n * batches:
        raise DomainError(f"need at least {10 * n * batches} shots for {batches} batches, got {shots}")
    if run is None:
        run = sample_protocol(config, shots, seed, workers)
    full = _pair_mi(run, i, j)
    edges = np.linspace(0, run.shots, batches + 1).astype(int)
    per = [_pair_mi(run, i, j, slice(a, b)) for a, b in zip(edges[:-1], edges[1:])]
    se = float(np.std(per, ddof=1) / math.sqrt(batches))
    return MIEstimate(full, se, batches)


def convergence_exponent(
    config: NetworkConfig,
    shot_grid=(10**4, 10**5, 10**6),
    seed: int = 0,
    replicates: int = 8,
    workers: int | None = None,
) -> tuple[float, list[float]]:
    """Log-log slope of the mean max-abs covariance deviation against shots."""
    root = np.random.SeedSequence(seed)
    devs = []
    for shots, ss in zip(shot_grid, root.spawn(len(shot_grid))):
        seeds = ss.generate_state(replicates, dtype=np.uint64)
        d = [
            verify_conditional_cm(config, shots, int(s), workers).max_abs_dev
            for s in seeds
        ]
        devs.append(float(np.mean(d)))
    slope = float(np.polyfit(np.log(shot_grid), np.log(devs), 1)[0])
    return slope, devs

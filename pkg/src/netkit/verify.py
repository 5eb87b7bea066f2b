"""
Cross-checks between closed forms, brute-force conditioning and Monte Carlo.

Each check returns a :class:`Check`; :func:`run_all` collects them.  The
``perturb`` argument adds a constant to the closed-form network CM and exists
only as a negative control.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian as gs
from . import montecarlo as mc
from . import network as nw
from . import rates as rt

GRID_N = tuple(range(2, 9))
GRID_MU = (1.0, 2.0, 10.0, 100.0)
GRID_ETA = (0.1, 0.5, 0.9, 1.0)
GRID_NBAR = (0.0, 0.05, 1.0)

ORACLE_TOL = 1e-9
HOLEVO_TOL = 1e-9


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "check": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            **self.detail,
        }


def grid():
    for n, mu, eta, nbar in itertools.product(GRID_N, GRID_MU, GRID_ETA, GRID_NBAR):
        yield nw.network(n, mu, eta, nbar)


def _closed_form(cfg, perturb: float) -> np.ndarray:
    cm = nw.network_conditional_cm(cfg)
    if perturb:
        cm = cm + perturb
    return cm


def check_oracle_equivalence(perturb: float = 0.0) -> Check:
    worst = 0.0
    where = {}
    for cfg in grid():
        cm = _closed_form(cfg, perturb)
        for path in ("dual", "direct"):
            d = float(np.abs(cm - nw.network_conditional_cm_oracle(cfg, path)).max())
            if d > worst:
                worst = d
                where = {"n": cfg.n_users, "mu": cfg.link.mu, "eta": cfg.link.eta, "nbar": cfg.link.nbar, "path": path}
    return Check("oracle-equivalence", worst <= ORACLE_TOL, worst, ORACLE_TOL, where)


def full_house_chi_oracle(sp: nw.SplitConfig) -> float:
    """Holevo bound of a full-house split from the N-mode state and its spectra.

    Each ensemble is concentrated with a passive interferometer, then the
    effective mode of ensemble b is heterodyned.
    """
    cfg = sp.parent
    n = cfg.n_users
    cm = nw.network_conditional_cm(cfg)
    rows, rest = [], []
    for lo, size in ((0, sp.n_a), (sp.n_a, sp.n_b)):
        r = gs.cascade_interferometer(size).r_matrix if size > 1 else np.ones((1, 1))
        for k, row in enumerate(r):
            v = np.zeros(n)
            v[lo : lo + size] = row
            (rows if k == 0 else rest).append(v)
    o = np.array(rows + rest)
    z = np.zeros((n, n))
    cm = gs.apply_symplectic(cm, np.block([[o, z], [z, o]]))
    return rt.holevo_from_cm(cm, 1)


def check_holevo_consistency() -> Check:
    worst = 0.0
    where = {}
    for cfg in grid():
        n = cfg.n_users
        cm = nw.network_conditional_cm(cfg)
        pairs = [("conference", rt.conferencing_holevo(cfg), rt.holevo_from_cm(cm, 0))]
        pairs.append(
            (
                "squeezed-conference",
                rt.squeezed_conferencing_holevo(cfg),
                rt.holevo_from_cm(nw.squeezed_network_cm(cfg), 0),
            )
        )
        for na in range(1, n):
            sp = nw.split(na, n - na, cfg)
            pairs.append(("secret-sharing", rt.secret_sharing_holevo(sp), full_house_chi_oracle(sp)))
            if n - na > 1:
                sp = nw.split(na, 1, cfg)
                pairs.append(("secret-sharing", rt.secret_sharing_holevo(sp), rt.holevo_from_cm(rt.ensemble_cm(sp), 0)))
        for kind, closed, oracle in pairs:
            d = abs(closed - oracle)
            if d > worst:
                worst = d
                where = {"protocol": kind, "n": n, "mu": cfg.link.mu, "eta": cfg.link.eta, "nbar": cfg.link.nbar}
    return Check("holevo-consistency", worst <= HOLEVO_TOL, worst, HOLEVO_TOL, where)


def check_lossless_line() -> Check:
    worst = 0.0
    for n, mu in itertools.product(GRID_N + (10, 50, 100), GRID_MU + (1e4, 1e6)):
        cfg = nw.network(n, mu, 1.0, 0.0)
        worst = max(worst, abs(rt.conferencing_holevo(cfg)), abs(rt.squeezed_conferencing_holevo(cfg)))
    return Check("lossless-line-chi-zero", worst <= 1e-9, worst, 1e-9)


def check_secret_sharing_identity() -> Check:
    worst = 0.0
    for n, mu, eta, nbar in itertools.product((4, 10, 100), GRID_MU, (0.5, 0.9, 1.0), GRID_NBAR):
        cfg = nw.network(n, mu, eta, nbar)
        ss = rt.secret_sharing_rate(nw.split(n // 2, n // 2, cfg)).rate
        conf = rt.conferencing_rate(nw.network(2, mu, eta, nbar)).rate
        worst = max(worst, abs(ss - conf))
    return Check("secret-sharing-identity", worst <= 1e-12, worst, 1e-12)


def check_squeezing_invariance() -> Check:
    worst = 0.0
    for cfg in grid():
        a = gs.symplectic_spectrum(nw.pair_conditional_cm(cfg))
        b = gs.symplectic_spectrum(nw.squeezed_pair_cm(cfg))
        worst = max(worst, float(np.abs(a - b).max()))
    return Check("squeezing-invariance", worst <= 1e-9, worst, 1e-9)


def statistical_thresholds(shots: int) -> tuple[float, float]:
    """(max |z| per entry, required fraction of entries within it)."""
    if shots >= 10**5:
        return 5.0, 0.99
    return 6.0, 0.95


def check_monte_carlo(shots: int = 10**6, seed: int = 20240601, workers: int | None = None) -> list[Check]:
    cfg = nw.network(3, 20.0, 0.8, 0.01)
    z_max, frac = statistical_thresholds(shots)
    run = mc.sample_protocol(cfg, shots, seed, workers)
    stats = mc.verify_conditional_cm(cfg, shots, seed, run=run)
    checks = [
        Check(
            "mc-conditional-cm",
            stats.fraction_within(z_max) >= frac,
            stats.max_z,
            z_max,
            {"fraction_within": stats.fraction_within(z_max), "max_abs_dev": stats.max_abs_dev, "shots": shots},
        )
    ]
    est = mc.estimate_pair_mi(cfg, shots, seed, run=run)
    analytic = rt.conferencing_mi(cfg)
    dev = abs(est.estimate - analytic) / est.standard_error
    checks.append(
        Check("mc-pair-mi", dev <= 3.0, dev, 3.0, {"estimate": est.estimate, "analytic": analytic})
    )
    dep = mc.residual_dependence(run)
    bound = z_max / math.sqrt(shots // 2)
    checks.append(Check("mc-residual-linearity", dep <= bound, dep, bound))
    return checks


def run_all(shots: int = 10**6, seed: int = 20240601, perturb: float = 0.0, monte_carlo: bool = True) -> list[Check]:
    checks = [
        check_oracle_equivalence(perturb),
        check_holevo_consistency(),
        check_lossless_line(),
        check_secret_sharing_identity(),
        check_squeezing_invariance(),
    ]
    if monte_carlo:
        checks.extend(check_monte_carlo(shots, seed))
    return checks

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netkit import gaussian as gs
from netkit import network as nw
from netkit.errors import DomainError, SplitError


def nu(cfg):
    return math.sqrt(cfg.link.y * (cfg.link.y - cfg.link.z2 / cfg.link.x))


def test_no_modulation_gives_thermal_product():
    cfg = nw.network(4, 1.0, 0.7, 0.2)
    np.testing.assert_allclose(nw.network_conditional_cm(cfg), cfg.link.y * np.eye(8))


def test_blocks_match_closed_form_entries():
    cfg = nw.network(5, 10.0, 0.4, 0.05)
    link = cfg.link
    k = link.z2 / (5 * link.x)
    cm = nw.network_conditional_cm(cfg)
    np.testing.assert_allclose(gs.mode_block(cm, 2, 2), np.diag([link.y - 4 * k, link.y - k]))
    np.testing.assert_allclose(gs.mode_block(cm, 0, 3), k * gs.Z2)
    assert cfg.kappa == pytest.approx(k)


def test_two_users_reduce_to_pair():
    cfg = nw.network(2, 5.0, 0.6, 0.0)
    np.testing.assert_allclose(nw.network_conditional_cm(cfg), nw.pair_conditional_cm(cfg))


@pytest.mark.parametrize("path", ["dual", "direct"])
def test_closed_form_matches_oracle(path):
    cfg = nw.network(4, 10.0, 0.4, 0.05)
    diff = nw.network_conditional_cm(cfg) - nw.network_conditional_cm_oracle(cfg, path)
    assert np.abs(diff).max() <= 1e-9


@settings(max_examples=25, deadline=None)
@given(
    st.integers(2, 6),
    st.floats(1.0, 200.0),
    st.floats(0.05, 1.0),
    st.floats(0.0, 2.0),
)
def test_oracle_paths_agree(n, mu, eta, nbar):
    cfg = nw.network(n, mu, eta, nbar)
    a = nw.network_conditional_cm_oracle(cfg, "dual")
    b = nw.network_conditional_cm_oracle(cfg, "direct")
    assert np.abs(a - b).max() <= 1e-9 * max(1.0, mu)


def test_oracle_rejects_unknown_path():
    with pytest.raises(DomainError):
        nw.network_conditional_cm_oracle(nw.network(3, 2.0, 0.5), "sideways")


def test_homodyne_order_does_not_matter():
    cfg = nw.network(3, 7.0, 0.7, 0.1)
    full = gs.apply_symplectic(
        nw.network_input_cm(cfg), gs.direct_sum(gs.cascade_interferometer(3).symplectic(), np.eye(6))
    )
    ref = nw.network_conditional_cm_oracle(cfg, "direct")
    for order in itertools.permutations([(0, "p"), (1, "q"), (2, "q")]):
        cm = full
        remaining = [0, 1, 2]
        for mode, quad in order:
            cm = gs.homodyne_condition(cm, remaining.index(mode), quad)
            remaining.remove(mode)
        np.testing.assert_allclose(cm, ref, atol=1e-10)


@pytest.mark.parametrize("mu", [1e2, 1e4])
def test_epr_limit_variances(mu):
    n = 4
    cfg = nw.network(n, mu, 1.0, 0.0)
    cm = nw.network_conditional_cm(cfg)
    q = np.zeros(2 * n)
    q[0], q[1] = 1.0, -1.0
    p = np.zeros(2 * n)
    p[n:] = 1.0
    assert q @ cm @ q == pytest.approx(2.0 / mu, rel=1e-6)
    assert p @ cm @ p == pytest.approx(n / mu, rel=1e-6)


@pytest.mark.parametrize("n", [2, 5, 50])
def test_epr_limit_parameters_at_large_modulation(n):
    # the assembled matrix cannot resolve 1/mu next to entries of order mu; the parameters can
    cfg = nw.network(n, 1e6, 1.0, 0.0)
    assert n * cfg.reduced_variance == pytest.approx(n / 1e6, rel=1e-12)
    assert cfg.y_minus(n) == pytest.approx(1e-6, rel=1e-12)


def test_permutation_symmetry():
    cfg = nw.network(5, 12.0, 0.8, 0.3)
    cm = nw.network_conditional_cm(cfg)
    rng = np.random.default_rng(0)
    for _ in range(5):
        order = list(rng.permutation(5))
        np.testing.assert_array_equal(gs.permute_modes(cm, order), cm)


def test_spectrum_is_n_fold_nu():
    cfg = nw.network(3, 5.0, 0.6, 0.0)
    np.testing.assert_allclose(gs.symplectic_spectrum(nw.network_conditional_cm(cfg)), [nu(cfg)] * 3, rtol=1e-12)


def test_reduced_variance_is_stable_near_unit_transmissivity():
    cfg = nw.network(50, 1e6, 1 - 1e-12, 0.0)
    link = cfg.link
    # exact arithmetic: (x y - z^2)/x with x y - z^2 = (1-eta) omega mu + eta
    assert cfg.reduced_variance == pytest.approx((1e-12 * 1e6 + 1 - 1e-12) / link.x, rel=1e-12)


def test_pair_is_trace_down_of_network():
    cfg = nw.network(5, 8.0, 0.7, 0.05)
    np.testing.assert_allclose(
        gs.reduce_modes(nw.network_conditional_cm(cfg), [1, 3]), nw.pair_conditional_cm(cfg)
    )


def test_pair_without_modulation_is_uncorrelated():
    delta, gamma = nw.pair_blocks(nw.network(3, 1.0, 0.5, 0.0))
    np.testing.assert_array_equal(gamma, 0.0)


# -- secret sharing -----------------------------------------------------------


def test_split_validation():
    cfg = nw.network(4, 3.0, 0.5)
    with pytest.raises(SplitError):
        nw.split(3, 2, cfg)
    with pytest.raises(SplitError):
        nw.split(0, 2, cfg)
    assert nw.split(2, 2, cfg).full_house
    assert not nw.split(1, 2, cfg).full_house


def test_degenerate_split_is_pair():
    cfg = nw.network(2, 6.0, 0.8, 0.1)
    np.testing.assert_allclose(nw.secret_sharing_cm(nw.split(1, 1, cfg)), nw.pair_conditional_cm(cfg))


def test_symmetric_full_house_independent_of_n():
    ref = nw.secret_sharing_cm(nw.split(1, 1, nw.network(2, 9.0, 0.7, 0.05)))
    for n in (4, 10, 100):
        cm = nw.secret_sharing_cm(nw.split(n // 2, n // 2, nw.network(n, 9.0, 0.7, 0.05)))
        np.testing.assert_allclose(cm, ref, rtol=1e-12)


def test_full_house_spectrum_contains_nu():
    cfg = nw.network(100, 10.0, 0.8, 0.0)
    spec = gs.symplectic_spectrum(nw.secret_sharing_cm(nw.split(5, 95, cfg)))
    np.testing.assert_allclose(spec, [nu(cfg)] * 2, atol=1e-9)


def test_non_full_house_spectrum_is_not_degenerate():
    cfg = nw.network(100, 10.0, 0.8, 0.0)
    spec = gs.symplectic_spectrum(nw.secret_sharing_cm(nw.split(30, 60, cfg)))
    assert abs(spec[1] - spec[0]) > 1e-3


# -- squeezed forms -----------------------------------------------------------


def test_squeezed_params_without_modulation():
    sp = nw.squeezed_params(nw.network(4, 1.0, 0.6, 0.1))
    assert sp.kappa == 0.0
    assert sp.s == 1.0


@given(st.integers(2, 50), st.floats(1.0, 1e3), st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_squeezing_factor_at_least_one(n, mu, eta, nbar):
    sp = nw.squeezed_params(nw.network(n, mu, eta, nbar))
    assert sp.kappa >= 0.0
    assert sp.s >= 1.0 - 1e-12


def test_squeezed_pair_without_modulation():
    alpha, eps = nw.squeezed_pair_blocks(nw.network(3, 1.0, 0.9, 0.0))
    np.testing.assert_allclose(alpha, 1.0 * np.eye(2))
    np.testing.assert_array_equal(eps, 0.0)


def test_squeezed_pair_spectrum_matches():
    cfg = nw.network(10, 20.0, 0.5, 0.05)
    sq = nw.squeezed_pair_cm(cfg)
    block = gs.mode_block(sq, 0, 0)
    assert block[0, 0] == pytest.approx(block[1, 1])
    assert block[0, 1] == 0.0
    np.testing.assert_allclose(
        gs.symplectic_spectrum(sq), gs.symplectic_spectrum(nw.pair_conditional_cm(cfg)), rtol=1e-10
    )


def test_squeezed_network_is_local_squeezing_of_network():
    cfg = nw.network(6, 30.0, 0.7, 0.1)
    sq = nw.squeezed_network_cm(cfg)
    np.testing.assert_allclose(gs.reduce_modes(sq, [0, 4]), nw.squeezed_pair_cm(cfg), rtol=1e-12)


def test_squeezed_symmetric_full_house():
    cfg = nw.network(10, 25.0, 0.9, 0.0)
    a, b, eps = nw.squeezed_ss_blocks(nw.split(5, 5, cfg))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a, a[0, 0] * np.eye(2))
    np.testing.assert_allclose(eps, 5 * cfg.kappa * gs.Z2)


@pytest.mark.parametrize("na,nb", [(30, 60), (5, 95), (50, 50), (1, 1), (10, 3)])
def test_squeezed_ss_spectrum_matches(na, nb):
    sp = nw.split(na, nb, nw.network(100, 40.0, 0.6, 0.05))
    np.testing.assert_allclose(
        gs.symplectic_spectrum(nw.squeezed_ss_cm(sp)), gs.symplectic_spectrum(nw.secret_sharing_cm(sp)), rtol=1e-9
    )


def test_squeezed_ss_without_modulation_is_thermal():
    cfg = nw.network(8, 1.0, 0.5, 0.2)
    np.testing.assert_allclose(nw.squeezed_ss_cm(nw.split(3, 2, cfg)), cfg.link.y * np.eye(4))

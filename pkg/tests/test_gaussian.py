import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netkit import gaussian as gs
from netkit.errors import DomainError, InvalidModulationError, NetkitError, UnphysicalStateError


def random_symplectic(m, rng):
    """Product of random beam splitters and squeezers."""
    s = np.eye(2 * m)
    for _ in range(3 * m):
        i = int(rng.integers(m))
        if m > 1:
            j = int((i + rng.integers(1, m)) % m)
            s = gs.beam_splitter(rng.uniform(), i, j, m) @ s
        s = gs.squeezer(math.exp(rng.normal(scale=0.5)), i, m) @ s
    return s


def random_cm(m, rng):
    nus = 1.0 + rng.exponential(2.0, m)
    s = random_symplectic(m, rng)
    return s @ np.diag(np.concatenate([nus, nus])) @ s.T, np.sort(nus)


# -- ordering helpers ---------------------------------------------------------


def test_xpxp_round_trip():
    rng = np.random.default_rng(0)
    cm, _ = random_cm(3, rng)
    np.testing.assert_array_equal(gs.xpxp_to_xxpp(gs.xxpp_to_xpxp(cm)), cm)


def test_mode_block_picks_q_and_p_of_each_mode():
    cm = np.arange(36, dtype=float).reshape(6, 6)
    np.testing.assert_array_equal(gs.mode_block(cm, 1, 2), cm[np.ix_([1, 4], [2, 5])])


def test_from_mode_blocks_inverts_mode_block():
    rng = np.random.default_rng(1)
    cm, _ = random_cm(3, rng)
    blocks = [[gs.mode_block(cm, i, j) for j in range(3)] for i in range(3)]
    np.testing.assert_allclose(gs.from_mode_blocks(blocks), cm)


def test_permute_modes_rejects_non_permutation():
    with pytest.raises(DomainError):
        gs.permute_modes(gs.vacuum(3), [0, 0, 1])


# -- states -------------------------------------------------------------------


def test_tmsv_at_unit_variance_is_vacuum():
    np.testing.assert_array_equal(gs.make_tmsv(1.0), np.eye(4))


def test_tmsv_offdiagonal_magnitude():
    cm = gs.make_tmsv(2.0)
    np.testing.assert_allclose(gs.mode_block(cm, 0, 1), math.sqrt(3.0) * gs.Z2)
    np.testing.assert_allclose(gs.mode_block(cm, 0, 0), 2.0 * gs.I2)


@given(st.floats(1.0, 1e4))
def test_tmsv_is_pure(mu):
    np.testing.assert_allclose(gs.symplectic_spectrum(gs.make_tmsv(mu)), [1.0, 1.0], atol=1e-6 * mu)


def test_tmsv_rejects_sub_vacuum():
    with pytest.raises(InvalidModulationError):
        gs.make_tmsv(0.5)


def test_link_params_substitution():
    link = gs.link_params(2.0, 0.5, 0.0)
    assert link.x == pytest.approx(1.5)
    assert link.y == 2.0
    assert link.z == pytest.approx(math.sqrt(1.5))


def test_link_params_lossless():
    link = gs.link_params(7.0, 1.0, 0.0)
    assert link.x == pytest.approx(7.0)
    assert link.z == pytest.approx(math.sqrt(48.0))


def test_link_params_without_modulation():
    link = gs.link_params(1.0, 0.7, 0.05)
    assert link.z == 0.0
    assert link.x == pytest.approx(1.03)
    assert link.omega == pytest.approx(1.1)


@pytest.mark.parametrize("args", [(0.9, 0.5, 0.0), (2.0, 0.0, 0.0), (2.0, 1.1, 0.0), (2.0, 0.5, -0.1)])
def test_link_params_domain(args):
    with pytest.raises(DomainError):
        gs.link_params(*args)


# -- interferometer -----------------------------------------------------------


def test_cascade_two_modes():
    r = gs.cascade_interferometer(2).r_matrix
    h = 1 / math.sqrt(2)
    np.testing.assert_allclose(r, [[h, h], [-h, h]])


def test_cascade_difference_rows_sum_to_zero():
    r = gs.cascade_interferometer(3).r_matrix
    np.testing.assert_allclose(r[1:].sum(axis=1), 0.0, atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 5, 10, 40])
def test_cascade_orthogonal_with_uniform_first_row(n):
    spec = gs.cascade_interferometer(n)
    r = spec.r_matrix
    assert np.abs(r @ r.T - np.eye(n)).max() <= 1e-12
    np.testing.assert_allclose(r[0], 1 / math.sqrt(n))
    np.testing.assert_allclose(spec.transmissivities, [1 - 1 / k for k in range(2, n + 1)])


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_cascade_matches_beam_splitter_chain(n):
    # mode 1 accumulates the uniform sum; splitter k mixes it with mode k
    s = np.eye(2 * n)
    for k in range(2, n + 1):
        s = gs.beam_splitter(1 - 1 / k, 0, k - 1, n) @ s
    np.testing.assert_allclose(s, gs.cascade_interferometer(n).symplectic(), atol=1e-14)


def test_cascade_rejects_single_mode():
    with pytest.raises(DomainError):
        gs.cascade_interferometer(1)


def test_cascade_matrix_is_read_only():
    r = gs.cascade_interferometer(3).r_matrix
    with pytest.raises(ValueError):
        r[0, 0] = 1.0


# -- symplectic maps ----------------------------------------------------------


def test_identity_map_leaves_cm_unchanged():
    rng = np.random.default_rng(2)
    cm, _ = random_cm(2, rng)
    np.testing.assert_array_equal(gs.apply_symplectic(cm, np.eye(4)), cm)


def test_beam_splitter_keeps_vacuum():
    np.testing.assert_allclose(gs.apply_symplectic(gs.vacuum(2), gs.beam_splitter(0.3, 0, 1, 2)), np.eye(4), atol=1e-15)


def test_apply_symplectic_dimension_mismatch():
    with pytest.raises(NetkitError):
        gs.apply_symplectic(gs.vacuum(2), np.eye(6))


def test_apply_symplectic_rejects_non_symplectic():
    with pytest.raises(NetkitError):
        gs.apply_symplectic(gs.vacuum(1), np.diag([2.0, 2.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_spectrum_invariant_under_symplectic(m, seed):
    rng = np.random.default_rng(seed)
    cm, nus = random_cm(m, rng)
    s = random_symplectic(m, rng)
    np.testing.assert_allclose(gs.symplectic_spectrum(gs.apply_symplectic(cm, s)), nus, rtol=1e-9)


# -- conditioning -------------------------------------------------------------


def link_cm(mu=5.0, eta=0.6, nbar=0.1):
    link = gs.link_params(mu, eta, nbar)
    return link, link.cm()


def test_homodyne_q_on_a():
    link, cm = link_cm()
    out = gs.homodyne_condition(cm, 0, "q")
    np.testing.assert_allclose(out, np.diag([link.y - link.z2 / link.x, link.y]))


def test_homodyne_p_on_a():
    link, cm = link_cm()
    out = gs.homodyne_condition(cm, 0, "p")
    np.testing.assert_allclose(out, np.diag([link.y, link.y - link.z2 / link.x]))


def test_homodyne_on_product_state_leaves_spectators():
    rng = np.random.default_rng(3)
    a, _ = random_cm(1, rng)
    b, _ = random_cm(2, rng)
    out = gs.homodyne_condition(gs.direct_sum(a, b), 0, "q")
    np.testing.assert_allclose(out, b)


def test_homodyne_rejects_bad_quadrature():
    with pytest.raises(DomainError):
        gs.homodyne_condition(gs.vacuum(2), 0, "x")


def test_heterodyne_pair_formula():
    delta = np.diag([3.0, 2.5])
    gamma = 1.2 * gs.Z2
    cm = gs.from_mode_blocks([[delta, gamma], [gamma, delta]])
    expected = delta - gamma @ np.linalg.inv(delta + gs.I2) @ gamma
    np.testing.assert_allclose(gs.heterodyne_condition(cm, 1), expected)


def test_heterodyne_uncorrelated_leaves_other_mode():
    out = gs.heterodyne_condition(gs.direct_sum(gs.thermal(3.0), gs.thermal(2.0)), 0)
    np.testing.assert_allclose(out, 2.0 * np.eye(2))


def test_heterodyne_tmsv_by_hand():
    # mu - (mu^2 - 1)/(mu + 1) = 1 on each quadrature
    out = gs.heterodyne_condition(gs.make_tmsv(5.0), 0)
    np.testing.assert_allclose(out, np.eye(2))


def test_conditioning_commutes_with_spectator_permutation():
    rng = np.random.default_rng(4)
    cm, _ = random_cm(4, rng)
    order = [0, 3, 1, 2]
    perm = gs.permute_modes(cm, order)
    for cond in (lambda v: gs.heterodyne_condition(v, 0), lambda v: gs.homodyne_condition(v, 0, "p")):
        np.testing.assert_allclose(cond(perm), gs.permute_modes(cond(cm), [2, 0, 1]), atol=1e-12)


# -- spectra and entropies ----------------------------------------------------


def test_spectrum_of_vacuum_and_thermal():
    np.testing.assert_allclose(gs.symplectic_spectrum(gs.vacuum()), [1.0])
    np.testing.assert_allclose(gs.symplectic_spectrum(gs.thermal(4.2)), [4.2])


def test_spectrum_clamps_tiny_undershoot():
    assert gs.symplectic_spectrum((1 - 1e-10) * np.eye(2))[0] == 1.0


def test_spectrum_rejects_unphysical():
    with pytest.raises(UnphysicalStateError):
        gs.symplectic_spectrum(np.diag([0.5, 1.0]))
    with pytest.raises(UnphysicalStateError):
        gs.symplectic_spectrum(np.diag([-1.0, 1.0]))


def test_spectrum_rejects_asymmetric():
    with pytest.raises(NetkitError):
        gs.symplectic_spectrum(np.array([[2.0, 0.5], [0.0, 2.0]]))


def test_entropy_values():
    assert gs.entropy_h(1.0) == 0.0
    assert gs.entropy_h(3.0) == pytest.approx(2.0, abs=1e-15)
    assert gs.entropy_h(5.0) == pytest.approx(3 * math.log2(3) - 2, rel=1e-14)
    assert gs.entropy_h(5.0) == pytest.approx(2.75489, abs=1e-5)


def test_entropy_clamp_and_domain():
    assert gs.entropy_h(1 - 5e-10) == 0.0
    with pytest.raises(DomainError):
        gs.entropy_h(0.99)


@given(st.floats(1.0, 1e6), st.floats(1e-6, 1e3))
def test_entropy_increasing(x, frac):
    assert gs.entropy_h(x * (1 + frac)) > gs.entropy_h(x)


def test_von_neumann_entropy():
    assert gs.von_neumann_entropy(gs.vacuum(3)) == 0.0
    assert gs.von_neumann_entropy(gs.make_tmsv(30.0)) == pytest.approx(0.0, abs=1e-6)
    assert gs.von_neumann_entropy(gs.thermal(3.0, 2)) == pytest.approx(4.0)


def test_is_physical():
    assert gs.is_physical(gs.make_tmsv(3.0))
    assert not gs.is_physical(np.diag([0.3, 1.0]))

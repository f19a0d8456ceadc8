"""Haar sampling and moment estimation checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfverify.exceptions import ContractError, DomainError
from cfverify.haar import (
    GroupSpec,
    MomentSpec,
    batch_rng,
    bessel_phase_integral,
    estimate_moment,
    haar_expect_charpoly,
    jackknife_mean,
    sample_haar,
    sample_haar_batched,
    second_moment,
    symplectic_form,
)


def test_group_spec_contracts():
    with pytest.raises(ContractError):
        GroupSpec("Q", 3)
    with pytest.raises(ContractError):
        GroupSpec("Sp", 3)


@pytest.mark.parametrize("family,n", [("O", 3), ("U", 3), ("Sp", 4)])
def test_samples_live_on_the_group(family, n):
    g = sample_haar(GroupSpec(family, n), 200, batch_rng(1, 0))
    eye = np.eye(n)
    err = np.max(np.abs(np.einsum("sij,sik->sjk", g.conj(), g) - eye))
    assert err < 1e-10
    if family == "O":
        assert np.max(np.abs(g.imag)) == 0
    if family == "Sp":
        eps = symplectic_form(n)
        err = np.max(np.abs(np.einsum("sij,jk,skl->sil", np.swapaxes(g, 1, 2), eps, g) - eps))
        # g^T eps g = eps
        gT = np.swapaxes(g, 1, 2)
        err = np.max(np.abs(gT @ eps @ g - eps))
        assert err < 1e-10


def test_orthogonal_covers_both_components_evenly():
    g = sample_haar_batched(GroupSpec("O", 3), 10_000, seed=2)
    frac = np.mean(np.linalg.det(g) < 0)
    assert abs(frac - 0.5) < 0.02


def test_orthogonal_first_and_second_moments():
    spec = GroupSpec("O", 3)
    est = estimate_moment(spec, MomentSpec(((False, 0, 1),)), 40_000, seed=3)
    assert est.consistent_with(0.0)
    for (i, k, j, l) in [(0, 0, 0, 0), (0, 1, 0, 1), (0, 0, 1, 1), (1, 2, 1, 2)]:
        est = estimate_moment(
            spec, MomentSpec(((False, i, k), (False, j, l))), 40_000, seed=4)
        assert est.consistent_with(second_moment(spec, i, k, j, l)), (i, k, j, l)


def test_symplectic_second_moments():
    spec = GroupSpec("Sp", 2)
    for (i, k, j, l) in [(0, 0, 1, 1), (0, 1, 1, 0), (0, 0, 0, 0), (0, 0, 1, 0)]:
        est = estimate_moment(
            spec, MomentSpec(((False, i, k), (False, j, l))), 40_000, seed=5)
        assert est.consistent_with(second_moment(spec, i, k, j, l)), (i, k, j, l)


def test_unitary_mixed_second_moment():
    spec = GroupSpec("U", 3)
    for (i, j, k, l) in [(0, 0, 0, 0), (0, 1, 1, 0), (0, 1, 0, 1), (2, 1, 1, 2)]:
        mom = MomentSpec(((False, i, j), (True, k, l)))
        est = estimate_moment(spec, mom, 40_000, seed=6)
        assert est.consistent_with(second_moment(spec, i, j, k, l)), (i, j, k, l)


def test_left_invariance_of_moments():
    # E[f(hg)] = E[f(g)] for fixed h; f = a fixed second moment
    spec = GroupSpec("O", 3)
    rng = np.random.default_rng(8)
    h = sample_haar(spec, 1, rng)[0]
    g = sample_haar_batched(spec, 30_000, seed=9)
    hg = np.einsum("ij,sjk->sik", h, g)
    a = jackknife_mean(hg[:, 0, 0] * hg[:, 1, 1], seed=9)
    want = second_moment(spec, 0, 0, 1, 1)
    assert a.consistent_with(want)


@settings(max_examples=12, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 1), st.integers(0, 1)),
                min_size=1, max_size=3))
def test_unbalanced_unitary_words_average_to_zero(factors):
    mom = MomentSpec(tuple(factors))
    if mom.inverse_balance() == 0:
        return
    est = estimate_moment(GroupSpec("U", 2), mom, 8_192, seed=10)
    assert est.consistent_with(0.0, floor=1e-9)


def test_reproducibility_bitwise():
    spec = GroupSpec("U", 3)
    a = sample_haar_batched(spec, 1000, seed=11)
    b = sample_haar_batched(spec, 1000, seed=11)
    assert np.array_equal(a, b)
    c = sample_haar_batched(spec, 1000, seed=12)
    assert not np.array_equal(a, c)


def test_jackknife_matches_iid_theory():
    rng = np.random.default_rng(13)
    x = rng.normal(size=64 * 200)
    est = jackknife_mean(x.astype(complex), seed=0)
    want = 1.0 / np.sqrt(len(x))
    assert 0.8 * want < est.stderr < 1.2 * want


def test_charpoly_on_o1():
    # O(1) = {+-1}: E[det(a - g)] = a, E[1/det(a - g)] = a/(a^2-1)
    spec = GroupSpec("O", 1)
    est = haar_expect_charpoly(spec, [2.0], [], 20_000, seed=14)
    assert est.consistent_with(2.0)
    est = haar_expect_charpoly(spec, [], [2.0], 20_000, seed=15)
    assert est.consistent_with(2.0 / 3.0)


def test_charpoly_domain_guard():
    with pytest.raises(DomainError):
        haar_expect_charpoly(GroupSpec("O", 2), [], [0.9], 100, seed=0)


def test_moment_index_guard():
    with pytest.raises(ContractError):
        estimate_moment(GroupSpec("O", 2), MomentSpec(((False, 0, 5),)), 64, seed=0)


def test_bessel_phase_integral_forms():
    r = bessel_phase_integral(0.8, 0.8, 0.9)
    assert abs(r.quadrature - r.series) < 1e-12
    assert r.sqrt_form_matches
    assert not r.product_form_matches
    # and at a point where both arguments coincide the two forms agree
    r2 = bessel_phase_integral(2.0, 2.0, 1.0)  # 2|z|sqrt(XY) = 4 = |z|^2 XY
    assert r2.sqrt_form_matches and r2.product_form_matches

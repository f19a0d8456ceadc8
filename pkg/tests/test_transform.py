"""Two-sided transformation checks: MC group averages vs quadrature."""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfverify.algebra import GrassmannPoly, gexp, grassmann_close
from cfverify.exceptions import (
    ContractError,
    DivergenceError,
    DomainError,
    StableRangeError,
)
from cfverify.haar import second_moment
from cfverify.quadrature import DomainQuadrature, Rule
from cfverify.transform import (
    FlavorSignature,
    OuterFieldAssignment,
    ZPoint,
    compare_cf,
    declared_z_moment,
    default_quadrature,
    lhs_cf,
    measured_z_moments,
    moment_expansion_check,
    normalization_constant,
    rhs_cf,
    rhs_exponent,
    z_layout,
)

from helpers import o1_sign_average, o2_brute_degree4, poly_to_dict


# -- signatures and layouts ---------------------------------------------------


def test_signature_contracts():
    with pytest.raises(ContractError):
        FlavorSignature("E8", 3, 1, 0)
    with pytest.raises(ContractError):
        FlavorSignature("C", 3, 1, 0)  # odd color count
    with pytest.raises(ContractError):
        FlavorSignature("BD", 3, 0, 0)
    with pytest.raises(ContractError):
        FlavorSignature("BD", 0, 1, 0)


@pytest.mark.parametrize(
    "family,n0,n1,expected",
    [("BD", 1, 0, 3), ("BD", 0, 1, 1), ("BD", 2, 1, 5),
     ("C", 1, 1, 2), ("C", 2, 0, 2), ("C", 3, 0, 4),
     ("A", 1, 1, 2), ("A", 0, 1, 1), ("A", 2, 0, 4)],
)
def test_stable_range_lower_edge(family, n0, n1, expected):
    colors = expected + (expected % 2 if family == "C" else 0)
    sig = FlavorSignature(family, max(colors, 2 if family == "C" else 1), n0, n1)
    assert sig.stable_min == expected


def test_layout_counts():
    lay = z_layout(FlavorSignature("BD", 3, 1, 1))
    assert lay.even_entries == (((0, 0), True),)  # FF skew 1x1 dies
    assert lay.odd_pairs == ((0, 1),)
    lay = z_layout(FlavorSignature("C", 2, 1, 1))
    assert lay.even_entries == (((1, 1), False),)  # BB skew 1x1 dies
    lay = z_layout(FlavorSignature("A", 2, 1, 1))
    assert len(lay.even_entries) == 2
    assert lay.odd_pairs == ((0, 1), (1, 0))


def test_layout_rejects_wide_bounded_blocks():
    with pytest.raises(ContractError):
        z_layout(FlavorSignature("BD", 5, 2, 0))  # symmetric 2x2: 3 disks
    with pytest.raises(ContractError):
        z_layout(FlavorSignature("A", 4, 2, 0))


def test_zpoint_domain_guard():
    sig = FlavorSignature("BD", 3, 1, 0)
    ZPoint(sig, (0.5 + 0.1j,))
    with pytest.raises(DomainError):
        ZPoint(sig, (1.2 + 0.0j,))
    with pytest.raises(ContractError):
        ZPoint(sig, (0.1, 0.2))


@pytest.mark.parametrize("family", ["BD", "C"])
def test_assembled_exchange_symmetry(family):
    # Z^{mu nu} = s (-1)^(pp'+p+p') Z^{nu mu}, Zt_{mu nu} = s (-1)^(pp') Zt_{nu mu}
    colors = {"BD": 3, "C": 4}[family]
    sig = FlavorSignature(family, colors, 1, 2)
    lay = z_layout(sig)
    gens = lay.z_gens
    values = []
    for _entry, bounded in lay.even_entries:
        values.append(0.3 - 0.2j if bounded else 1.7 + 0.9j)
    Z, Zt = ZPoint(sig, tuple(values)).matrices(gens, 0)
    s = {"BD": 1.0, "C": -1.0}[family]
    for mu in range(sig.flavors):
        for nu in range(sig.flavors):
            p, q = sig.parity(mu), sig.parity(nu)
            sz = s * (-1.0) ** (p * q + p + q)
            st_ = s * (-1.0) ** (p * q)
            assert grassmann_close(Z.rows[mu][nu], Z.rows[nu][mu] * sz)
            assert grassmann_close(Zt.rows[mu][nu], Zt.rows[nu][mu] * st_)


# -- left-hand side against enumeration oracles ------------------------------


def test_lhs_single_color_matches_reflection_enumeration():
    sig = FlavorSignature("BD", 1, 1, 0)
    fields = OuterFieldAssignment.sample(sig, seed=5)
    oracle = o1_sign_average(fields)
    s = fields.psi_bar[0][0] * fields.psi[0][0]
    assert abs(oracle[()] - cmath.cosh(s)) < 1e-14
    left = lhs_cf(sig, fields, samples=4096, seed=3)
    assert abs(complex(left.poly.coeff(0)) - oracle[()]) < 3 * left.sigma(0)


def test_lhs_all_sources_off_is_exactly_unity():
    sig = FlavorSignature("C", 2, 1, 1)
    left = lhs_cf(sig, OuterFieldAssignment.zero(sig), samples=256, seed=0)
    assert poly_to_dict(left.poly) == {(): 1.0 + 0.0j}
    assert left.sigma(0) == 0.0


def test_lhs_single_color_fermionic_is_unity():
    sig = FlavorSignature("BD", 1, 0, 1)
    fields = OuterFieldAssignment.sample(sig, seed=1)
    assert o1_sign_average(fields) == {(): 1.0 + 0.0j}
    left = lhs_cf(sig, fields, samples=1024, seed=1)
    for mask, coeff in left.poly.terms.items():
        ref = 1.0 if mask == 0 else 0.0
        assert abs(complex(coeff) - ref) <= 3 * left.sigma(mask) + 1e-12


def test_lhs_matches_brute_force_degree4_expansion():
    sig = FlavorSignature("BD", 2, 0, 1)
    fields = OuterFieldAssignment.sample(sig, seed=9)
    oracle = o2_brute_degree4(fields, second_moment)
    assert oracle == {(): 1.0 + 0.0j}
    left = lhs_cf(sig, fields, samples=4096, seed=9)
    table = poly_to_dict(left.poly)
    for t, v in table.items():
        ref = oracle.get(t, 0.0)
        mask = sum(1 << i for i in t)
        assert abs(complex(v) - ref) <= 3 * left.sigma(mask) + 1e-12


def test_lhs_worker_split_is_deterministic():
    sig = FlavorSignature("BD", 3, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=2)
    a = lhs_cf(sig, fields, samples=512, seed=4, workers=1)
    b = lhs_cf(sig, fields, samples=512, seed=4, workers=2)
    assert poly_to_dict(a.poly) == poly_to_dict(b.poly)
    assert a.stderr == b.stderr


# -- right-hand side ----------------------------------------------------------


@pytest.mark.parametrize(
    "family,colors,n0,n1",
    [("BD", 3, 1, 1), ("C", 2, 1, 1), ("A", 2, 1, 1), ("BD", 1, 0, 1)],
)
def test_rhs_zero_fields_is_exactly_one(family, colors, n0, n1):
    sig = FlavorSignature(family, colors, n0, n1)
    right = rhs_cf(sig, OuterFieldAssignment.zero(sig))
    assert set(right.poly.terms) == {0}
    assert complex(right.poly.coeff(0)) == 1.0 + 0.0j


def test_rhs_refuses_unstable_range():
    sig = FlavorSignature("BD", 2, 1, 1)  # needs N >= 3
    fields = OuterFieldAssignment.zero(sig)
    with pytest.raises(StableRangeError):
        rhs_cf(sig, fields)
    # the override exposes the real degeneracy: at N = 2 the weight power
    # hits zero and the odd integral annihilates the whole measure
    with pytest.raises(DivergenceError):
        rhs_cf(sig, fields, allow_unstable=True)


def test_rhs_unstable_override_yields_numbers_when_mass_survives():
    sig = FlavorSignature("BD", 1, 1, 0)  # needs N >= 3, but mass > 0 on-grid
    fields = OuterFieldAssignment.zero(sig)
    right = rhs_cf(sig, fields, allow_unstable=True)
    assert complex(right.poly.coeff(0)) == 1.0 + 0.0j


# -- normalization anchors ----------------------------------------------------


@pytest.mark.parametrize("colors", [3, 4, 5, 6])
def test_mass_bounded_disk_family_BD(colors):
    # unit-mass integral 2 pi / (N - 2), so c = (N - 2) / (2 pi)
    sig = FlavorSignature("BD", colors, 1, 0)
    c = normalization_constant(sig)
    assert c == pytest.approx((colors - 2) / (2 * np.pi), rel=1e-10)


@pytest.mark.parametrize("colors", [2, 3, 4])
def test_mass_typeA_rank_one_is_pi_squared(colors):
    sig = FlavorSignature("A", colors, 1, 1)
    c = normalization_constant(sig)
    assert c == pytest.approx(np.pi**-2, rel=1e-9)


@pytest.mark.parametrize("colors", [1, 2, 3])
def test_mass_fermionic_rank_one_finite_all_colors(colors):
    sig = FlavorSignature("BD", colors, 0, 1)
    c = normalization_constant(sig)
    assert c == pytest.approx(1.0)  # no even coordinates at this rank


def test_mass_fermionic_rank_two():
    sig = FlavorSignature("BD", 3, 0, 2)
    c = normalization_constant(sig)
    assert c == pytest.approx((3 + 1) / np.pi, rel=1e-10)


@pytest.mark.parametrize(
    "family,colors,expect",
    [("BD", 3, 2 * np.pi), ("C", 2, 2 * np.pi), ("C", 4, 2 * np.pi)],
)
def test_mass_mixed_rank_one(family, colors, expect):
    sig = FlavorSignature(family, colors, 1, 1)
    c = normalization_constant(sig)
    assert 1.0 / c == pytest.approx(expect, rel=1e-9)


def test_mass_divergence_below_stable_range():
    with pytest.raises(DivergenceError):
        normalization_constant(FlavorSignature("BD", 2, 1, 0))


# -- the transformations themselves -------------------------------------------


def test_cf_identity_family_BD():
    sig = FlavorSignature("BD", 3, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=5)
    result = compare_cf(sig, fields, samples=8192, seed=1)
    assert result.passed(3.0), (result.worst_sigma, result.worst_mask)
    assert len(result.table) >= 10  # nontrivial coefficient coverage


def test_cf_identity_family_C():
    sig = FlavorSignature("C", 2, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=6)
    result = compare_cf(sig, fields, samples=8192, seed=2)
    assert result.passed(3.0), (result.worst_sigma, result.worst_mask)


def test_cf_identity_family_A():
    sig = FlavorSignature("A", 2, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=7)
    result = compare_cf(sig, fields, samples=8192, seed=3)
    assert result.passed(3.0), (result.worst_sigma, result.worst_mask)
    assert len(result.table) >= 30


def test_cf_identity_when_unit_coefficient_sits_off_one():
    # this draw pushes the group average's unit coefficient several sigma
    # away from 1, so only the self-normalized comparison can succeed
    sig = FlavorSignature("BD", 3, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=282)
    result = compare_cf(sig, fields, samples=8192, seed=93)
    lead = complex(result.lhs.poly.coeff(0))
    assert abs(lead - 1.0) > 3 * result.lhs.sigma(0)
    assert result.table[0][0] == pytest.approx(1.0, abs=1e-12)
    assert result.passed(3.0), (result.worst_sigma, result.worst_mask)


def test_rhs_refinement_stays_below_mc_resolution():
    # doubling the grid moves coefficients by far less than the MC stderr
    sig = FlavorSignature("BD", 3, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=5)
    left = lhs_cf(sig, fields, samples=4096, seed=1)
    right = rhs_cf(sig, fields)
    for mask in right.poly.terms:
        sd = left.sigma(mask)
        if sd > 0:
            assert right.refinement_error(mask) < 0.1 * sd


# -- factorization over colors ------------------------------------------------


@pytest.mark.parametrize(
    "family,colors,values",
    [("BD", 3, (0.23 - 0.31j,)), ("C", 2, (1.4 + 0.6j,)),
     ("A", 2, (0.3 + 0.2j, 1.7 - 0.4j))],
)
def test_rhs_integrand_factorizes_over_colors(family, colors, values):
    sig = FlavorSignature(family, colors, 1, 1)
    fields = OuterFieldAssignment.sample(sig, seed=3)
    lay = z_layout(sig)
    gens = fields.outer_gens + lay.z_gens
    Z, Zt = ZPoint(sig, values).matrices(gens, fields.outer_gens)
    full = gexp(rhs_exponent(sig, fields, Z, Zt))
    prod = GrassmannPoly.scalar(gens, 1.0)
    for i in range(sig.colors):
        prod = prod * gexp(rhs_exponent(sig, fields, Z, Zt, color=i))
    assert grassmann_close(full, prod, tol=1e-11)


# -- moment expansion ----------------------------------------------------------


def test_declared_moments_match_measured_rank_one():
    sig = FlavorSignature("BD", 4, 1, 0)
    measured = measured_z_moments(sig)
    for key, value in measured.items():
        assert abs(value - declared_z_moment(sig, *key)) < 1e-10


def test_declared_moment_family_guard():
    with pytest.raises(ContractError):
        declared_z_moment(FlavorSignature("A", 2, 1, 1), 0, 0, 0, 0)


@pytest.mark.parametrize("colors", [3, 5])
def test_moment_expansion_first_order_agreement(colors):
    check = moment_expansion_check(FlavorSignature("BD", colors, 1, 1))
    assert check.order_zero == (1.0, 1.0)
    assert check.term_diff < 1e-12
    assert check.moment_err < 1e-10
    assert check.passed()
    assert check.group_term.terms  # the 1/N term is actually nonempty


def test_moment_expansion_rejects_other_families():
    with pytest.raises(ContractError):
        moment_expansion_check(FlavorSignature("A", 2, 1, 1))


# -- randomized even coordinates keep the symmetry ----------------------------


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.95), st.floats(0.0, 6.28))
def test_zpoint_symmetry_random_disk(t, theta):
    sig = FlavorSignature("BD", 3, 1, 0)
    v = np.sqrt(t) * np.exp(1j * theta)
    Z, Zt = ZPoint(sig, (v,)).matrices(0, 0)
    assert complex(Z.rows[0][0].scalar_part()) == pytest.approx(v)
    assert complex(Zt.rows[0][0].scalar_part()) == pytest.approx(np.conj(v))

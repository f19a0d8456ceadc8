"""Kernel moment criteria, rank (1|1) radial integrals, and root scans.

The anchors bypass the Grassmann pipeline wherever possible: the graded
determinant is compared coefficient by coefficient against its four-term
expansion written out by hand, the Berezin reduction against the closed
radial formula, disk moments against beta-function values, the boundary
circle against analytic Fourier coefficients, and the single-color
corrected integrals against combined integrands reduced on paper.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfverify.algebra import (GrassmannPoly, SuperMatrix, berezin,
                              grassmann_close, gpow, sdet)
from cfverify.exceptions import (ContractError, DivergenceError,
                                 SingularityError)
from cfverify.kernels import (IntegrandSpec, KernelSpec, RootSystemSpec,
                              SectorGrid, _BEREZIN_SEQ, _bulk_t1_profile,
                              _surface_t1_profile, bergman_kernel,
                              check_N1_impossibility, check_circle_repair_N2,
                              check_reproducing_disk, check_typeA_N1,
                              check_typeA_radial, kernel_series_coefficient,
                              moment_integrand, one_minus_zt_z,
                              section_integrand, stable_range,
                              table1_sections, typeA_N1_corrected_integral,
                              typeA_radial_integral, unit_integrand)
from cfverify.verdicts import DIVERGENT, EXPECTED_FAILURE, FAIL, PASS


def sample_sector(seed: int = 0, n: int = 6) -> SectorGrid:
    rng = np.random.default_rng(seed)
    return SectorGrid(
        t0=rng.uniform(0.05, 0.95, n),
        t1=rng.uniform(0.05, 3.0, n),
        ph0=np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n)),
        ph1=np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n)),
    )


# ---------------------------------------------------------------------------
# graded weight: expansion and Berezin reduction

def test_sdet_matches_four_term_expansion():
    s = sample_sector(1)
    d = 1.0 + s.t1
    bilinear = (s.tilde(0, 1) * s.plain(1, 0)
                + s.plain(0, 1) * s.tilde(1, 0)
                + s.scalar(s.z11 * s.z00) * s.tilde(0, 1) * s.tilde(1, 0)
                + s.scalar(s.zt11 * s.zt00) * s.plain(0, 1) * s.plain(1, 0))
    quartic = s.tilde(0, 1) * s.plain(1, 0) * s.plain(0, 1) * s.tilde(1, 0)
    oracle = s.scalar((1.0 - s.t0) / d) \
        + bilinear * s.scalar(-1.0 / d ** 2) \
        + quartic * s.scalar((1.0 - s.t1) / d ** 3)
    assert grassmann_close(sdet(one_minus_zt_z(s)), oracle, 1e-12)


@pytest.mark.parametrize("colors", [1, 2, 3, 4, 6])
def test_berezin_reduction_matches_radial_formula(colors):
    s = sample_sector(2)
    dens = berezin(gpow(sdet(one_minus_zt_z(s)), colors),
                   _BEREZIN_SEQ).scalar_part()
    s0 = (1.0 - s.t0) / (1.0 + s.t1)
    oracle = colors * s0 ** (colors - 1) * (1.0 - s.t1) / (1.0 + s.t1) ** 3
    if colors > 1:
        oracle = oracle + colors * (colors - 1) * s0 ** (colors - 2) \
            * (1.0 + s.t0 * s.t1) / (1.0 + s.t1) ** 4
    assert np.max(np.abs(dens - oracle)) < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.floats(0.01, 0.99), st.floats(0.01, 9.0),
       st.floats(0.0, 2 * math.pi), st.floats(0.0, 2 * math.pi))
def test_berezin_reduction_everywhere(colors, t0, t1, a0, a1):
    s = SectorGrid(t0=np.array([t0]), t1=np.array([t1]),
                   ph0=np.array([np.exp(1j * a0)]),
                   ph1=np.array([np.exp(1j * a1)]))
    dens = berezin(gpow(sdet(one_minus_zt_z(s)), colors),
                   _BEREZIN_SEQ).scalar_part()
    s0 = (1.0 - t0) / (1.0 + t1)
    oracle = colors * s0 ** (colors - 1) * (1.0 - t1) / (1.0 + t1) ** 3
    if colors > 1:
        oracle = oracle + colors * (colors - 1) * s0 ** (colors - 2) \
            * (1.0 + t0 * t1) / (1.0 + t1) ** 4
    assert abs(complex(dens[0]) - oracle) < 1e-12 * (1.0 + abs(oracle))


# ---------------------------------------------------------------------------
# overlap kernel and its power series

def test_scalar_kernel_values_and_zero_argument():
    spec = KernelSpec("BD", 3)
    assert bergman_kernel(spec, 0.0, 0.37).scalar_part() == pytest.approx(1.0)
    zt, zp = 0.4 - 0.1j, 0.3 + 0.2j
    val = bergman_kernel(spec, zt, zp).scalar_part()
    assert val == pytest.approx((1.0 - zt * zp) ** -1.5, rel=1e-14)


def test_series_coefficients_follow_binomial_recurrence():
    for colors in (2, 3, 4, 7):
        c = 1.0
        for m in range(1, 12):
            c = c * (m - 1 + 0.5 * colors) / m
            assert kernel_series_coefficient(colors, m) == pytest.approx(
                c, rel=1e-13)
    # two colors give the plain geometric series
    assert all(kernel_series_coefficient(2, m) == pytest.approx(1.0)
               for m in range(8))


def test_scalar_kernel_sums_its_series():
    spec = KernelSpec("BD", 5)
    x = 0.3
    series = sum(kernel_series_coefficient(5, m) * x ** m for m in range(80))
    assert bergman_kernel(spec, 1.0, x).scalar_part() == pytest.approx(
        series, rel=1e-12)


def test_supermatrix_kernel_at_zero_is_one():
    zero = SuperMatrix(1, 1, [[GrassmannPoly(4), GrassmannPoly(4)],
                              [GrassmannPoly(4), GrassmannPoly(4)]])
    pt = sample_sector(3, n=1)
    K = bergman_kernel(KernelSpec("A", 1, 1, 1), zero, pt.supermatrix(False))
    assert grassmann_close(K, GrassmannPoly.scalar(4, 1.0))


def test_kernel_singularities_are_reported():
    with pytest.raises(SingularityError):
        bergman_kernel(KernelSpec("BD", 3), 1.0, 1.0)
    boundary = SectorGrid(t0=np.array([1.0]), t1=np.array([0.5]),
                          ph0=np.array([1.0 + 0j]),
                          ph1=np.array([1.0 + 0j]))
    with pytest.raises(SingularityError):
        bergman_kernel(KernelSpec("A", 1, 1, 1),
                       boundary.supermatrix(True),
                       boundary.supermatrix(False))


def test_kernel_spec_contracts():
    assert KernelSpec("A", 2, 1, 1).exponent == -2.0
    assert KernelSpec("C", 4, 1, 0).exponent == -2.0
    assert KernelSpec("BD", 3).exponent == -1.5
    with pytest.raises(ContractError):
        KernelSpec("E", 3)
    with pytest.raises(ContractError):
        KernelSpec("BD", 0)
    with pytest.raises(ContractError):
        KernelSpec("BD", 3, 0, 0)


# ---------------------------------------------------------------------------
# disk criterion, circle repair, single-color impossibility

def test_disk_moments_pass_for_stable_colors():
    for colors in range(3, 9):
        rep = check_reproducing_disk(colors, 6)
        assert rep.passed(), rep.verdicts()
        for rec in rep.records:
            assert rec.error < 1e-12


def test_disk_moment_quadrature_matches_beta_values():
    # colors = 4 has a flat weight: mu_m = 1/(m+1) by hand
    rep = check_reproducing_disk(4, 5)
    for m, rec in enumerate(rep.records):
        mu = rec.value / kernel_series_coefficient(4, m)
        assert mu == pytest.approx(1.0 / (m + 1), rel=1e-13)


def test_disk_divergence_flags_low_colors():
    for colors in (1, 2):
        rep = check_reproducing_disk(colors, 3)
        assert all(rec.verdict == DIVERGENT for rec in rep.records)
        assert rep.passed(allow=(DIVERGENT,))


def test_circle_repair_reproduces_hardy_monomials():
    rep = check_circle_repair_N2(10, theta_prime=0.7)
    w = np.exp(0.7j)
    for k in range(11):
        rec = rep.record(f"monomial k={k}")
        assert rec.verdict == PASS
        assert abs(rec.value - w ** k) < 1e-10
    assert rep.record("contour independence").verdict == PASS
    neg = rep.record("monomial k=-1 outside the space")
    assert neg.verdict == EXPECTED_FAILURE
    assert abs(neg.value) < 1e-10


def test_impossibility_certificate():
    rep = check_N1_impossibility(20)
    assert rep.passed()
    assert rep.record("mu m=0").value == pytest.approx(1.0)
    assert rep.record("mu m=1").value == pytest.approx(2.0)


def test_impossibility_moment_ratio_recurrence():
    mu = [math.gamma(0.5) * math.gamma(m + 1) / math.gamma(m + 0.5)
          for m in range(21)]
    for m in range(20):
        assert mu[m + 1] / mu[m] == pytest.approx((m + 1) / (m + 0.5),
                                                  rel=1e-12)


# ---------------------------------------------------------------------------
# rank (1|1) bulk integrals

def test_bulk_norm_and_moments_at_stable_colors():
    for colors in (2, 3, 4, 6):
        rep = check_typeA_radial(colors)
        assert rep.passed(), rep.verdicts()
        for rec in rep.records:
            assert rec.error < 1e-12


def test_bulk_alone_fails_at_one_color():
    rep = check_typeA_radial(1)
    norm = rep.record("normalization")
    assert norm.verdict == FAIL
    assert abs(norm.value) < 1e-10
    assert rep.record("moment 11|11").verdict == DIVERGENT
    assert not rep.passed()


def test_radial_integral_contracts():
    with pytest.raises(ContractError):
        typeA_radial_integral(0, unit_integrand())


# ---------------------------------------------------------------------------
# single-color corrected integral

def test_combined_profiles_match_hand_reduction():
    t1 = np.array([0.1, 0.7, 2.3, 9.0])
    unit = unit_integrand()
    bulk = _bulk_t1_profile(1, unit.build, t1, 24, 4)
    assert np.allclose(bulk, (1.0 - t1) / (1.0 + t1) ** 3, atol=1e-14)
    surf = _surface_t1_profile(unit.build, t1, 4)
    assert np.allclose(surf, 1.0 / (1.0 + t1) ** 2, atol=1e-14)
    probe = moment_integrand((1, 1), (1, 1))
    bulk = _bulk_t1_profile(1, probe.build, t1, 24, 4)
    assert np.allclose(bulk, (t1 ** 2 - t1) / (1.0 + t1) ** 3, atol=1e-14)
    surf = _surface_t1_profile(probe.build, t1, 4)
    assert np.allclose(surf, -t1 / (1.0 + t1) ** 2, atol=1e-14)


def test_corrected_anchors():
    assert typeA_N1_corrected_integral(unit_integrand()) == pytest.approx(
        1.0, abs=1e-12)
    assert typeA_N1_corrected_integral(
        moment_integrand((1, 1), (1, 1))) == pytest.approx(-1.0, abs=1e-12)


def test_corrected_orthogonality_sample():
    for line, k in ((1, 2), (2, 1), (3, 2), (4, 0), (4, 1)):
        value = typeA_N1_corrected_integral(section_integrand(line, k,
                                                              line, k))
        assert value == pytest.approx(1.0, abs=1e-11), (line, k)
    for pair in (((1, 1), (1, 2)), ((2, 1), (3, 1)), ((1, 0), (4, 1)),
                 ((4, 1), (4, 2))):
        (lf, kf), (le, ke) = pair
        value = typeA_N1_corrected_integral(section_integrand(lf, kf,
                                                              le, ke))
        assert abs(value) < 1e-12, pair


def test_corrected_report_passes():
    rep = check_typeA_N1(k_max=2)
    assert rep.passed(), [(r.label, r.verdict) for r in rep.records]


def test_non_cancelling_divergence_raises():
    spoiler = IntegrandSpec(
        "t0 Z11 Zt11",
        lambda s: s.scalar(s.t0) * s.plain(1, 1) * s.tilde(1, 1))
    with pytest.raises(DivergenceError):
        typeA_N1_corrected_integral(spoiler)


# ---------------------------------------------------------------------------
# the section table

def test_sections_resum_to_the_kernel():
    pt = SectorGrid(t0=np.array([0.3]), t1=np.array([0.2]),
                    ph0=np.array([np.exp(0.7j)]),
                    ph1=np.array([np.exp(1.3j)]))
    K = bergman_kernel(KernelSpec("A", 1, 1, 1),
                       pt.supermatrix(True), pt.supermatrix(False))
    acc = GrassmannPoly(4)
    for k in range(40):
        for line in (1, 2, 3, 4):
            if line in (2, 3) and k < 1:
                continue
            f, e = table1_sections(line, k, pt)
            acc = acc + e * f
    assert grassmann_close(acc, K, 1e-12)


def test_section_contents_and_degenerate_pair():
    s = sample_sector(4, n=3)
    f, e = table1_sections(1, 0, s)
    assert grassmann_close(f, GrassmannPoly.scalar(4, 1.0))
    assert grassmann_close(e, GrassmannPoly.scalar(4, 1.0))
    f, e = table1_sections(2, 2, s)
    assert np.allclose(f.coeff([0]), -math.sqrt(2.0) * s.z00)
    assert np.allclose(e.coeff([3]), math.sqrt(2.0) * s.zt00)
    f, e = table1_sections(4, 0, s)
    assert np.allclose(f.coeff(0), s.z11)
    assert np.allclose(e.coeff(0), -s.zt11)


def test_section_index_contracts():
    s = sample_sector(5, n=1)
    for line, k in ((1, -1), (2, 0), (3, 0), (4, -1), (5, 0), (0, 1)):
        with pytest.raises(ContractError):
            table1_sections(line, k, s)


# ---------------------------------------------------------------------------
# stable range

def test_stable_range_matches_closed_forms():
    for n0 in range(1, 9):
        assert stable_range("BD", n0) == 2 * n0 + 1
        assert stable_range("A", n0) == max(1, 2 * n0)
    assert [stable_range("C", n0) for n0 in range(1, 5)] == [2, 2, 4, 6]


def test_stable_range_is_monotone():
    for family in ("BD", "C", "A"):
        values = [stable_range(family, n0) for n0 in range(1, 9)]
        assert values == sorted(values)


def test_root_system_structure():
    roots = RootSystemSpec(3)
    assert tuple(roots.delta) == (3.0, 2.0, 1.0)
    assert len(roots.noncompact_positive()) == 6
    assert len(roots.compact_positive()) == 3
    assert tuple(roots.lowest_weight(7)) == (-3.5, -3.5, -3.5)
    # the scan boundary: at N = 2 n0 the worst root pairs to exactly zero
    n0 = 3
    shifted = roots.lowest_weight(2 * n0) + roots.delta
    worst = 2.0 * np.eye(n0)[0]
    assert float(shifted @ worst) == 0.0


def test_stable_range_contracts():
    with pytest.raises(ContractError):
        stable_range("E", 2)
    with pytest.raises(ContractError):
        stable_range("BD", 0)
    with pytest.raises(ContractError):
        RootSystemSpec(0)

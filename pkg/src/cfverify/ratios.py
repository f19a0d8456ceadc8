"""Haar averages of characteristic-polynomial products over O(N).

Plain products map to an integral over skew complex matrices, reciprocal
products to one over symmetric matrices on the bounded domain Zbar Z < 1.
Both sides carry an overall constant that we fit by weighted least
squares across several parameter sets and then test for consistency.
The supersymmetric ratio (equally many factors upstairs and downstairs)
has a closed evaluation as a sum over sign configurations, implemented
here for direct comparison against Monte Carlo.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ContractError, DomainError, PoleError, StableRangeError
from .haar import GroupSpec, McEstimate, haar_expect_charpoly
from .quadrature import DomainQuadrature, Rule, gauss_jacobi, gauss_legendre

_POLE_EPS = 1e-12


# ---------------------------------------------------------------------------
# quadrature sides

def _stacked_block_det(alpha: np.ndarray, Z: np.ndarray,
                       Zbar: np.ndarray) -> np.ndarray:
    """Det of [[alpha, Z], [Zbar, alpha]] on a stack of matrices."""
    k, n, _ = Z.shape
    big = np.zeros((k, 2 * n, 2 * n), dtype=complex)
    big[:, :n, :n] = np.diag(alpha)
    big[:, n:, n:] = np.diag(alpha)
    big[:, :n, n:] = Z
    big[:, n:, :n] = Zbar
    return np.linalg.det(big)


def _half_power(det: np.ndarray, colors: int) -> np.ndarray:
    """det^(N/2) via the principal root for odd N.

    Valid while the determinant stays off the negative real axis; the
    parameter ranges exercised here keep it there.
    """
    if colors % 2 == 0:
        return det ** (colors // 2)
    return np.sqrt(det) ** colors


def _skew_rhs(colors: int, n: int, alphas: Sequence[complex],
              quad: DomainQuadrature) -> complex:
    """Unnormalized plain-product side: skew n x n matrices, n <= 2."""
    alpha = np.asarray(alphas, dtype=complex)
    if n == 1:
        # skew 1x1 vanishes identically; the domain is a single point
        return complex(_half_power(np.atleast_1d(alpha[0] ** 2), colors)[0])

    def integrand(t: np.ndarray, theta: np.ndarray) -> np.ndarray:
        z = np.sqrt(t) * np.exp(1j * theta)
        k = z.size
        Z = np.zeros((k, 2, 2), dtype=complex)
        Z[:, 0, 1] = z
        Z[:, 1, 0] = -z
        Zbar = Z.conj()
        mid = _stacked_block_det(np.ones(2), Z, Zbar)
        top = _stacked_block_det(alpha, Z, Zbar)
        # jacobian d^2z = dt dtheta / 2
        return 0.5 * mid ** (-n + 1) * _half_power(mid, -colors) \
            * _half_power(top, colors)

    return quad.integrate(integrand)


def _symmetric_rhs(colors: int, alphas: Sequence[complex],
                   quad: DomainQuadrature) -> complex:
    """Unnormalized reciprocal-product side: symmetric 1 x 1 on the disk."""
    alpha = complex(alphas[0])
    rule = quad.rules[0]
    # edge weight already absorbed into gauss-jacobi nodes; divide it out
    aj, bj = rule.params if rule.kind == "gj" else (0.0, 0.0)

    def integrand(t: np.ndarray, theta: np.ndarray) -> np.ndarray:
        z = np.sqrt(t) * np.exp(1j * theta)
        k = z.size
        Z = z.reshape(k, 1, 1)
        Zbar = Z.conj()
        mid = _stacked_block_det(np.ones(1), Z, Zbar)
        top = _stacked_block_det(np.array([alpha]), Z, Zbar)
        comp = np.ones(k)
        if aj:
            comp = comp * (1.0 - t) ** (-aj)
        if bj:
            comp = comp * t ** (-bj)
        return 0.5 * comp * mid ** (-2) * _half_power(mid, colors) \
            * _half_power(top, -colors)

    return quad.integrate(integrand)


def _symmetric_pair_rhs(colors: int, alpha: complex,
                        radial: int) -> complex:
    """Unnormalized reciprocal-product side for an equal pair.

    With both parameters equal the symmetric 2x2 integrand depends only
    on the squared singular values (t1, t2), and the flat measure pushes
    forward to (pi^3 / 2) |t1 - t2| dt1 dt2 on the unit square.  The
    modulus kink sits on the diagonal, so the square is folded onto the
    triangle t2 < t1 via t2 = t1 v, which restores smooth convergence.
    """
    t, wt = gauss_jacobi(radial, 0.5 * colors - 3.0, 0.0)
    v, wv = gauss_legendre(radial)
    t1 = t[:, None]
    t2 = t1 * v[None, :]
    w = wt[:, None] * wv[None, :]
    a2 = alpha * alpha
    # t1 leg: gauss-jacobi absorbs (1 - t1)^(N/2 - 3); t2 leg explicit
    vals = t1 * (t1 - t2) * (1.0 - t2) ** (0.5 * colors - 3.0) \
        * _half_power(a2 - t1, -colors) * _half_power(a2 - t2, -colors)
    return complex(np.pi ** 3 * np.sum(w * vals))


def _ratio_quadrature(mode: str, colors: int, n: int, radial: int,
                      angular: int) -> DomainQuadrature:
    if mode == "FF":
        if n == 1:
            return DomainQuadrature(())
        return DomainQuadrature((Rule("halfline", radial),
                                 Rule("angle", angular)))
    if n == 2:
        # pair side builds its own folded grid
        return DomainQuadrature(())
    if colors % 2:
        return DomainQuadrature((Rule("gj", radial, (-0.5, 0.0)),
                                 Rule("angle", angular)))
    return DomainQuadrature((Rule("gl", radial), Rule("angle", angular)))


# ---------------------------------------------------------------------------
# report

@dataclass(frozen=True)
class DetIdentityReport:
    """Fit of the overall constant and residuals across parameter sets."""

    mode: str
    colors: int
    n: int
    alpha_sets: tuple
    lhs: tuple
    rhs: tuple
    fitted_c: complex
    residual_sigmas: tuple

    def passed(self, nsigma: float = 3.0) -> bool:
        return all(r <= nsigma for r in self.residual_sigmas)


def verify_det_identities(colors: int, n: int,
                          alpha_sets: Sequence[Sequence[complex]],
                          mode: str = "FF", samples: int = 20000,
                          seed: int = 0, radial: int = 64,
                          angular: int = 16) -> DetIdentityReport:
    """Compare group averages of determinant products with their integrals.

    The constant relating the two sides is fitted across all parameter
    sets by stderr-weighted least squares, so at least two sets with
    distinct values are needed for a meaningful residual test.
    """
    if mode not in ("FF", "BB"):
        raise ContractError(f"mode must be FF or BB, not {mode!r}")
    if mode == "FF" and n not in (1, 2):
        raise ContractError(
            "plain products are implemented for one or two factors; wider "
            "skew blocks need a non-product domain"
        )
    if mode == "BB":
        if n not in (1, 2):
            raise ContractError(
                "reciprocal products are implemented for one factor or an "
                "equal pair"
            )
        if colors < 2 * n + 1:
            raise StableRangeError(
                f"reciprocal products need N >= {2 * n + 1}, got {colors}"
            )
        for alphas in alpha_sets:
            if any(abs(a) <= 1.0 for a in alphas):
                raise DomainError("reciprocal factors need |alpha| > 1")
            if n == 2 and alphas[0] != alphas[1]:
                raise ContractError(
                    "reciprocal pairs are implemented for equal parameters; "
                    "distinct pairs need a non-product domain"
                )
    sets = tuple(tuple(complex(a) for a in alphas) for alphas in alpha_sets)
    for alphas in sets:
        if len(alphas) != n:
            raise ContractError("each parameter set must provide n values")

    spec = GroupSpec("O", colors)
    quad = _ratio_quadrature(mode, colors, n, radial, angular)
    lhs = []
    rhs = []
    for k, alphas in enumerate(sets):
        num, den = (alphas, ()) if mode == "FF" else ((), alphas)
        lhs.append(haar_expect_charpoly(spec, num, den, samples, seed + k))
        if mode == "FF":
            rhs.append(_skew_rhs(colors, n, alphas, quad))
        elif n == 1:
            rhs.append(_symmetric_rhs(colors, alphas, quad))
        else:
            rhs.append(_symmetric_pair_rhs(colors, alphas[0], radial))

    weights = np.array([1.0 / (est.stderr ** 2 + 1e-18) for est in lhs])
    lvals = np.array([est.value for est in lhs])
    rvals = np.array(rhs)
    fitted = complex(np.sum(weights * lvals * rvals.conj())
                     / np.sum(weights * np.abs(rvals) ** 2))
    sigmas = tuple(
        float(abs(lvals[k] - fitted * rvals[k]) / (lhs[k].stderr + 1e-12))
        for k in range(len(sets))
    )
    return DetIdentityReport(mode, colors, n, sets, tuple(lhs), tuple(rhs),
                             fitted, sigmas)


# ---------------------------------------------------------------------------
# the closed ratio formula

def _saddle_signs(n1: int) -> list:
    out = []
    for signs in itertools.product((1, -1), repeat=n1):
        if (n1 - sum(signs)) % 4 == 0:
            out.append(signs)
    return out


def weyl_ratio_formula(alphas: Sequence[complex], n0: int, n1: int,
                       colors: int) -> complex:
    """Closed sign-configuration sum for the supersymmetric ratio.

    `alphas` lists the n0 reciprocal (denominator) parameters first,
    then the n1 plain ones.  Valid for every positive color count; the
    denominator parameters must lie outside the unit circle.
    """
    if n0 != n1:
        raise ContractError("the closed form needs equal flavor counts")
    if len(alphas) != n0 + n1:
        raise ContractError(f"expected {n0 + n1} parameters")
    if colors < 1:
        raise ContractError("color count must be positive")
    a = [complex(x) for x in alphas]
    if len({x for x in a}) != len(a):
        raise ContractError("parameters must be pairwise distinct")
    bos = a[:n0]
    ferm = a[n0:]
    if any(abs(x) <= 1.0 for x in bos):
        raise DomainError("denominator parameters need |alpha| > 1")

    # Each term is evaluated with the inverse powers of the plain
    # parameters cleared analytically: per term they collect into a
    # nonnegative integer exponent, so av = 0 is a valid input even
    # though the raw factors would be singular there.
    total = 0.0 + 0.0j
    for signs in _saddle_signs(n1):
        powers = [colors if s == 1 else 0 for s in signs]
        polynum = 1.0 + 0.0j
        polyden = 1.0 + 0.0j
        for am in bos:
            for j, (av, s) in enumerate(zip(ferm, signs)):
                if s == 1:
                    polynum *= am * av - 1.0
                    powers[j] -= 1
                else:
                    polynum *= am - av
                polyden *= am
        for i, am in enumerate(bos):
            for amp in bos[i:]:
                polyden *= 1.0 - 1.0 / (am * amp)
        for j, (av, sj) in enumerate(zip(ferm, signs)):
            for j2, (av2, s2) in enumerate(zip(ferm, signs)):
                if j2 <= j:
                    continue
                if sj == 1 and s2 == 1:
                    polyden *= av * av2 - 1.0
                    powers[j] += 1
                    powers[j2] += 1
                elif sj == 1:
                    polyden *= av - av2
                    powers[j] += 1
                elif s2 == 1:
                    polyden *= av2 - av
                    powers[j2] += 1
                else:
                    polyden *= 1.0 - av * av2
        if abs(polyden) < _POLE_EPS:
            raise PoleError(
                "fluctuation factor degenerates for this parameter set"
            )
        mono = math.prod(av ** p for av, p in zip(ferm, powers))
        total += mono * polynum / polyden
    scale = math.prod(am ** -colors for am in bos)
    return complex(scale * total)

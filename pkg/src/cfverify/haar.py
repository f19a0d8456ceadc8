"""Haar sampling on O(N), U(N), Sp(N) and Monte Carlo moment estimation.

Sampling uses QR of Ginibre matrices with the usual phase/sign fix so the
result is exactly Haar, not just approximately invariant.  Sp(N) (compact
symplectic, N even) is sampled by quaternionic Gram-Schmidt in the complex
2x2-block representation; the symplectic form is eps = [[0, 1], [-1, 0]] in
N/2 blocks.

Reproducibility contract: every batch of 64 samples owns a counter-based
(Philox) stream keyed by (seed, batch index), so estimates depend only on
(spec, samples, seed) and never on how batches are grouped into workers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import iv

from .exceptions import ContractError, DomainError

BATCH = 64

FAMILY_GROUPS = {"BD": "O", "C": "Sp", "A": "U"}


@dataclass(frozen=True)
class GroupSpec:
    """Classical compact group: family in {"O", "U", "Sp"}, degree n."""

    family: str
    n: int

    def __post_init__(self):
        if self.family not in ("O", "U", "Sp"):
            raise ContractError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ContractError("degree must be positive")
        if self.family == "Sp" and self.n % 2:
            raise ContractError("Sp requires even degree")


def worker_count() -> int:
    """Worker hint from CFVERIFY_WORKERS; affects chunking only, not values."""
    try:
        return max(1, int(os.environ.get("CFVERIFY_WORKERS", "1")))
    except ValueError:
        return 1


def batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(batch_index,))
    return np.random.Generator(np.random.Philox(ss))


def symplectic_form(n: int) -> np.ndarray:
    half = n // 2
    eps = np.zeros((n, n))
    eps[:half, half:] = np.eye(half)
    eps[half:, :half] = -np.eye(half)
    return eps


def _haar_orthogonal(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    a = rng.normal(size=(size, n, n))
    q, r = np.linalg.qr(a)
    d = np.sign(np.einsum("sii->si", r))
    d[d == 0] = 1.0
    q = q * d[:, None, :]
    # QR already covers both components; composing with a reflection under a
    # fair coin keeps the det = -1 component explicitly exercised
    coin = rng.random(size) < 0.5
    q[coin, :, 0] *= -1.0
    return q


def _haar_unitary(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    a = rng.normal(size=(size, n, n)) + 1j * rng.normal(size=(size, n, n))
    q, r = np.linalg.qr(a)
    d = np.einsum("sii->si", r).copy()
    d[d == 0] = 1.0
    q = q * (d / np.abs(d))[:, None, :]
    return q


def _haar_symplectic(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    half = n // 2
    A = rng.normal(size=(size, half, half)) + 1j * rng.normal(size=(size, half, half))
    B = rng.normal(size=(size, half, half)) + 1j * rng.normal(size=(size, half, half))
    G = np.empty((size, n, n), dtype=complex)
    G[:, :half, :half] = A
    G[:, :half, half:] = B
    G[:, half:, :half] = -B.conj()
    G[:, half:, half:] = A.conj()
    Q = np.empty_like(G)
    for k in range(half):
        v = G[:, :, k].copy()
        for j in range(k):
            for col in (j, half + j):
                u = Q[:, :, col]
                v -= u * np.einsum("si,si->s", u.conj(), v)[:, None]
        v /= np.linalg.norm(v, axis=1)[:, None]
        Q[:, :, k] = v
        # quaternionic partner column: (x; y) -> (-conj(y); conj(x))
        Q[:, :half, half + k] = -v[:, half:].conj()
        Q[:, half:, half + k] = v[:, :half].conj()
    return Q


_SAMPLERS = {"O": _haar_orthogonal, "U": _haar_unitary, "Sp": _haar_symplectic}


def sample_haar(spec: GroupSpec, size: int, rng: np.random.Generator | int) -> np.ndarray:
    """Stack of `size` Haar samples, shape (size, n, n)."""
    if isinstance(rng, (int, np.integer)):
        rng = batch_rng(int(rng), 0)
    return _SAMPLERS[spec.family](rng, spec.n, size)


def sample_haar_batched(spec: GroupSpec, samples: int, seed: int) -> np.ndarray:
    """Haar samples drawn batch-by-batch from per-batch Philox streams."""
    nbatch = -(-samples // BATCH)
    outs = []
    for b in range(nbatch):
        take = min(BATCH, samples - b * BATCH)
        outs.append(sample_haar(spec, take, batch_rng(seed, b)))
    return np.concatenate(outs, axis=0)


# -- estimates ----------------------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    value: complex
    stderr: float
    samples: int
    seed: int

    def consistent_with(self, reference: complex, nsigma: float = 3.0,
                        floor: float = 1e-12) -> bool:
        return abs(self.value - reference) <= nsigma * self.stderr + floor


def jackknife_mean(values: np.ndarray, seed: int) -> McEstimate:
    """Mean with leave-one-batch-out jackknife stderr (batches of BATCH)."""
    n = len(values)
    nbatch = n // BATCH
    if nbatch < 2:
        return McEstimate(complex(np.mean(values)), float("inf"), n, seed)
    trimmed = values[: nbatch * BATCH].reshape(nbatch, BATCH)
    batch_means = trimmed.mean(axis=1)
    total = batch_means.mean()
    loo = (total * nbatch - batch_means) / (nbatch - 1)
    var = (nbatch - 1) / nbatch * np.sum(np.abs(loo - loo.mean()) ** 2)
    return McEstimate(complex(np.mean(values)), float(np.sqrt(var)), n, seed)


@dataclass(frozen=True)
class MomentSpec:
    """Product of matrix elements: factors (inverse?, row, col) of g or g^-1."""

    factors: tuple[tuple[bool, int, int], ...]

    def evaluate(self, g: np.ndarray) -> np.ndarray:
        val = np.ones(g.shape[0], dtype=complex)
        for inverse, i, j in self.factors:
            val = val * (g[:, j, i].conj() if inverse else g[:, i, j])
        return val

    def inverse_balance(self) -> int:
        return sum(1 if inv else -1 for inv, _, _ in self.factors)


def estimate_moment(spec: GroupSpec, moment: MomentSpec, samples: int,
                    seed: int) -> McEstimate:
    for _, i, j in moment.factors:
        if not (0 <= i < spec.n and 0 <= j < spec.n):
            raise ContractError("moment index outside matrix range")
    g = sample_haar_batched(spec, samples, seed)
    return jackknife_mean(moment.evaluate(g), seed)


def haar_expect_charpoly(spec: GroupSpec, num_alphas: Sequence[complex],
                         den_alphas: Sequence[complex], samples: int,
                         seed: int) -> McEstimate:
    """MC estimate of E[prod det(a_num - g) / prod det(a_den - g)]."""
    for a in den_alphas:
        if abs(a) <= 1.0:
            raise DomainError("denominator parameters must satisfy |alpha| > 1")
    g = sample_haar_batched(spec, samples, seed)
    lam = np.linalg.eigvals(g)
    val = np.ones(g.shape[0], dtype=complex)
    for a in num_alphas:
        val = val * np.prod(a - lam, axis=1)
    for a in den_alphas:
        val = val / np.prod(a - lam, axis=1)
    return jackknife_mean(val, seed)


# -- second moments (declared reference values) -------------------------------


def second_moment(spec: GroupSpec, i: int, k: int, j: int, l: int) -> complex:
    """E[g^i_k g^j_l] for O/Sp, E[g^i_j (g^-1)^k_l] for U."""
    n = spec.n
    if spec.family == "O":
        return (1.0 / n) * (i == j) * (l == k)
    if spec.family == "Sp":
        eps = symplectic_form(n)
        return (1.0 / n) * eps[i, j] * eps[k, l]
    return (1.0 / n) * (i == l) * (k == j)


# -- scalar phase integral ----------------------------------------------------


@dataclass(frozen=True)
class BesselPhaseResult:
    quadrature: complex
    series: complex
    i0_sqrt_form: complex
    i0_product_form: complex

    @property
    def sqrt_form_matches(self) -> bool:
        return abs(self.quadrature - self.i0_sqrt_form) <= 1e-9 * max(
            1.0, abs(self.quadrature))

    @property
    def product_form_matches(self) -> bool:
        return abs(self.quadrature - self.i0_product_form) <= 1e-9 * max(
            1.0, abs(self.quadrature))


def bessel_phase_integral(X: complex, Y: complex, zeta: complex,
                          nodes: int = 0) -> BesselPhaseResult:
    """(1/2pi) int dth exp(e^{i th} zeta X + e^{-i th} conj(zeta) Y).

    Returns the trapezoid quadrature, the double-factorial series
    sum_m (zeta X)^m (conj(zeta) Y)^m / (m!)^2, and both candidate Bessel
    closed forms so callers can report which one the integral actually equals.
    """
    zx = zeta * X
    zy = np.conj(zeta) * Y
    if not nodes:
        nodes = int(max(48, 6 * np.ceil(abs(zx) + abs(zy)) + 16))
    th = 2 * np.pi * np.arange(nodes) / nodes
    quad = np.mean(np.exp(np.exp(1j * th) * zx + np.exp(-1j * th) * zy))
    term, acc = 1.0 + 0j, 1.0 + 0j
    for m in range(1, 300):
        term = term * zx * zy / (m * m)
        acc += term
        if abs(term) < 1e-17 * max(1.0, abs(acc)):
            break
    i0_sqrt = complex(iv(0, 2.0 * np.sqrt(complex(zx * zy))))
    i0_prod = complex(iv(0, abs(zeta) ** 2 * X * Y))
    return BesselPhaseResult(complex(quad), complex(acc), i0_sqrt, i0_prod)


__all__ = [
    "BATCH",
    "FAMILY_GROUPS",
    "GroupSpec",
    "McEstimate",
    "MomentSpec",
    "BesselPhaseResult",
    "batch_rng",
    "bessel_phase_integral",
    "estimate_moment",
    "haar_expect_charpoly",
    "jackknife_mean",
    "sample_haar",
    "sample_haar_batched",
    "second_moment",
    "symplectic_form",
    "worker_count",
]

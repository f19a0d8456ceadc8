"""Tensor-product quadrature with absorbed weight functions.

Each coordinate carries its own one-dimensional rule.  Singular edge
factors such as (1-t)**a with a > -1 are absorbed into Gauss-Jacobi
weights, so integrands stay bounded on the node set.  Half-line
coordinates are folded to (0, 1) through t = u/(1-u).  Periodic angles
use the trapezoid rule, which is spectrally accurate for smooth
periodic integrands.

Refinement doubles every per-coordinate node count.  A sequence of
refined estimates feeds the divergence detector: repeated growth by
more than GROWTH_FACTOR flags a power divergence, and monotone growth
with non-decaying increments flags a logarithmic one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi

from .exceptions import ContractError

GROWTH_FACTOR = 1.5
DECAY_FACTOR = 0.6
DEFAULT_CHUNK = 4096


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def gauss_jacobi(n: int, alpha: float, beta: float, a: float = 0.0,
                 b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights absorbing (b-x)**alpha * (x-a)**beta."""
    if alpha <= -1 or beta <= -1:
        raise ContractError("jacobi exponents must exceed -1")
    x, w = roots_jacobi(n, alpha, beta)
    h = 0.5 * (b - a)
    # the absorbed weight rescales by h**(alpha+beta) on top of the jacobian
    return a + h * (x + 1.0), w * h ** (alpha + beta + 1.0)


def half_line(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(0, inf) folded to the unit interval via t = u/(1-u)."""
    u, w = gauss_legendre(n)
    return u / (1.0 - u), w / (1.0 - u) ** 2


def angle(n: int) -> tuple[np.ndarray, np.ndarray]:
    th = 2.0 * np.pi * np.arange(n) / n
    return th, np.full(n, 2.0 * np.pi / n)


_BUILDERS: dict[str, Callable[..., tuple[np.ndarray, np.ndarray]]] = {
    "gl": gauss_legendre,
    "gj": gauss_jacobi,
    "halfline": half_line,
    "angle": angle,
}


@dataclass(frozen=True)
class Rule:
    """One-dimensional rule spec; params feed the named builder."""

    kind: str
    n: int
    params: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in _BUILDERS:
            raise ContractError(f"unknown rule kind {self.kind!r}")
        if self.n < 1:
            raise ContractError("rule needs at least one node")

    def build(self) -> tuple[np.ndarray, np.ndarray]:
        return _BUILDERS[self.kind](self.n, *self.params)

    def doubled(self) -> "Rule":
        return replace(self, n=2 * self.n)


@dataclass(frozen=True)
class DomainQuadrature:
    """Tensor product of one-dimensional rules."""

    rules: tuple[Rule, ...]

    @property
    def size(self) -> int:
        total = 1
        for r in self.rules:
            total *= r.n
        return total

    def grid(self) -> tuple[list[np.ndarray], np.ndarray]:
        """Flattened coordinate arrays and the combined weight array."""
        built = [r.build() for r in self.rules]
        mesh = np.meshgrid(*(x for x, _ in built), indexing="ij")
        weight = np.ones(())
        for _, w in built:
            weight = np.multiply.outer(weight, w)
        return [m.ravel() for m in mesh], weight.ravel()

    def integrate(self, f: Callable[..., np.ndarray],
                  chunk: int = DEFAULT_CHUNK) -> complex:
        """Sum w_k f(coords_k) over the grid, evaluating f in chunks.

        f receives one flat array per coordinate and must return values
        of the same length.  Any weight factors not absorbed by the
        rules (jacobians, measure densities) belong inside f.
        """
        coords, w = self.grid()
        total = 0.0 + 0.0j
        for lo in range(0, w.size, chunk):
            hi = min(lo + chunk, w.size)
            vals = np.asarray(f(*(c[lo:hi] for c in coords)))
            total += np.sum(w[lo:hi] * vals)
        return complex(total)

    def refined(self) -> "DomainQuadrature":
        return DomainQuadrature(tuple(r.doubled() for r in self.rules))


def looks_divergent(values: Sequence[complex]) -> bool:
    """Heuristic divergence verdict from a refinement sequence.

    Power divergences blow up node by node; logarithmic ones grow
    monotonically with increments that refuse to decay.  Tiny
    increments near machine precision never trigger the second test.
    """
    a = np.abs(np.asarray(values, dtype=complex))
    if len(a) < 3:
        return False
    grown = sum(a[k + 1] > GROWTH_FACTOR * max(a[k], 1e-300)
                for k in range(len(a) - 1))
    if grown >= 2:
        return True
    d = np.diff(a)
    scale = max(1.0, a[-1])
    if np.all(d > 0) and d[-1] > 1e-10 * scale and d[-1] >= DECAY_FACTOR * d[-2]:
        return True
    return False


@dataclass(frozen=True)
class RefinementResult:
    values: tuple[complex, ...]
    divergent: bool

    @property
    def value(self) -> complex:
        return self.values[-1]

    @property
    def error(self) -> float:
        if len(self.values) < 2:
            return float("inf")
        return abs(self.values[-1] - self.values[-2])


def refine_estimate(f: Callable[..., np.ndarray], quad: DomainQuadrature,
                    doublings: int = 3, chunk: int = DEFAULT_CHUNK) -> RefinementResult:
    """Evaluate at `doublings`+1 refinement levels and attach a verdict."""
    vals = []
    q = quad
    for _ in range(doublings + 1):
        vals.append(q.integrate(f, chunk=chunk))
        q = q.refined()
    return RefinementResult(tuple(vals), looks_divergent(vals))

"""Finite-dimensional Grassmann algebra and supermatrices.

A :class:`GrassmannPoly` stores terms sparsely as ``{bitmask: coefficient}``,
bit ``i`` of the mask marking generator ``xi_i``.  Masks represent products in
ascending generator order, so the sign of a product is the parity of the
crossing number of the two masks (Koszul rule).

Coefficients are deliberately untyped: Python/NumPy scalars for numerics,
``fractions.Fraction`` for exact algebra-law tests, or NumPy arrays carrying
one algebra element per quadrature node / Monte Carlo sample.  All operations
only use ``+``, ``*``, ``/`` and ``**`` on coefficients, which every supported
type provides.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import ContractError, ParityError, SingularityError

MAX_GENERATORS = 63


def _popcount(mask: int) -> int:
    return mask.bit_count()


def merge_sign(a: int, b: int) -> int:
    """Sign (+1/-1) of sorting the concatenation of ordered masks a, b."""
    swaps = 0
    a >>= 1
    while a:
        swaps += _popcount(a & b)
        a >>= 1
    return -1 if swaps & 1 else 1


def _is_zero(c) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    zero = getattr(c, "is_zero", None)
    if zero is not None:
        return zero()
    return c == 0


def _is_invertible(c) -> bool:
    if isinstance(c, np.ndarray):
        return bool(np.all(c != 0))
    zero = getattr(c, "is_zero", None)
    if zero is not None:
        return not zero()
    return c != 0


def _score(c) -> float:
    # pivot ranking only; any nonzero pivot is algebraically valid
    if isinstance(c, np.ndarray):
        return float(np.mean(np.abs(c)))
    try:
        return abs(complex(c))
    except TypeError:
        return 1.0


class GrassmannPoly:
    """Element of the Grassmann algebra on ``gens`` generators."""

    __slots__ = ("gens", "terms")

    def __init__(self, gens: int, terms: dict | None = None):
        if not 0 <= gens <= MAX_GENERATORS:
            raise ContractError(f"generator count {gens} outside [0, {MAX_GENERATORS}]")
        self.gens = gens
        self.terms = {} if terms is None else terms

    # -- constructors -------------------------------------------------------

    @classmethod
    def scalar(cls, gens: int, value) -> "GrassmannPoly":
        if _is_zero(value):
            return cls(gens)
        return cls(gens, {0: value})

    @classmethod
    def generator(cls, gens: int, index: int, coeff=1.0) -> "GrassmannPoly":
        if not 0 <= index < gens:
            raise ContractError(f"generator index {index} outside range({gens})")
        return cls(gens, {1 << index: coeff})

    # -- inspection ---------------------------------------------------------

    def scalar_part(self):
        return self.terms.get(0, 0.0)

    def coeff(self, indices: int | Iterable[int]):
        if isinstance(indices, int):
            mask = indices
        else:
            mask = 0
            for i in indices:
                bit = 1 << i
                if mask & bit:
                    raise ContractError("repeated generator index")
                mask |= bit
        return self.terms.get(mask, 0.0)

    def degree(self) -> int:
        return max((_popcount(m) for m in self.terms), default=0)

    def is_even(self) -> bool:
        return all(_popcount(m) % 2 == 0 for m in self.terms)

    def nilpotent_part(self) -> "GrassmannPoly":
        return GrassmannPoly(self.gens, {m: c for m, c in self.terms.items() if m})

    def map_coeffs(self, fn: Callable) -> "GrassmannPoly":
        out = {}
        for m, c in self.terms.items():
            v = fn(c)
            if not _is_zero(v):
                out[m] = v
        return GrassmannPoly(self.gens, out)

    def chop(self, tol: float = 0.0) -> "GrassmannPoly":
        out = {}
        for m, c in self.terms.items():
            if isinstance(c, np.ndarray):
                c = np.where(np.abs(c) <= tol, 0.0, c)
                if np.any(c):
                    out[m] = c
            elif _score(c) > tol:
                out[m] = c
        return GrassmannPoly(self.gens, out)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        if not self.terms:
            return "GrassmannPoly(0)"
        bits = []
        for m in sorted(self.terms):
            gens = "".join(f"x{i}" for i in range(self.gens) if m >> i & 1) or "1"
            bits.append(f"{self.terms[m]!r}*{gens}")
        return "GrassmannPoly(" + " + ".join(bits) + ")"

    # -- ring operations ----------------------------------------------------

    def _check_compatible(self, other: "GrassmannPoly") -> None:
        if self.gens != other.gens:
            raise ContractError(
                f"generator count mismatch: {self.gens} vs {other.gens}"
            )

    def __add__(self, other):
        if not isinstance(other, GrassmannPoly):
            return self + GrassmannPoly.scalar(self.gens, other)
        self._check_compatible(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m)
            v = c if v is None else v + c
            if _is_zero(v):
                out.pop(m, None)
            else:
                out[m] = v
        return GrassmannPoly(self.gens, out)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannPoly(self.gens, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, GrassmannPoly) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GrassmannPoly):
            if _is_zero(other):
                return GrassmannPoly(self.gens)
            return GrassmannPoly(
                self.gens, {m: c * other for m, c in self.terms.items()}
            )
        self._check_compatible(other)
        out: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                if ma & mb:
                    continue
                m = ma | mb
                c = ca * cb
                if merge_sign(ma, mb) < 0:
                    c = -c
                v = out.get(m)
                v = c if v is None else v + c
                if _is_zero(v):
                    out.pop(m, None)
                else:
                    out[m] = v
        return GrassmannPoly(self.gens, out)

    def __rmul__(self, other):
        # scalars commute with everything; GrassmannPoly * GrassmannPoly
        # never reaches here
        return self * other

    def __truediv__(self, other):
        if isinstance(other, GrassmannPoly):
            return self * ginv(other)
        return GrassmannPoly(self.gens, {m: c / other for m, c in self.terms.items()})

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise ContractError("use gpow for non-integer exponents")
        if n < 0:
            return ginv(self) ** (-n)
        acc = GrassmannPoly.scalar(self.gens, 1)
        for _ in range(n):
            acc = acc * self
        return acc


# -- calculus ----------------------------------------------------------------


def left_derivative(p: GrassmannPoly, index: int) -> GrassmannPoly:
    """Left derivative d/dxi_index."""
    if not 0 <= index < p.gens:
        raise ContractError(f"generator index {index} outside range({p.gens})")
    bit = 1 << index
    below = bit - 1
    out = {}
    for m, c in p.terms.items():
        if not m & bit:
            continue
        if _popcount(m & below) & 1:
            c = -c
        out[m ^ bit] = c
    return GrassmannPoly(p.gens, out)


@dataclass(frozen=True)
class BerezinSpec:
    """Generator indices to integrate, applied first-to-last."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ContractError("Berezin indices must be distinct")


def berezin(p: GrassmannPoly, spec: BerezinSpec | Sequence[int]) -> GrassmannPoly:
    """Iterated left-derivative Berezin integral over the listed generators."""
    indices = spec.indices if isinstance(spec, BerezinSpec) else tuple(spec)
    if len(set(indices)) != len(indices):
        raise ContractError("Berezin indices must be distinct")
    for i in indices:
        p = left_derivative(p, i)
    return p


def _reciprocal_int(k: int, sample) -> object:
    if isinstance(sample, Fraction):
        return Fraction(1, k)
    return 1.0 / k


def gexp(p: GrassmannPoly) -> GrassmannPoly:
    """exp(p) for even p: exp(scalar) times the terminating nilpotent series."""
    if not p.is_even():
        raise ParityError("gexp requires even parity in every term")
    c = p.scalar_part()
    n = p.nilpotent_part()
    acc = GrassmannPoly.scalar(p.gens, 1)
    term = GrassmannPoly.scalar(p.gens, 1)
    for k in range(1, p.gens + 1):
        term = term * n
        if not term.terms:
            break
        term = term.map_coeffs(lambda v, k=k: v / k)
        acc = acc + term
    if not _is_zero(c):
        acc = acc * np.exp(c)
    return acc


def ginv(p: GrassmannPoly) -> GrassmannPoly:
    """Inverse via the terminating Neumann series around the scalar part."""
    c = p.scalar_part()
    if not _is_invertible(c):
        raise SingularityError("scalar part not invertible")
    cinv = c ** -1 if isinstance(c, Fraction) else 1.0 / c
    q = p.nilpotent_part() * cinv
    acc = GrassmannPoly.scalar(p.gens, 1)
    term = GrassmannPoly.scalar(p.gens, 1)
    for _ in range(p.gens):
        term = -(term * q)
        if not term.terms:
            break
        acc = acc + term
    return acc * cinv


def gpow(p: GrassmannPoly, a) -> GrassmannPoly:
    """p**a for even p with invertible scalar part (binomial series in the
    nilpotent part; terminates by nilpotency).  Integer a >= 0 stays exact."""
    if isinstance(a, int) and a >= 0:
        return p ** a
    if not p.is_even():
        raise ParityError("gpow requires even parity")
    c = p.scalar_part()
    if not _is_invertible(c):
        raise SingularityError("scalar part not invertible")
    cinv = c ** -1 if isinstance(c, Fraction) else 1.0 / c
    q = p.nilpotent_part() * cinv
    acc = GrassmannPoly.scalar(p.gens, 1)
    term = GrassmannPoly.scalar(p.gens, 1)
    coef = 1.0
    for k in range(1, p.gens + 1):
        coef = coef * (a - k + 1) / k
        term = term * q
        if not term.terms or coef == 0:
            break
        acc = acc + term * coef
    return acc * (c ** a)


# -- supermatrices -----------------------------------------------------------


class SuperMatrix:
    """(p|q) supermatrix with GrassmannPoly entries.

    Rows/columns 0..p-1 are even (boson) indices, p..p+q-1 odd (fermion).
    The parity contract (diagonal blocks even, off-diagonal odd) is checked
    on request via :meth:`parity_ok`, not on every construction.
    """

    __slots__ = ("p", "q", "rows")

    def __init__(self, p: int, q: int, rows: list):
        d = p + q
        if len(rows) != d or any(len(r) != d for r in rows):
            raise ContractError(f"expected {d}x{d} entries")
        self.p = p
        self.q = q
        self.rows = rows

    @property
    def dim(self) -> int:
        return self.p + self.q

    @property
    def gens(self) -> int:
        return self.rows[0][0].gens if self.dim else 0

    @classmethod
    def identity(cls, p: int, q: int, gens: int) -> "SuperMatrix":
        one = GrassmannPoly.scalar(gens, 1)
        zero = GrassmannPoly(gens)
        return cls(
            p, q,
            [[one if i == j else zero for j in range(p + q)] for i in range(p + q)],
        )

    def parity_ok(self) -> bool:
        for i, row in enumerate(self.rows):
            for j, e in enumerate(row):
                want = ((i < self.p) != (j < self.p))
                for m in e.terms:
                    if (_popcount(m) & 1) != want:
                        return False
        return True

    def __add__(self, other: "SuperMatrix") -> "SuperMatrix":
        self._check(other)
        return SuperMatrix(
            self.p, self.q,
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)],
        )

    def __sub__(self, other: "SuperMatrix") -> "SuperMatrix":
        self._check(other)
        return SuperMatrix(
            self.p, self.q,
            [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)],
        )

    def __neg__(self) -> "SuperMatrix":
        return SuperMatrix(self.p, self.q, [[-a for a in r] for r in self.rows])

    def _check(self, other: "SuperMatrix") -> None:
        if (self.p, self.q) != (other.p, other.q):
            raise ContractError("supermatrix shape mismatch")

    def __matmul__(self, other: "SuperMatrix") -> "SuperMatrix":
        self._check(other)
        d = self.dim
        rows = []
        for i in range(d):
            row = []
            for j in range(d):
                acc = GrassmannPoly(self.gens)
                for k in range(d):
                    a = self.rows[i][k]
                    b = other.rows[k][j]
                    if a.terms and b.terms:
                        acc = acc + a * b
                row.append(acc)
            rows.append(row)
        return SuperMatrix(self.p, self.q, rows)

    def scale(self, factor) -> "SuperMatrix":
        return SuperMatrix(self.p, self.q, [[a * factor for a in r] for r in self.rows])

    def blocks(self):
        """(A, B, C, D) with A the even-even and D the odd-odd block."""
        p = self.p
        A = [r[:p] for r in self.rows[:p]]
        B = [r[p:] for r in self.rows[:p]]
        C = [r[:p] for r in self.rows[p:]]
        D = [r[p:] for r in self.rows[p:]]
        return A, B, C, D


def supertrace(M: SuperMatrix) -> GrassmannPoly:
    """STr M: sum of even diagonal entries minus sum of odd diagonal entries."""
    acc = GrassmannPoly(M.gens)
    for i in range(M.dim):
        e = M.rows[i][i]
        acc = acc + (e if i < M.p else -e)
    return acc


def _mat_inv(A: list, gens: int) -> list:
    """Gauss-Jordan inverse; pivots need invertible scalar parts."""
    n = len(A)
    work = [list(row) for row in A]
    one = GrassmannPoly.scalar(gens, 1)
    inv = [[one if i == j else GrassmannPoly(gens) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = None
        best = -1.0
        for r in range(col, n):
            c = work[r][col].scalar_part()
            if _is_invertible(c):
                s = _score(c)
                if s > best:
                    best, pivot = s, r
        if pivot is None:
            raise SingularityError("matrix numeric part is singular")
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            inv[col], inv[pivot] = inv[pivot], inv[col]
        pinv = ginv(work[col][col])
        work[col] = [pinv * e for e in work[col]]
        inv[col] = [pinv * e for e in inv[col]]
        for r in range(n):
            if r == col:
                continue
            f = work[r][col]
            if not f.terms:
                continue
            work[r] = [a - f * b for a, b in zip(work[r], work[col])]
            inv[r] = [a - f * b for a, b in zip(inv[r], inv[col])]
    return inv


def _det_comm(A: list, gens: int) -> GrassmannPoly:
    """Determinant of a square matrix with commuting (even) entries."""
    n = len(A)
    if n == 0:
        return GrassmannPoly.scalar(gens, 1)
    work = [list(row) for row in A]
    sign = 1
    det = GrassmannPoly.scalar(gens, 1)
    for col in range(n):
        pivot = None
        best = -1.0
        for r in range(col, n):
            c = work[r][col].scalar_part()
            if _is_invertible(c):
                s = _score(c)
                if s > best:
                    best, pivot = s, r
        if pivot is None:
            # numeric part singular in every candidate row: determinant may
            # still be a pure nilpotent; fall back to Laplace expansion
            return _det_laplace(work, gens)
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            sign = -sign
        pinv = ginv(work[col][col])
        det = det * work[col][col]
        for r in range(col + 1, n):
            f = work[r][col] * pinv
            if not f.terms:
                continue
            work[r] = [a - f * b for a, b in zip(work[r], work[col])]
    if sign < 0:
        det = -det
    return det


def _det_laplace(A: list, gens: int) -> GrassmannPoly:
    n = len(A)
    if n == 1:
        return A[0][0]
    acc = GrassmannPoly(gens)
    for j in range(n):
        e = A[0][j]
        if not e.terms:
            continue
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = e * _det_laplace(minor, gens)
        acc = acc + (term if j % 2 == 0 else -term)
    return acc


def smat_inv(M: SuperMatrix) -> SuperMatrix:
    """Supermatrix inverse (Gauss-Jordan with Neumann-series entry inverses)."""
    return SuperMatrix(M.p, M.q, _mat_inv(M.rows, M.gens))


def sdet(M: SuperMatrix) -> GrassmannPoly:
    """Superdeterminant Det(A - B D^-1 C) / Det(D)."""
    gens = M.gens
    A, B, C, D = M.blocks()
    if M.q == 0:
        return _det_comm(A, gens)
    Dinv = _mat_inv(D, gens)
    detD = _det_comm(D, gens)
    if M.p == 0:
        return ginv(detD)
    schur = [
        [
            A[i][j]
            - sum(
                (B[i][k] * Dinv[k][l] * C[l][j] for k in range(M.q) for l in range(M.q)),
                GrassmannPoly(gens),
            )
            for j in range(M.p)
        ]
        for i in range(M.p)
    ]
    return _det_comm(schur, gens) * ginv(detD)


def grassmann_close(a: GrassmannPoly, b: GrassmannPoly, tol: float = 1e-12) -> bool:
    """True when all coefficients of a - b are below tol in magnitude."""
    d = a - b
    for c in d.terms.values():
        if isinstance(c, np.ndarray):
            if np.max(np.abs(c)) > tol:
                return False
        elif _score(c) > tol:
            return False
    return True


__all__ = [
    "MAX_GENERATORS",
    "GrassmannPoly",
    "SuperMatrix",
    "BerezinSpec",
    "berezin",
    "left_derivative",
    "merge_sign",
    "gexp",
    "ginv",
    "gpow",
    "sdet",
    "smat_inv",
    "supertrace",
    "grassmann_close",
]

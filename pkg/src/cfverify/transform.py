"""Two-sided evaluation of the color-flavor transformations.

Each identity equates a Haar average over a classical group (O, Sp or U
in the color space) of an exponentiated bilinear source with a flavor
supermatrix integral.  The group side is estimated by Monte Carlo, with
the exponential expanded exactly in the Grassmann algebra of the outer
fields.  The supermatrix side combines numerical quadrature over the
even coordinates of Z with symbolic Berezin integration over its odd
entries, so both sides come out as polynomials over the same outer
generators and can be compared coefficient by coefficient.

Supported flavor ranks are those whose bounded (boson-boson) block has
at most one independent complex coordinate; that keeps the integration
domain a product of disks, half-lines and circles.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .algebra import GrassmannPoly, SuperMatrix, berezin, gexp, gpow, sdet
from .exceptions import (
    ContractError,
    DivergenceError,
    DomainError,
    SingularityError,
    StableRangeError,
)
from .haar import (
    BATCH,
    FAMILY_GROUPS,
    GroupSpec,
    batch_rng,
    sample_haar,
    symplectic_form,
)
from .quadrature import DomainQuadrature, Rule, refine_estimate

# Block symmetry of the independent even entries: boson-boson, fermion-fermion.
_BLOCK_KIND = {"BD": ("sym", "skew"), "C": ("skew", "sym"), "A": ("gen", "gen")}

# Exchange sign s in Z^{mu nu} = s (-1)^(|mu||nu|+|mu|+|nu|) Z^{nu mu}.
_EXCH = {"BD": 1.0, "C": -1.0}

_SIGMA_FLOOR = 1e-9


@dataclass(frozen=True)
class FlavorSignature:
    """Family, color count and flavor content of one transformation.

    n0 counts bosonic flavors, n1 fermionic ones.  Family A carries a
    second (retarded) set of fields with the same counts by
    construction; unequal counts are out of scope.
    """

    family: str
    colors: int
    n0: int
    n1: int

    def __post_init__(self) -> None:
        if self.family not in FAMILY_GROUPS:
            raise ContractError(f"unknown family {self.family!r}")
        if self.colors < 1:
            raise ContractError("need at least one color")
        if self.n0 < 0 or self.n1 < 0 or self.n0 + self.n1 == 0:
            raise ContractError("flavor counts must be nonnegative and not all zero")
        if self.family == "C" and self.colors % 2:
            raise ContractError("family C runs over Sp(N) with even N")

    @property
    def flavors(self) -> int:
        return self.n0 + self.n1

    @property
    def group(self) -> GroupSpec:
        return GroupSpec(FAMILY_GROUPS[self.family], self.colors)

    def parity(self, mu: int) -> int:
        return 0 if mu < self.n0 else 1

    @property
    def weight_power(self):
        """Exponent on SDet(1 - Zt Z): kernel power plus measure power."""
        if self.family == "A":
            power = self.colors - 2 * self.n0 + 2 * self.n1
        elif self.family == "BD":
            power = self.colors / 2 - self.n0 + self.n1 - 1
        else:
            power = self.colors / 2 - self.n0 + self.n1 + 1
        if float(power).is_integer():
            return int(power)
        return power

    @property
    def stable_min(self) -> int:
        """Smallest color count for which the identity is claimed to hold."""
        if self.family == "BD":
            return 2 * self.n0 + 1
        if self.family == "C":
            return max(2, 2 * self.n0 - 2)
        return max(1, 2 * self.n0)

    @property
    def in_stable_range(self) -> bool:
        return self.colors >= self.stable_min


# ---------------------------------------------------------------------------
# outer fields

def _as_grid(values, shape) -> tuple:
    arr = np.asarray(values, dtype=complex).reshape(shape)
    return tuple(tuple(row) for row in arr)


@dataclass(frozen=True)
class OuterFieldAssignment:
    """Fixed values for bosonic field components; fermionic ones are gens.

    Bosonic flavors carry plain complex numbers, one per color.  Fermionic
    flavors occupy a fixed block of generator indices below every Z
    generator, so left- and right-hand side polynomials share masks.
    The `zero` assignment turns every source off, fermionic ones
    included, which reduces both sides to their normalized masses.
    """

    sig: FlavorSignature
    psi: tuple = ()
    psi_bar: tuple = ()
    phi: tuple = ()
    phi_bar: tuple = ()
    fermions_on: bool = True

    def __post_init__(self) -> None:
        shape = (self.sig.n0, self.sig.colors)
        for name in ("psi", "psi_bar"):
            object.__setattr__(self, name, _as_grid(getattr(self, name), shape))
        retarded = shape if self.sig.family == "A" else (0, self.sig.colors)
        for name in ("phi", "phi_bar"):
            object.__setattr__(self, name, _as_grid(getattr(self, name), retarded))

    @classmethod
    def zero(cls, sig: FlavorSignature) -> "OuterFieldAssignment":
        shape = (sig.n0, sig.colors)
        z = np.zeros(shape)
        if sig.family == "A":
            return cls(sig, z, z, z, z, fermions_on=False)
        return cls(sig, z, z, fermions_on=False)

    @classmethod
    def sample(cls, sig: FlavorSignature, seed: int = 7,
               cap: float = 0.5) -> "OuterFieldAssignment":
        """Generic bosonic values with magnitudes in [0.3 cap, cap]."""
        rng = np.random.default_rng(seed)
        sets = 4 if sig.family == "A" else 2

        def draw():
            r = rng.uniform(0.3 * cap, cap, size=(sig.n0, sig.colors))
            return r * np.exp(2j * np.pi * rng.random((sig.n0, sig.colors)))

        return cls(sig, *(draw() for _ in range(sets)))

    @property
    def ferm_block(self) -> int:
        return self.sig.n1 * self.sig.colors

    @property
    def outer_gens(self) -> int:
        sets = 4 if self.sig.family == "A" else 2
        return sets * self.ferm_block

    def _component(self, gens: int, values, block: int, mu: int, i: int):
        if mu < self.sig.n0:
            return GrassmannPoly.scalar(gens, values[mu][i])
        if not self.fermions_on:
            return GrassmannPoly(gens)
        k = mu - self.sig.n0
        return GrassmannPoly.generator(gens, block + k * self.sig.colors + i)

    def psi_poly(self, gens: int, mu: int, i: int) -> GrassmannPoly:
        return self._component(gens, self.psi, 0, mu, i)

    def psi_bar_poly(self, gens: int, mu: int, i: int) -> GrassmannPoly:
        return self._component(gens, self.psi_bar, self.ferm_block, mu, i)

    def phi_poly(self, gens: int, nu: int, i: int) -> GrassmannPoly:
        return self._component(gens, self.phi, 2 * self.ferm_block, nu, i)

    def phi_bar_poly(self, gens: int, nu: int, i: int) -> GrassmannPoly:
        return self._component(gens, self.phi_bar, 3 * self.ferm_block, nu, i)


# ---------------------------------------------------------------------------
# Z layout: even coordinates, odd generator pairs, Berezin order

@dataclass(frozen=True)
class ZLayout:
    """Independent coordinates of the Z supermatrix for one signature."""

    sig: FlavorSignature
    even_entries: tuple      # ((mu, nu), bounded) per independent even entry
    odd_pairs: tuple         # (mu, nu) with one bosonic and one fermionic index

    @property
    def z_gens(self) -> int:
        return 2 * len(self.odd_pairs)

    def z_gen(self, pair_index: int, zbase: int) -> int:
        return zbase + 2 * pair_index

    def zt_gen(self, pair_index: int, zbase: int) -> int:
        return zbase + 2 * pair_index + 1

    def berezin_order(self, zbase: int) -> tuple:
        """Generator order realizing the flat Berezin form.

        Pairs with a bosonic row index differentiate by Zt first, pairs
        with a fermionic row index by Z first.  The orientation is
        calibrated so that the unit-mass integrals come out positive and
        the measured second moments match their declared values.
        """
        seq = []
        for p, (mu, _nu) in enumerate(self.odd_pairs):
            if self.sig.parity(mu) == 0:
                seq += [self.zt_gen(p, zbase), self.z_gen(p, zbase)]
            else:
                seq += [self.z_gen(p, zbase), self.zt_gen(p, zbase)]
        return tuple(seq)


def z_layout(sig: FlavorSignature) -> ZLayout:
    bb_kind, ff_kind = _BLOCK_KIND[sig.family]
    even = []
    for kind, lo, hi, bounded in (
        (bb_kind, 0, sig.n0, True),
        (ff_kind, sig.n0, sig.flavors, False),
    ):
        for r in range(lo, hi):
            for c in range(lo, hi):
                keep = (
                    c >= r if kind == "sym"
                    else c > r if kind == "skew"
                    else True
                )
                if keep:
                    even.append(((r, c), bounded))
    n_bounded = sum(1 for _, b in even if b)
    if n_bounded > 1:
        raise ContractError(
            "bounded block has more than one independent coordinate; "
            "the product-domain quadrature scheme does not cover this rank"
        )
    pairs = [(mu, nu) for mu in range(sig.n0) for nu in range(sig.n0, sig.flavors)]
    if sig.family == "A":
        pairs += [(nu, mu) for mu in range(sig.n0) for nu in range(sig.n0, sig.flavors)]
    return ZLayout(sig, tuple(even), tuple(pairs))


def default_quadrature(sig: FlavorSignature, radial: int | None = None,
                       angular: int | None = None) -> DomainQuadrature:
    """Radius-squared x angle rules for every independent even coordinate.

    Bounded coordinates get Gauss-Legendre on [0, 1), switching to
    Gauss-Jacobi with the (1-t)^(-1/2) edge weight absorbed when the
    half-integer SDet power makes the integrand non-polynomial (odd N in
    families BD/C).  Unbounded coordinates run through t = u/(1-u).
    Node counts shrink with the number of coordinates to keep the tensor
    grid affordable; both rule types converge spectrally here.
    """
    lay = z_layout(sig)
    n_even = len(lay.even_entries)
    if radial is None:
        radial = {0: 1, 1: 24, 2: 10}.get(n_even, 6)
    if angular is None:
        angular = {0: 1, 1: 24, 2: 8}.get(n_even, 6)
    half_power = sig.family != "A" and sig.colors % 2 == 1
    rules = []
    for _entry, bounded in lay.even_entries:
        if not bounded:
            rules.append(Rule("halfline", radial))
        elif half_power:
            rules.append(Rule("gj", radial, (-0.5, 0.0)))
        else:
            rules.append(Rule("gl", radial))
        rules.append(Rule("angle", angular))
    return DomainQuadrature(tuple(rules))


def _check_quad(lay: ZLayout, quad: DomainQuadrature) -> None:
    if len(quad.rules) != 2 * len(lay.even_entries):
        raise ContractError("quadrature rule count does not match the Z layout")
    for k in range(0, len(quad.rules), 2):
        if quad.rules[k].kind not in ("gl", "gj", "halfline"):
            raise ContractError("even slots of the rule list must be radial")
        if quad.rules[k + 1].kind != "angle":
            raise ContractError("odd slots of the rule list must be angular")


def _node_multiplier(rules: Sequence[Rule], coords: Sequence[np.ndarray],
                     n: int) -> np.ndarray:
    """Jacobian d^2 z = dt dtheta / 2 and compensation of absorbed weights."""
    mult = np.full(n, 1.0)
    for k in range(0, len(rules), 2):
        mult = mult * 0.5
        if rules[k].kind == "gj":
            alpha, beta = rules[k].params
            t = coords[k]
            if alpha:
                mult = mult * (1.0 - t) ** (-alpha)
            if beta:
                mult = mult * t ** (-beta)
    return mult


# ---------------------------------------------------------------------------
# assembling Z and the source exponents

def assemble_z(sig: FlavorSignature, gens: int,
               even_z: Mapping, even_zt: Mapping,
               odd_z: Mapping, odd_zt: Mapping) -> tuple:
    """Z and Zt supermatrices from their independent entries.

    even_z / even_zt map (mu, nu) flavor entries to coefficient polys;
    odd_z / odd_zt map pair indices.  Dependent entries follow from the
    family's exchange symmetry, so callers supply the Hermitian-adjoint
    data for even_zt explicitly while the odd mirrors are filled here.
    """
    n = sig.flavors
    zero = GrassmannPoly(gens)
    Z = [[zero for _ in range(n)] for _ in range(n)]
    Zt = [[zero for _ in range(n)] for _ in range(n)]
    bb_kind, ff_kind = _BLOCK_KIND[sig.family]
    for (r, c), val in even_z.items():
        kind = bb_kind if r < sig.n0 else ff_kind
        Z[r][c] = Z[r][c] + val
        if kind == "sym" and r != c:
            Z[c][r] = Z[c][r] + val
        elif kind == "skew":
            Z[c][r] = Z[c][r] - val
    for (r, c), val in even_zt.items():
        kind = bb_kind if r < sig.n0 else ff_kind
        Zt[r][c] = Zt[r][c] + val
        if kind == "sym" and r != c:
            Zt[c][r] = Zt[c][r] + val
        elif kind == "skew":
            Zt[c][r] = Zt[c][r] - val
    lay = z_layout(sig)
    exch = _EXCH.get(sig.family, 0.0)
    for p, (mu, nu) in enumerate(lay.odd_pairs):
        zp = odd_z[p]
        ztp = odd_zt[p]
        Z[mu][nu] = Z[mu][nu] + zp
        Zt[nu][mu] = Zt[nu][mu] + ztp
        if sig.family != "A":
            # mixed parity: Z^{nu mu} = -s Z^{mu nu}, Zt_{mu nu} = s Zt_{nu mu}
            Z[nu][mu] = Z[nu][mu] - exch * zp
            Zt[mu][nu] = Zt[mu][nu] + exch * ztp
    return (SuperMatrix(sig.n0, sig.n1, Z), SuperMatrix(sig.n0, sig.n1, Zt))


@dataclass(frozen=True)
class ZPoint:
    """Numeric values for the independent even entries of Z.

    Odd blocks stay symbolic; `matrices` places them as generators at
    `zbase` and completes Zt by the block Hermiticity rules, so one
    point (or one batch of points, with array values) yields the full
    supermatrix pair.
    """

    sig: FlavorSignature
    values: tuple

    def __post_init__(self) -> None:
        lay = z_layout(self.sig)
        if len(self.values) != len(lay.even_entries):
            raise ContractError(
                f"expected {len(lay.even_entries)} even values, "
                f"got {len(self.values)}"
            )
        for v, (_entry, bounded) in zip(self.values, lay.even_entries):
            if bounded and not np.all(np.abs(v) < 1.0):
                raise DomainError("boson-boson entries must lie inside the disk")

    def matrices(self, gens: int, zbase: int) -> tuple:
        """Z, Zt with odd entries as generators starting at `zbase`."""
        lay = z_layout(self.sig)
        even_z = {}
        even_zt = {}
        # Zt_BB = +(Z_BB)^dagger, Zt_FF = -(Z_FF)^dagger.
        for v, ((r, c), _b) in zip(self.values, lay.even_entries):
            sign = 1.0 if r < self.sig.n0 else -1.0
            even_z[(r, c)] = GrassmannPoly.scalar(gens, v)
            even_zt[(c, r)] = GrassmannPoly.scalar(gens, sign * np.conj(v))
        odd_z = {p: GrassmannPoly.generator(gens, lay.z_gen(p, zbase))
                 for p in range(len(lay.odd_pairs))}
        odd_zt = {p: GrassmannPoly.generator(gens, lay.zt_gen(p, zbase))
                  for p in range(len(lay.odd_pairs))}
        return assemble_z(self.sig, gens, even_z, even_zt, odd_z, odd_zt)


def _numeric_z(sig: FlavorSignature, lay: ZLayout, gens: int, zbase: int,
               coords: Sequence[np.ndarray]) -> tuple:
    """Z, Zt on a batch of quadrature nodes; odd entries are generators."""
    values = []
    for k in range(len(lay.even_entries)):
        t, th = coords[2 * k], coords[2 * k + 1]
        values.append(np.sqrt(t) * np.exp(1j * th))
    return ZPoint(sig, tuple(values)).matrices(gens, zbase)


def rhs_exponent(sig: FlavorSignature, fields: OuterFieldAssignment,
                 Z: SuperMatrix, Zt: SuperMatrix,
                 color: int | None = None) -> GrassmannPoly:
    """Flavor-coupled source exponent of the supermatrix side.

    Restricting to a single color via `color` exposes the factorization
    of the integrand over colors.
    """
    gens = Z.gens
    N = sig.colors
    colors = range(N) if color is None else (color,)
    out = GrassmannPoly(gens)
    if sig.family == "A":
        for j in colors:
            for nu in range(sig.flavors):
                sgn = -1.0 if sig.parity(nu) else 1.0
                for mu in range(sig.flavors):
                    out = out + (fields.phi_poly(gens, nu, j) * sgn
                                 * Zt.rows[nu][mu] * fields.psi_poly(gens, mu, j))
        for i in colors:
            for mu in range(sig.flavors):
                for nu in range(sig.flavors):
                    out = out + (fields.psi_bar_poly(gens, mu, i)
                                 * Z.rows[mu][nu] * fields.phi_bar_poly(gens, nu, i))
        return out
    if sig.family == "BD":
        form_up = form_lo = np.eye(N)
    else:
        form_lo = symplectic_form(N)
        form_up = -form_lo
    for i in colors:
        for k in range(N):
            if form_up[i, k] == 0.0:
                continue
            for nu in range(sig.flavors):
                sgn = 0.5 * form_up[i, k] * (-1.0 if sig.parity(nu) else 1.0)
                for mu in range(sig.flavors):
                    out = out + (fields.psi_poly(gens, nu, k) * sgn
                                 * Zt.rows[nu][mu] * fields.psi_poly(gens, mu, i))
    for j in colors:
        for l in range(N):
            if form_lo[l, j] == 0.0:
                continue
            for mu in range(sig.flavors):
                for nu in range(sig.flavors):
                    out = out + (fields.psi_bar_poly(gens, mu, j)
                                 * Z.rows[mu][nu]
                                 * fields.psi_bar_poly(gens, nu, l)
                                 * (0.5 * form_lo[l, j]))
    return out


def lhs_exponent(sig: FlavorSignature, fields: OuterFieldAssignment,
                 g: np.ndarray) -> GrassmannPoly:
    """Color-coupled source exponent for a batch of group elements."""
    gens = fields.outer_gens
    out = GrassmannPoly(gens)
    N = sig.colors
    if sig.family == "A":
        for i in range(N):
            for j in range(N):
                pa = GrassmannPoly(gens)
                for mu in range(sig.flavors):
                    pa = pa + (fields.psi_bar_poly(gens, mu, i)
                               * fields.psi_poly(gens, mu, j))
                # (g^-1)^j_i = conj(g^i_j) for unitary g
                out = out + pa * np.conj(g[:, i, j])
                pr = GrassmannPoly(gens)
                for nu in range(sig.flavors):
                    sgn = -1.0 if sig.parity(nu) else 1.0
                    pr = pr + (fields.phi_poly(gens, nu, j) * sgn
                               * fields.phi_bar_poly(gens, nu, i))
                out = out + pr * g[:, i, j]
        return out
    for i in range(N):
        for j in range(N):
            p = GrassmannPoly(gens)
            for mu in range(sig.flavors):
                p = p + (fields.psi_bar_poly(gens, mu, j)
                         * fields.psi_poly(gens, mu, i))
            out = out + p * g[:, i, j]
    return out


# ---------------------------------------------------------------------------
# left-hand side: Haar Monte Carlo

@dataclass(frozen=True)
class McPoly:
    """Monte Carlo estimate of a Grassmann polynomial."""

    poly: GrassmannPoly
    stderr: Mapping[int, float]
    samples: int
    seed: int

    def sigma(self, mask: int) -> float:
        return self.stderr.get(mask, 0.0)


def _lhs_batch(sig: FlavorSignature, fields: OuterFieldAssignment,
               seed: int, index: int) -> dict:
    g = sample_haar(sig.group, BATCH, batch_rng(seed, index))
    om = gexp(lhs_exponent(sig, fields, g))
    means = {}
    for mask, c in om.terms.items():
        arr = np.broadcast_to(np.asarray(c), (BATCH,))
        means[mask] = complex(arr.mean())
    return means


def lhs_cf(sig: FlavorSignature, fields: OuterFieldAssignment,
           samples: int = 20000, seed: int = 0, workers: int = 1) -> McPoly:
    """Group average of the exponentiated color-coupled source.

    The sample count is rounded up to whole batches of 64 so the stream
    layout matches `sample_haar_batched`.  Standard errors come from the
    spread of per-batch means.
    """
    nbatch = max(2, -(-samples // BATCH))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_lhs_batch, [sig] * nbatch, [fields] * nbatch,
                                 [seed] * nbatch, range(nbatch)))
    else:
        rows = [_lhs_batch(sig, fields, seed, b) for b in range(nbatch)]
    table: dict[int, np.ndarray] = {}
    for b, row in enumerate(rows):
        for mask, value in row.items():
            table.setdefault(mask, np.zeros(nbatch, dtype=complex))[b] = value
    terms = {}
    stderr = {}
    scale = math.sqrt(nbatch)
    for mask, vals in table.items():
        terms[mask] = complex(vals.mean())
        sr = float(np.std(vals.real, ddof=1))
        si = float(np.std(vals.imag, ddof=1))
        stderr[mask] = math.hypot(sr, si) / scale
    poly = GrassmannPoly(fields.outer_gens, terms).chop(0.0)
    return McPoly(poly, stderr, nbatch * BATCH, seed)


# ---------------------------------------------------------------------------
# right-hand side: quadrature x Berezin

@dataclass(frozen=True)
class QuadPoly:
    """Quadrature evaluation of the supermatrix side, self-normalized."""

    poly: GrassmannPoly
    delta: Mapping[int, float]
    mass: complex
    nodes: int

    def refinement_error(self, mask: int) -> float:
        return self.delta.get(mask, 0.0)


def _rhs_sums(sig: FlavorSignature, fields: OuterFieldAssignment | None,
              quad: DomainQuadrature, chunk: int) -> tuple:
    lay = z_layout(sig)
    _check_quad(lay, quad)
    outer = fields.outer_gens if fields is not None else 0
    gens = outer + lay.z_gens
    order = lay.berezin_order(outer)
    power = sig.weight_power
    coords, w = quad.grid()
    acc: dict[int, complex] = {}
    for lo in range(0, w.size, chunk):
        hi = min(lo + chunk, w.size)
        sl = [c[lo:hi] for c in coords]
        n = hi - lo
        Z, Zt = _numeric_z(sig, lay, gens, outer, sl)
        weight = gpow(sdet(SuperMatrix.identity(sig.n0, sig.n1, gens) - Zt @ Z),
                      power)
        if fields is not None:
            weight = weight * gexp(rhs_exponent(sig, fields, Z, Zt))
        reduced = berezin(weight, order)
        wm = w[lo:hi] * _node_multiplier(quad.rules, sl, n)
        for mask, c in reduced.terms.items():
            if mask >> outer:
                raise ContractError("Berezin left a stray Z generator")
            arr = np.broadcast_to(np.asarray(c), (n,))
            acc[mask] = acc.get(mask, 0.0) + complex(np.sum(wm * arr))
    return acc, gens


def rhs_cf(sig: FlavorSignature, fields: OuterFieldAssignment,
           quad: DomainQuadrature | None = None, *, allow_unstable: bool = False,
           refine: bool = True, chunk: int = 512) -> QuadPoly:
    """Supermatrix integral of the flavor-coupled source, as a polynomial.

    The result is normalized by the unit-mass integral evaluated on the
    same grid, which also removes any overall orientation convention of
    the flat Berezin form.  With `refine` the node counts are doubled
    once and the first pass is kept as an error estimate.
    """
    if not sig.in_stable_range and not allow_unstable:
        raise StableRangeError(
            f"{sig.family} needs N >= {sig.stable_min}, got {sig.colors}; "
            "pass allow_unstable=True to evaluate anyway"
        )
    if quad is None:
        quad = default_quadrature(sig)
    base, _ = _rhs_sums(sig, fields, quad, chunk)
    if abs(base.get(0, 0.0)) == 0.0:
        raise DivergenceError("unit-mass integral vanished on this grid")
    grids = [(base, quad.size)]
    if refine:
        fine_quad = quad.refined()
        fine, _ = _rhs_sums(sig, fields, fine_quad, chunk)
        grids.append((fine, fine_quad.size))
    acc, nodes = grids[-1]
    mass = acc[0]
    terms = {m: v / mass for m, v in acc.items()}
    delta = {}
    if refine:
        coarse, _ = grids[0]
        cmass = coarse[0]
        for mask in set(coarse) | set(acc):
            a = terms.get(mask, 0.0)
            b = coarse.get(mask, 0.0) / cmass
            delta[mask] = abs(a - b)
    poly = GrassmannPoly(fields.outer_gens, terms).chop(0.0)
    return QuadPoly(poly, delta, mass, nodes)


def normalization_constant(sig: FlavorSignature,
                           quad: DomainQuadrature | None = None,
                           doublings: int = 2, chunk: int = 512) -> float:
    """Reciprocal of the unit-mass integral of the invariant measure.

    Refines the grid `doublings` times; a growing sequence raises
    DivergenceError instead of returning a number.
    """
    lay = z_layout(sig)
    if quad is None:
        quad = default_quadrature(sig)
    _check_quad(lay, quad)
    order = lay.berezin_order(0)
    power = sig.weight_power
    rules = quad.rules

    def density(*coords: np.ndarray) -> np.ndarray:
        n = coords[0].size if coords else 1
        Z, Zt = _numeric_z(sig, lay, lay.z_gens, 0, coords)
        weight = gpow(
            sdet(SuperMatrix.identity(sig.n0, sig.n1, lay.z_gens) - Zt @ Z),
            power,
        )
        val = berezin(weight, order).scalar_part()
        return np.broadcast_to(np.asarray(val), (n,)) * _node_multiplier(
            rules, coords, n)

    result = refine_estimate(density, quad, doublings=doublings, chunk=chunk)
    if result.divergent:
        raise DivergenceError(
            f"unit-mass integral for {sig.family} N={sig.colors} "
            f"(n0={sig.n0}, n1={sig.n1}) grows under refinement: "
            + ", ".join(f"{abs(v):.6g}" for v in result.values)
        )
    mass = result.value
    if abs(mass.imag) > 1e-9 * max(1.0, abs(mass.real)):
        raise ContractError(f"unit mass came out non-real: {mass}")
    return 1.0 / mass.real


# ---------------------------------------------------------------------------
# comparison driver

@dataclass(frozen=True)
class CfComparison:
    """Coefficientwise comparison of the two sides of one transformation."""

    sig: FlavorSignature
    lhs: McPoly
    rhs: QuadPoly
    table: Mapping[int, tuple]
    worst_sigma: float
    worst_mask: int

    def passed(self, nsigma: float = 3.0) -> bool:
        return self.worst_sigma <= nsigma


def compare_cf(sig: FlavorSignature, fields: OuterFieldAssignment,
               samples: int = 20000, seed: int = 0,
               quad: DomainQuadrature | None = None,
               workers: int = 1, chunk: int = 512) -> CfComparison:
    """Evaluate both sides and report the largest deviation in sigma units.

    Both polynomials enter the table in self-normalized form: the group
    average is divided by its own unit coefficient, matching the
    convention of `rhs_cf`, so the constant relating the two integrals
    drops out of the comparison.  Standard errors on the left are
    propagated through that division.
    """
    left = lhs_cf(sig, fields, samples=samples, seed=seed, workers=workers)
    right = rhs_cf(sig, fields, quad=quad, chunk=chunk)
    base = complex(left.poly.coeff(0))
    base_sd = left.sigma(0)
    if abs(base) <= 3.0 * base_sd:
        raise SingularityError(
            "unit coefficient of the group average is consistent with zero"
        )
    table = {}
    worst = 0.0
    worst_mask = 0
    for mask in sorted(set(left.poly.terms) | set(right.poly.terms)):
        a = complex(left.poly.coeff(mask)) / base
        b = complex(right.poly.coeff(mask))
        sd = math.hypot(left.sigma(mask), abs(a) * base_sd) / abs(base)
        units = abs(a - b) / (sd + _SIGMA_FLOOR)
        table[mask] = (a, b, units)
        if units >= worst:
            worst = units
            worst_mask = mask
    return CfComparison(sig, left, right, table, worst, worst_mask)


# ---------------------------------------------------------------------------
# moment expansion check (family BD)

def declared_z_moment(sig: FlavorSignature, mu: int, nu: int,
                      lam: int, rho: int) -> complex:
    """Second moment <Z^{mu nu} Zt_{lam rho}> of the Gaussian model."""
    if sig.family != "BD":
        raise ContractError("declared moments implemented for family BD only")
    pm_nu = -1.0 if sig.parity(nu) else 1.0
    pm_mumu = -1.0 if sig.parity(mu) and sig.parity(nu) else 1.0
    first = 1.0 if (nu == lam and mu == rho) else 0.0
    second = 1.0 if (mu == lam and nu == rho) else 0.0
    return pm_nu * (first + pm_mumu * second) / sig.colors


def measured_z_moments(sig: FlavorSignature,
                       quad: DomainQuadrature | None = None,
                       chunk: int = 512) -> dict:
    """Second moments of the deformed measure for every index quadruple."""
    lay = z_layout(sig)
    if quad is None:
        quad = default_quadrature(sig)
    _check_quad(lay, quad)
    order = lay.berezin_order(0)
    power = sig.weight_power
    n = sig.flavors
    coords, w = quad.grid()
    acc = {key: 0.0 + 0.0j
           for key in ((mu, nu, lam, rho) for mu in range(n) for nu in range(n)
                       for lam in range(n) for rho in range(n))}
    mass = 0.0 + 0.0j
    for lo in range(0, w.size, chunk):
        hi = min(lo + chunk, w.size)
        sl = [c[lo:hi] for c in coords]
        m = hi - lo
        Z, Zt = _numeric_z(sig, lay, lay.z_gens, 0, sl)
        weight = gpow(
            sdet(SuperMatrix.identity(sig.n0, sig.n1, lay.z_gens) - Zt @ Z),
            power,
        )
        wm = w[lo:hi] * _node_multiplier(quad.rules, sl, m)
        base = berezin(weight, order).scalar_part()
        mass += complex(np.sum(wm * np.broadcast_to(np.asarray(base), (m,))))
        for key in acc:
            mu, nu, lam, rho = key
            ins = Z.rows[mu][nu] * Zt.rows[lam][rho]
            val = berezin(weight * ins, order).scalar_part()
            acc[key] += complex(np.sum(wm * np.broadcast_to(np.asarray(val), (m,))))
    return {key: v / mass for key, v in acc.items()}


@dataclass(frozen=True)
class MomentCheck:
    """Order-by-order agreement of the two source expansions."""

    sig: FlavorSignature
    order_zero: tuple
    term_diff: float
    group_term: GrassmannPoly
    model_term: GrassmannPoly
    moment_err: float

    def passed(self, tol: float = 1e-10) -> bool:
        return (self.order_zero == (1.0, 1.0) and self.term_diff <= tol
                and self.moment_err <= tol)


def _symbolic_z(sig: FlavorSignature, lay: ZLayout, outer: int) -> tuple:
    """Z, Zt with abstract entries: odd ones single gens, even ones gen pairs.

    Returns the matrices, the total gen count and a decoder mapping each
    entry's bit pattern back to its flavor indices.  Even entries are
    represented by two auxiliary generators so that all Koszul signs are
    tracked exactly; their squares vanish, which is consistent because
    squared entries only enter at the next order in 1/N.
    """
    specs = []
    for (r, c), _b in lay.even_entries:
        specs.append(("z", (r, c), 2))
    for mu, nu in lay.odd_pairs:
        specs.append(("z", (mu, nu), 1))
    for (r, c), _b in lay.even_entries:
        specs.append(("zt", (c, r), 2))
    for mu, nu in lay.odd_pairs:
        specs.append(("zt", (nu, mu), 1))
    gens = outer
    entries = []
    for role, idx, width in specs:
        entries.append((role, idx, gens, width))
        gens += width

    def make(role_want: str) -> dict:
        table = {}
        for role, idx, start, width in entries:
            if role != role_want:
                continue
            poly = GrassmannPoly.generator(gens, start)
            if width == 2:
                poly = poly * GrassmannPoly.generator(gens, start + 1)
            table[idx] = poly
        return table

    z_table = make("z")
    zt_table = make("zt")
    even_z = {idx: z_table[idx] for (idx, _b) in lay.even_entries}
    even_zt = {(c, r): zt_table[(c, r)] for ((r, c), _b) in lay.even_entries}
    odd_z = {p: z_table[pair] for p, pair in enumerate(lay.odd_pairs)}
    odd_zt = {p: zt_table[(pair[1], pair[0])]
              for p, pair in enumerate(lay.odd_pairs)}
    Z, Zt = assemble_z(sig, gens, even_z, even_zt, odd_z, odd_zt)
    decoder = {}
    for role, idx, start, width in entries:
        bits = ((1 << width) - 1) << start
        decoder[bits] = (role, idx)
    return Z, Zt, gens, decoder


def moment_expansion_check(sig: FlavorSignature,
                           fields: OuterFieldAssignment | None = None,
                           quad: DomainQuadrature | None = None,
                           chunk: int = 512) -> MomentCheck:
    """Cross-check the group expansion against the Gaussian Z model.

    The group route expands the Haar average to second order in the
    sources using the exact second moments; the model route expands the
    exponentiated Z couplings and substitutes the declared moments.
    Both are polynomials in the outer fields and must agree at orders
    1 and 1/N.  The declared moments themselves are also compared with
    the ones measured under the deformed integration measure.
    """
    if sig.family != "BD":
        raise ContractError("the expansion check is defined for family BD")
    if fields is None:
        fields = OuterFieldAssignment.sample(sig, seed=11)
    outer = fields.outer_gens
    N = sig.colors

    group = GrassmannPoly(outer)
    for i in range(N):
        for j in range(N):
            p = GrassmannPoly(outer)
            for mu in range(sig.flavors):
                p = p + (fields.psi_bar_poly(outer, mu, i)
                         * fields.psi_poly(outer, mu, j))
            group = group + p * p
    group = group / (2.0 * N)

    lay = z_layout(sig)
    Z, Zt, gens, decoder = _symbolic_z(sig, lay, outer)
    expanded = gexp(rhs_exponent(sig, fields, Z, Zt))
    model_zero = complex(expanded.terms.get(0, 0.0))
    model_terms: dict[int, complex] = {}
    zmask_all = ((1 << gens) - 1) ^ ((1 << outer) - 1)
    for mask, c in expanded.terms.items():
        zbits = mask & zmask_all
        if zbits == 0:
            continue  # handled by model_zero; sources always carry Z bits
        found = []
        rest = zbits
        for bits, tag in decoder.items():
            if rest & bits == bits:
                found.append(tag)
                rest ^= bits
        if rest or len(found) != 2:
            continue  # partial entries cannot occur; higher orders dropped
        (role_a, idx_a), (role_b, idx_b) = found
        if role_a == "z" and role_b == "zt":
            mu, nu = idx_a
            lam, rho = idx_b
        elif role_a == "zt" and role_b == "z":
            mu, nu = idx_b
            lam, rho = idx_a
        else:
            continue  # ZZ and ZtZt moments vanish
        moment = declared_z_moment(sig, mu, nu, lam, rho)
        if moment == 0.0:
            continue
        fmask = mask & ((1 << outer) - 1)
        model_terms[fmask] = model_terms.get(fmask, 0.0) + c * moment
    model = GrassmannPoly(outer, model_terms)

    diff = group - model
    term_diff = max((abs(complex(v)) for v in diff.terms.values()), default=0.0)

    measured = measured_z_moments(sig, quad=quad, chunk=chunk)
    moment_err = max(
        abs(v - declared_z_moment(sig, *key)) for key, v in measured.items()
    )
    zero = (1.0, model_zero.real if abs(model_zero.imag) < 1e-15 else model_zero)
    return MomentCheck(sig, zero, term_diff, group, model, moment_err)

"""Independent reference implementations used as test oracles.

Everything here is deliberately naive: terms as sorted index tuples, signs by
explicit inversion counting.  Slow but obviously correct, and structurally
unrelated to the bitmask implementation under test.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from cfverify.algebra import GrassmannPoly


def mask_to_tuple(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def tuple_to_mask(t) -> int:
    m = 0
    for i in t:
        m |= 1 << i
    return m


def ref_merge(a: tuple, b: tuple):
    """(sorted tuple, sign) of concatenating two ordered index tuples."""
    seq = list(a) + list(b)
    if len(set(seq)) != len(seq):
        return None, 0
    sign = 1
    # bubble sort, counting transpositions of adjacent anticommuting factors
    arr = seq[:]
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return tuple(arr), sign


def ref_mul(a: dict, b: dict) -> dict:
    """Multiply term dicts keyed by index tuples."""
    out: dict = {}
    for ta, ca in a.items():
        for tb, cb in b.items():
            t, s = ref_merge(ta, tb)
            if s == 0:
                continue
            out[t] = out.get(t, 0) + s * ca * cb
    return {t: c for t, c in out.items() if c != 0}


def ref_left_derivative(a: dict, index: int) -> dict:
    out: dict = {}
    for t, c in a.items():
        if index not in t:
            continue
        pos = t.index(index)
        rest = t[:pos] + t[pos + 1:]
        sign = -1 if pos % 2 else 1
        out[rest] = out.get(rest, 0) + sign * c
    return {t: c for t, c in out.items() if c != 0}


def ref_berezin_full(a: dict, indices) -> object:
    for i in indices:
        a = ref_left_derivative(a, i)
    return a.get((), 0)


def poly_to_dict(p: GrassmannPoly) -> dict:
    return {mask_to_tuple(m): c for m, c in p.terms.items()}


def dict_to_poly(d: dict, gens: int) -> GrassmannPoly:
    return GrassmannPoly(gens, {tuple_to_mask(t): c for t, c in d.items()})


def ref_exp(d: dict, gens: int) -> dict:
    """exp of an even term dict: exact scalar factor, terminating series."""
    import cmath

    c = d.get((), 0.0)
    nil = {t: v for t, v in d.items() if t}
    acc = {(): 1.0 + 0.0j}
    term = {(): 1.0 + 0.0j}
    for k in range(1, gens + 1):
        term = ref_mul(term, nil)
        if not term:
            break
        term = {t: v / k for t, v in term.items()}
        for t, v in term.items():
            acc[t] = acc.get(t, 0) + v
    scale = cmath.exp(c)
    return {t: v * scale for t, v in acc.items() if v != 0}


def o1_sign_average(fields) -> dict:
    """Group average for a single color by enumerating the two reflections.

    The degree-1 orthogonal group is {+1, -1}; the average of the
    exponentiated source is exact, no sampling involved.  Layout of the
    fermionic generators matches OuterFieldAssignment: the psi block
    sits below the psi-bar block.
    """
    sig = fields.sig
    assert sig.family == "BD" and sig.colors == 1
    gens = fields.outer_gens
    out: dict = {}
    for g in (1.0, -1.0):
        d: dict = {}
        for mu in range(sig.flavors):
            if mu < sig.n0:
                bar = {(): fields.psi_bar[mu][0]}
                val = {(): fields.psi[mu][0]}
            else:
                k = mu - sig.n0
                bar = {(sig.n1 + k,): 1.0}
                val = {(k,): 1.0}
            for t, v in ref_mul(bar, val).items():
                d[t] = d.get(t, 0) + g * v
        for t, v in ref_exp(d, gens).items():
            out[t] = out.get(t, 0) + 0.5 * v
    return {t: v for t, v in out.items() if abs(v) > 1e-15}


def o2_brute_degree4(fields, second_moment) -> dict:
    """Degree-4 moment expansion of the group average, term by term.

    Valid when the outer fields are all fermionic: the exponent X is
    then a sum of two-generator terms, odd group moments vanish under
    g -> -g, and X^3 and beyond exceed the generator budget.  So
    E[exp X] = 1 + sum E[g^i_j g^k_l] B_ji B_lk / 2 with
    B_ji = psi-bar^j psi^i.
    """
    sig = fields.sig
    assert sig.family == "BD" and sig.n0 == 0 and sig.n1 == 1
    N = sig.colors
    spec = sig.group

    def B(j: int, i: int) -> dict:
        return ref_mul({(N + j,): 1.0}, {(i,): 1.0})

    out: dict = {(): 1.0 + 0.0j}
    for i in range(N):
        for j in range(N):
            for k in range(N):
                for l in range(N):
                    m = second_moment(spec, i, j, k, l)
                    if m == 0:
                        continue
                    for t, v in ref_mul(B(j, i), B(l, k)).items():
                        out[t] = out.get(t, 0) + 0.5 * m * v
    return {t: v for t, v in out.items() if abs(v) > 1e-15}


def random_poly(rng: np.random.Generator, gens: int, nterms: int,
                exact: bool = False, even_only: bool = False) -> GrassmannPoly:
    terms: dict = {}
    for _ in range(nterms):
        m = int(rng.integers(0, 1 << gens))
        if even_only and bin(m).count("1") % 2:
            continue
        if exact:
            c = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 7)))
        else:
            c = complex(rng.normal(), rng.normal())
        if c != 0:
            terms[m] = terms.get(m, 0) + c
    return GrassmannPoly(gens, {m: c for m, c in terms.items() if c != 0})

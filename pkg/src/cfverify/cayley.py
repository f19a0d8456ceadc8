"""Resolvent identities and random-phase averages through Cayley transforms.

For a product of a fixed unitary with a random diagonal-phase unitary, the
resolvent of the product factorizes through the Cayley transforms of the two
factors.  This module verifies the factorization in its three arrangements,
the squared-element product form that separates the random factor from the
deterministic one, the closed-form Gaussian superintegral representation of
each factor, and the one-site kernels produced by averaging over the phases.
A tiny-scale Monte Carlo cross-check compares the fully averaged field
representation against direct averaging of the squared resolvent element.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .algebra import GrassmannPoly, berezin, gexp
from .exceptions import ContractError, DomainError, SingularityError
from .haar import BATCH, GroupSpec, McEstimate, batch_rng, jackknife_mean, sample_haar
from .quadrature import angle
from .verdicts import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    CheckRecord,
    VerificationReport,
    graded,
)

_UNITARY_TOL = 1e-12
_SWEEP_DIM_CAP = 64
_FIELD_CHUNK = 2048


def _square(g) -> np.ndarray:
    a = np.asarray(g, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError("expected a square matrix")
    return a


def _solve(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"{what} is singular") from exc


def cayley(g) -> np.ndarray:
    """Cayley transform (1 + g)(1 - g)^{-1} of a square matrix.

    For a strict contraction the result has positive-definite real part;
    for a unitary argument it is skew in the sense cayley(u^{-1}) =
    -cayley(u).  Raises a singularity error when 1 - g is not invertible.
    """
    a = _square(g)
    eye = np.eye(a.shape[0])
    return _solve(eye - a, eye + a, "1 - g")


# -- models --------------------------------------------------------------------


@dataclass(frozen=True)
class FloquetModel:
    """Unitary product model: fixed factor u_d, resolvent weights alpha, beta.

    alpha scales the fixed factor and beta the random diagonal one, so every
    operator whose Cayley transform enters a Gaussian representation stays a
    strict contraction.  The random factor itself is supplied separately as
    a phase realization.
    """

    u_d: np.ndarray
    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        u = _square(self.u_d)
        object.__setattr__(self, "u_d", u)
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        gram = u.conj().T @ u - np.eye(u.shape[0])
        if np.abs(gram).max() >= _UNITARY_TOL:
            raise ContractError("u_d is not unitary")
        if abs(self.alpha) >= 1.0 or abs(self.beta) >= 1.0:
            raise DomainError("resolvent weights must lie inside the unit disk")

    @property
    def dim(self) -> int:
        return self.u_d.shape[0]

    @property
    def zeta(self) -> complex:
        return self.alpha * self.beta


@dataclass(frozen=True)
class PhaseDisorder:
    """One realization of independent site angles, uniform on [0, 2*pi)."""

    angles: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.angles, dtype=float).reshape(-1) % (2.0 * np.pi)
        if a.size == 0:
            raise ContractError("need at least one site")
        object.__setattr__(self, "angles", a)

    @classmethod
    def sample(cls, sites: int, seed: int) -> "PhaseDisorder":
        """Draw the angles, one spawned stream per site."""
        streams = np.random.SeedSequence(seed).spawn(sites)
        draws = [
            np.random.Generator(np.random.Philox(s)).uniform(0.0, 2.0 * np.pi)
            for s in streams
        ]
        return cls(np.array(draws))

    @property
    def sites(self) -> int:
        return self.angles.size

    def unitary(self) -> np.ndarray:
        return np.diag(np.exp(1j * self.angles))


def _check_pair(dim: int, j: int, k: int) -> None:
    if not (0 <= j < dim and 0 <= k < dim):
        raise ContractError("basis indices outside the model dimension")
    if j == k:
        raise ContractError("the factorized element needs two distinct basis states")


def _check_sites(model: FloquetModel, phases: PhaseDisorder, j: int, k: int) -> None:
    if phases.sites != model.dim:
        raise ContractError("phase realization does not match the model dimension")
    _check_pair(model.dim, j, k)


# -- resolvent identities -------------------------------------------------------


def verify_resolvent_identities(g, h, tol: float = 1e-11) -> VerificationReport:
    """Three arrangements of (1 - gh)^{-1} through the averaged Cayley form.

    The product arrangement inverts only (A_g + A_h)/2 between the two
    one-factor resolvents; the anchored arrangements keep one one-factor
    resolvent outright and push the average into a correction term.
    Residuals are max-entry differences relative to the direct inverse.
    """
    a = _square(g)
    b = _square(h)
    if a.shape != b.shape:
        raise ContractError("g and h must share a dimension")
    eye = np.eye(a.shape[0])
    base = _solve(eye - a @ b, eye, "1 - gh")
    inv_g = _solve(eye - a, eye, "1 - g")
    inv_h = _solve(eye - b, eye, "1 - h")
    avg = 0.5 * (cayley(a) + cayley(b))
    inv_avg = _solve(avg, eye, "the averaged Cayley transform")
    forms = (
        ("product form", inv_h @ inv_avg @ inv_g),
        ("h-anchored form", inv_h - inv_h @ inv_avg @ b @ inv_h),
        ("g-anchored form", inv_g - a @ inv_g @ inv_avg @ inv_g),
    )
    scale = max(float(np.abs(base).max()), 1.0)
    recs = tuple(
        graded(label, float(np.abs(form - base).max()) / scale, 0.0, tol)
        for label, form in forms
    )
    return VerificationReport("resolvent identities", recs)


def _cayley_sums(model: FloquetModel, phases: PhaseDisorder):
    u_f = phases.unitary()
    ret = 0.5 * (cayley(model.alpha * model.u_d) + cayley(model.beta * u_f))
    adv = 0.5 * (
        cayley(np.conj(model.alpha) * model.u_d.conj().T)
        + cayley(np.conj(model.beta) * u_f.conj().T)
    )
    return ret, adv


def squared_resolvent(model: FloquetModel, phases: PhaseDisorder, j: int, k: int) -> float:
    """|<j| (1 - zeta u_d u_f)^{-1} |k>|^2 by a dense solve."""
    eye = np.eye(model.dim)
    a = eye - model.zeta * model.u_d @ phases.unitary()
    col = _solve(a, eye[:, k], "1 - zeta u_d u_f")
    return float(np.abs(col[j]) ** 2)


def greens_cayley_factorization(
    model: FloquetModel, phases: PhaseDisorder, j: int, k: int, tol: float = 1e-10
) -> VerificationReport:
    """Squared off-diagonal resolvent element against its factorized product.

    The product takes one element of each inverted averaged Cayley form and
    a boundary weight carrying the two marked site phases; it separates the
    random diagonal factor from the fixed one.
    """
    _check_sites(model, phases, j, k)
    lhs = squared_resolvent(model, phases, j, k)
    ret, adv = _cayley_sums(model, phases)
    eye = np.eye(model.dim)
    elem_ret = _solve(ret, eye[:, k], "the retarded averaged transform")[j]
    elem_adv = _solve(adv, eye[:, j], "the advanced averaged transform")[k]
    th = phases.angles
    weight = abs(model.beta) ** 2 / (
        np.abs(1.0 - model.beta * np.exp(1j * th[j])) ** 2
        * np.abs(1.0 - model.beta * np.exp(1j * th[k])) ** 2
    )
    rhs = weight * elem_ret * elem_adv
    scale = max(lhs, abs(rhs), 1e-30)
    resid = abs(rhs - lhs) / scale
    recs = (
        CheckRecord(
            "factorized squared element",
            PASS if resid <= tol else FAIL,
            complex(rhs),
            complex(lhs),
            float(resid),
        ),
        graded("imaginary remainder", abs(rhs.imag) / scale, 0.0, tol),
    )
    return VerificationReport("squared-element factorization", recs)


def _random_contraction(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    top = np.linalg.norm(g, 2)
    return g * (rng.uniform(0.2, 0.9) / top)


def _random_model(rng: np.random.Generator, dim: int) -> FloquetModel:
    u = sample_haar(GroupSpec("U", dim), 1, rng)[0]
    alpha = rng.uniform(0.1, 0.9) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    beta = rng.uniform(0.1, 0.9) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    return FloquetModel(u, alpha, beta)


_SWEEP_LABELS = (
    "product form",
    "h-anchored form",
    "g-anchored form",
    "factorized squared element",
)


def identity_sweep(
    cases: int = 100, max_dim: int = 16, seed: int = 271, tol: float = 1e-10
) -> VerificationReport:
    """Worst residual of each identity over random contraction pairs.

    Every case draws its own stream: a dimension, a contraction pair for the
    three resolvent arrangements, and a phase model with two marked states
    for the factorized squared element.
    """
    if not 2 <= max_dim <= _SWEEP_DIM_CAP:
        raise ContractError(f"sweep dimension must lie in 2..{_SWEEP_DIM_CAP}")
    if cases < 1:
        raise ContractError("need at least one case")
    worst = dict.fromkeys(_SWEEP_LABELS, 0.0)
    for case in range(cases):
        rng = batch_rng(seed, case)
        dim = int(rng.integers(2, max_dim + 1))
        rep = verify_resolvent_identities(
            _random_contraction(rng, dim), _random_contraction(rng, dim), tol
        )
        for label in _SWEEP_LABELS[:3]:
            worst[label] = max(worst[label], rep.record(label).error)
        model = _random_model(rng, dim)
        phases = PhaseDisorder(rng.uniform(0.0, 2.0 * np.pi, dim))
        j, k = (int(i) for i in rng.choice(dim, size=2, replace=False))
        fact = greens_cayley_factorization(model, phases, j, k, tol)
        worst[_SWEEP_LABELS[3]] = max(
            worst[_SWEEP_LABELS[3]], fact.record(_SWEEP_LABELS[3]).error
        )
    recs = tuple(
        graded(f"worst {label}", worst[label], 0.0, tol, trace=(cases, max_dim))
        for label in _SWEEP_LABELS
    )
    return VerificationReport("identity sweep", recs)


# -- Gaussian representation ----------------------------------------------------


def gaussian_rep_check(
    model: FloquetModel, phases: PhaseDisorder, j: int, k: int, tol: float = 1e-9
) -> VerificationReport:
    """Closed-form Gaussian superintegrals against the factorized element.

    In each sector the bosonic integral yields the inverse element over the
    determinant and the fermionic integral restores the same determinant, so
    the pair must cancel exactly; the surviving inverse elements, assembled
    with the boundary weight, must reproduce the squared resolvent element.
    """
    _check_sites(model, phases, j, k)
    ret, adv = _cayley_sums(model, phases)
    for name, form in (("retarded", ret), ("advanced", adv)):
        herm = 0.5 * (form + form.conj().T)
        if float(np.linalg.eigvalsh(herm).min()) <= 0.0:
            raise DomainError(f"the {name} averaged transform lost its positive real part")

    recs = []
    elems = {}
    for name, form, row, col in (("retarded", ret, j, k), ("advanced", adv, k, j)):
        # bosonic component: inverse element over one determinant path;
        # fermionic component: the determinant again along another path
        boson = np.linalg.inv(form)[row, col] / np.linalg.det(form)
        sign, logabs = np.linalg.slogdet(form)
        fermion = sign * np.exp(logabs)
        elems[name] = boson * fermion
        direct = _solve(form, np.eye(model.dim)[:, col], "the averaged transform")[row]
        scale = max(abs(direct), 1e-30)
        recs.append(
            graded(f"{name} element", abs(elems[name] - direct) / scale, 0.0, tol)
        )
        ratio = fermion / np.linalg.det(form)
        recs.append(
            CheckRecord(
                f"{name} determinant cancellation",
                PASS if abs(ratio - 1.0) <= tol else FAIL,
                complex(ratio),
                1.0 + 0.0j,
                float(abs(ratio - 1.0)),
            )
        )
    th = phases.angles
    weight = abs(model.beta) ** 2 / (
        np.abs(1.0 - model.beta * np.exp(1j * th[j])) ** 2
        * np.abs(1.0 - model.beta * np.exp(1j * th[k])) ** 2
    )
    assembled = weight * elems["retarded"] * elems["advanced"]
    lhs = squared_resolvent(model, phases, j, k)
    scale = max(lhs, abs(assembled), 1e-30)
    recs.append(
        CheckRecord(
            "squared element from gaussians",
            PASS if abs(assembled - lhs) / scale <= tol else FAIL,
            complex(assembled),
            complex(lhs),
            float(abs(assembled - lhs) / scale),
        )
    )
    return VerificationReport("gaussian representation", tuple(recs))


# -- one-site phase kernels -----------------------------------------------------


class PhaseKernels(NamedTuple):
    delta_family_value: float
    cauchy_kernel_value: float


def delta_family_width(beta) -> float:
    """Scale in q below which the marked-site kernel stops resolving."""
    mod = abs(complex(beta))
    if mod >= 1.0:
        return 0.0
    if mod == 0.0:
        return float("inf")
    return (1.0 - mod * mod) / mod


def _kernel_nodes(q: float, beta: complex) -> int:
    # the marked-site weight narrows like 1 - |beta| and the phase swings
    # like q/(1 - |beta|); both need resolving
    gap = max(1.0 - abs(beta), 1e-6)
    need = 512.0 * (1.0 + abs(q)) / gap
    return int(min(2.0 ** 22, 2.0 ** np.ceil(np.log2(max(4096.0, need)))))


def phase_average_kernels(q: float, beta, nodes: int | None = None) -> PhaseKernels:
    """One-site phase averages on the balanced slice u = q/2, v = -q/2.

    The two kernels differ by the marked-site weight |1 - beta e^{i theta}|^{-2}.
    With it, the family narrows toward a point mass as |beta| -> 1, so at the
    unit circle the first slot reports the family width (zero) instead of a
    pointwise value; without it the limit is exp(-|q|/2).  The balanced slice
    keeps the exponent purely imaginary, which makes both kernels real and
    lets the damping come from phase mixing alone.
    """
    beta = complex(beta)
    q = float(q)
    if abs(beta) > 1.0 + 1e-12:
        raise DomainError("the regularization weight must satisfy |beta| <= 1")
    if abs(beta) >= 1.0 - 1e-9:
        return PhaseKernels(delta_family_width(beta), float(np.exp(-abs(q) / 2.0)))
    n = _kernel_nodes(q, beta) if nodes is None else int(nodes)
    th, w = angle(n)
    e = np.exp(1j * th)
    b = (1.0 + beta * e) / (1.0 - beta * e)
    ph = np.exp(-0.25 * q * (b - np.conj(b)))
    marked = 1.0 / np.abs(1.0 - beta * e) ** 2
    norm = 1.0 / (2.0 * np.pi)
    delta = float(np.real(np.sum(w * marked * ph)) * norm)
    cauchy = float(np.real(np.sum(w * ph)) * norm)
    return PhaseKernels(delta, cauchy)


# -- fully averaged field representation ----------------------------------------


def _berezin_sequence(dim: int) -> tuple:
    seq = []
    for i in range(dim):
        seq += [i, dim + i]
    for i in range(dim):
        seq += [2 * dim + i, 3 * dim + i]
    return tuple(seq)


def _fermion_quadratic(m_ret: np.ndarray, m_adv: np.ndarray) -> GrassmannPoly:
    # generators: ret pair (i, dim+i), adv pair (2dim+i, 3dim+i); with this
    # layout and the interleaved sequence the bare Gaussian integrates to
    # det(m_ret) * det(m_adv)
    dim = m_ret.shape[0]
    gens = 4 * dim
    quad = GrassmannPoly(gens)
    for i in range(dim):
        for l in range(dim):
            bar_phi = GrassmannPoly.generator(gens, dim + i)
            phi = GrassmannPoly.generator(gens, l)
            quad = quad + bar_phi * phi * (-m_ret[i, l])
            psi = GrassmannPoly.generator(gens, 2 * dim + i)
            bar_psi = GrassmannPoly.generator(gens, 3 * dim + l)
            quad = quad + psi * bar_psi * m_adv[i, l]
    return quad


def squared_resolvent_phase_mc(
    model: FloquetModel, j: int, k: int, samples: int, seed: int
) -> McEstimate:
    """Average of the squared element over phase draws, one stream per batch."""
    if not (0 <= j < model.dim and 0 <= k < model.dim):
        raise ContractError("basis indices outside the model dimension")
    eye = np.eye(model.dim)
    nbatch = -(-samples // BATCH)
    vals = []
    for b in range(nbatch):
        take = min(BATCH, samples - b * BATCH)
        th = batch_rng(seed, b).uniform(0.0, 2.0 * np.pi, size=(take, model.dim))
        a = eye[None] - model.zeta * (model.u_d[None] * np.exp(1j * th)[:, None, :])
        col = _solve(a, np.tile(eye[:, k], (take, 1))[:, :, None], "1 - zeta u_d u_f")
        vals.append(np.abs(col[:, j, 0]) ** 2)
    return jackknife_mean(np.concatenate(vals), seed)


def _site_kernel_moments(
    u: np.ndarray, v: np.ndarray, beta: complex, marked: np.ndarray, nodes: int
):
    """Kernel value and its bilinear responses per sample and site.

    Returns the one-site average K and its derivatives with respect to u, v
    and the mixed pair, evaluated at the sampled bosonic bilinears; these are
    the four coefficients the fermion expansion needs at each site.
    """
    th, w = angle(nodes)
    e = np.exp(1j * th)
    b = (1.0 + beta * e) / (1.0 - beta * e)
    weight = np.where(
        marked[:, None], (1.0 / np.abs(1.0 - beta * e) ** 2)[None, :], 1.0
    )
    core = np.exp(-0.5 * (u[..., None] * b + v[..., None] * np.conj(b)))
    core *= weight[None]
    norm = w / (2.0 * np.pi)
    kern = core @ norm
    d_u = (core * (-0.5 * b)) @ norm
    d_v = (core * (-0.5 * np.conj(b))) @ norm
    d_uv = (core * (0.25 * np.abs(b) ** 2)) @ norm
    return kern, d_u, d_v, d_uv


def squared_resolvent_field_mc(
    model: FloquetModel,
    j: int,
    k: int,
    samples: int,
    seed: int,
    theta_nodes: int = 512,
) -> McEstimate:
    """Averaged squared element from the phase-averaged field representation.

    Bosonic fields are drawn by importance sampling from a widened form of
    the deterministic Cayley quadratic; the widening rate stays below the
    worst-case kernel decay so the weights remain bounded.  The four fermion
    generators per site are integrated symbolically for the whole sample
    batch at once, with the site kernels supplying the bilinear couplings.
    """
    _check_pair(model.dim, j, k)
    dim = model.dim
    eye = np.eye(dim)
    m_ret = 0.5 * cayley(model.alpha * model.u_d)
    m_adv = 0.5 * cayley(np.conj(model.alpha) * model.u_d.conj().T)
    floor = (1.0 - abs(model.beta) ** 2) / (1.0 + abs(model.beta)) ** 2
    widen = 0.45 * floor
    h_phi = 0.5 * (m_ret + m_ret.conj().T) + widen * eye
    h_psi = 0.5 * (m_adv.T + m_adv.conj()) + widen * eye
    chol_phi = np.linalg.cholesky(h_phi)
    chol_psi = np.linalg.cholesky(h_psi)
    det_norm = float((np.linalg.det(h_phi) * np.linalg.det(h_psi)).real)
    marked = np.array([i in (j, k) for i in range(dim)])
    quad = _fermion_quadratic(m_ret, m_adv)
    seq = _berezin_sequence(dim)
    gens = 4 * dim
    free = gexp(quad)

    vals = []
    done = 0
    chunk_index = 0
    while done < samples:
        take = min(_FIELD_CHUNK, samples - done)
        rng = batch_rng(seed, chunk_index)
        z = rng.normal(size=(2, take, dim)) + 1j * rng.normal(size=(2, take, dim))
        phi = np.linalg.solve(chol_phi.conj().T[None], z[0][:, :, None] / np.sqrt(2))[..., 0]
        psi = np.linalg.solve(chol_psi.conj().T[None], z[1][:, :, None] / np.sqrt(2))[..., 0]
        kern, d_u, d_v, d_uv = _site_kernel_moments(
            np.abs(phi) ** 2, np.abs(psi) ** 2, model.beta, marked, theta_nodes
        )
        prod = GrassmannPoly.scalar(gens, np.ones(take, dtype=complex))
        for i in range(dim):
            u_f = GrassmannPoly.generator(gens, dim + i) * GrassmannPoly.generator(gens, i)
            v_f = GrassmannPoly.generator(gens, 3 * dim + i) * GrassmannPoly.generator(
                gens, 2 * dim + i
            )
            site = (
                GrassmannPoly.scalar(gens, kern[:, i])
                + u_f * d_u[:, i]
                + v_f * d_v[:, i]
                + (u_f * v_f) * d_uv[:, i]
            )
            prod = prod * site
        fermion = berezin(prod * free, seq).scalar_part()
        if not isinstance(fermion, np.ndarray):
            fermion = np.full(take, complex(fermion))
        expo = (
            -np.einsum("si,il,sl->s", phi.conj(), m_ret, phi)
            - np.einsum("si,il,sl->s", psi, m_adv, psi.conj())
            + np.einsum("si,il,sl->s", phi.conj(), h_phi, phi)
            + np.einsum("si,il,sl->s", psi.conj(), h_psi, psi)
        )
        inserts = phi[:, j] * phi[:, k].conj() * psi[:, k].conj() * psi[:, j]
        vals.append(
            abs(model.beta) ** 2 * np.exp(expo) * fermion * inserts / det_norm
        )
        done += take
        chunk_index += 1
    return jackknife_mean(np.concatenate(vals), seed)


def verify_random_phase_average(
    model: FloquetModel,
    j: int,
    k: int,
    mc_fields_samples: int = 200_000,
    mc_phase_samples: int = 200_000,
    seeds: Sequence[int] = (101, 211),
    theta_nodes: int = 512,
    rel_tol: float = 0.05,
    stderr_ceiling: float = 0.20,
) -> VerificationReport:
    """Two independent averages of the squared element, loosely compared.

    Direct sampling draws phase realizations and solves; the field route
    samples the Gaussian representation whose phase average was taken one
    site kernel at a time.  The verdict turns inconclusive rather than pass
    or fail when either route's standard error exceeds the ceiling.
    """
    if model.dim > 3:
        raise ContractError("the field-space route is implemented for dimension <= 3")
    _check_pair(model.dim, j, k)
    direct = squared_resolvent_phase_mc(model, j, k, mc_phase_samples, int(seeds[0]))
    fields = squared_resolvent_field_mc(
        model, j, k, mc_fields_samples, int(seeds[1]), theta_nodes
    )
    lhs = float(np.real(direct.value))
    rhs = float(np.real(fields.value))
    sigma = float(np.hypot(direct.stderr, fields.stderr))
    scale = max(abs(lhs), abs(rhs), 1e-30)
    if direct.stderr > stderr_ceiling * scale or fields.stderr > stderr_ceiling * scale:
        verdict = INCONCLUSIVE
    elif abs(lhs - rhs) <= rel_tol * scale + 3.0 * sigma:
        verdict = PASS
    else:
        verdict = FAIL
    imag = abs(np.imag(fields.value))
    recs = (
        CheckRecord(
            "field representation vs direct average",
            verdict,
            complex(rhs),
            complex(lhs),
            float(abs(lhs - rhs) / scale),
            trace=(direct.stderr, fields.stderr),
        ),
        CheckRecord(
            "imaginary remainder of the field route",
            PASS if imag <= max(5.0 * fields.stderr, 1e-12) else FAIL,
            complex(fields.value),
            complex(rhs),
            float(imag),
        ),
    )
    return VerificationReport("random-phase average", recs)


# -- hyperbolic invariance ------------------------------------------------------


def hyperbolic_exponent(
    u_d: np.ndarray, phi0: np.ndarray, psi0: np.ndarray, boost: float = 0.0
) -> GrassmannPoly:
    """Quadratic exponent of the averaged representation with no damping left.

    Commuting components enter as sampled numbers, anticommuting ones as
    generators; `boost` applies phi -> e^s phi, psi -> e^{-s} psi together
    with the opposite factors on the barred fields, under which every
    bilinear in the exponent is built to be invariant.
    """
    a = cayley(_square(u_d))
    dim = a.shape[0]
    gens = 4 * dim
    up, down = np.exp(boost), np.exp(-boost)
    phi_base = np.asarray(phi0, dtype=complex).reshape(dim)
    psi_base = np.asarray(psi0, dtype=complex).reshape(dim)
    phi_s = phi_base * up
    bar_phi_s = phi_base.conj() * down
    psi_s = psi_base * down
    bar_psi_s = psi_base.conj() * up
    out = GrassmannPoly(gens)
    for i in range(dim):
        for l in range(dim):
            coeff = -0.5 * a[i, l]
            scalar = coeff * (bar_phi_s[i] * phi_s[l] - bar_psi_s[l] * psi_s[i])
            out = out + GrassmannPoly.scalar(gens, scalar)
            bar_phi = GrassmannPoly.generator(gens, dim + i, down)
            phi = GrassmannPoly.generator(gens, l, up)
            bar_psi = GrassmannPoly.generator(gens, 3 * dim + l, up)
            psi = GrassmannPoly.generator(gens, 2 * dim + i, down)
            out = out + (bar_phi * phi - bar_psi * psi) * coeff
    return out


def check_hyperbolic_invariance(
    u_d: np.ndarray,
    boosts: Sequence[float] = (0.35, -0.8, 1.25),
    seed: int = 97,
    tol: float = 1e-13,
) -> VerificationReport:
    """Exponent coefficients before and after real boosts, compared termwise."""
    a = _square(u_d)
    dim = a.shape[0]
    rng = batch_rng(seed, 0)
    phi0 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi0 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    base = hyperbolic_exponent(a, phi0, psi0)
    floor = max(abs(c) for c in base.terms.values())
    recs = []
    for s in boosts:
        moved = hyperbolic_exponent(a, phi0, psi0, boost=float(s))
        diff = moved - base
        resid = max((abs(c) for c in diff.terms.values()), default=0.0) / floor
        recs.append(graded(f"boost s={s:g}", resid, 0.0, tol))
    return VerificationReport("hyperbolic invariance", tuple(recs))

"""Weierstrass data of conformal minimal immersions on annuli.

The data phi = 2 du / dz is a list of n Laurent polynomials with
sum_j phi_j^2 = 0.  The immersion is recovered as
u(z) = u(x0) + Re int_{x0}^{z} phi dz.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .domain import AnnularDomain, HomologyBasis, homology_basis, polar_grid
from .errors import (
    IllDefinedImmersion,
    NonflatMarginError,
    OutOfDomainError,
    PerturbationFailed,
    PreconditionError,
)
from .funspace import LaurentFunction, antiderivative, contour_integral, evaluate

DEFAULT_DOMAIN = AnnularDomain(0.5, 2.0)
PERIOD_TOL = 1e-9
RANK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class WeierstrassData:
    phi: tuple[LaurentFunction, ...]
    domain: AnnularDomain

    def __post_init__(self):
        phi = tuple(self.phi)
        object.__setattr__(self, "phi", phi)
        if len(phi) < 3:
            raise PreconditionError("ambient dimension must be at least 3", n=len(phi))
        for p in phi:
            if p.domain != self.domain:
                raise PreconditionError("component defined on a different domain")

    @property
    def n(self) -> int:
        return len(self.phi)

    def values(self, z, check: bool = True) -> np.ndarray:
        """Array of shape (n, *z.shape)."""
        z = np.asarray(z, dtype=complex)
        if check:
            self.domain.check_contains(z, "evaluation point")
        return np.stack([evaluate(p, z, check=False) for p in self.phi])

    def replace(self, index: int, component: LaurentFunction) -> "WeierstrassData":
        phi = list(self.phi)
        phi[index] = component
        return WeierstrassData(tuple(phi), self.domain)

    @cached_property
    def primitives(self) -> list[tuple[LaurentFunction, complex]]:
        return [antiderivative(p) for p in self.phi]

    def coefficient_table(self) -> list[dict[int, complex]]:
        return [p.as_dict() for p in self.phi]

    def max_degree(self) -> int:
        return max(p.degree for p in self.phi)


@dataclass(frozen=True)
class FluxClass:
    """Flux vectors, one row per homology generator."""

    values: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_2d(np.asarray(self.values, dtype=float)))

    def distance(self, other: "FluxClass") -> float:
        if self.values.shape != other.values.shape:
            raise PreconditionError("flux classes have different shapes")
        if self.values.size == 0:
            return 0.0
        return float(np.max(np.abs(self.values - other.values)))

    def tolist(self) -> list[list[float]]:
        return self.values.tolist()


@dataclass(frozen=True, eq=False)
class Immersion:
    data: WeierstrassData
    base_point: complex
    base_value: np.ndarray = None

    def __post_init__(self):
        bv = np.zeros(self.data.n) if self.base_value is None else np.asarray(self.base_value, float)
        object.__setattr__(self, "base_value", bv)
        object.__setattr__(self, "base_point", complex(self.base_point))
        r = abs(self.base_point)
        if not (self.data.domain.r_in < r < self.data.domain.r_out):
            raise OutOfDomainError("base point must be interior", base_point=str(self.base_point))


# presets --------------------------------------------------------------------

def catenoid(domain: AnnularDomain = DEFAULT_DOMAIN) -> WeierstrassData:
    L = LaurentFunction.from_dict
    return WeierstrassData((
        L({-2: 0.5, 0: -0.5}, domain),
        L({-2: 0.5j, 0: 0.5j}, domain),
        L({-1: 1.0}, domain),
    ), domain)


def catenoid4(domain: AnnularDomain = DEFAULT_DOMAIN) -> WeierstrassData:
    base = catenoid(domain)
    return WeierstrassData(base.phi + (LaurentFunction.constant(0.0, domain),), domain)


def flat(domain: AnnularDomain = DEFAULT_DOMAIN) -> WeierstrassData:
    """phi = (1, i, 0): the plane with unit induced speed."""
    C = LaurentFunction.constant
    return WeierstrassData((C(1.0, domain), C(1j, domain), C(0.0, domain)), domain)


PRESETS = {"catenoid": catenoid, "flat": flat, "catenoid4": catenoid4}


def preset(name: str, domain: AnnularDomain | None = None) -> WeierstrassData:
    try:
        build = PRESETS[name]
    except KeyError:
        raise PreconditionError(f"unknown preset {name!r}", known=sorted(PRESETS)) from None
    return build(domain or DEFAULT_DOMAIN)


def from_coefficient_table(table: Sequence[dict], domain: AnnularDomain) -> WeierstrassData:
    """Build data from per-component maps k -> complex (or [re, im])."""
    comps = []
    for entry in table:
        coeffs = {}
        for k, v in entry.items():
            if isinstance(v, (list, tuple)):
                v = complex(v[0], v[1])
            coeffs[int(k)] = complex(v)
        comps.append(LaurentFunction.from_dict(coeffs, domain))
    return WeierstrassData(tuple(comps), domain)


# conformality, periods, flux -------------------------------------------------

def validation_grid(domain: AnnularDomain, n_r: int = 64, n_theta: int = 256) -> np.ndarray:
    return polar_grid(domain, n_r, n_theta, shifted=True)


def conformality_residual(w: WeierstrassData, n_r: int = 64, n_theta: int = 256) -> float:
    """sup |sum_j phi_j^2| over a shifted polar validation grid."""
    vals = w.values(validation_grid(w.domain, n_r, n_theta), check=False)
    return float(np.max(np.abs(np.sum(vals ** 2, axis=0))))


def periods(w: WeierstrassData, basis: HomologyBasis | None = None) -> np.ndarray:
    """Complex periods, shape (l, n), by trapezoid quadrature."""
    basis = basis or homology_basis(w.domain)
    out = np.zeros((basis.count, w.n), dtype=complex)
    for i, r in enumerate(basis.radii):
        for j, p in enumerate(w.phi):
            out[i, j] = contour_integral(p, r, max(64, 2 * p.degree + 8))
    return out


def residue_periods(w: WeierstrassData) -> np.ndarray:
    """2 pi i times the z^-1 coefficients; the exact period of every circle."""
    return 2j * np.pi * np.array([[p.coeff(-1) for p in w.phi]])


def flux(w: WeierstrassData, basis: HomologyBasis | None = None,
         period_tol: float = PERIOD_TOL) -> FluxClass:
    P = periods(w, basis)
    re = float(np.max(np.abs(P.real))) if P.size else 0.0
    if re > period_tol:
        raise IllDefinedImmersion("real periods do not vanish", max_real_period=re,
                                  period_tol=period_tol)
    return FluxClass(P.imag if P.size else np.zeros((0, w.n)))


def real_period_residual(w: WeierstrassData, basis: HomologyBasis | None = None) -> float:
    P = periods(w, basis)
    return float(np.max(np.abs(P.real))) if P.size else 0.0


# immersion ---------------------------------------------------------------------

def _wrapped_angle(a, b):
    """Signed angle from a to b in (-pi, pi]."""
    d = np.angle(b) - np.angle(a)
    return (d + np.pi) % (2 * np.pi) - np.pi


def integrate_immersion(im: Immersion, z, path: str = "radial-first") -> np.ndarray:
    """u(z) along a radial segment and the shorter circular arc.

    Uses exact primitives of the Laurent components; the logarithmic term
    follows the continuous branch along the chosen path, so the result is
    path-independent only when the real periods vanish.  Returns shape
    (n,) for scalar z and (n, *z.shape) otherwise.
    """
    w = im.data
    z = np.asarray(z, dtype=complex)
    w.domain.check_contains(z, "target point")
    if path not in ("radial-first", "angular-first"):
        raise PreconditionError("unknown path", path=path)
    x0 = im.base_point
    dtheta = _wrapped_angle(x0, z)
    dlog = np.log(np.abs(z) / abs(x0)) + 1j * dtheta
    out = []
    for (F, c), base in zip(w.primitives, im.base_value):
        val = evaluate(F, z, check=False) - evaluate(F, x0, check=False) + c * dlog
        out.append(base + val.real)
    return np.stack(out)


def integrate_along(w: WeierstrassData, vertices: Sequence[complex], order: int = 24) -> np.ndarray:
    """Re of the integral of phi dz along a polyline, by Gauss-Legendre quadrature.

    Independent of the closed-form primitives; used as a cross-check.
    """
    x, wts = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (x + 1)
    wts = 0.5 * wts
    total = np.zeros(w.n, dtype=complex)
    verts = np.asarray(vertices, dtype=complex)
    for a, b in zip(verts[:-1], verts[1:]):
        pts = a + s * (b - a)
        total += (w.values(pts) * wts).sum(axis=1) * (b - a)
    return total.real


def arc_polyline(z0: complex, z1: complex, path: str = "radial-first", n_arc: int = 400) -> np.ndarray:
    """Vertices of the radial-plus-arc path (fine polyline approximation)."""
    r0, r1 = abs(z0), abs(z1)
    t0 = np.angle(z0)
    dt = float(_wrapped_angle(z0, z1))
    if path == "radial-first":
        arc = r1 * np.exp(1j * (t0 + dt * np.linspace(0, 1, n_arc)))
        return np.concatenate([[z0], arc])
    arc = r0 * np.exp(1j * (t0 + dt * np.linspace(0, 1, n_arc)))
    return np.concatenate([arc, [z1]])


def loop_displacement(w: WeierstrassData, r: float) -> np.ndarray:
    """Re of the period over |z| = r: the change of u around the loop."""
    return np.array([contour_integral(p, r, max(64, 2 * p.degree + 8)).real for p in w.phi])


# spinor split and rank tests ---------------------------------------------------

class SpinorSplit(NamedTuple):
    f: LaurentFunction
    g: LaurentFunction
    Psi: LaurentFunction


def spinor_split(w: WeierstrassData, a: int, b: int) -> SpinorSplit:
    """f = phi_a - i phi_b, g = phi_a + i phi_b, Psi = -sum_{j not a,b} phi_j^2 (0-based a, b)."""
    if a == b or not (0 <= a < w.n and 0 <= b < w.n):
        raise PreconditionError("need two distinct component indices", a=a, b=b, n=w.n)
    pa, pb = w.phi[a], w.phi[b]
    f = pa - 1j * pb
    g = pa + 1j * pb
    Psi = LaurentFunction.constant(0.0, w.domain)
    for j, p in enumerate(w.phi):
        if j not in (a, b):
            Psi = Psi - p * p
    return SpinorSplit(f, g, Psi)


def recombine(f: LaurentFunction, g: LaurentFunction) -> tuple[LaurentFunction, LaurentFunction]:
    """Inverse of the spinor split: (phi_a, phi_b) = ((f+g)/2, i(f-g)/2)."""
    return 0.5 * (f + g), 0.5j * (f - g)


def rank_sample_points(domain: AnnularDomain, count: int) -> np.ndarray:
    """Deterministic points spread over three circles at irrational angles."""
    radii = np.geomspace(max(domain.r_in, domain.r_out * 1e-3), domain.r_out, 5)[1:4]
    k = np.arange(count)
    ang = 2 * np.pi * ((k * (math.sqrt(5) - 1) / 2) % 1.0)
    return radii[k % 3] * np.exp(1j * ang)


class RankReport(NamedTuple):
    ok: bool
    rank: int
    singular_values: np.ndarray
    points: np.ndarray


def value_rank(w: WeierstrassData, tol: float = RANK_TOL, count: int | None = None) -> RankReport:
    count = count or max(4 * w.n, 12)
    pts = rank_sample_points(w.domain, count)
    M = w.values(pts).T
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return RankReport(False, 0, sv, pts)
    rank = int(np.sum(sv > tol * sv[0]))
    return RankReport(True, rank, sv, pts)


def is_nonflat(w: WeierstrassData, tol: float = RANK_TOL) -> RankReport:
    rep = value_rank(w, tol)
    return rep._replace(ok=rep.rank >= 2)


def is_full(w: WeierstrassData, tol: float = RANK_TOL) -> bool:
    return value_rank(w, tol).rank == w.n


def induced_speed(w: WeierstrassData, z, check: bool = True):
    """|phi(z)| / sqrt(2): Euclidean speed of u along a unit-speed planar path."""
    vals = w.values(z, check=check)
    out = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0) / 2.0)
    return out if np.ndim(out) else float(out)


def pair_margin(w: WeierstrassData, a: int, b: int, count: int = 24) -> float:
    """Smallest singular value of the column-normalised [f, g] value matrix."""
    f, g, _ = spinor_split(w, a, b)
    pts = rank_sample_points(w.domain, count)
    M = np.stack([evaluate(f, pts, check=False), evaluate(g, pts, check=False)], axis=1)
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        return 0.0
    return float(np.linalg.svd(M / norms, compute_uv=False)[-1])


@dataclass(frozen=True)
class PairCover:
    pairs: tuple[tuple[int, int], ...]
    cover: tuple[tuple[int, ...], ...]
    margins: tuple[float, ...]

    def pair_of(self, index: int) -> tuple[int, int]:
        for pair, members in zip(self.pairs, self.cover):
            if index in members:
                return pair
        raise KeyError(index)


def select_pair(family: Sequence[WeierstrassData], tol: float = 1e-3) -> PairCover:
    """Cover the family by index sets, each sharing one independent spinor pair.

    Pairs are tried in lexicographic order; the first pair valid for every
    remaining member claims all members it is valid for.
    """
    if not family:
        return PairCover((), (), ())
    n = family[0].n
    for i, w in enumerate(family):
        if not is_nonflat(w).ok:
            raise NonflatMarginError("family member is flat", index=i)
    pairs = list(itertools.combinations(range(n), 2))
    # identical members share one evaluation
    cache: dict[int, dict] = {}
    margins = []
    for w in family:
        key = id(w)
        if key not in cache:
            cache[key] = {p: pair_margin(w, *p) for p in pairs}
        margins.append(cache[key])
    remaining = list(range(len(family)))
    out_pairs, out_cover, out_margin = [], [], []
    while remaining:
        best = None
        for p in pairs:
            members = [i for i in remaining if margins[i][p] > tol]
            if members and (best is None or len(members) > len(best[1])):
                best = (p, members)
                if len(members) == len(remaining):
                    break
        if best is None:
            raise NonflatMarginError("no spinor pair is independent", indices=remaining, tol=tol)
        p, members = best
        out_pairs.append(p)
        out_cover.append(tuple(members))
        out_margin.append(min(margins[i][p] for i in members))
        remaining = [i for i in remaining if i not in members]
    return PairCover(tuple(out_pairs), tuple(out_cover), tuple(out_margin))


# general position ------------------------------------------------------------------

def _null_frame(v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Real orthonormal e1, e2, e3 with v = s (e1 + i e2) for a null v in C^3."""
    a, b = v.real, v.imag
    s = float(np.linalg.norm(a))
    if s == 0:
        raise PerturbationFailed("direction is not a null vector")
    e1 = a / s
    e2 = b / np.linalg.norm(b)
    e3 = np.cross(e1, e2)
    return e1, e2, e3, s


def perturb_to_full(w: WeierstrassData, delta: float, seed: int = 0,
                    max_retries: int = 8) -> WeierstrassData:
    """Move flat n=3 data into general position by bending its Gauss map.

    A flat datum is phi = eta v with v a fixed null vector.  Writing v in a
    rotated frame as (1, i, 0), the perturbed data
    2 eta |a| (1/2 (1 - G^2), i/2 (1 + G^2), G) with G = c z^k stays null.
    The exponent k is drawn so that eta z^k and eta z^(2k) have no residue,
    which keeps every period unchanged.  c is scaled so the sup change of phi
    over the domain stays below delta / 2.
    """
    if is_full(w):
        return w
    if w.n != 3:
        raise PreconditionError("general-position perturbation is implemented for n = 3 only", n=w.n)
    if delta <= 0:
        raise PerturbationFailed("positive delta required to leave flat data", delta=delta)
    rep = value_rank(w)
    pts = rep.points
    vals = w.values(pts).T
    _, _, vh = np.linalg.svd(vals)
    v = vh[0]
    # fix the phase so that Re v and Im v are orthogonal and equally long
    a2 = np.sum(v * v)
    if abs(a2) > 1e-8:
        raise PerturbationFailed("dominant direction is not null")
    phase = np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
    v = v * phase
    e1, e2, e3, s = _null_frame(v)
    dom = w.domain
    # eta = <phi, conj(v)> / |v|^2 as an exact Laurent combination
    eta = LaurentFunction.constant(0.0, dom)
    for j in range(3):
        eta = eta + w.phi[j] * (np.conj(v[j]) / np.vdot(v, v).real)
    rng = np.random.default_rng(seed)
    ks = [k for k in range(-6, 7) if k != 0]
    zs = validation_grid(dom, 16, 64).ravel()
    floor = 1e-12 * float(np.max(np.abs(eta.coeffs)))
    for _ in range(max_retries):
        k = int(rng.choice(ks))
        if abs(eta.coeff(-1 - k)) > floor or abs(eta.coeff(-1 - 2 * k)) > floor:
            continue
        G1 = LaurentFunction.monomial(k, dom)
        bump = float(np.max(np.abs(evaluate(eta * G1, zs)))) * 2 * s + 1e-300
        c = 0.25 * delta / bump
        G = G1 * c
        G2 = G * G
        scale = 2 * s
        n1 = (1.0 - G2) * 0.5
        n2 = (1.0 + G2) * 0.5j
        phi = []
        for j in range(3):
            comp = eta * (n1 * (scale * e1[j]) + n2 * (scale * e2[j]) + G * (scale * e3[j]))
            phi.append(comp)
        out = WeierstrassData(tuple(phi), dom)
        if is_full(out):
            return out
    raise PerturbationFailed("no admissible general-position perturbation found",
                             retries=max_retries)

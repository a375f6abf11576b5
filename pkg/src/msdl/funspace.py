"""Truncated Laurent series on annuli.

Arithmetic, evaluation, trapezoid contour integrals and Runge-type least
squares.  Every approximation result carries the degree it was computed at
and the residual it achieved, so callers can propagate error budgets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .domain import AnnularDomain, polar_grid
from .errors import (
    ConditioningError,
    DegreeExhausted,
    DomainMismatchError,
    NonvanishingViolated,
    OutOfDomainError,
    PreconditionError,
    UndersampledError,
)

DEFAULT_DEGREE_CAP = 512


@dataclass(frozen=True, eq=False)
class LaurentFunction:
    """sum_{k=-m}^{m} c_k z^k stored densely (``coeffs[k + m]``)."""

    coeffs: np.ndarray
    domain: AnnularDomain
    residual: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if c.size % 2 == 0:
            raise PreconditionError("coefficient array must have odd length 2m+1")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction ---------------------------------------------------------
    @classmethod
    def from_dict(cls, coeffs: Mapping[int, complex], domain: AnnularDomain,
                  degree: int | None = None) -> "LaurentFunction":
        m = max((abs(int(k)) for k in coeffs), default=0)
        if degree is not None:
            m = max(m, degree)
        c = np.zeros(2 * m + 1, dtype=complex)
        for k, v in coeffs.items():
            c[int(k) + m] += v
        return cls(c, domain)

    @classmethod
    def constant(cls, value: complex, domain: AnnularDomain) -> "LaurentFunction":
        return cls(np.array([value], dtype=complex), domain)

    @classmethod
    def monomial(cls, k: int, domain: AnnularDomain, coeff: complex = 1.0) -> "LaurentFunction":
        return cls.from_dict({k: coeff}, domain)

    # inspection -----------------------------------------------------------
    @property
    def degree(self) -> int:
        return (self.coeffs.size - 1) // 2

    def coeff(self, k: int) -> complex:
        m = self.degree
        return complex(self.coeffs[k + m]) if -m <= k <= m else 0j

    def as_dict(self) -> dict[int, complex]:
        m = self.degree
        return {k - m: complex(c) for k, c in enumerate(self.coeffs) if c != 0}

    def is_one(self) -> bool:
        """Exactly the constant 1 (no rounding slack)."""
        m = self.degree
        c = self.coeffs
        return c[m] == 1 and not np.any(np.delete(c, m))

    def with_residual(self, residual: float) -> "LaurentFunction":
        return LaurentFunction(self.coeffs, self.domain, float(residual))

    def with_domain(self, domain: AnnularDomain) -> "LaurentFunction":
        return LaurentFunction(self.coeffs, domain, self.residual)

    def trimmed(self, atol: float = 0.0) -> "LaurentFunction":
        """Drop outer coefficient pairs with modulus <= atol."""
        c = self.coeffs
        m = self.degree
        while m > 0 and abs(c[0]) <= atol and abs(c[-1]) <= atol:
            c = c[1:-1]
            m -= 1
        return LaurentFunction(c, self.domain, self.residual)

    def padded(self, m: int) -> np.ndarray:
        extra = m - self.degree
        if extra < 0:
            raise PreconditionError("cannot pad to a smaller degree")
        return np.pad(self.coeffs, (extra, extra))

    # evaluation -----------------------------------------------------------
    def __call__(self, z, check: bool = True):
        return evaluate(self, z, check=check)

    # arithmetic -----------------------------------------------------------
    def _same_domain(self, other: "LaurentFunction"):
        if other.domain != self.domain:
            raise DomainMismatchError("Laurent functions live on different domains",
                                      left=self.domain.as_dict(), right=other.domain.as_dict())

    def __add__(self, other):
        if isinstance(other, LaurentFunction):
            self._same_domain(other)
            m = max(self.degree, other.degree)
            return LaurentFunction(self.padded(m) + other.padded(m), self.domain)
        c = self.coeffs.copy()
        c[self.degree] += complex(other)
        return LaurentFunction(c, self.domain)

    __radd__ = __add__

    def __neg__(self):
        return LaurentFunction(-self.coeffs, self.domain)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LaurentFunction):
            return product(self, other)
        return LaurentFunction(self.coeffs * complex(other), self.domain)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return LaurentFunction(self.coeffs / complex(scalar), self.domain)

    def __repr__(self):
        terms = ", ".join(f"{k}: {v:.6g}" for k, v in self.as_dict().items())
        return f"LaurentFunction({{{terms}}}, r_in={self.domain.r_in}, r_out={self.domain.r_out})"


@dataclass(frozen=True)
class CurveSamples:
    """Target values at nodes on one circle (or any point set)."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=complex).ravel()
        v = np.broadcast_to(np.asarray(self.values, dtype=complex), n.shape).ravel()
        if n.shape != v.shape:
            raise PreconditionError("nodes and values differ in length")
        object.__setattr__(self, "nodes", n)
        object.__setattr__(self, "values", v.copy())


def evaluate(f: LaurentFunction, z, check: bool = True):
    """Horner evaluation of the polynomial and principal parts separately."""
    z = np.asarray(z, dtype=complex)
    if check:
        f.domain.check_contains(z, "evaluation point")
    m = f.degree
    c = f.coeffs
    pos = np.full(z.shape, c[-1], dtype=complex)
    for ck in c[-2:m - 1:-1]:
        pos = pos * z + ck
    if m == 0:
        return pos if pos.ndim else complex(pos)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = 1.0 / z
    neg = np.full(z.shape, c[0], dtype=complex)
    for ck in c[1:m]:
        neg = neg * w + ck
    out = pos + neg * w
    return out if out.ndim else complex(out)


def product(f: LaurentFunction, g: LaurentFunction) -> LaurentFunction:
    f._same_domain(g)
    return LaurentFunction(np.convolve(f.coeffs, g.coeffs), f.domain)


def antiderivative(f: LaurentFunction) -> tuple[LaurentFunction, complex]:
    """Primitive of f without its z^-1 term, plus that residue coefficient."""
    m = f.degree
    k = np.arange(-m, m + 1)
    c = f.coeffs
    out = np.zeros(2 * (m + 1) + 1, dtype=complex)
    for kk, ck in zip(k, c):
        if kk != -1 and ck != 0:
            out[kk + 1 + m + 1] = ck / (kk + 1)
    return LaurentFunction(out, f.domain), f.coeff(-1)


# quadrature -----------------------------------------------------------------

def contour_integral(f: LaurentFunction, r: float, N: int | None = None) -> complex:
    """Trapezoid rule for the integral of f dz over |z| = r.

    Exact up to rounding for Laurent polynomials when N > 2m + 1.
    """
    if N is None:
        N = max(64, 2 * f.degree + 8)
    if N <= 2 * f.degree + 1:
        raise UndersampledError("need N > 2m + 1 nodes", N=N, degree=f.degree)
    if not bool(f.domain.contains(r)):
        raise OutOfDomainError("integration circle outside domain", r=r, **f.domain.as_dict())
    return circle_integral(lambda z: evaluate(f, z, check=False), r, N)


def circle_integral(func: Callable[[np.ndarray], np.ndarray], r: float, N: int) -> complex:
    """Trapezoid rule for an arbitrary integrand sampled on |z| = r."""
    z = r * np.exp(2j * np.pi * np.arange(N) / N)
    return complex(np.sum(func(z) * z) * (2j * np.pi / N))


# spectral projection --------------------------------------------------------

def _fft_size(degree: int, minimum: int = 256) -> int:
    n = max(minimum, 4 * degree + 8)
    return 1 << (n - 1).bit_length()


def project(func: Callable[[np.ndarray], np.ndarray], domain: AnnularDomain,
            degree: int, N: int | None = None) -> LaurentFunction:
    """Laurent coefficients of a function holomorphic near ``domain``.

    Coefficients with k >= 0 come from a DFT on the outer circle and those
    with k < 0 from the inner circle, which keeps the rounding error of each
    coefficient relative to the largest value the term takes on the domain.
    """
    N = N or _fft_size(degree)
    k = np.arange(N)
    c = np.zeros(2 * degree + 1, dtype=complex)
    zo = domain.r_out * np.exp(2j * np.pi * k / N)
    ao = np.fft.fft(func(zo)) / N
    for j in range(degree + 1):
        c[degree + j] = ao[j] / domain.r_out ** j
    if not domain.is_disc:
        zi = domain.r_in * np.exp(2j * np.pi * k / N)
        ai = np.fft.fft(func(zi)) / N
        for j in range(1, degree + 1):
            c[degree - j] = ai[N - j] * domain.r_in ** j
    return LaurentFunction(c, domain)


def validation_points(domain: AnnularDomain, n_r: int = 9, n_theta: int = 256) -> np.ndarray:
    """Shifted polar grid, never equal to the FFT construction nodes."""
    return polar_grid(domain, n_r, n_theta, shifted=True).ravel()


def _winding(values: np.ndarray) -> int:
    steps = np.angle(np.roll(values, -1) / values)
    return int(round(steps.sum() / (2 * np.pi)))


def check_nonvanishing(f, domain: AnnularDomain, N: int = 1024, floor: float = 1e-14):
    """Sample both boundary circles; reject small modulus or a zero in between.

    ``f`` is any callable.  Returns the sampled minimum modulus.
    """
    zs = [domain.r_out * np.exp(2j * np.pi * (np.arange(N) + 0.5) / N)]
    if not domain.is_disc:
        zs.append(domain.r_in * np.exp(2j * np.pi * (np.arange(N) + 0.5) / N))
    vals = [np.asarray(f(z)) for z in zs]
    scale = max(float(np.abs(v).max()) for v in vals)
    low = min(float(np.abs(v).min()) for v in vals)
    if not scale > 0 or low <= floor * scale:
        raise NonvanishingViolated("function (nearly) vanishes on a boundary circle",
                                   min_modulus=low, max_modulus=scale)
    winds = [_winding(v) for v in vals]
    if len(winds) == 2 and winds[0] != winds[1]:
        raise NonvanishingViolated("function has zeros inside the annulus",
                                   winding_outer=winds[0], winding_inner=winds[1])
    if domain.is_disc and winds[0] != 0:
        raise NonvanishingViolated("function has zeros inside the disc", winding=winds[0])
    return low


def _escalate(build, check, degree: int | None, cap: int, start: int):
    """Try ``build(m)`` for increasing m until ``check`` returns a residual <= 0."""
    degrees = [degree] if degree is not None else []
    if degree is None:
        m = start
        while m < cap:
            degrees.append(m)
            m *= 2
        degrees.append(cap)
    best = None
    for m in degrees:
        cand = build(m)
        res, ok = check(cand)
        if best is None or res < best[1]:
            best = (cand, res)
        if ok:
            return cand.with_residual(res)
    raise DegreeExhausted("tolerance not reached at degree cap",
                          degree=degrees[-1], achieved_residual=best[1])


def reciprocal(f: LaurentFunction, degree: int | None = None, tol: float = 1e-12,
               cap: int = DEFAULT_DEGREE_CAP) -> LaurentFunction:
    """Laurent polynomial r with sup |f r - 1| < tol on a validation grid."""
    terms = f.as_dict()
    if len(terms) == 1:
        (k, ck), = terms.items()
        return LaurentFunction.monomial(-k, f.domain, 1.0 / ck)
    if not terms:
        raise NonvanishingViolated("reciprocal of the zero function")
    check_nonvanishing(lambda z: evaluate(f, z, check=False), f.domain)
    zv = validation_points(f.domain)
    fv = evaluate(f, zv, check=False)

    def build(m):
        return project(lambda z: 1.0 / evaluate(f, z, check=False), f.domain, m)

    def check(r):
        res = float(np.max(np.abs(fv * evaluate(r, zv, check=False) - 1.0)))
        return res, res < tol

    start = max(8, 2 * f.degree)
    return _escalate(build, check, degree, cap, start)


def exp_series(f: LaurentFunction, degree: int | None = None, tol: float = 1e-12,
               cap: int = DEFAULT_DEGREE_CAP) -> LaurentFunction:
    """Laurent polynomial E approximating exp(f).

    The error is measured on a validation grid relative to max(1, sup|exp f|).
    """
    if f.degree == 0:
        return LaurentFunction.constant(np.exp(f.coeffs[0]), f.domain)
    if not np.any(f.coeffs):
        return LaurentFunction.constant(1.0, f.domain)
    zv = validation_points(f.domain)
    ev = np.exp(evaluate(f, zv, check=False))
    scale = max(1.0, float(np.abs(ev).max()))

    def build(m):
        return project(lambda z: np.exp(evaluate(f, z, check=False)), f.domain, m)

    def check(E):
        res = float(np.max(np.abs(evaluate(E, zv, check=False) - ev))) / scale
        return res, res < tol

    E = _escalate(build, check, degree, cap, max(8, 2 * f.degree))
    check_nonvanishing(lambda z: evaluate(E, z, check=False), f.domain)
    return E


# least squares ------------------------------------------------------------

def _basis_scales(domain: AnnularDomain, m: int) -> np.ndarray:
    k = np.arange(-m, m + 1)
    r_neg = domain.r_in if domain.r_in > 0 else domain.r_out
    return np.where(k >= 0, float(domain.r_out) ** k, float(r_neg) ** k)


def vandermonde(z: np.ndarray, m: int, domain: AnnularDomain) -> np.ndarray:
    """Columns z^k / s_k with s_k the largest modulus of z^k on the domain."""
    z = np.asarray(z, dtype=complex).ravel()
    k = np.arange(-m, m + 1)
    return (z[:, None] ** k[None, :]) / _basis_scales(domain, m)[None, :]


def least_squares_fit(targets: Sequence[CurveSamples], degree: int, ridge: float = 0.0,
                      domain: AnnularDomain | None = None,
                      weights: Sequence[float] | None = None) -> LaurentFunction:
    """Ridge-regularised least squares over Laurent polynomials of degree <= m.

    The ridge penalty acts on the coefficients of the scaled basis
    z^k / max_domain|z^k|, which makes it independent of the annulus size.
    The returned function records the sup residual over all samples.
    """
    nodes = np.concatenate([t.nodes for t in targets])
    values = np.concatenate([t.values for t in targets])
    if nodes.size < 2 * degree + 1:
        raise PreconditionError("need at least 2m+1 samples", samples=int(nodes.size), degree=degree)
    if domain is None:
        r = np.abs(nodes)
        domain = AnnularDomain(float(r.min()), float(r.max()) if r.max() > r.min() else float(r.max()) * (1 + 1e-9))
    if weights is None:
        w = np.ones(nodes.size)
    else:
        w = np.concatenate([np.full(t.nodes.size, float(wt)) for t, wt in zip(targets, weights)])
    V = vandermonde(nodes, degree, domain) * w[:, None]
    y = values * w
    n = V.shape[1]
    if ridge > 0:
        V = np.vstack([V, math.sqrt(ridge) * np.eye(n)])
        y = np.concatenate([y, np.zeros(n)])
    sol, _, rank, sv = np.linalg.lstsq(V, y, rcond=None)
    if sv.size and sv[-1] < 1e-15 * sv[0] and ridge == 0:
        raise ConditioningError("normal system is singular; add ridge or lower the degree",
                                degree=degree, sigma_min=float(sv[-1]), sigma_max=float(sv[0]),
                                rank=int(rank))
    coeffs = sol / _basis_scales(domain, degree)
    fit = LaurentFunction(coeffs, domain)
    resid = float(np.max(np.abs(evaluate(fit, nodes, check=False) - values)))
    return fit.with_residual(resid)

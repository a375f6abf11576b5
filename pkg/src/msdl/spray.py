"""Period-dominating sprays, the Oka-type multiplier and Newton period correction.

A spray is the family v_zeta = prod_{i,j} (1 + zeta_ij a_ij) built from
holomorphic bumps a_ij concentrated near points y_ij of the homology
curves and normalised so that the integral of a_ij dz over its curve is 1.
The exponential variant exp(sum zeta_ij a_ij) has the same derivative at
zeta = 0 and never vanishes, which matters when the periods must move far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .domain import AnnularDomain, HomologyBasis, polar_grid
from .errors import (
    BasisPointsExhausted,
    DegreeExhausted,
    HInvalid,
    NewtonFailed,
    NonvanishingViolated,
    PreconditionError,
    TauTooLarge,
)
from .funspace import (
    CurveSamples,
    LaurentFunction,
    check_nonvanishing,
    circle_integral,
    evaluate,
    exp_series,
    least_squares_fit,
    product,
    reciprocal,
)
from .labyrinth import Labyrinth

QUAD_NODES = 1024


# basis points ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasisPoints:
    basis: HomologyBasis
    params: np.ndarray          # (l, 2k) curve parameters in [0, 1)
    k: int
    margin: float                # smallest normalised |det| over the family
    witness: tuple = ()          # per family member, per curve: admissible j

    @property
    def points(self) -> np.ndarray:
        return np.array([[self.basis.gamma(i, s) for s in row] for i, row in enumerate(self.params)])


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def basis_params(k: int) -> np.ndarray:
    """2k parameters; y_j and its partner y_{k+j} sit a little over a quarter turn apart.

    A half turn makes the pair degenerate whenever f/g is even in z and an
    exact quarter turn whenever f/g repeats after a quarter turn, so the
    extra offset is irrational.
    """
    first = (np.arange(k) + 0.5) / (4 * k)
    return np.concatenate([first, first + 0.25 + 0.125 * GOLDEN / k])


def pair_determinant(f: LaurentFunction, g: LaurentFunction, y1: complex, y2: complex,
                     normalised: bool = True) -> float:
    f1, g1 = evaluate(f, y1, check=False), evaluate(g, y1, check=False)
    f2, g2 = evaluate(f, y2, check=False), evaluate(g, y2, check=False)
    det = abs(f1 * g2 - g1 * f2)
    if not normalised:
        return det
    scale = math.hypot(abs(f1), abs(g1)) * math.hypot(abs(f2), abs(g2))
    return det / scale if scale > 0 else 0.0


def select_basis_points(f_family: Sequence[LaurentFunction], g_family: Sequence[LaurentFunction],
                        basis: HomologyBasis, k: int = 1, margin: float = 1e-3) -> BasisPoints:
    """Points on each curve whose (f, g) values span C^2 for every member."""
    s = basis_params(k)
    params = np.tile(s, (basis.count, 1))
    worst = math.inf
    witness = []
    seen: dict[tuple[int, int], tuple] = {}
    for f, g in zip(f_family, g_family):
        key = (id(f), id(g))
        if key in seen:
            witness.append(seen[key][0])
            continue
        per_curve = []
        best_member = math.inf
        for i in range(basis.count):
            ys = basis.gamma(i, s)
            dets = [pair_determinant(f, g, ys[j], ys[k + j]) for j in range(k)]
            j_best = int(np.argmax(dets))
            if dets[j_best] <= margin:
                raise BasisPointsExhausted("no admissible basis-point pair; increase k",
                                           k=k, curve=i, best=float(dets[j_best]))
            per_curve.append(j_best)
            best_member = min(best_member, dets[j_best])
        seen[key] = (tuple(per_curve), best_member)
        witness.append(tuple(per_curve))
        worst = min(worst, best_member)
    return BasisPoints(basis, params, k, float(worst), tuple(witness))


# bumps ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BumpFamily:
    basis: HomologyBasis
    params: np.ndarray
    tau: float
    degree: int
    bumps: tuple[tuple[LaurentFunction, ...], ...]
    residuals: np.ndarray        # relative sup fit residual per bump

    def flat(self) -> list[LaurentFunction]:
        return [a for row in self.bumps for a in row]

    @property
    def size(self) -> int:
        return sum(len(row) for row in self.bumps)


def _bump_profile(s: np.ndarray, centre: float, tau: float) -> np.ndarray:
    d = (s - centre + 0.5) % 1.0 - 0.5
    x = d / tau
    out = np.zeros_like(s)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


def build_bumps(basis: HomologyBasis, params: np.ndarray, tau: float, degree: int,
                domain: AnnularDomain, residual_cap: float = 1.0) -> BumpFamily:
    """Smooth bumps on each curve, fitted by Laurent polynomials and normalised.

    The fit of a bump narrower than the resolution of degree m is a smeared
    bump; its relative sup residual is recorded and checked against the cap.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    for row in params:
        srt = np.sort(row % 1.0)
        gaps = np.diff(np.concatenate([srt, [srt[0] + 1.0]]))
        if np.any(gaps <= 2 * tau):
            raise TauTooLarge("bump supports overlap", tau=tau, min_gap=float(gaps.min()))
    N = max(QUAD_NODES, 8 * degree)
    s = np.arange(N) / N
    rows, res = [], []
    for i, row in enumerate(params):
        z = basis.gamma(i, s)
        fitted = []
        for centre in row:
            b = _bump_profile(s, centre, tau)
            fit = least_squares_fit([CurveSamples(z, b)], degree, domain=domain)
            total = circle_integral(lambda x: evaluate(fit, x, check=False), basis.radii[i], N)
            a = fit / total
            rel = fit.residual / float(b.max())
            res.append(rel)
            if rel > residual_cap:
                raise DegreeExhausted("bump fit residual above cap", degree=degree,
                                      achieved_residual=rel, cap=residual_cap)
            fitted.append(a.with_residual(rel))
        rows.append(tuple(fitted))
    return BumpFamily(basis, params, float(tau), degree, tuple(rows), np.array(res))


# spray -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spray:
    bumps: BumpFamily
    ball_radius: float
    kind: str = "product"
    sup_bumps: np.ndarray = field(default=None)

    def values(self, zeta: np.ndarray, z: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex).ravel()
        if self.kind == "exp":
            acc = np.zeros(np.shape(z), dtype=complex)
            for c, a in zip(zeta, self.bumps.flat()):
                if c != 0:
                    acc = acc + c * evaluate(a, z, check=False)
            return np.exp(acc)
        out = np.ones(np.shape(z), dtype=complex)
        for c, a in zip(zeta, self.bumps.flat()):
            if c != 0:
                out = out * (1.0 + c * evaluate(a, z, check=False))
        return out

    def partials(self, zeta: np.ndarray, z: np.ndarray) -> list[np.ndarray]:
        """d v_zeta / d zeta_j divided by v_zeta, at the points z."""
        zeta = np.asarray(zeta, dtype=complex).ravel()
        out = []
        for c, a in zip(zeta, self.bumps.flat()):
            av = evaluate(a, z, check=False)
            out.append(av if self.kind == "exp" else av / (1.0 + c * av))
        return out

    def laurent(self, zeta: np.ndarray, tol: float = 1e-14) -> LaurentFunction:
        zeta = np.asarray(zeta, dtype=complex).ravel()
        dom = self.bumps.bumps[0][0].domain
        if not np.any(zeta):
            return LaurentFunction.constant(1.0, dom)
        if self.kind == "exp":
            acc = LaurentFunction.constant(0.0, dom)
            for c, a in zip(zeta, self.bumps.flat()):
                acc = acc + a * c
            return exp_series(acc, tol=tol)
        out = LaurentFunction.constant(1.0, dom)
        for c, a in zip(zeta, self.bumps.flat()):
            if c != 0:
                out = product(out, 1.0 + a * c)
        return out

    def laurent_inverse(self, zeta: np.ndarray, tol: float = 1e-14) -> LaurentFunction:
        """1 / v_zeta as a Laurent polynomial, factor by factor."""
        zeta = np.asarray(zeta, dtype=complex).ravel()
        dom = self.bumps.bumps[0][0].domain
        if not np.any(zeta):
            return LaurentFunction.constant(1.0, dom)
        if self.kind == "exp":
            return self.laurent(-zeta, tol)
        out = LaurentFunction.constant(1.0, dom)
        for c, a in zip(zeta, self.bumps.flat()):
            if c != 0:
                out = product(out, reciprocal(1.0 + a * c, tol=tol))
        return out


def make_spray(bumps: BumpFamily, domain: AnnularDomain, kind: str = "product",
               safety: float = 0.5) -> Spray:
    """Attach the ball radius: |zeta_j| * sup|a_j| <= safety keeps v_zeta nonvanishing."""
    if kind not in ("product", "exp"):
        raise PreconditionError("spray kind must be 'product' or 'exp'", kind=kind)
    z = polar_grid(domain, 24, 256).ravel()
    sup = np.array([float(np.max(np.abs(evaluate(a, z, check=False)))) for a in bumps.flat()])
    if kind == "product":
        ball = safety / float(sup.max())
    else:
        ball = 20.0 / float(sup.sum())
    return Spray(bumps, ball, kind, sup)


# period map -----------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodTarget:
    values: np.ndarray      # (l, 2): integrals of f h dz and (g / h) dz per curve

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_2d(np.asarray(self.values, dtype=complex)))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def distance(self, other: "PeriodTarget") -> float:
        return float(np.max(np.abs(self.values - other.values))) if self.values.size else 0.0


HFunc = Callable[[np.ndarray], np.ndarray]


def _as_callable(h) -> HFunc:
    if isinstance(h, LaurentFunction):
        return lambda z: evaluate(h, z, check=False)
    if callable(h):
        return h
    return lambda z: np.full(np.shape(z), complex(h))


def period_map(h, f: LaurentFunction, g: LaurentFunction, basis: HomologyBasis,
               N: int = QUAD_NODES) -> PeriodTarget:
    """Per curve: (integral of f h dz, integral of g / h dz)."""
    hf = _as_callable(h)
    out = np.zeros((basis.count, 2), dtype=complex)
    for i, r in enumerate(basis.radii):
        z = r * np.exp(2j * np.pi * np.arange(N) / N)
        hv = hf(z)
        low = float(np.min(np.abs(hv)))
        if not low > 0:
            raise NonvanishingViolated("h vanishes on a homology curve", curve=i, min_modulus=low)
        fv = evaluate(f, z, check=False)
        gv = evaluate(g, z, check=False)
        w = z * (2j * np.pi / N)
        out[i, 0] = np.sum(fv * hv * w)
        out[i, 1] = np.sum(gv / hv * w)
    return PeriodTarget(out)


@dataclass(frozen=True)
class JacobianReport:
    matrix: np.ndarray              # (2l, 2kl)
    point_approx: np.ndarray        # same shape; columns (f(y), -g(y)) on their curve
    singular_values: np.ndarray

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1]) if self.singular_values.size else 0.0


def period_jacobian(spray: Spray, f: LaurentFunction, g: LaurentFunction, basis: HomologyBasis,
                    zeta: np.ndarray | None = None, base=None, N: int = QUAD_NODES) -> JacobianReport:
    """Exact quadrature Jacobian of zeta -> period_map(base * v_zeta)."""
    nb = spray.bumps.size
    zeta = np.zeros(nb, dtype=complex) if zeta is None else np.asarray(zeta, dtype=complex).ravel()
    bf = _as_callable(1.0 if base is None else base)
    J = np.zeros((2 * basis.count, nb), dtype=complex)
    for i, r in enumerate(basis.radii):
        z = r * np.exp(2j * np.pi * np.arange(N) / N)
        h = bf(z) * spray.values(zeta, z)
        fv = evaluate(f, z, check=False)
        gv = evaluate(g, z, check=False)
        w = z * (2j * np.pi / N)
        for j, dlog in enumerate(spray.partials(zeta, z)):
            J[2 * i, j] = np.sum(fv * h * dlog * w)
            J[2 * i + 1, j] = -np.sum(gv / h * dlog * w)
    approx = np.zeros_like(J)
    col = 0
    for i, row in enumerate(spray.bumps.params):
        for s in row:
            y = basis.gamma(i, s)
            approx[2 * i, col] = evaluate(f, y, check=False)
            approx[2 * i + 1, col] = -evaluate(g, y, check=False)
            col += 1
    sv = np.linalg.svd(J, compute_uv=False)
    return JacobianReport(J, approx, sv)


# Oka-type multiplier ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OkaProfile:
    """A fitted H with H ~ 0 on K' and H ~ 1 on Omega'; h = exp(phi_d * s * H)."""

    H: LaurentFunction
    mu: float
    log_scale: float          # log(1 + 1/mu)
    k_residual: float         # sup |H| on K' validation samples
    omega_residual: float     # sup |H - 1| on Omega' validation samples
    budget: float             # required bound on the fit residual
    amplitude: float          # scale actually used (log_scale when the budget holds)
    degree: int
    degrees_tried: tuple = ()

    @property
    def fit_residual(self) -> float:
        return max(self.k_residual, self.omega_residual)

    @property
    def budget_ok(self) -> bool:
        return self.fit_residual * self.log_scale < self.budget

    def h(self, phi_d: float, tol: float = 1e-12) -> LaurentFunction:
        if phi_d == 0 or self.amplitude == 0:
            return LaurentFunction.constant(1.0, self.H.domain)
        return exp_series(self.H * (phi_d * self.amplitude), tol=tol)

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "log_scale": self.log_scale,
            "k_residual": self.k_residual,
            "omega_residual": self.omega_residual,
            "budget": self.budget,
            "budget_ok": self.budget_ok,
            "amplitude": self.amplitude,
            "degree": self.degree,
            "degrees_tried": list(self.degrees_tried),
        }


def oka_budget(mu: float) -> float:
    """Bound on residual * log(1 + 1/mu) that keeps both Oka clauses."""
    ell = math.log1p(1.0 / mu)
    return min(mu / 2.0, ell / 4.0)


def _k_samples(K: AnnularDomain, n: int, grow: float) -> list[np.ndarray]:
    r_lo = K.r_in * (1 - grow)
    r_hi = K.r_out * (1 + grow)
    rs = [r_lo, math.sqrt(r_lo * r_hi), r_hi] if K.r_in > 0 else [r_hi * 0.5, r_hi]
    return [r * np.exp(2j * np.pi * (np.arange(n) + 0.25) / n) for r in rs]


def _omega_samples(labs: Sequence[Labyrinth], n: int, grow: float, shift: float) -> list[np.ndarray]:
    out = []
    for lab in labs:
        h = 0.5 * lab.delta * (1 + grow)
        beta = lab.beta * (1 - grow)
        for c, g in zip(lab.radii, lab.gate_angles):
            th = g + beta + (2 * np.pi - 2 * beta) * (np.arange(n) + shift) / n
            for r in (c - h, c, c + h):
                out.append(r * np.exp(1j * th))
            # the two short sides of the sector
            rs = np.linspace(c - h, c + h, 9)
            out.append(rs * np.exp(1j * (g + beta)))
            out.append(rs * np.exp(1j * (g - beta)))
    return out


def fit_oka_profile(K: AnnularDomain, labs: Sequence[Labyrinth], L: AnnularDomain, mu: float,
                    degrees: Sequence[int] = (8, 16, 24, 32, 48, 64), ridge: float = 1e-12,
                    samples: int = 512, grow: float = 0.02, strict: bool = True) -> OkaProfile:
    """Least-squares fit of the log-target once, with degree escalation.

    With ``strict`` an unmet budget raises DegreeExhausted.  Otherwise the
    amplitude is lowered until the K-clause holds, which keeps the
    multiplier close to 1 on K but forfeits the size bound on Omega.
    """
    if not 0 < mu < 1:
        raise PreconditionError("mu must lie in (0, 1)", mu=mu)
    ell = math.log1p(1.0 / mu)
    budget = oka_budget(mu)
    targets = [CurveSamples(z, 0.0) for z in _k_samples(K, samples, grow)]
    targets += [CurveSamples(z, 1.0) for z in _omega_samples(labs, samples, grow, 0.0)]
    kval = np.concatenate(_k_samples(K, 2 * samples + 1, grow))
    oval = np.concatenate(_omega_samples(labs, 2 * samples + 1, grow, 0.5))
    best = None
    tried = []
    for m in degrees:
        H = least_squares_fit(targets, m, ridge=ridge, domain=L)
        kr = float(np.max(np.abs(evaluate(H, kval, check=False))))
        orr = float(np.max(np.abs(evaluate(H, oval, check=False) - 1.0))) if oval.size else 0.0
        tried.append(m)
        cand = (max(kr, orr), H, kr, orr, m)
        if best is None or cand[0] < best[0]:
            best = cand
        if cand[0] * ell < budget:
            break
    res, H, kr, orr, m = best
    ok = res * ell < budget
    if not ok and strict:
        raise DegreeExhausted("Oka fit residual exceeds budget at the degree cap",
                              degree=m, achieved_residual=res, budget=budget / ell)
    amplitude = ell if ok else min(ell, 0.5 * mu / max(kr, 1e-300))
    return OkaProfile(H.with_residual(res), mu, ell, kr, orr, budget, amplitude, m, tuple(tried))


def build_oka_function(K: AnnularDomain, lab, mu: float, phi_d: float, degree: int | None = None,
                       L: AnnularDomain | None = None, strict: bool = True) -> LaurentFunction:
    """Convenience wrapper: fit the profile then return exp(phi_d * log(1+1/mu) * H)."""
    labs = lab if isinstance(lab, (list, tuple)) else [lab]
    if L is None:
        outer = max(l.A.r_out for l in labs)
        inner = min([K.r_in] + [l.A.r_in for l in labs])
        L = AnnularDomain(inner, outer)
    degrees = (degree,) if degree is not None else (8, 16, 24, 32, 48, 64)
    return fit_oka_profile(K, labs, L, mu, degrees, strict=strict).h(phi_d)


# Newton --------------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonResult:
    zeta: np.ndarray
    iterations: int
    residual: float
    trace: tuple
    converged: bool

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "trace": list(self.trace),
            "converged": self.converged,
            "zeta_norm": float(np.max(np.abs(self.zeta))) if self.zeta.size else 0.0,
        }


def solve_periods(w, spray: Spray, f: LaurentFunction, g: LaurentFunction, basis: HomologyBasis,
                  target: PeriodTarget, tol: float = 1e-11, max_iter: int = 20,
                  continuation: int = 1, N: int = QUAD_NODES) -> NewtonResult:
    """Newton with minimum-norm steps on zeta -> period_map(w v_zeta) - target.

    ``continuation`` > 1 walks the target in equal steps from the current
    periods, solving each intermediate problem before the next.
    """
    nb = spray.bumps.size
    zeta = np.zeros(nb, dtype=complex)
    wf = _as_callable(w)

    def h_of(zv):
        return lambda z: wf(z) * spray.values(zv, z)

    goal = target.flat()
    current = period_map(h_of(zeta), f, g, basis, N).flat()
    res = float(np.max(np.abs(current - goal))) if goal.size else 0.0
    trace = [res]
    if res < tol:
        return NewtonResult(zeta, 0, res, tuple(trace), True)
    start = current.copy()
    iters = 0
    for step in range(1, continuation + 1):
        sub_goal = start + (goal - start) * (step / continuation)
        stall = 0
        while True:
            F = period_map(h_of(zeta), f, g, basis, N).flat() - sub_goal
            r_now = float(np.max(np.abs(F)))
            last = step == continuation
            if r_now < (tol if last else max(tol, 1e-6)):
                break
            if iters >= max_iter:
                raise NewtonFailed("iteration limit reached", iterations=iters, residual=r_now,
                                   trace=trace)
            J = period_jacobian(spray, f, g, basis, zeta, w, N).matrix
            dz = -np.linalg.pinv(J, rcond=1e-12) @ F
            t = 1.0
            for _ in range(8):
                trial = zeta + t * dz
                if np.max(np.abs(trial)) > spray.ball_radius:
                    t *= 0.5
                    continue
                try:
                    Ft = period_map(h_of(trial), f, g, basis, N).flat() - sub_goal
                except NonvanishingViolated:
                    t *= 0.5
                    continue
                if float(np.max(np.abs(Ft))) < r_now:
                    break
                t *= 0.5
            else:
                raise NewtonFailed("no descent step inside the spray ball", iterations=iters,
                                   residual=r_now, ball_radius=spray.ball_radius, trace=trace)
            zeta = trial
            iters += 1
            r_new = float(np.max(np.abs(Ft)))
            trace.append(r_new)
            stall = stall + 1 if r_new > 0.5 * r_now else 0
            if stall >= 4:
                raise NewtonFailed("residual stagnates", iterations=iters, residual=r_new,
                                   trace=trace)
    final = float(np.max(np.abs(period_map(h_of(zeta), f, g, basis, N).flat() - goal)))
    return NewtonResult(zeta, iters, final, tuple(trace), final < tol)


# assembly ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Clause:
    name: str
    ok: bool
    value: float | None
    bound: float | None

    @property
    def margin(self) -> float | None:
        if self.value is None or self.bound is None:
            return None
        return self.bound - self.value if self.name in ("c", "d") else self.value - self.bound

    def as_dict(self) -> dict:
        return {"ok": self.ok, "value": self.value, "bound": self.bound, "margin": self.margin}


@dataclass(frozen=True, eq=False)
class AssembledH:
    h: LaurentFunction
    clauses: dict

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.clauses.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.clauses.items() if not c.ok]


def assemble_h(oka: LaurentFunction, spray: Spray, zeta, *, f: LaurentFunction, g: LaurentFunction,
               basis: HomologyBasis, K: AnnularDomain, labs: Sequence[Labyrinth] = (),
               eps: float = 0.3, phi_d: float = 1.0, target: PeriodTarget | None = None,
               period_tol: float = 1e-9, strict: bool = True,
               oka_is_exact_one: bool | None = None) -> AssembledH:
    """h = oka * v_zeta together with the five checked clauses (a)-(e).

    (a) nowhere vanishing on the domain, (b) h == 1 exactly when phi_d = 0,
    (c) period exactness, (d) |h - 1| < eps on K, (e) |h| > 1/eps on Omega
    (required only where phi_d = 1).
    """
    zeta = np.asarray(zeta, dtype=complex).ravel()
    if oka.is_one() and not np.any(zeta):
        h = LaurentFunction.constant(1.0, oka.domain)
    else:
        h = product(oka, spray.laurent(zeta))
    clauses = {}
    try:
        low = check_nonvanishing(lambda z: evaluate(h, z, check=False), h.domain)
        clauses["a"] = Clause("a", True, low, 0.0)
    except NonvanishingViolated as exc:
        clauses["a"] = Clause("a", False, exc.details.get("min_modulus"), 0.0)
    if phi_d == 0:
        clauses["b"] = Clause("b", h.is_one(), None, None)
    else:
        clauses["b"] = Clause("b", True, None, None)
    if target is None:
        target = period_map(1.0, f, g, basis)
    dev = period_map(h, f, g, basis).distance(target) if clauses["a"].ok else math.inf
    clauses["c"] = Clause("c", dev < period_tol, dev, period_tol)
    kz = np.concatenate(_k_samples(K, 512, 0.0))
    dk = float(np.max(np.abs(evaluate(h, kz, check=False) - 1.0)))
    clauses["d"] = Clause("d", dk < eps, dk, eps)
    oz = np.concatenate([lab.sample_omega() for lab in labs]) if labs else np.zeros(0, complex)
    if phi_d == 1 and oz.size:
        hm = float(np.min(np.abs(evaluate(h, oz, check=False))))
        clauses["e"] = Clause("e", hm > 1.0 / eps, hm, 1.0 / eps)
    else:
        clauses["e"] = Clause("e", True, None, None)
    out = AssembledH(h, clauses)
    if strict and not out.ok:
        raise HInvalid("assembled multiplier fails clauses", failed=out.failed(),
                       clauses={k: c.as_dict() for k, c in clauses.items()})
    return out


def zeta_lipschitz(zetas: Sequence[np.ndarray], coords: np.ndarray, pairs: Sequence[tuple[int, int]]) -> float:
    """Largest |zeta(d) - zeta(d')| / |d - d'| over the given adjacent pairs."""
    best = 0.0
    for i, j in pairs:
        dist = float(np.linalg.norm(coords[i] - coords[j]))
        if dist > 0:
            best = max(best, float(np.max(np.abs(zetas[i] - zetas[j]))) / dist)
    return best

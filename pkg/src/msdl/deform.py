"""López-Ros deformations that push the boundary away while fixing flux.

One stage, for one spinor pair: pick host annuli in L minus K where |Psi| is
bounded below, build a gated labyrinth in each, fit a multiplier that is
close to 1 on K and large on the labyrinth, correct its periods with a
spray, and apply f -> f h, g -> g / h.  The boundary distance is then
certified from sampled lower bounds of |Psi|, |f| and |h|.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from sklearn.base import BaseEstimator

from .domain import AnnularDomain, ParameterGrid, homology_basis, polar_grid, urysohn_weights
from .errors import (
    HInvalid,
    InexactPeriods,
    MSDLError,
    NoCertificate,
    NonvanishingViolated,
    PreconditionError,
)
from .funspace import (
    LaurentFunction,
    check_nonvanishing,
    contour_integral,
    evaluate,
    product,
    reciprocal,
)
from .labyrinth import Labyrinth, StarCertificate, build_labyrinth, ring_count, verify_star
from .spray import (
    OkaProfile,
    PeriodTarget,
    assemble_h,
    build_bumps,
    fit_oka_profile,
    make_spray,
    period_map,
    select_basis_points,
    solve_periods,
)
from .weierstrass import (
    Immersion,
    WeierstrassData,
    conformality_residual,
    flux,
    induced_speed,
    integrate_immersion,
    recombine,
    select_pair,
    spinor_split,
)

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


# López-Ros step ----------------------------------------------------------------

def lopez_ros_step(w: WeierstrassData, h: LaurentFunction, a: int, b: int,
                   h_inv: LaurentFunction | None = None, period_tol: float = 1e-9,
                   target: np.ndarray | None = None) -> WeierstrassData:
    """Replace (phi_a, phi_b) by the pair built from f h and g / h.

    ``h`` identical to 1 returns ``w`` itself.  The step is rejected when the
    periods of f h dz and g / h dz miss those of f dz and g dz (or the
    explicit ``target``, shape (l, 2)) by more than ``period_tol``.
    """
    if h.is_one():
        return w
    f, g, _ = spinor_split(w, a, b)
    check_nonvanishing(lambda z: evaluate(h, z, check=False), w.domain)
    if h_inv is None:
        h_inv = reciprocal(h, tol=1e-13)
    fh = product(f, h)
    gh = product(g, h_inv)
    worst = 0.0
    for i, r in enumerate(homology_basis(w.domain).radii):
        for j, (old, new) in enumerate(((f, fh), (g, gh))):
            N = max(1024, 2 * max(old.degree, new.degree) + 8)
            if target is None:
                dev = abs(contour_integral(new - old, r, N))
            else:
                dev = abs(contour_integral(new, r, N) - target[i][j])
            worst = max(worst, dev)
    if worst > period_tol:
        raise InexactPeriods("multiplier misses the required periods", residual=worst, tol=period_tol)
    pa, pb = recombine(fh, gh)
    return w.replace(a, pa).replace(b, pb)


# certificates ------------------------------------------------------------------

@dataclass(frozen=True)
class DeformationCertificate:
    """Sampled constants for one host annulus and the bound they imply."""

    Lambda: float
    rho: float
    sigma: float
    lambda_: float
    eps0: float
    h_min_on_Omega: float
    star: StarCertificate
    certified_bound: float

    @property
    def threshold(self) -> float:
        return 2.0 * SQRT2 * self.Lambda / math.sqrt(self.rho) if self.rho > 0 else math.inf

    @property
    def h_required(self) -> float:
        return SQRT2 * 2.0 * self.Lambda / (self.lambda_ * self.sigma) if self.sigma > 0 else math.inf

    def cases(self) -> tuple[float, float]:
        """Length lower bounds: long total crossing, long stay in Omega."""
        c1 = math.sqrt(self.rho / 2.0) * self.star.analytic_bound
        c2 = self.lambda_ * self.sigma * self.h_min_on_Omega / 2.0
        return c1, c2

    def as_dict(self) -> dict:
        c1, c2 = self.cases()
        return {
            "Lambda": self.Lambda,
            "rho": self.rho,
            "sigma": self.sigma,
            "lambda": self.lambda_,
            "eps0": self.eps0,
            "h_min_on_Omega": self.h_min_on_Omega,
            "h_required": self.h_required,
            "threshold": self.threshold,
            "case_crossing": c1,
            "case_omega": c2,
            "certified_bound": self.certified_bound,
            "star": self.star.as_dict(),
        }


def _annulus_samples(A: AnnularDomain, n_r: int = 16, n_theta: int = 256) -> np.ndarray:
    return polar_grid(A, n_r, n_theta, shifted=True).ravel()


def certify_boundary_distance(w_new: WeierstrassData, cert: DeformationCertificate, A: AnnularDomain,
                              lab: Labyrinth, h: LaurentFunction, pair: tuple[int, int],
                              star_trials: int = 0, seed: int = 0) -> float:
    """Re-check every clause by sampling and return the certified bound.

    Raises NoCertificate listing failed clauses with their margins.
    """
    a, b = pair
    f_new, _, Psi = spinor_split(w_new, a, b)
    zA = _annulus_samples(A)
    zO = lab.sample_omega()
    failed = {}
    rho_obs = float(np.min(np.abs(evaluate(Psi, zA, check=False))))
    if not (cert.rho > 0 and rho_obs >= cert.rho):
        failed["rho"] = rho_obs - cert.rho
    hv = np.abs(evaluate(h, zO, check=False))
    f_old = np.abs(evaluate(f_new, zO, check=False)) / hv
    sig_obs = float(np.min(f_old))
    if not (cert.sigma > 0 and sig_obs >= cert.sigma * (1 - 1e-12)):
        failed["sigma"] = sig_obs - cert.sigma
    hmin_obs = float(np.min(hv))
    if hmin_obs < cert.h_min_on_Omega * (1 - 1e-12):
        failed["h_min"] = hmin_obs - cert.h_min_on_Omega
    if not cert.h_min_on_Omega > cert.h_required:
        failed["h_bound"] = cert.h_min_on_Omega - cert.h_required
    star = cert.star
    if star_trials:
        star = verify_star(lab, cert.lambda_, cert.threshold, star_trials, seed,
                           raise_on_violation=False)
    if star.violations or star.analytic_bound < cert.threshold:
        failed["star"] = star.analytic_bound - cert.threshold
    bound = min(cert.cases())
    if bound < cert.Lambda:
        failed["bound"] = bound - cert.Lambda
    if failed:
        raise NoCertificate("boundary distance not certified", failed=sorted(failed),
                            margins={k: float(v) for k, v in failed.items()})
    return bound


# distance estimate ----------------------------------------------------------------

def estimate_distance(im: Immersion, mesh_resolution: tuple[int, int] = (64, 512)) -> float:
    """Shortest path from the base point to the boundary on a polar 8-neighbour graph.

    Edge weights are the induced speed at the edge midpoint times the
    Euclidean edge length, so the value approaches the intrinsic distance
    from above as the mesh is refined.
    """
    n_r, n_t = mesh_resolution
    if n_r < 16 or n_t < 64:
        raise PreconditionError("mesh resolution must be at least (16, 64)", resolution=[n_r, n_t])
    D = im.data.domain
    r = np.linspace(D.r_in, D.r_out, n_r)
    th = 2 * np.pi * np.arange(n_t) / n_t
    Z = r[:, None] * np.exp(1j * th)[None, :]
    idx = np.arange(n_r * n_t).reshape(n_r, n_t)
    src, dst = [], []
    for dr, dt in ((0, 1), (1, 0), (1, 1), (1, -1)):
        i0 = idx[: n_r - dr]
        i1 = np.roll(idx[dr:], -dt, axis=1)
        src.append(i0.ravel())
        dst.append(i1.ravel())
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    zf = Z.ravel()
    za, zb = zf[src], zf[dst]
    mid_r = 0.5 * (np.abs(za) + np.abs(zb))
    mid = mid_r * np.exp(1j * (np.angle(za) + 0.5 * np.angle(zb / za)))
    wts = induced_speed(im.data, mid, check=False) * np.abs(zb - za)
    n = n_r * n_t
    G = coo_matrix((wts, (src, dst)), shape=(n, n)).tocsr()
    start = int(np.argmin(np.abs(zf - im.base_point)))
    dist = dijkstra(G, directed=False, indices=start)
    boundary = np.concatenate([idx[0], idx[-1]]) if not D.is_disc else idx[-1]
    return float(np.min(dist[boundary]))


def k_sample_points(K: AnnularDomain, count: int = 500) -> np.ndarray:
    """count = n_r * n_theta points on a shifted polar grid of K (20 x 25 for 500)."""
    n_r = max(2, int(round(math.sqrt(count * 0.8))))
    n_t = max(4, count // n_r)
    return polar_grid(K, n_r, n_t, shifted=True).ravel()


def sup_change(before: Immersion, after: Immersion, K: AnnularDomain, count: int = 500) -> float:
    z = k_sample_points(K, count)
    u0 = integrate_immersion(before, z)
    u1 = integrate_immersion(after, z)
    return float(np.max(np.abs(u1 - u0)))


# host annuli -----------------------------------------------------------------------

@dataclass(frozen=True)
class HostAnnulus:
    domain: AnnularDomain
    rho: float
    best_radius: float

    def as_dict(self) -> dict:
        return {"domain": self.domain.as_dict(), "rho": self.rho, "best_radius": self.best_radius}


def find_host_annulus(psis: Sequence[LaurentFunction], component: AnnularDomain,
                      gap_frac: float = 0.05, n_scan: int = 96, n_theta: int = 256) -> HostAnnulus:
    """Widest sub-annulus around the circle maximising min |Psi| over all members.

    Thickening continues while every circle keeps min |Psi| above half the best.
    """
    gap = gap_frac * component.width
    radii = np.linspace(component.r_in + gap, component.r_out - gap, n_scan)
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    circ = np.exp(1j * th)
    mins = np.array([min(float(np.min(np.abs(evaluate(p, r * circ, check=False)))) for p in psis)
                     for r in radii])
    k = int(np.argmax(mins))
    best = mins[k]
    if not best > 0:
        raise NoCertificate("Psi vanishes on every candidate circle", failed=["rho"],
                            component=component.as_dict())
    lo = hi = k
    while lo > 0 and mins[lo - 1] > 0.5 * best:
        lo -= 1
    while hi < n_scan - 1 and mins[hi + 1] > 0.5 * best:
        hi += 1
    if lo == hi:
        lo, hi = max(0, k - 1), min(n_scan - 1, k + 1)
    A = AnnularDomain(float(radii[lo]), float(radii[hi]))
    zA = _annulus_samples(A)
    rho = min(float(np.min(np.abs(evaluate(p, zA, check=False)))) for p in psis)
    return HostAnnulus(A, rho, float(radii[k]))


# full stage ----------------------------------------------------------------------------

@dataclass
class DeformParams:
    beta: float = 0.1
    lambda_frac: float = 0.75
    gap_frac: float = 0.05
    oka_eps: float = 0.3
    oka_degrees: tuple = (8, 16, 24, 32, 48, 64)
    oka_ridge: float = 1e-12
    oka_strict: bool = False
    bump_tau: float = 0.01
    bump_degree: int = 4
    basis_k: int = 1
    spray_kind: str = "product"
    period_tol: float = 1e-9
    newton_tol: float = 1e-11
    newton_max_iter: int = 10
    star_trials: int = 1000
    max_rings: int = 128
    oka_samples: int = 256
    k_samples: int = 500
    mesh: tuple = (64, 512)
    estimate: bool = True
    mu_halvings: int = 6
    null_tol: float = 1e-3
    seed: int = 0
    strict_certificates: bool = False

    def as_dict(self) -> dict:
        d = asdict(self)
        d["oka_degrees"] = list(self.oka_degrees)
        d["mesh"] = list(self.mesh)
        return d


@dataclass
class NodeRecord:
    node: int
    weight: float
    pair: tuple
    sup_change: float = 0.0
    flux_in: list = field(default_factory=list)
    flux_out: list = field(default_factory=list)
    flux_change: float = 0.0
    conformality: float = 0.0
    newton: dict | None = None
    clauses: dict | None = None
    certificates: list = field(default_factory=list)
    certified_bound: float | None = None
    certified: bool | None = None
    failure: dict | None = None
    distance_estimate: float | None = None
    identity: bool = True

    def as_dict(self) -> dict:
        return {
            "node": self.node,
            "weight": self.weight,
            "pair": list(self.pair),
            "identity": self.identity,
            "sup_change": self.sup_change,
            "flux_in": self.flux_in,
            "flux_out": self.flux_out,
            "flux_change": self.flux_change,
            "conformality": self.conformality,
            "newton": self.newton,
            "clauses": self.clauses,
            "certificates": self.certificates,
            "certified_bound": self.certified_bound,
            "certified": self.certified,
            "failure": self.failure,
            "distance_estimate": self.distance_estimate,
        }


@dataclass
class DeformResult:
    family: list
    records: list
    substages: list

    @property
    def all_certified(self) -> bool:
        return all(r.certified for r in self.records if r.certified is not None)

    def gated(self) -> list:
        return [r for r in self.records if r.certified is not None]


@dataclass
class _Setup:
    """Everything shared by the nodes of one cover element."""

    pair: tuple
    hosts: list
    labs: list
    stars: list
    sigma: float
    lambda_: float
    mu: float
    profile: OkaProfile
    spray: object
    K: AnnularDomain
    Lambda: float
    params: DeformParams

    def as_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "hosts": [h.as_dict() for h in self.hosts],
            "labyrinths": [l.as_dict() for l in self.labs],
            "stars": [s.as_dict() for s in self.stars],
            "sigma": self.sigma,
            "lambda": self.lambda_,
            "mu": self.mu,
            "oka": self.profile.as_dict(),
            "spray": {"kind": self.spray.kind, "ball_radius": self.spray.ball_radius,
                      "bumps": self.spray.bumps.size, "degree": self.spray.bumps.degree},
        }


def _prepare(members: Sequence[WeierstrassData], pair, K, L, Lambda, eps, ell, p: DeformParams,
             mu: float | None = None) -> _Setup:
    a, b = pair
    splits = [spinor_split(w, a, b) for w in _unique(members)]
    hosts, labs, stars = [], [], []
    for comp in L.components_outside(K):
        host = find_host_annulus([s.Psi for s in splits], comp, p.gap_frac)
        A = host.domain
        thr = 2 * SQRT2 * Lambda / math.sqrt(host.rho)
        N = ring_count(thr, p.beta, A.r_in)
        if N > p.max_rings:
            log.warning("host %s needs %d rings, capped at %d; the gate bound will fall short",
                        A.as_dict(), N, p.max_rings)
            N = p.max_rings
        lam = p.lambda_frac * A.width / (2 * N + 1)
        lab, star = build_labyrinth(A, thr, lam, p.beta, p.max_rings)
        star = verify_star(lab, lam, thr, p.star_trials, p.seed, raise_on_violation=False)
        hosts.append(host)
        labs.append(lab)
        stars.append(star)
    lam = min(s.lambda_ for s in stars) if stars else 0.0
    zO = np.concatenate([l.sample_omega() for l in labs])
    sigma = min(float(np.min(np.abs(evaluate(s.f, zO, check=False)))) for s in splits)
    h_req = 2 * SQRT2 * Lambda / (lam * sigma) if sigma > 0 and lam > 0 else math.inf
    if mu is None:
        mu = min(p.oka_eps, eps / (3 * ell), 1.0 / (2.0 * h_req) if h_req < math.inf else 1.0)
    profile = fit_oka_profile(K, labs, L, mu, p.oka_degrees, ridge=p.oka_ridge,
                              samples=p.oka_samples, strict=p.oka_strict)
    basis = homology_basis(K)
    bp = select_basis_points([s.f for s in splits], [s.g for s in splits], basis, p.basis_k)
    bumps = build_bumps(basis, bp.params, p.bump_tau, p.bump_degree, L)
    spray = make_spray(bumps, L, p.spray_kind)
    return _Setup(tuple(pair), hosts, labs, stars, sigma, lam, mu, profile, spray, K, Lambda, p)


def _unique(members):
    seen, out = set(), []
    for w in members:
        if id(w) not in seen:
            seen.add(id(w))
            out.append(w)
    return out


def _deform_one(w: WeierstrassData, phi: float, setup: _Setup, x0: complex, gated: bool,
                seed: int) -> tuple:
    """Deform one member; returns (new data, partial record dict)."""
    p = setup.params
    a, b = setup.pair
    rec: dict = {}
    if phi == 0:
        return w, rec
    f, g, _ = spinor_split(w, a, b)
    basis = homology_basis(setup.K)
    target = period_map(1.0, f, g, basis)
    oka = setup.profile.h(phi)
    oka_inv = setup.profile.h(-phi)
    newton = solve_periods(oka, setup.spray, f, g, basis, target, tol=p.newton_tol,
                           max_iter=p.newton_max_iter)
    rec["newton"] = newton.as_dict()
    asm = assemble_h(oka, setup.spray, newton.zeta, f=f, g=g, basis=basis, K=setup.K,
                     labs=setup.labs, eps=setup.mu, phi_d=phi, target=PeriodTarget(target.values),
                     period_tol=p.period_tol, strict=False)
    rec["clauses"] = {k: c.as_dict() for k, c in asm.clauses.items()}
    if not (asm.clauses["a"].ok and asm.clauses["c"].ok):
        raise HInvalid("multiplier vanishes or misses the periods", failed=asm.failed(),
                       clauses=rec["clauses"])
    h = asm.h
    h_inv = product(oka_inv, setup.spray.laurent_inverse(newton.zeta, tol=1e-13))
    w_new = lopez_ros_step(w, h, a, b, h_inv=h_inv, period_tol=p.period_tol)
    if gated:
        certs, bounds, failure = [], [], None
        for host, lab, star in zip(setup.hosts, setup.labs, setup.stars):
            zO = lab.sample_omega()
            hmin = float(np.min(np.abs(evaluate(h, zO, check=False))))
            cert = DeformationCertificate(setup.Lambda, host.rho, setup.sigma, star.lambda_,
                                          setup.mu, hmin, star, 0.0)
            cert = replace(cert, certified_bound=min(cert.cases()))
            certs.append(cert.as_dict())
            try:
                bounds.append(certify_boundary_distance(w_new, cert, host.domain, lab, h, setup.pair))
            except NoCertificate as exc:
                failure = failure or {"host": host.domain.as_dict(), **exc.to_dict()}
                bounds.append(cert.certified_bound)
        rec["certificates"] = certs
        rec["certified_bound"] = min(bounds)
        rec["certified"] = failure is None
        rec["failure"] = failure
    return w_new, rec


def _job(args):
    return _deform_one(*args)


def increase_distance(family: Sequence[WeierstrassData], grid: ParameterGrid, K: AnnularDomain,
                      x0: complex, Lambda: float, eps: float, r_cut: float, *, stage: int | None = None,
                      params: DeformParams | None = None, jobs: int = 1) -> DeformResult:
    """Deform every grid member so the gated nodes get a certified boundary distance.

    Fixed nodes and nodes with Urysohn weight 0 come back as the very same
    objects.  Certificate failures are recorded per node; they raise only
    with ``params.strict_certificates``.
    """
    p = params or DeformParams()
    if eps <= 0:
        raise PreconditionError("eps must be positive", eps=eps)
    if len(family) != grid.n_nodes:
        raise PreconditionError("family size must match the grid", family=len(family),
                                nodes=grid.n_nodes)
    L = family[0].domain
    if not K.strictly_inside(L):
        raise PreconditionError("K must lie inside the domain", K=K.as_dict(), L=L.as_dict())
    cover = select_pair(family, p.null_tol)
    ell = len(cover.pairs)
    fixed = grid.fixed_nodes()
    gated_all = grid.gated_nodes(stage, r_cut)
    out = list(family)
    records = [NodeRecord(i, 0.0, cover.pair_of(i)) for i in range(grid.n_nodes)]
    substages = []
    claimed: set = set()
    for l, (pair, members) in enumerate(zip(cover.pairs, cover.cover)):
        own = set(members) - claimed
        claimed |= own
        Z = (gated_all & own) - fixed
        Y = set(fixed) | (set(range(grid.n_nodes)) - own)
        weights = urysohn_weights(grid, Y, Z)
        active = [i for i in range(grid.n_nodes) if weights[i] > 0]
        if not active:
            substages.append({"pair": list(pair), "active": 0})
            continue
        mu = None
        for attempt in range(p.mu_halvings + 1):
            setup = _prepare([out[i] for i in active], pair, K, L, Lambda, eps, ell, p, mu)
            results = _run_nodes(out, active, weights, setup, x0, Z, p.seed, jobs)
            worst = 0.0
            for i in active:
                worst = max(worst, sup_change(Immersion(out[i], x0), Immersion(results[i][0], x0), K,
                                              p.k_samples))
            if worst < eps / ell:
                break
            log.info("stage %s pair %s: sup-change %.3g above %.3g, halving mu", stage, pair, worst,
                     eps / ell)
            mu = setup.mu / 2
        sub = setup.as_dict()
        sub.update({"active": len(active), "sup_change": worst, "budget": eps / ell,
                    "mu_attempts": attempt + 1})
        substages.append(sub)
        for i in active:
            w_new, rec = results[i]
            r = records[i]
            r.weight = float(weights[i])
            r.pair = tuple(pair)
            r.identity = w_new is out[i]
            r.sup_change = sup_change(Immersion(out[i], x0), Immersion(w_new, x0), K, p.k_samples)
            for key, val in rec.items():
                setattr(r, key, val)
            out[i] = w_new
    for i, r in enumerate(records):
        fin = flux(family[i])
        fout = flux(out[i])
        r.flux_in = fin.tolist()
        r.flux_out = fout.tolist()
        r.flux_change = fin.distance(fout)
        r.conformality = conformality_residual(out[i])
    if p.estimate:
        cache: dict = {}
        for r in records:
            if r.certified is not None:
                key = id(out[r.node])
                if key not in cache:
                    cache[key] = estimate_distance(Immersion(out[r.node], x0), p.mesh)
                r.distance_estimate = cache[key]
    res = DeformResult(out, records, substages)
    if p.strict_certificates and not res.all_certified:
        bad = [r.node for r in res.gated() if not r.certified]
        raise NoCertificate("certificates failed at gated nodes", nodes=bad, stage=stage,
                            failure=records[bad[0]].failure)
    return res


def _run_nodes(out, active, weights, setup, x0, Z, seed, jobs):
    """Deform active nodes; identical (member, weight) inputs are computed once."""
    keys, tasks = {}, []
    for i in active:
        key = (id(out[i]), float(weights[i]), i in Z)
        if key not in keys:
            keys[key] = len(tasks)
            tasks.append((out[i], float(weights[i]), setup, x0, i in Z, seed))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = list(ex.map(_job, tasks))
    else:
        done = [_job(t) for t in tasks]
    results = {}
    for i in active:
        key = (id(out[i]), float(weights[i]), i in Z)
        results[i] = done[keys[key]]
    return results


# estimator ----------------------------------------------------------------------------------

class DistanceIncreaser(BaseEstimator):
    """Estimator wrapper around ``increase_distance``.

    ``fit(family, grid)`` stores the deformed family in ``family_`` and the
    per-node records in ``records_``.
    """

    def __init__(self, K_in: float = 0.8, K_out: float = 1.25, x0: complex = 1.0,
                 Lambda: float = 10.0, eps: float = 0.1, r_cut: float = 0.0, stage: int | None = None,
                 beta: float = 0.1, oka_eps: float = 0.3, star_trials: int = 1000, seed: int = 0,
                 estimate: bool = True, jobs: int = 1):
        self.K_in = K_in
        self.K_out = K_out
        self.x0 = x0
        self.Lambda = Lambda
        self.eps = eps
        self.r_cut = r_cut
        self.stage = stage
        self.beta = beta
        self.oka_eps = oka_eps
        self.star_trials = star_trials
        self.seed = seed
        self.estimate = estimate
        self.jobs = jobs

    def _params(self) -> DeformParams:
        return DeformParams(beta=self.beta, oka_eps=self.oka_eps, star_trials=self.star_trials,
                            seed=self.seed, estimate=self.estimate)

    def fit(self, family, grid: ParameterGrid):
        res = increase_distance(family, grid, AnnularDomain(self.K_in, self.K_out), self.x0,
                                self.Lambda, self.eps, self.r_cut, stage=self.stage,
                                params=self._params(), jobs=self.jobs)
        self.family_ = res.family
        self.records_ = res.records
        self.substages_ = res.substages
        return self

    def transform(self, family=None):
        return self.family_

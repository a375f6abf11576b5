"""Concentric gated rings inside a host annulus and the crossing-length test.

Ring i is the band |r - c_i| <= delta / 2.  Its gate is the sector of
half-width beta around angle 0 (odd rings) or pi (even rings); Omega is the
union of the bands minus their gates.  A path crossing the host annulus
either stays inside Omega for more than lambda, or threads every gate and
therefore travels at least (N - 1)(pi - 2 beta) r_in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import AnnularDomain
from .errors import InfeasibleLabyrinth, PreconditionError, StarViolated


@dataclass(frozen=True)
class Labyrinth:
    A: AnnularDomain
    radii: tuple[float, ...]
    delta: float
    beta: float
    gate_angles: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.gate_angles:
            object.__setattr__(self, "gate_angles",
                               tuple(0.0 if i % 2 == 0 else math.pi for i in range(len(self.radii))))

    @property
    def N(self) -> int:
        return len(self.radii)

    def bands(self) -> list[tuple[float, float]]:
        h = 0.5 * self.delta
        return [(c - h, c + h) for c in self.radii]

    def membership(self, z) -> np.ndarray:
        """True where z lies in Omega (closed ring-sectors outside the gates)."""
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        ang = np.angle(z)
        if not self.radii:
            return np.zeros(z.shape, dtype=bool)
        h = 0.5 * self.delta
        # bands are disjoint, so only the nearest ring centre matters
        radii = np.asarray(self.radii)
        k = np.clip(np.searchsorted(radii, r), 1, len(radii) - 1) if len(radii) > 1 else np.zeros(r.shape, int)
        if len(radii) > 1:
            k = np.where(np.abs(r - radii[k - 1]) <= np.abs(r - radii[k]), k - 1, k)
        g = np.asarray(self.gate_angles)[k]
        off = np.abs((ang - g + np.pi) % (2 * np.pi) - np.pi)
        return (np.abs(r - radii[k]) <= h) & (off >= self.beta)

    def sample_omega(self, n_radial: int = 3, n_angular: int = 256) -> np.ndarray:
        """Points covering Omega: a few radii per band times angles off the gate."""
        pts = []
        h = 0.5 * self.delta
        for c, g in zip(self.radii, self.gate_angles):
            rs = np.linspace(c - h, c + h, n_radial)
            th = g + np.linspace(self.beta, 2 * np.pi - self.beta, n_angular)
            pts.append((rs[:, None] * np.exp(1j * th)[None, :]).ravel())
        return np.concatenate(pts) if pts else np.zeros(0, dtype=complex)

    def as_dict(self) -> dict:
        return {
            "host": self.A.as_dict(),
            "rings": self.N,
            "radii": list(self.radii),
            "delta": self.delta,
            "beta": self.beta,
            "gate_angles": list(self.gate_angles),
        }


@dataclass(frozen=True)
class StarCertificate:
    lambda_: float
    threshold: float
    analytic_bound: float
    sampled_min: float | None = None
    trials: int = 0
    violations: int = 0

    @property
    def valid(self) -> bool:
        return self.analytic_bound >= self.threshold and self.violations == 0

    def as_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "threshold": self.threshold,
            "analytic_bound": self.analytic_bound,
            "sampled_min": self.sampled_min,
            "trials": self.trials,
            "violations": self.violations,
            "valid": self.valid,
        }


def ring_count(threshold: float, beta: float, r_inner: float) -> int:
    if threshold <= 0:
        return 1
    return 1 + math.ceil(threshold / ((math.pi - 2 * beta) * r_inner))


def analytic_bound(N: int, beta: float, r_inner: float) -> float:
    return (N - 1) * (math.pi - 2 * beta) * r_inner


def build_labyrinth(A: AnnularDomain, threshold: float, lambda_: float, beta: float,
                    max_rings: int | None = None) -> tuple[Labyrinth, StarCertificate]:
    """Equally spaced alternating rings with enough gates to beat ``threshold``.

    With ``max_rings`` the ring count is capped; the returned certificate then
    shows an analytic bound below the threshold instead of failing here.
    """
    if not 0 <= beta < math.pi / 4:
        raise PreconditionError("gate half-width must lie in [0, pi/4)", beta=beta)
    if lambda_ <= 0:
        raise PreconditionError("lambda must be positive", lambda_=lambda_)
    if A.is_disc or A.width <= 0:
        raise PreconditionError("host must be an annulus of positive width")
    N = ring_count(threshold, beta, A.r_in)
    if max_rings is not None:
        N = min(N, max_rings)
    delta = min(A.width / (2 * N + 1), 2 * lambda_)
    if not delta > lambda_:
        raise InfeasibleLabyrinth("annulus too thin for the required rings",
                                  rings=N, width=A.width, lambda_=lambda_,
                                  max_lambda=A.width / (2 * N + 1))
    step = A.width / (N + 1)
    radii = tuple(A.r_in + (i + 1) * step for i in range(N))
    lab = Labyrinth(A, radii, delta, beta)
    cert = StarCertificate(lambda_, threshold, analytic_bound(N, beta, A.r_in))
    return lab, cert


def membership(lab: Labyrinth, z):
    return lab.membership(z)


# crossing paths -----------------------------------------------------------

MAX_PATH_POINTS = 50_000

@dataclass(frozen=True)
class PathVerdict:
    total_length: float
    longest_omega_run: float
    ok: bool


def _densify(vertices: np.ndarray, step: float, max_points: int | None = None) -> np.ndarray:
    """Polar-linear interpolation between vertices given as (r, theta) pairs.

    ``max_points`` coarsens the step for very long paths.  A coarse path can
    only miss short stays in Omega, which makes the check stricter.
    """
    spans = [abs(b[0] - a[0]) + max(a[0], b[0]) * abs(b[1] - a[1])
             for a, b in zip(vertices[:-1], vertices[1:])]
    if max_points is not None:
        step = max(step, sum(spans) / max_points)
    out = [vertices[:1]]
    for a, b, span in zip(vertices[:-1], vertices[1:], spans):
        n = max(2, int(math.ceil(span / step)) + 1)
        s = np.linspace(0.0, 1.0, n)[1:, None]
        out.append(a + s * (b - a))
    pts = np.vstack(out)
    return pts[:, 0] * np.exp(1j * pts[:, 1])


def check_path(lab: Labyrinth, path: np.ndarray, lambda_: float, threshold: float) -> PathVerdict:
    """Measure a densely sampled complex polyline against the dichotomy."""
    path = np.asarray(path, dtype=complex)
    seg = np.abs(np.diff(path))
    inside = lab.membership(path)
    both = inside[:-1] & inside[1:]
    # running length inside Omega, reset at every segment that leaves it
    c = np.cumsum(np.where(both, seg, 0.0))
    last_reset = np.maximum.accumulate(np.where(both, 0.0, c))
    best = float(np.max(c - last_reset)) if c.size else 0.0
    total = float(seg.sum())
    return PathVerdict(total, best, bool(best > lambda_ or total > threshold))


def _random_path(lab: Labyrinth, rng: np.random.Generator, kind: int) -> np.ndarray:
    """Vertices (r, theta) of a crossing path from the inner to the outer edge."""
    A = lab.A
    if kind == 0:
        # thread every gate, jittered inside it
        th = rng.uniform(-np.pi, np.pi)
        verts = [(A.r_in, th)]
        h = 0.5 * lab.delta
        for c, g in zip(lab.radii, lab.gate_angles):
            target = g + rng.uniform(-0.95, 0.95) * lab.beta
            d = (target - th + np.pi) % (2 * np.pi) - np.pi
            if rng.random() < 0.25:
                d += 2 * np.pi * np.sign(rng.standard_normal())
            r_here = c - h - rng.uniform(0, 0.5) * (lab.A.width / (lab.N + 1) - lab.delta)
            verts.append((max(A.r_in, r_here), th))
            th = th + d
            verts.append((max(A.r_in, r_here), th))
            verts.append((c + h, th))
        verts.append((A.r_out, th))
        return np.array(verts)
    if kind == 1:
        # random walk with monotone radius
        k = int(rng.integers(2, 12))
        r = np.sort(rng.uniform(A.r_in, A.r_out, k))
        th = rng.uniform(-np.pi, np.pi) + np.cumsum(rng.normal(0, rng.uniform(0.05, 2.0), k + 2))
        return np.column_stack([np.concatenate([[A.r_in], r, [A.r_out]]), th])
    # straight radial crossing
    th = rng.uniform(-np.pi, np.pi)
    return np.array([(A.r_in, th), (A.r_out, th)])


def verify_star(lab: Labyrinth, lambda_: float, threshold: float, trials: int = 1000,
                seed: int = 0, extra_paths: Sequence[np.ndarray] = (),
                raise_on_violation: bool = True) -> StarCertificate:
    """Re-derive the gate bound and test it on seeded random crossings.

    Besides the random trials, one radial path through each gate centre is
    always checked, which catches labyrinths whose gates line up.
    """
    bound = analytic_bound(lab.N, lab.beta, lab.A.r_in)
    step = min(lab.delta, lambda_) / 8 if lambda_ > 0 else lab.delta / 8

    def paths():
        for g in sorted(set(lab.gate_angles)):
            yield _densify(np.array([(lab.A.r_in, g), (lab.A.r_out, g)]), step, MAX_PATH_POINTS)
        for t in range(trials):
            rng = np.random.default_rng([seed, t])
            yield _densify(_random_path(lab, rng, t % 3), step, MAX_PATH_POINTS)
        for p in extra_paths:
            yield np.asarray(p, dtype=complex)

    violations = 0
    count = 0
    sampled_min = math.inf
    worst = None
    for p in paths():
        count += 1
        v = check_path(lab, p, lambda_, threshold)
        if v.longest_omega_run <= lambda_:
            sampled_min = min(sampled_min, v.total_length)
        if not v.ok:
            violations += 1
            if worst is None or v.total_length < worst.total_length:
                worst = v
    cert = StarCertificate(lambda_, threshold, bound,
                           None if math.isinf(sampled_min) else sampled_min,
                           count, violations)
    if raise_on_violation and (violations or (bound < threshold and threshold > 0)):
        raise StarViolated("crossing path beats the labyrinth",
                           violations=violations, analytic_bound=bound, threshold=threshold,
                           shortest_violation=None if worst is None else worst.total_length)
    return cert

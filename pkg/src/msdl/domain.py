"""Annular domains, exhaustions, homology curves and parameter grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DisjointnessError,
    InvalidGeometryError,
    OutOfDomainError,
    PreconditionError,
)

# relative slack used for "on the boundary" membership tests
RADIUS_RTOL = 1e-12


@dataclass(frozen=True)
class AnnularDomain:
    """Closed annulus ``r_in <= |z| <= r_out`` centred at 0 (a disc when r_in == 0).

    The holomorphic 1-form is always dz, so there is no theta field to carry.
    """

    r_in: float
    r_out: float

    def __post_init__(self):
        r_in, r_out = float(self.r_in), float(self.r_out)
        if not (math.isfinite(r_in) and math.isfinite(r_out)):
            raise InvalidGeometryError("radii must be finite", r_in=r_in, r_out=r_out)
        if r_in < 0 or r_out <= r_in:
            raise InvalidGeometryError("need 0 <= r_in < r_out", r_in=r_in, r_out=r_out)
        object.__setattr__(self, "r_in", r_in)
        object.__setattr__(self, "r_out", r_out)

    @property
    def is_disc(self) -> bool:
        return self.r_in == 0.0

    @property
    def width(self) -> float:
        return self.r_out - self.r_in

    @property
    def core_radius(self) -> float:
        if self.is_disc:
            return 0.5 * self.r_out
        return math.sqrt(self.r_in * self.r_out)

    def contains(self, z, rtol: float = RADIUS_RTOL) -> np.ndarray:
        r = np.abs(np.asarray(z))
        return (r >= self.r_in * (1 - rtol)) & (r <= self.r_out * (1 + rtol))

    def check_contains(self, z, what: str = "point"):
        inside = self.contains(z)
        if not np.all(inside):
            bad = np.asarray(z).ravel()[~np.asarray(inside).ravel()][0]
            raise OutOfDomainError(
                f"{what} outside annulus",
                z=complex(bad), r_in=self.r_in, r_out=self.r_out,
            )

    def strictly_inside(self, other: "AnnularDomain") -> bool:
        """True when self sits in the interior of ``other``."""
        inner_ok = self.r_in > other.r_in or (self.r_in == 0.0 and other.r_in == 0.0)
        return inner_ok and self.r_out < other.r_out

    def components_outside(self, inner: "AnnularDomain") -> list["AnnularDomain"]:
        """Annuli making up ``self`` minus the interior of ``inner``."""
        parts = []
        if inner.r_in > self.r_in:
            parts.append(AnnularDomain(self.r_in, inner.r_in))
        if inner.r_out < self.r_out:
            parts.append(AnnularDomain(inner.r_out, self.r_out))
        return parts

    def as_dict(self) -> dict:
        return {"r_in": self.r_in, "r_out": self.r_out}


def annulus(r_in: float, r_out: float) -> AnnularDomain:
    return AnnularDomain(r_in, r_out)


@dataclass(frozen=True)
class HomologyBasis:
    """Circles generating first homology; empty for a disc."""

    radii: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.radii)

    def gamma(self, i: int, s):
        """Point on curve i at parameter s in [0, 1]."""
        return self.radii[i] * np.exp(2j * np.pi * np.asarray(s, dtype=float))

    def dgamma(self, i: int, s):
        return 2j * np.pi * self.gamma(i, s)


def homology_basis(K: AnnularDomain) -> HomologyBasis:
    if K.is_disc:
        return HomologyBasis(())
    return HomologyBasis((K.core_radius,))


@dataclass(frozen=True)
class Exhaustion:
    stages: tuple[AnnularDomain, ...]
    base_point: complex

    def __post_init__(self):
        for a, b in zip(self.stages, self.stages[1:]):
            if not a.strictly_inside(b):
                raise InvalidGeometryError("exhaustion stages must be strictly nested",
                                           inner=a.as_dict(), outer=b.as_dict())
        K0 = self.stages[0]
        r = abs(self.base_point)
        if not (K0.r_in < r < K0.r_out):
            raise InvalidGeometryError("base point must lie in the interior of K_0",
                                       base_point=str(self.base_point))

    def __len__(self):
        return len(self.stages)

    def __getitem__(self, j) -> AnnularDomain:
        return self.stages[j]


def build_exhaustion(K0: AnnularDomain, L: AnnularDomain, stages: int,
                     base_point: complex | None = None) -> Exhaustion:
    """Nested annuli from K0 to L with geometrically interpolated radii.

    ``stages`` counts the steps, so the result has ``stages + 1`` members.
    """
    if stages < 1:
        raise PreconditionError("stages must be >= 1", stages=stages)
    if not K0.strictly_inside(L):
        raise InvalidGeometryError("K0 must lie strictly inside L",
                                   K0=K0.as_dict(), L=L.as_dict())
    out = []
    for j in range(stages + 1):
        s = j / stages
        r_out = K0.r_out ** (1 - s) * L.r_out ** s
        if K0.r_in > 0 and L.r_in > 0:
            r_in = K0.r_in ** (1 - s) * L.r_in ** s
        else:
            r_in = (1 - s) * K0.r_in + s * L.r_in
        out.append(AnnularDomain(r_in, r_out))
    # keep the endpoints bit-exact
    out[0], out[-1] = K0, L
    if base_point is None:
        base_point = complex(K0.core_radius)
    return Exhaustion(tuple(out), complex(base_point))


def sample_circle(r: float, N: int, domain: AnnularDomain | None = None,
                  shift: float = 0.0) -> np.ndarray:
    """N equispaced nodes r*exp(2*pi*i*(k + shift)/N)."""
    if N < 4:
        raise PreconditionError("need at least 4 nodes", N=N)
    if domain is not None and not bool(domain.contains(r)):
        raise OutOfDomainError("circle radius outside domain", r=r, **domain.as_dict())
    k = np.arange(N) + shift
    return r * np.exp(2j * np.pi * k / N)


def polar_grid(domain: AnnularDomain, n_r: int, n_theta: int, shifted: bool = False):
    """Polar sample grid of shape (n_r, n_theta).

    With ``shifted`` the angles sit halfway between the unshifted nodes and
    the radii are geometric midpoints, so the grid never coincides with
    quadrature nodes used during construction.
    """
    r_lo = domain.r_in if domain.r_in > 0 else domain.r_out * 1e-3
    if shifted:
        edges = np.geomspace(r_lo, domain.r_out, n_r + 1)
        radii = np.sqrt(edges[:-1] * edges[1:])
        radii[0], radii[-1] = r_lo, domain.r_out
    else:
        radii = np.linspace(r_lo, domain.r_out, n_r)
    theta = 2 * np.pi * (np.arange(n_theta) + (0.5 if shifted else 0.0)) / n_theta
    return radii[:, None] * np.exp(1j * theta)[None, :]


# parameter space ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ParameterGrid:
    """Finite net of P times a t-grid.

    Nodes are pairs (ip, it) flattened as ``ip * n_t + it``.  ``T_chain`` holds
    nested sets of P-indices.
    """

    p_points: np.ndarray
    q_mask: np.ndarray
    t_values: np.ndarray
    T_chain: tuple[frozenset, ...] = field(default=())

    def __post_init__(self):
        p = np.asarray(self.p_points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        q = np.asarray(self.q_mask, dtype=bool)
        t = np.asarray(self.t_values, dtype=float)
        object.__setattr__(self, "p_points", p)
        object.__setattr__(self, "q_mask", q)
        object.__setattr__(self, "t_values", t)
        if q.shape != (p.shape[0],):
            raise PreconditionError("q_mask must have one entry per P point")
        if t.size == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0) or t[-1] > 1.0:
            raise PreconditionError("t_values must increase from 0 within [0, 1]",
                                    t_values=t.tolist())
        q_idx = set(np.flatnonzero(q).tolist())
        chain = tuple(frozenset(int(i) for i in T) for T in self.T_chain)
        object.__setattr__(self, "T_chain", chain)
        for a, b in zip(chain, chain[1:]):
            if not a <= b:
                raise PreconditionError("T_chain must be nested")
        for T in chain:
            if T & q_idx:
                raise PreconditionError("Q points may not belong to any T_j")
        if chain and chain[-1] != frozenset(range(p.shape[0])) - q_idx:
            raise PreconditionError("last T_j must equal the complement of Q")

    @classmethod
    def uniform(cls, n_p: int, t_values: Sequence[float], q_indices: Iterable[int] = (),
                stages: int = 1) -> "ParameterGrid":
        """Uniform P-grid on [0, 1] with T_j growing by distance from Q."""
        p = np.linspace(0.0, 1.0, n_p) if n_p > 1 else np.zeros(1)
        q = np.zeros(n_p, dtype=bool)
        q[list(q_indices)] = True
        chain = nested_T_chain(p[:, None], q, stages)
        return cls(p[:, None], q, np.asarray(t_values, dtype=float), chain)

    @property
    def n_p(self) -> int:
        return self.p_points.shape[0]

    @property
    def n_t(self) -> int:
        return self.t_values.size

    @property
    def n_nodes(self) -> int:
        return self.n_p * self.n_t

    def index(self, ip: int, it: int) -> int:
        return ip * self.n_t + it

    def split(self, node: int) -> tuple[int, int]:
        return divmod(node, self.n_t)

    def coords(self) -> np.ndarray:
        """Node coordinates (p..., t) used as the grid metric."""
        P = np.repeat(self.p_points, self.n_t, axis=0)
        T = np.tile(self.t_values, self.n_p)[:, None]
        return np.hstack([P, T])

    def fixed_nodes(self) -> frozenset:
        """(P x {0}) united with (Q x [0, 1])."""
        out = set()
        for ip in range(self.n_p):
            out.add(self.index(ip, 0))
            if self.q_mask[ip]:
                out.update(self.index(ip, it) for it in range(self.n_t))
        return frozenset(out)

    def gated_nodes(self, j: int | None, r_cut: float) -> frozenset:
        """T_j x [r_cut, 1]; ``j=None`` uses the complement of Q."""
        if j is None or not self.T_chain:
            T = set(np.flatnonzero(~self.q_mask).tolist())
        else:
            T = self.T_chain[min(j, len(self.T_chain)) - 1]
        return frozenset(self.index(ip, it) for ip in T for it in range(self.n_t)
                         if self.t_values[it] >= r_cut and self.t_values[it] > 0)

    def as_dict(self) -> dict:
        return {
            "p_points": self.p_points.tolist(),
            "q_mask": self.q_mask.tolist(),
            "t_values": self.t_values.tolist(),
            "T_chain": [sorted(T) for T in self.T_chain],
        }


def nested_T_chain(p_points: np.ndarray, q_mask: np.ndarray, stages: int) -> tuple[frozenset, ...]:
    """T_1 within T_2 within ... with T_J equal to P minus Q.

    T_j keeps the points whose distance to Q exceeds a threshold that shrinks
    to zero at j = J.
    """
    n = p_points.shape[0]
    free = [i for i in range(n) if not q_mask[i]]
    if stages < 1:
        return ()
    if not q_mask.any():
        return tuple(frozenset(free) for _ in range(stages))
    d = cdist(p_points, p_points[q_mask]).min(axis=1)
    dmax = d.max()
    chain = []
    for j in range(1, stages + 1):
        cut = dmax * (stages - j) / stages
        chain.append(frozenset(i for i in free if d[i] > cut or j == stages))
    return tuple(chain)


def urysohn_weights(grid: ParameterGrid, Y: Iterable[int], Z: Iterable[int]) -> np.ndarray:
    """Continuous weights equal to 0 on Y and 1 on Z.

    Away from both sets the weight is dist(d, Y) / (dist(d, Y) + dist(d, Z))
    in the grid metric.  An empty Y gives 1 everywhere; an empty Z gives 0.
    """
    Y, Z = sorted(set(Y)), sorted(set(Z))
    common = set(Y) & set(Z)
    if common:
        raise DisjointnessError("Y and Z overlap", nodes=sorted(common))
    n = grid.n_nodes
    if not Y:
        return np.ones(n)
    if not Z:
        return np.zeros(n)
    X = grid.coords()
    dY = cdist(X, X[Y]).min(axis=1)
    dZ = cdist(X, X[Z]).min(axis=1)
    w = dY / (dY + dZ)
    w[Y] = 0.0
    w[Z] = 1.0
    return w

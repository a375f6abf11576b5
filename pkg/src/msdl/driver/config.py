"""Run configuration: a versioned YAML document validated before any compute."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..deform import DeformParams
from ..domain import AnnularDomain, Exhaustion, ParameterGrid, build_exhaustion
from ..errors import ConfigError, MSDLError, ReportIOError
from ..fluxctl import FluxHomotopy, FluxParams
from ..weierstrass import PRESETS, WeierstrassData, flux, from_coefficient_table, preset

SCHEMA_VERSION = 1

TOP_KEYS = {
    "schema_version", "name", "domain", "compact", "base_point", "data", "grid", "stages",
    "distance", "eps", "flux", "deform", "flux_control", "tolerances", "degree_caps", "seed",
    "output",
}

DEFAULTS: dict[str, Any] = {
    "name": "run",
    "domain": {"r_in": 0.5, "r_out": 2.0},
    "compact": {"r_in": 0.8, "r_out": 1.25},
    "base_point": [1.0, 0.0],
    "data": {"preset": "catenoid"},
    "grid": {"n_p": 5, "t_values": [0.0, 0.25, 0.5, 0.75, 1.0], "q_indices": []},
    "stages": 1,
    "distance": {"lambda_unit": 10.0, "r_cut": "schedule"},
    "eps": [0.1],
    "flux": None,
    "deform": {},
    "flux_control": {},
    "tolerances": {"null_tol": 1e-3, "period_tol": 1e-9, "newton_tol": 1e-11},
    "degree_caps": {"oka": 64, "bump": 4, "flux_bump": 1},
    "seed": 0,
    "output": {"mesh_resolution": [32, 128], "report": "report.json"},
}

DEFORM_KEYS = {"beta", "lambda_frac", "gap_frac", "oka_eps", "oka_ridge", "oka_strict", "bump_tau",
               "basis_k", "spray_kind", "newton_max_iter", "star_trials", "max_rings", "oka_samples", "k_samples", "mesh",
               "estimate", "mu_halvings", "strict_certificates"}
FLUX_KEYS = {"bump_tau", "basis_k", "newton_max_iter", "continuation", "max_sweeps", "k_samples",
             "jump_warning"}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _need(cond: bool, message: str, **details):
    if not cond:
        raise ConfigError(message, **details)


@dataclass
class RunConfig:
    raw: dict
    domain: AnnularDomain
    exhaustion: Exhaustion
    grid: ParameterGrid
    family: list
    stages: int
    lambda_unit: float
    eps: list
    r_cuts: list
    flux_target: FluxHomotopy | None
    deform: DeformParams
    flux_control: FluxParams
    seed: int
    mesh_resolution: tuple
    extras: dict = field(default_factory=dict)

    @property
    def x0(self) -> complex:
        return self.exhaustion.base_point

    def Lambda(self, j: int) -> float:
        return j * self.lambda_unit

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


def _family(data: dict, domain: AnnularDomain, n_p: int) -> list[list[WeierstrassData]]:
    """One Weierstrass datum per P point (shared objects when identical)."""

    def build(entry: dict) -> WeierstrassData:
        _need(isinstance(entry, dict), "data entries must be mappings")
        if "preset" in entry:
            _need(entry["preset"] in PRESETS, "unknown preset", preset=entry["preset"],
                  known=sorted(PRESETS))
            return preset(entry["preset"], domain)
        if "table" in entry:
            try:
                return from_coefficient_table(entry["table"], domain)
            except MSDLError as exc:
                raise ConfigError("invalid coefficient table", cause=exc.to_dict()) from exc
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigError("invalid coefficient table", cause=str(exc)) from exc
        raise ConfigError("data entry needs 'preset' or 'table'", keys=sorted(entry))

    if "per_p" in data:
        entries = data["per_p"]
        _need(isinstance(entries, list) and len(entries) == n_p,
              "data.per_p needs one entry per P point", n_p=n_p)
        return [build(e) for e in entries]
    w = build(data)
    return [w] * n_p


def build_config(raw: dict) -> RunConfig:
    _need(isinstance(raw, dict), "config must be a mapping")
    _need("schema_version" in raw, "config lacks schema_version")
    _need(raw["schema_version"] == SCHEMA_VERSION, "unsupported schema_version",
          found=raw["schema_version"], supported=SCHEMA_VERSION)
    unknown = set(raw) - TOP_KEYS
    _need(not unknown, "unknown config keys", keys=sorted(unknown))
    cfg = _merge(DEFAULTS, raw)
    bad = set(cfg["deform"]) - DEFORM_KEYS
    _need(not bad, "unknown deform keys", keys=sorted(bad))
    bad = set(cfg["flux_control"]) - FLUX_KEYS
    _need(not bad, "unknown flux_control keys", keys=sorted(bad))
    try:
        domain = AnnularDomain(float(cfg["domain"]["r_in"]), float(cfg["domain"]["r_out"]))
        K0 = AnnularDomain(float(cfg["compact"]["r_in"]), float(cfg["compact"]["r_out"]))
        bp = cfg["base_point"]
        x0 = complex(float(bp[0]), float(bp[1]))
    except MSDLError as exc:
        raise ConfigError("invalid geometry", cause=exc.to_dict()) from exc
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ConfigError("invalid geometry", cause=str(exc)) from exc

    J = cfg["stages"]
    _need(isinstance(J, int) and J >= 0, "stages must be a non-negative integer", stages=J)
    try:
        exhaustion = build_exhaustion(K0, domain, max(J, 1), x0)
    except MSDLError as exc:
        raise ConfigError("invalid exhaustion", cause=exc.to_dict()) from exc

    eps = cfg["eps"]
    if isinstance(eps, (int, float)):
        eps = [float(eps) * 0.4 ** j for j in range(J)]
    _need(isinstance(eps, list) and len(eps) >= J, "eps needs one value per stage",
          stages=J, eps=eps)
    eps = [float(e) for e in eps[:J]]
    _need(all(e > 0 for e in eps), "eps values must be positive", eps=eps)
    for j in range(1, len(eps)):
        _need(eps[j] < eps[j - 1] / 2, "eps schedule must satisfy eps_j < eps_{j-1} / 2",
              stage=j + 1, eps_j=eps[j], eps_prev=eps[j - 1])

    dist = cfg["distance"]
    lam = float(dist["lambda_unit"])
    _need(lam > 0, "distance.lambda_unit must be positive", lambda_unit=lam)
    rc = dist.get("r_cut", "schedule")
    if rc == "schedule":
        r_cuts = [1.0 / (j + 1) for j in range(1, J + 1)]
    else:
        r_cuts = [float(rc)] * J
    _need(all(0 <= r <= 1 for r in r_cuts), "r_cut must lie in [0, 1]", r_cut=rc)

    g = cfg["grid"]
    try:
        t_values = g.get("t_values")
        if t_values is None:
            t_values = np.linspace(0.0, 1.0, int(g["n_t"])).tolist()
        grid = ParameterGrid.uniform(int(g["n_p"]), t_values, g.get("q_indices", []), max(J, 1))
    except MSDLError as exc:
        raise ConfigError("invalid grid", cause=exc.to_dict()) from exc
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ConfigError("invalid grid", cause=str(exc)) from exc

    per_p = _family(cfg["data"], domain, grid.n_p)
    family = [per_p[ip] for ip in range(grid.n_p) for _ in range(grid.n_t)]

    tol = cfg["tolerances"]
    caps = cfg["degree_caps"]
    oka_cap = int(caps["oka"])
    oka_degrees = tuple(d for d in (8, 16, 24, 32, 48, 64, 96, 128) if d <= oka_cap) or (oka_cap,)
    dkw = dict(cfg["deform"])
    if "mesh" in dkw:
        dkw["mesh"] = tuple(dkw["mesh"])
    try:
        deform = DeformParams(**dkw, oka_degrees=oka_degrees, bump_degree=int(caps["bump"]),
                              period_tol=float(tol["period_tol"]), newton_tol=float(tol["newton_tol"]),
                              null_tol=float(tol["null_tol"]), seed=int(cfg["seed"]))
        fluxp = FluxParams(**cfg["flux_control"], bump_degree=int(caps["flux_bump"]),
                           period_tol=float(tol["period_tol"]), newton_tol=float(tol["newton_tol"]),
                           null_tol=float(tol["null_tol"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("invalid parameter", cause=str(exc)) from exc
    _need(0 <= deform.beta < math.pi / 4, "deform.beta must lie in [0, pi/4)", beta=deform.beta)
    _need(0 < deform.oka_eps < 1, "deform.oka_eps must lie in (0, 1)", oka_eps=deform.oka_eps)

    target = None
    fl = cfg["flux"]
    if fl is not None:
        _need(isinstance(fl, dict) and "to" in fl, "flux needs a 'to' table")
        F1 = np.atleast_2d(np.asarray(fl["to"], dtype=float))
        F0 = np.atleast_2d(np.asarray(fl["from"], dtype=float)) if "from" in fl else None
        cur = flux(family[0]).values
        _need(F1.shape == cur.shape, "flux table shape must be (generators, n)",
              expected=list(cur.shape), found=list(F1.shape))
        if F0 is None:
            F0 = cur
        target = FluxHomotopy.linear_in_t(grid, F0, F1)
        # Q rows keep their own flux for every t
        vals = target.values.copy()
        for node in grid.fixed_nodes():
            ip, it = grid.split(node)
            if grid.q_mask[ip]:
                vals[node] = flux(family[node]).values
        target = FluxHomotopy(vals)

    mesh = tuple(int(x) for x in cfg["output"]["mesh_resolution"])
    return RunConfig(cfg, domain, exhaustion, grid, family, J, lam, eps, r_cuts, target, deform,
                     fluxp, int(cfg["seed"]), mesh)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read YAML from ``path`` (or the packaged demo config) and validate it."""
    try:
        if path is None:
            text = resources.files("msdl").joinpath("configs/demo.yaml").read_text()
        else:
            text = Path(path).read_text()
    except OSError as exc:
        raise ReportIOError("cannot read config", path=str(path), cause=str(exc)) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config is not valid YAML", path=str(path), cause=str(exc)) from exc
    if overrides:
        raw = _merge(raw or {}, overrides)
    return build_config(raw)


def packaged_config(name: str) -> Path:
    return Path(str(resources.files("msdl").joinpath(f"configs/{name}.yaml")))

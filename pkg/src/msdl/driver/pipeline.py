"""Finite-stage recursion: flux control, then distance increase, per stage."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..deform import DeformResult, increase_distance, sup_change
from ..errors import MSDLError, PreconditionError
from ..fluxctl import FluxHomotopy, prescribe_flux
from ..weierstrass import Immersion, WeierstrassData, conformality_residual, flux, real_period_residual
from .config import RunConfig

log = logging.getLogger(__name__)

FLUX_TARGET_TOL = 1e-6
FLUX_KEEP_TOL = 1e-8
REAL_PERIOD_TOL = 1e-9


def same_bytes(a: WeierstrassData, b: WeierstrassData) -> bool:
    if a is b:
        return True
    return a.domain == b.domain and all(
        p.coeffs.tobytes() == q.coeffs.tobytes() for p, q in zip(a.phi, b.phi)) and a.n == b.n


@dataclass
class StageReport:
    stage: int
    Lambda: float
    eps: float
    K_prev: dict
    K: dict
    r_cut: float
    T: list
    conditions: dict
    nodes: list
    deform: list = field(default_factory=list)
    flux_warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "Lambda": self.Lambda,
            "eps": self.eps,
            "K_prev": self.K_prev,
            "K": self.K,
            "r_cut": self.r_cut,
            "T": self.T,
            "conditions": self.conditions,
            "nodes": self.nodes,
            "deform": self.deform,
            "flux_warnings": self.flux_warnings,
        }


@dataclass
class RunResult:
    config: RunConfig
    initial: list
    family: list
    stages: list
    summary: dict


def _cond(ok: bool, **detail) -> dict:
    return {"ok": bool(ok), **detail}


def run_stage(cfg: RunConfig, j: int, family: Sequence[WeierstrassData], initial: Sequence[WeierstrassData],
              jobs: int = 1, previous: dict | None = None) -> tuple[list, StageReport]:
    """Stage j: flux control to the target, then the distance increase."""
    grid = cfg.grid
    K_prev, K = cfg.exhaustion[j - 1], cfg.exhaustion[j]
    eps = cfg.eps[j - 1]
    Lam = cfg.Lambda(j)
    r_cut = cfg.r_cuts[j - 1]
    x0 = cfg.x0
    stage_in = list(family)
    warnings = []
    flux_records = None
    try:
        if cfg.flux_target is not None:
            fres = prescribe_flux(stage_in, grid, cfg.flux_target, eps, K_prev, x0, cfg.flux_control, jobs)
            mid = fres.family
            warnings = fres.warnings
            flux_records = fres.records
        else:
            mid = stage_in
        dres: DeformResult = increase_distance(mid, grid, K_prev, x0, Lam, eps, r_cut, stage=j,
                                               params=cfg.deform, jobs=jobs)
    except MSDLError as exc:
        exc.details.setdefault("stage", j)
        raise
    out = dres.family
    fixed = grid.fixed_nodes()
    gated = grid.gated_nodes(j, r_cut)
    nodes = []
    sup_cache: dict = {}
    a_bad, b_bad, c_bad, e_bad = [], [], [], []
    b_worst, e_worst = 0.0, 0.0
    for i in range(grid.n_nodes):
        ip, it = grid.split(i)
        key = (id(stage_in[i]), id(out[i]))
        if key not in sup_cache:
            sup_cache[key] = 0.0 if out[i] is stage_in[i] else sup_change(
                Immersion(stage_in[i], x0), Immersion(out[i], x0), K_prev, cfg.deform.k_samples)
        sc = sup_cache[key]
        b_worst = max(b_worst, sc)
        fo = flux(out[i])
        rp = real_period_residual(out[i])
        if cfg.flux_target is not None:
            ferr = float(np.max(np.abs(fo.values - cfg.flux_target.values[i])))
            e_ok = ferr < FLUX_TARGET_TOL and rp < REAL_PERIOD_TOL
        else:
            ferr = flux(stage_in[i]).distance(fo)
            e_ok = ferr < FLUX_KEEP_TOL and rp < REAL_PERIOD_TOL
        e_worst = max(e_worst, ferr)
        rec = dres.records[i]
        a_ok = (i not in fixed) or same_bytes(out[i], initial[i])
        c_ok = None
        if i in gated:
            c_ok = bool(rec.certified) and rec.certified_bound is not None and rec.certified_bound >= Lam
            if previous and previous.get(i) is not None and rec.certified_bound is not None:
                c_ok = c_ok and rec.certified_bound >= previous[i]
        if not a_ok:
            a_bad.append(i)
        if sc >= eps:
            b_bad.append(i)
        if c_ok is False:
            c_bad.append(i)
        if not e_ok:
            e_bad.append(i)
        nodes.append({
            "node": i,
            "p_index": ip,
            "t_index": it,
            "p": grid.p_points[ip].tolist(),
            "t": float(grid.t_values[it]),
            "fixed": i in fixed,
            "gated": i in gated,
            "weight": rec.weight,
            "identity": out[i] is stage_in[i],
            "pair": list(rec.pair),
            "sup_change": sc,
            "flux": fo.tolist(),
            "flux_error": ferr,
            "real_periods": rp,
            "conformality": rec.conformality,
            "certified": rec.certified,
            "certified_bound": rec.certified_bound,
            "distance_estimate": rec.distance_estimate,
            "certificates": rec.certificates,
            "failure": rec.failure,
            "clauses": rec.clauses,
            "newton": rec.newton,
            "flux_control": None if flux_records is None else {
                "identity": flux_records[i].identity,
                "flux_error": flux_records[i].flux_error,
                "sup_change": flux_records[i].sup_change,
                "newton": flux_records[i].newton,
            },
            "conditions": {"A": a_ok, "B": sc < eps, "C": c_ok, "E": e_ok},
        })
    d_ok = j == 1 or eps < cfg.eps[j - 2] / 2
    conditions = {
        "A": _cond(not a_bad, failed_nodes=a_bad),
        "B": _cond(not b_bad, worst=b_worst, bound=eps, failed_nodes=b_bad),
        "C": _cond(not c_bad, Lambda=Lam, gated=len(gated), failed_nodes=c_bad),
        "D": _cond(d_ok, eps=eps, eps_prev=None if j == 1 else cfg.eps[j - 2]),
        "E": _cond(not e_bad, worst=e_worst, failed_nodes=e_bad),
    }
    T = sorted(grid.T_chain[j - 1]) if grid.T_chain else []
    report = StageReport(j, Lam, eps, K_prev.as_dict(), K.as_dict(), r_cut, T, conditions, nodes,
                         dres.substages, warnings)
    for letter, c in conditions.items():
        if not c["ok"]:
            log.warning("stage %d condition %s failed: %s", j, letter,
                        {k: v for k, v in c.items() if k != "ok"})
    return out, report


def summarise(cfg: RunConfig, initial, family, stages: list[StageReport]) -> dict:
    fixed = cfg.grid.fixed_nodes()
    out = {"stages": len(stages)}
    if not stages:
        out.update({"ok": True, "failed": []})
        return out
    last = stages[-1]
    failed = [f"stage {s.stage} condition {k}" for s in stages for k, c in s.conditions.items() if not c["ok"]]
    gated = [n for n in last.nodes if n["gated"]]
    out.update({
        "ok": not failed,
        "failed": failed,
        "fixpoints_identical": all(same_bytes(family[i], initial[i]) for i in fixed),
        "max_sup_change": max(max(n["sup_change"] for n in s.nodes) for s in stages),
        "max_flux_error": max(n["flux_error"] for n in last.nodes),
        "max_real_period": max(n["real_periods"] for n in last.nodes),
        "max_conformality": max(n["conformality"] for n in last.nodes),
        "final_Lambda": last.Lambda,
        "certified_nodes": sum(1 for n in gated if n["certified"]),
        "gated_nodes": len(gated),
        "min_certified_bound": min((n["certified_bound"] for n in gated if n["certified_bound"] is not None),
                                   default=None),
        "min_distance_estimate": min((n["distance_estimate"] for n in gated
                                      if n["distance_estimate"] is not None), default=None),
    })
    return out


def run_homotopy_principle(cfg: RunConfig, jobs: int = 1) -> RunResult:
    """All J stages; stage failures are recorded in the reports, solver errors raise."""
    initial = list(cfg.family)
    family = list(initial)
    stages = []
    previous: dict = {}
    for j in range(1, cfg.stages + 1):
        log.info("stage %d of %d", j, cfg.stages)
        family, rep = run_stage(cfg, j, family, initial, jobs, previous)
        previous = {n["node"]: n["certified_bound"] for n in rep.nodes if n["gated"]}
        stages.append(rep)
    return RunResult(cfg, initial, family, stages, summarise(cfg, initial, family, stages))


class HomotopyPrinciple(BaseEstimator):
    """Stage-wise estimator: each ``partial_fit`` runs the next stage.

    ``fit`` runs every configured stage.  The stage reports accumulate in
    ``stages_`` and the current family in ``family_``.
    """

    def __init__(self, config: RunConfig | None = None, jobs: int = 1):
        self.config = config
        self.jobs = jobs

    def _start(self):
        if self.config is None:
            raise PreconditionError("HomotopyPrinciple needs a config")
        self.initial_ = list(self.config.family)
        self.family_ = list(self.initial_)
        self.stages_ = []
        self._previous = {}

    def partial_fit(self, X=None, y=None):
        if not hasattr(self, "stages_"):
            self._start()
        j = len(self.stages_) + 1
        if j > self.config.stages:
            raise PreconditionError("all configured stages are done", stages=self.config.stages)
        self.family_, rep = run_stage(self.config, j, self.family_, self.initial_, self.jobs, self._previous)
        self._previous = {n["node"]: n["certified_bound"] for n in rep.nodes if n["gated"]}
        self.stages_.append(rep)
        return self

    def fit(self, X=None, y=None):
        self._start()
        for _ in range(self.config.stages):
            self.partial_fit()
        return self

    @property
    def summary_(self) -> dict:
        return summarise(self.config, self.initial_, self.family_, self.stages_)

"""Re-check a finished run from its exported report and coefficient file."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..labyrinth import analytic_bound
from ..weierstrass import conformality_residual, flux, real_period_residual
from .config import build_config
from .pipeline import FLUX_TARGET_TOL, REAL_PERIOD_TOL, same_bytes
from .report import load_family, load_report

CONFORMAL_TOL = 1e-10
SQRT2 = math.sqrt(2.0)


def _recheck_certificate(c: dict, Lam: float, lab: dict) -> tuple[float, bool, list[str]]:
    """Recompute the bound from the stored constants; returns (bound, valid, problems)."""
    problems = []
    ab = analytic_bound(lab["rings"], lab["beta"], lab["host"]["r_in"])
    if not math.isclose(ab, c["star"]["analytic_bound"], rel_tol=1e-12):
        problems.append("analytic bound does not match the labyrinth")
    thr = 2 * SQRT2 * Lam / math.sqrt(c["rho"]) if c["rho"] > 0 else math.inf
    h_req = 2 * SQRT2 * Lam / (c["lambda"] * c["sigma"]) if c["sigma"] > 0 else math.inf
    case1 = math.sqrt(c["rho"] / 2) * ab
    case2 = c["lambda"] * c["sigma"] * c["h_min_on_Omega"] / 2
    bound = min(case1, case2)
    if not math.isclose(bound, c["certified_bound"], rel_tol=1e-12, abs_tol=1e-300):
        problems.append("stored certified bound does not match its constants")
    valid = (bound >= Lam and c["h_min_on_Omega"] > h_req and ab >= thr
             and c["star"]["violations"] == 0)
    return bound, valid, problems


def verify_report(report_path: str | Path, family_path: str | Path | None = None) -> dict:
    """Consistency of the report with the exported data, plus certificate status.

    ``consistent`` says whether every stored number re-derives; ``certified``
    whether every gated node of the last stage carries a valid certificate.
    """
    report_path = Path(report_path)
    doc = load_report(report_path)
    if family_path is None:
        family_path = report_path.with_name("family.json")
    cfg = build_config(doc["config"])
    final = load_family(family_path)
    problems: list[str] = []
    grid = cfg.grid
    if len(final) != grid.n_nodes:
        problems.append("family size does not match the grid")
        return {"consistent": False, "certified": False, "problems": problems, "checked_nodes": 0}
    for i in sorted(grid.fixed_nodes()):
        if not same_bytes(final[i], cfg.family[i]):
            problems.append(f"fixed node {i} differs from the input data")
    stages = doc["stages"]
    certified = True
    checked = 0
    if stages:
        last = stages[-1]
        labs = [lab for sub in last["deform"] for lab in sub.get("labyrinths", [])]
        for rec in last["nodes"]:
            i = rec["node"]
            fo = flux(final[i]).values
            if float(np.max(np.abs(fo - np.asarray(rec["flux"])))) > 1e-12:
                problems.append(f"node {i}: flux differs from the report")
            if cfg.flux_target is not None:
                if float(np.max(np.abs(fo - cfg.flux_target.values[i]))) >= FLUX_TARGET_TOL:
                    problems.append(f"node {i}: flux misses the target")
            if real_period_residual(final[i]) >= REAL_PERIOD_TOL:
                problems.append(f"node {i}: real periods do not vanish")
            if conformality_residual(final[i]) >= CONFORMAL_TOL:
                problems.append(f"node {i}: conformality residual too large")
            checked += 1
            if not rec["gated"]:
                continue
            node_ok = bool(rec["certificates"]) and len(rec["certificates"]) == len(labs)
            bounds = []
            for c, lab in zip(rec["certificates"], labs):
                b, valid, probs = _recheck_certificate(c, last["Lambda"], lab)
                problems += [f"node {i}: {p}" for p in probs]
                node_ok = node_ok and valid
                bounds.append(b)
            stored = rec["certified_bound"]
            if bounds and (stored is None or not math.isclose(stored, min(bounds), rel_tol=1e-12)):
                problems.append(f"node {i}: node bound differs from its certificates")
            if bool(rec["certified"]) != node_ok:
                problems.append(f"node {i}: certified flag disagrees with its constants")
            certified = certified and node_ok
    return {"consistent": not problems, "certified": certified, "problems": problems,
            "checked_nodes": checked}

"""Command line entry point ``msdl``."""

from __future__ import annotations

import argparse
import copy
import logging
import os
import sys
from pathlib import Path

from ..errors import EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_IO, EXIT_OK, ConfigError, MSDLError
from ..fluxctl import prescribe_flux
from ..weierstrass import Immersion
from .config import RunConfig, load_config, packaged_config
from .pipeline import run_homotopy_principle, run_stage, summarise
from .report import (
    dumps,
    export_coefficients_csv,
    export_family,
    export_mesh,
    export_report,
    load_family,
    load_report,
)
from .verify import verify_report

log = logging.getLogger("msdl")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for grid evaluation")
    p.add_argument("--log-level", default="WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="msdl", description="Certified López-Ros deformations "
                                 "of minimal surfaces on annuli.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("demo", parents=[common], help="catenoid end-to-end run with mesh export")
    sub.add_parser("deform", parents=[common], help="one distance-increasing stage")
    sub.add_parser("flux", parents=[common], help="flux prescription only")
    sub.add_parser("run", parents=[common], help="all configured stages")
    v = sub.add_parser("verify", parents=[common], help="re-check an exported report")
    v.add_argument("report", type=Path)
    v.add_argument("--family", type=Path, default=None)
    e = sub.add_parser("export", parents=[common], help="write a mesh or re-export a report")
    e.add_argument("what", choices=["mesh", "report"])
    e.add_argument("--family", type=Path, default=None, help="coefficient file from a run")
    e.add_argument("--report", type=Path, default=None, help="report to re-export")
    e.add_argument("--node", type=int, default=-1, help="grid node to mesh (default: last)")
    e.add_argument("--resolution", type=int, nargs=2, default=None, metavar=("N_R", "N_THETA"))
    return ap


def _setup_logging(level: str):
    level = os.environ.get("MSDL_LOG", level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _config(args, default: str | None = None) -> RunConfig:
    overrides = {"seed": args.seed} if args.seed is not None else None
    path = args.config
    if path is None and default is not None:
        path = packaged_config(default)
    return load_config(path, overrides)


def _write_outputs(out: Path, cfg: RunConfig, stages, family, summary) -> Path:
    rep = export_report(stages, out / "report.json", cfg.echo(), summary)
    export_family(family, out / "family.json")
    export_coefficients_csv(family, out / "coefficients.csv")
    return rep


def _print_summary(summary: dict):
    print(dumps(summary), end="")


def cmd_run(args, default="run", only_stage_one=False, no_flux=False) -> int:
    cfg = _config(args, default)
    if only_stage_one or no_flux:
        cfg = copy.copy(cfg)
        if no_flux:
            cfg.flux_target = None
        if only_stage_one:
            cfg.stages = min(cfg.stages, 1) or 1
    res = run_homotopy_principle(cfg, args.jobs)
    _write_outputs(args.out, cfg, res.stages, res.family, res.summary)
    if args.command == "demo":
        node = len(res.family) - 1
        export_mesh(Immersion(res.family[node], cfg.x0), cfg.mesh_resolution, args.out / "mesh.txt")
    _print_summary(res.summary)
    return EXIT_OK if res.summary["ok"] else EXIT_CERTIFICATE


def cmd_flux(args) -> int:
    cfg = _config(args, "run")
    if cfg.flux_target is None:
        raise ConfigError("the flux command needs a 'flux' section in the config")
    K = cfg.exhaustion[0]
    eps = cfg.eps[0] if cfg.eps else 0.1
    res = prescribe_flux(cfg.family, cfg.grid, cfg.flux_target, eps, K, cfg.x0, cfg.flux_control, args.jobs)
    stage = {
        "stage": 1,
        "kind": "flux",
        "nodes": [{
            "node": r.node,
            "p_index": cfg.grid.split(r.node)[0],
            "t_index": cfg.grid.split(r.node)[1],
            "gated": False,
            "certified": None,
            "certified_bound": None,
            "distance_estimate": None,
            "flux": r.flux_out,
            **{k: v for k, v in r.as_dict().items() if k not in ("node", "flux_out")},
        } for r in res.records],
        "warnings": res.warnings,
    }
    summary = {
        "ok": res.max_flux_error < 1e-6 and res.max_real_period < 1e-9,
        "max_flux_error": res.max_flux_error,
        "max_real_period": res.max_real_period,
        "max_sup_change": max(r.sup_change for r in res.records),
    }
    _write_outputs(args.out, cfg, [stage], res.family, summary)
    _print_summary(summary)
    return EXIT_OK if summary["ok"] else EXIT_CERTIFICATE


def cmd_verify(args) -> int:
    res = verify_report(args.report, args.family)
    _print_summary(res)
    return EXIT_OK if res["consistent"] and res["certified"] else EXIT_CERTIFICATE


def cmd_export(args) -> int:
    if args.what == "report":
        src = args.report or args.out / "report.json"
        doc = load_report(src)
        export_report(doc["stages"], args.out / "report.json", doc.get("config"), doc.get("summary"))
        return EXIT_OK
    cfg = _config(args, "demo")
    fam_path = args.family
    if fam_path is None and (args.out / "family.json").exists():
        fam_path = args.out / "family.json"
    family = load_family(fam_path) if fam_path is not None else cfg.family
    node = args.node if args.node >= 0 else len(family) - 1
    if not 0 <= node < len(family):
        raise ConfigError("node index out of range", node=node, nodes=len(family))
    res = tuple(args.resolution) if args.resolution else cfg.mesh_resolution
    path = export_mesh(Immersion(family[node], cfg.x0), res, args.out / f"mesh_node{node}.txt")
    print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    try:
        if args.command == "demo":
            return cmd_run(args, "demo")
        if args.command == "deform":
            return cmd_run(args, "demo", only_stage_one=True, no_flux=True)
        if args.command == "run":
            return cmd_run(args, "run")
        if args.command == "flux":
            return cmd_flux(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "export":
            return cmd_export(args)
    except MSDLError as exc:
        log.error("%s: %s", type(exc).__name__, exc.message)
        print(dumps(exc.to_dict()), end="", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        log.error("IO failure: %s", exc)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

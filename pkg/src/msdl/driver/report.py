"""JSON reports, CSV companions, coefficient dumps and ASCII meshes.

Floats are written with 17 significant digits so every double survives a
write/read cycle unchanged; key order is the insertion order of the records,
which makes reports byte-identical across runs with the same inputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from ..domain import AnnularDomain, polar_grid
from ..errors import PreconditionError, ReportIOError
from ..funspace import LaurentFunction
from ..weierstrass import Immersion, WeierstrassData, integrate_immersion

REPORT_SCHEMA = "msdl-report/1"
FAMILY_SCHEMA = "msdl-family/1"


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    """numpy scalars, tuples and complex numbers to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 1) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    out: list[str] = []

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(v, dict):
            if not v:
                out.append("{}")
                return
            out.append("{\n")
            for i, (k, x) in enumerate(v.items()):
                out.append(pad + json.dumps(k) + ": ")
                emit(x, level + 1)
                out.append(",\n" if i < len(v) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(v, list):
            if not v:
                out.append("[]")
                return
            if all(not isinstance(x, (dict, list)) for x in v):
                out.append("[" + ", ".join(_scalar(x) for x in v) + "]")
                return
            out.append("[\n")
            for i, x in enumerate(v):
                out.append(pad)
                emit(x, level + 1)
                out.append(",\n" if i < len(v) - 1 else "\n")
            out.append(end + "]")
        else:
            out.append(_scalar(v))

    emit(_plain(obj), 0)
    return "".join(out) + "\n"


def _scalar(x) -> str:
    if x is True:
        return "true"
    if x is False:
        return "false"
    if x is None:
        return "null"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return fmt_float(x)
    return json.dumps(x)


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportIOError("cannot write output", path=str(path), cause=str(exc)) from exc


def export_report(reports: Sequence[Any], path: str | Path, config: dict | None = None,
                  summary: dict | None = None, csv_companions: bool = True) -> Path:
    """Write the JSON report and, next to it, flux.csv and distance.csv."""
    path = Path(path)
    stages = [_plain(r) for r in reports]
    doc = {
        "schema_version": REPORT_SCHEMA,
        "config": _plain(config or {}),
        "stages": stages,
        "summary": _plain(summary or {}),
    }
    _write(path, dumps(doc))
    if csv_companions:
        write_flux_csv(stages, path.with_name(path.stem + "_flux.csv"))
        write_distance_csv(stages, path.with_name(path.stem + "_distance.csv"))
    return path


def load_report(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ReportIOError("cannot read report", path=str(path), cause=str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ReportIOError("report is not valid JSON", path=str(path), cause=str(exc)) from exc


def _rows_csv(path: Path, header: list[str], rows: Iterable[list]):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise ReportIOError("cannot write CSV", path=str(path), cause=str(exc)) from exc


def write_flux_csv(stages: list[dict], path: Path):
    rows = []
    header = ["stage", "node", "p_index", "t_index", "generator"]
    n = 0
    for st in stages:
        for rec in st.get("nodes", []):
            for g, vec in enumerate(rec["flux"]):
                n = max(n, len(vec))
                rows.append([st["stage"], rec["node"], rec["p_index"], rec["t_index"], g, *vec])
    header += [f"F{k + 1}" for k in range(n)]
    _rows_csv(path, header, rows)


def write_distance_csv(stages: list[dict], path: Path):
    header = ["stage", "node", "p_index", "t_index", "gated", "certified", "certified_bound",
              "distance_estimate", "sup_change"]
    rows = []
    for st in stages:
        for rec in st.get("nodes", []):
            rows.append([st["stage"], rec["node"], rec["p_index"], rec["t_index"], rec["gated"],
                         rec["certified"], rec["certified_bound"], rec["distance_estimate"],
                         rec["sup_change"]])
    _rows_csv(path, header, [["" if v is None else v for v in r] for r in rows])


# Weierstrass coefficients ----------------------------------------------------------

def family_document(family: Sequence[WeierstrassData]) -> dict:
    """Coefficient tables per node; identical members are stored once."""
    uniq: dict[int, int] = {}
    tables, index = [], []
    for w in family:
        if id(w) not in uniq:
            uniq[id(w)] = len(tables)
            tables.append([[[int(k), [float(c.real), float(c.imag)]] for k, c in sorted(p.as_dict().items())]
                           for p in w.phi])
        index.append(uniq[id(w)])
    dom = family[0].domain.as_dict() if family else None
    return {"schema_version": FAMILY_SCHEMA, "domain": dom, "members": tables, "index": index}


def export_family(family: Sequence[WeierstrassData], path: str | Path) -> Path:
    path = Path(path)
    _write(path, dumps(family_document(family)))
    return path


def load_family(path: str | Path) -> list[WeierstrassData]:
    doc = load_report(path)
    if doc.get("schema_version") != FAMILY_SCHEMA:
        raise ReportIOError("not a family file", path=str(path))
    dom = AnnularDomain(doc["domain"]["r_in"], doc["domain"]["r_out"])
    members = []
    for table in doc["members"]:
        comps = []
        for terms in table:
            m = max((abs(k) for k, _ in terms), default=0)
            c = np.zeros(2 * m + 1, dtype=complex)
            for k, (re, im) in terms:
                c[k + m] = complex(re, im)
            comps.append(LaurentFunction(c, dom))
        members.append(WeierstrassData(tuple(comps), dom))
    return [members[i] for i in doc["index"]]


def export_coefficients_csv(family: Sequence[WeierstrassData], path: str | Path) -> Path:
    path = Path(path)
    rows = []
    for node, w in enumerate(family):
        for j, p in enumerate(w.phi):
            for k, c in sorted(p.as_dict().items()):
                rows.append([node, j, k, float(c.real), float(c.imag)])
    _rows_csv(path, ["node", "component", "power", "re", "im"], rows)
    return path


# meshes --------------------------------------------------------------------------------

def mesh_arrays(im: Immersion, resolution: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Vertices (n_r * n_theta, n) and 0-based triangles on the polar grid."""
    n_r, n_t = resolution
    if n_r < 8 or n_t < 32:
        raise PreconditionError("mesh resolution must be at least (8, 32)", resolution=[n_r, n_t])
    Z = polar_grid(im.data.domain, n_r, n_t)
    U = integrate_immersion(im, Z.ravel())
    V = U.T
    faces = []
    for i in range(n_r - 1):
        for k in range(n_t):
            a = i * n_t + k
            b = i * n_t + (k + 1) % n_t
            c = (i + 1) * n_t + (k + 1) % n_t
            d = (i + 1) * n_t + k
            faces.append((a, b, c))
            faces.append((a, c, d))
    return V, np.array(faces, dtype=int)


def export_mesh(im: Immersion, resolution: tuple[int, int], path: str | Path) -> Path:
    """ASCII mesh: 'v x y z' lines then 1-based 'f i j k' lines.

    For n > 3 only the first three coordinates go into the mesh; all n are
    written to a sidecar CSV named <path>.coords.csv.
    """
    path = Path(path)
    V, F = mesh_arrays(im, resolution)
    lines = [f"# vertices {V.shape[0]} faces {F.shape[0]} components {V.shape[1]}"]
    lines += ["v " + " ".join(fmt_float(float(x)) for x in row[:3]) for row in V]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in F]
    _write(path, "\n".join(lines) + "\n")
    if V.shape[1] > 3:
        side = path.with_name(path.name + ".coords.csv")
        _rows_csv(side, ["vertex"] + [f"x{j + 1}" for j in range(V.shape[1])],
                  [[i, *map(float, row)] for i, row in enumerate(V)])
    return path

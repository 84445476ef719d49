"""Serialization of runs and sweeps: CSVs, manifest, render script and figures.

Every table is computed before the first file is written, so a failure while
preparing results leaves no partial output behind.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import io
import json
import platform
import shutil
from importlib import metadata as _md
from pathlib import Path

import numpy as np

from . import plotting
from .experiments import mortality_profiles
from .metrics import MomentRecord
from .theory import TheoryTrajectory

CSV_FORMAT = "%.17g"
DENSITY_FIELDS = ("x", "q", "mortality", "mortality_limit")
SCALING_FIELDS = ("epsilon", "status", "terminal_m1_gap", "terminal_rho_gap", "terminal_w1",
                  "sup_w1", "terminal_m2c_gap")
SLOPE_FIELDS = ("metric", "slope", "n_points")
RENDER_SCRIPT = "render.py"


def csv_text(header, rows):
    """Comma-separated text with a header row; floats carry 17 significant digits."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else CSV_FORMAT % v for v in row) + "\n")
    return buf.getvalue()


def snapshot_label(t):
    return f"{float(t):g}"


def run_tables(result):
    """Mapping file name -> CSV text for one run."""
    run = result.run
    tables = {"moments.csv": csv_text(MomentRecord.field_names(),
                                      (r.as_row() for r in run.records))}
    for ts in sorted(run.snapshots):
        snap = run.snapshots[ts]
        m, m_lim = mortality_profiles(run.spec, run.grid, snap)
        cols = np.column_stack([run.grid.x, snap.q, m, m_lim])
        tables[f"density_t{snapshot_label(ts)}.csv"] = csv_text(DENSITY_FIELDS, cols)
    if result.theory is not None:
        tables["theory.csv"] = csv_text(TheoryTrajectory.field_names(),
                                        result.theory.columns())
    return tables


def versions():
    out = {"python": platform.python_version()}
    for pkg in ("traitevo", "numpy", "scipy", "matplotlib"):
        try:
            out[pkg] = _md.version(pkg)
        except _md.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _digest(text):
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_bundle(out, texts, manifest, figures=True):
    """Write ``texts``, the render script, the figures and finally the manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in texts.items():
        (out / name).write_text(text)
    shutil.copyfile(plotting.__file__, out / RENDER_SCRIPT)
    files = sorted(texts) + [RENDER_SCRIPT]
    manifest["files"] = files
    manifest["sha256"] = {n: _digest(t) for n, t in sorted(texts.items())}
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    if figures:
        pngs = plotting.render(out)
        manifest["files"] = files + pngs
        (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    return manifest


def write_run(result, out, figures=True):
    """Emit every artifact of a finished run into ``out``; return the manifest."""
    texts = {"resolved_config.ini": result.config.resolved_ini()}
    texts.update(run_tables(result))
    meta = {k: v for k, v in result.run.metadata.items() if k != "audit"}
    manifest = {
        "kind": "run",
        "scenario": result.config.name,
        "status": result.status,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "versions": versions(),
        "resolved_config": texts["resolved_config.ini"],
        "audit": result.run.metadata.get("audit"),
        "run": meta,
        "summary": result.summary,
    }
    return _write_bundle(out, texts, manifest, figures)


def scaling_tables(rows):
    """``scaling.csv`` and, with at least two survivors, ``slopes.csv``."""
    from .experiments import fit_slope

    rows = sorted(rows, key=lambda r: -r["epsilon"])
    body = [[r["epsilon"], r["status"]] + [r.get(k, float("nan")) for k in SCALING_FIELDS[2:]]
            for r in rows]
    tables = {"scaling.csv": csv_text(SCALING_FIELDS, body)}
    ok = [r for r in rows if r["status"] == "ok"]
    slopes = {}
    if len(ok) >= 2:
        eps = [r["epsilon"] for r in ok]
        for k in SCALING_FIELDS[2:]:
            slopes[k] = fit_slope(eps, [r[k] for r in ok])
        tables["slopes.csv"] = csv_text(SLOPE_FIELDS,
                                        ([k, v, float(len(ok))] for k, v in slopes.items()))
    return tables, slopes


def write_sweep(config, rows, out, figures=True):
    tables, slopes = scaling_tables(rows)
    texts = {"resolved_config.ini": config.resolved_ini()}
    texts.update(tables)
    manifest = {
        "kind": "sweep",
        "scenario": config.name,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "versions": versions(),
        "resolved_config": texts["resolved_config.ini"],
        "members": [{k: v for k, v in r.items()} for r in rows],
        "slopes": slopes,
    }
    return _write_bundle(out, texts, manifest, figures)

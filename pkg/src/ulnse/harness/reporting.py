"""Run persistence: manifests with checksums, reports and run comparison."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import traceback
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ManifestError
from .config import ExperimentConfig
from .experiments import RUNNERS, summarize

MANIFEST_NAME = "manifest.json"
SUMMARY_NAME = "summary.csv"


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_summary(out, checks):
    path = out / SUMMARY_NAME
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["claim", "measured", "threshold", "result"])
        for c in checks:
            w.writerow(c.row())
    return path


def write_manifest(out, echo, files, status, started, finished, error=None):
    out = Path(out)
    entries = []
    for f in files:
        f = Path(f)
        entries.append({"path": f.relative_to(out).as_posix(), "sha256": sha256(f)})
    manifest = {
        "experiment": echo["experiment"],
        "config": echo,
        "code_version": __version__,
        "started": started,
        "finished": finished,
        "status": status,
        "error": error,
        "files": entries,
    }
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Run ``cfg`` into ``out_dir`` and write the manifest; returns the manifest path.

    On any error the artifacts written so far are listed in a manifest marked
    ``failed`` and the error is re-raised.
    """
    out = Path(out_dir or cfg.out or f"runs/{cfg.name}-seed{cfg.seed}")
    out.mkdir(parents=True, exist_ok=True)
    echo = cfg.echo()
    started = _now()
    try:
        files = list(RUNNERS[cfg.name](cfg, out))
        files.append(_write_summary(out, summarize(echo, out)))
    except Exception as err:
        partial = sorted(p for p in out.iterdir() if p.is_file() and p.name != MANIFEST_NAME)
        msg = "".join(traceback.format_exception_only(type(err), err)).strip()
        write_manifest(out, echo, partial, "failed", started, _now(), msg)
        raise
    return write_manifest(out, echo, files, "ok", started, _now())


def load_manifest(path, verify=True):
    """Read a manifest (file or run directory) and check every listed artifact."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text())
    except OSError as err:
        raise ManifestError(f"cannot read manifest {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ManifestError(f"{path}: not a valid manifest: {err}") from None
    root = path.parent
    if verify:
        for entry in manifest.get("files", []):
            f = root / entry["path"]
            if not f.exists():
                raise ManifestError(f"artifact {entry['path']} listed in {path} is missing")
            if sha256(f) != entry["sha256"]:
                raise ManifestError(f"checksum mismatch for {entry['path']} in {path}")
    manifest["_root"] = str(root)
    return manifest


def _table(header, rows):
    rows = [[str(x) for x in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    sep = "  ".join("-" * w for w in widths)
    body = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join([line, sep, *body])


def report_checks(manifest_path):
    manifest = load_manifest(manifest_path)
    if manifest["status"] != "ok":
        raise ManifestError(f"run failed: {manifest.get('error')}")
    return manifest, summarize(manifest["config"], Path(manifest["_root"]))


def emit_report(manifest_path):
    """Human-readable table recomputed from the manifest's CSV artifacts."""
    manifest, checks = report_checks(manifest_path)
    head = (f"experiment: {manifest['experiment']}  seed: {manifest['config']['seed']}  "
            f"version: {manifest['code_version']}  finished: {manifest['finished']}")
    table = _table(["claim", "measured", "threshold", "result"], [c.row() for c in checks])
    verdict = "ALL PASS" if all(c.passed for c in checks) else "SOME CHECKS FAILED"
    return f"{head}\n{table}\n{verdict}"


def _trajectory_files(manifest):
    return [e["path"] for e in manifest["files"] if e["path"].endswith(".csv")]


def _read(path):
    """Header and data of a time-indexed CSV; ``None`` for tables without a ``t`` column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        if "t" not in header:
            return None
        rows = [[float(v) for v in r] for r in reader]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def compare_runs(manifest_a, manifest_b, time_tol=1e-9):
    """Per-diagnostic max relative difference at matched times, for every shared CSV.

    Returns rows ``(file, column, matched_times, max_abs_diff, max_rel_diff)``.
    """
    a = load_manifest(manifest_a)
    b = load_manifest(manifest_b)
    if a["experiment"] != b["experiment"]:
        raise ManifestError(f"cannot compare {a['experiment']!r} with {b['experiment']!r}")
    shared = [f for f in _trajectory_files(a) if f in set(_trajectory_files(b))]
    rows = []
    for name in shared:
        ra, rb = _read(Path(a["_root"]) / name), _read(Path(b["_root"]) / name)
        if ra is None or rb is None:
            continue
        (ha, da), (hb, db) = ra, rb
        ta, tb = da[:, ha.index("t")], db[:, hb.index("t")]
        idx = np.searchsorted(tb, ta)
        idx = np.clip(idx, 0, max(len(tb) - 1, 0))
        match = np.abs(tb[idx] - ta) <= time_tol * np.maximum(1.0, np.abs(ta)) if len(tb) else np.zeros(0, bool)
        ia, ib = np.nonzero(match)[0], idx[match]
        for col in ha:
            if col == "t" or col not in hb:
                continue
            x, y = da[ia, ha.index(col)], db[ib, hb.index(col)]
            diff = np.abs(x - y)
            scale = np.maximum(np.abs(x), np.abs(y))
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
            rows.append((name, col, int(ia.size), float(diff.max()) if diff.size else 0.0,
                         float(rel.max()) if rel.size else 0.0))
    return rows


def format_comparison(rows):
    return _table(["file", "column", "times", "max_abs_diff", "max_rel_diff"],
                  [(f, c, n, f"{d:.3e}", f"{r:.3e}") for f, c, n, d, r in rows])

"""Report emission (json, flat csv, plot data), per-trial tables and manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np

__all__ = [
    "emit_report",
    "summary_to_rows",
    "rows_to_summary",
    "read_csv_report",
    "gmc_table",
    "atom_table",
    "coalescence_table",
    "write_table",
    "write_manifest",
    "file_hash",
    "dumps_json",
]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(obj) -> str:
    # NaN/inf are written as null so the file stays strict JSON
    def clean(v):
        if isinstance(v, float) and not np.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, list):
            return [clean(x) for x in v]
        return v
    return json.dumps(clean(_plain(obj)), indent=2, sort_keys=True) + "\n"


def _as_dict(summary):
    d = summary.to_dict() if hasattr(summary, "to_dict") else dict(summary)
    if not d.get("trials"):
        raise ValueError("summary has no trials")
    return json.loads(dumps_json(d))


# flat csv: one row per leaf, path components joined by "/", list items as "#i"

def summary_to_rows(d, prefix=""):
    rows = []
    if isinstance(d, dict):
        if not d:
            rows.append((prefix, "dict", ""))
        for k in sorted(d):
            rows += summary_to_rows(d[k], f"{prefix}/{k}" if prefix else k)
    elif isinstance(d, list):
        if not d:
            rows.append((prefix, "list", ""))
        for i, v in enumerate(d):
            rows += summary_to_rows(v, f"{prefix}/#{i}")
    elif d is None:
        rows.append((prefix, "null", ""))
    elif isinstance(d, bool):
        rows.append((prefix, "bool", "true" if d else "false"))
    elif isinstance(d, int):
        rows.append((prefix, "int", str(d)))
    elif isinstance(d, float):
        rows.append((prefix, "float", repr(d)))
    else:
        rows.append((prefix, "str", str(d)))
    return rows


def _decode(kind, text):
    return {
        "null": lambda t: None,
        "bool": lambda t: t == "true",
        "int": int,
        "float": float,
        "str": str,
        "dict": lambda t: {},
        "list": lambda t: [],
    }[kind](text)


def rows_to_summary(rows):
    root = {}
    for path, kind, text in rows:
        parts = path.split("/")
        node = root
        for i, part in enumerate(parts):
            last = i == len(parts) - 1
            key = int(part[1:]) if part.startswith("#") else part
            nxt = None if last else ([] if parts[i + 1].startswith("#") else {})
            if isinstance(node, list):
                while len(node) <= key:
                    node.append(None)
                if last:
                    node[key] = _decode(kind, text)
                else:
                    if node[key] is None:
                        node[key] = nxt
                    node = node[key]
            else:
                if last:
                    node[key] = _decode(kind, text)
                else:
                    node = node.setdefault(key, nxt)
    return root


def read_csv_report(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["path", "type", "value"]:
            raise ValueError("not a flat report table")
        return rows_to_summary([tuple(r) for r in reader])


def _plot_series(d):
    out = {}
    rt = d.get("ratio_test") or {}
    ivs = rt.get("intervals") or []
    for entry in rt.get("per_n", []):
        lines = ["# x median_ratio stderr"]
        for (lo, hi), y, e in zip(ivs, entry.get("median_ratio", []), entry.get("median_ratio_stderr", [])):
            lines.append(f"{0.5 * (lo + hi)!r} {y!r} {e!r}")
        out[f"ratio_n{entry['n']}.dat"] = "\n".join(lines) + "\n"
    return out


def emit_report(summary, fmt: str, outdir) -> list[Path]:
    """Write ``summary`` as ``json``, ``csv`` or ``plotdata``; returns the files written."""
    d = _as_dict(summary)
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    files = {}
    if fmt == "json":
        files["summary.json"] = dumps_json(d)
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "type", "value"])
        w.writerows(summary_to_rows(d))
        files["summary.csv"] = buf.getvalue()
    elif fmt == "plotdata":
        files = {f"plotdata/{k}": v for k, v in _plot_series(d).items()}
        (out / "plotdata").mkdir(exist_ok=True)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    paths = []
    for name, text in files.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths


# per-trial tables

def gmc_table(results, epsilon):
    rows = []
    for r in results:
        for (lo, hi), m in zip(r.intervals, r.gmc_mass):
            rows.append((r.index, lo, hi, epsilon, float(m)))
    return ("trial", "interval_lo", "interval_hi", "epsilon", "mass"), rows


def atom_table(results, flavors=("profile", "local_proxy", "busemann")):
    rows = []
    for r in results:
        for n in r.levels:
            a = r.atoms[n]
            for flavor in flavors:
                for u, m, g in zip(a["u"], a[flavor], a["good"]):
                    rows.append((r.index, n, float(u), float(m), flavor, int(bool(g))))
    return ("trial", "n", "u", "atom_mass", "flavor", "good_flag"), rows


def coalescence_table(results):
    rows = []
    for r in results:
        for n in r.levels:
            c = r.records[n]
            for u, co, rad, g, b in zip(c["u"], c["coalesced"], c["radius"], c["good"], c["busemann"]):
                rows.append((r.index, n, float(u), int(bool(co)), float(rad), int(bool(g)), float(b)))
    return ("trial", "n", "u", "coalesced", "radius", "good", "busemann_diff"), rows


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, files, config_echo=None, seed=None) -> Path:
    """``manifest.json`` listing every file (relative path, sha256), sorted by path."""
    out = Path(outdir)
    entries = sorted(
        ({"path": Path(f).resolve().relative_to(out.resolve()).as_posix(), "sha256": file_hash(f)} for f in files),
        key=lambda e: e["path"],
    )
    body = {"files": entries, "seed": seed, "config_echo": config_echo}
    p = out / "manifest.json"
    p.write_text(dumps_json(body), encoding="utf-8")
    return p

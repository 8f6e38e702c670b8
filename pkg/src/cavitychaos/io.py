"""Serialized outputs (CSV / JSON) and experiment-config plumbing.

CSV cells use repr-style shortest round-trip formatting, so a write/read
cycle reproduces every float bit-exactly.  JSON payloads are versioned and
carry the full parameter metadata plus a hash of the generating config.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict

import numpy as np

from .chaos import GridMap
from .scattering import ExitRecord, ExitTimeHistogram

SCHEMA_VERSION = 1

EXIT_RECORD_COLUMNS = ["p0", "T", "detector", "m", "trapped",
                       "conservation_ok", "w_drift", "r_drift", "failed"]


def config_hash(config):
    """sha256 over the canonical JSON form of a config mapping."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_cell(text):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_table_csv(columns, path):
    """columns: ordered mapping name -> sequence; one record per line."""
    names = list(columns)
    rows = zip(*(columns[name] for name in names))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def read_table_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        columns = {name: [] for name in names}
        for row in reader:
            for name, cell in zip(names, row):
                columns[name].append(_parse_cell(cell))
    return columns


def _payload(obj):
    """JSON-ready (kind, data) for the supported result types."""
    if isinstance(obj, list) and (not obj or isinstance(obj[0], ExitRecord)):
        return "exit_records", {
            name: [getattr(r, name) for r in obj] for name in EXIT_RECORD_COLUMNS}
    if isinstance(obj, GridMap):
        return "grid_map", {
            "axes": [asdict(ax) | {"values": ax.values().tolist()}
                     for ax in obj.axes],
            "values": obj.values.tolist(),
            "metadata": obj.metadata,
        }
    if isinstance(obj, ExitTimeHistogram):
        return "exit_time_histogram", {
            "edges": obj.edges.tolist(),
            "counts": obj.counts.tolist(),
            "mass": obj.mass.tolist(),
            "density": obj.density.tolist(),
            "trapped_fraction": obj.trapped_fraction,
            "n_records": obj.n_records,
        }
    if isinstance(obj, dict):
        return "table", {k: np.asarray(v).tolist() for k, v in obj.items()}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_records(obj, path, fmt="csv", metadata=None):
    """Write exit records, a grid map, a histogram or a column table.

    CSV gets a header row and one record per line; JSON wraps the data in a
    schema-versioned envelope with the metadata mapping.
    """
    kind, data = _payload(obj)
    if fmt == "json":
        envelope = {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "metadata": metadata or {},
            "data": data,
        }
        with open(path, "w") as fh:
            json.dump(envelope, fh, indent=1)
            fh.write("\n")
        return path
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if kind == "exit_records":
        write_table_csv(data, path)
    elif kind == "table":
        write_table_csv(data, path)
    elif kind == "exit_time_histogram":
        centers = 0.5 * (np.array(data["edges"][:-1]) + np.array(data["edges"][1:]))
        write_table_csv({
            "t_lo": data["edges"][:-1],
            "t_hi": data["edges"][1:],
            "t_center": centers,
            "count": data["counts"],
            "mass": data["mass"],
            "density": data["density"],
        }, path)
    elif kind == "grid_map":
        ax0, ax1 = data["axes"]
        cols = {ax0["name"]: [], ax1["name"]: [], "value": []}
        for i, v0 in enumerate(ax0["values"]):
            for j, v1 in enumerate(ax1["values"]):
                cols[ax0["name"]].append(v0)
                cols[ax1["name"]].append(v1)
                cols["value"].append(data["values"][i][j])
        write_table_csv(cols, path)
    return path


def read_exit_records_csv(path):
    cols = read_table_csv(path)
    n = len(cols["p0"])
    return [ExitRecord(**{name: cols[name][i] for name in EXIT_RECORD_COLUMNS})
            for i in range(n)]


def read_json(path):
    with open(path) as fh:
        return json.load(fh)

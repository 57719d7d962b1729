"""CSV tables plus a JSON manifest per run.

CSV output depends only on the config and seed, so reruns are byte-identical;
wall-clock timings are confined to the manifest.
"""

import json
import os
import platform

from . import __version__

SCHEMA_VERSION = 1


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    try:
        return repr(float(v))
    except (TypeError, ValueError):
        return str(v)


def write_table(path, columns, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_reports(tables, manifest, directory):
    """Write ``{filename: (columns, rows)}`` as CSV and ``manifest.json`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    written = []
    for name, (columns, rows) in tables.items():
        path = os.path.join(directory, name)
        write_table(path, columns, rows)
        written.append(name)
    full = {"tool": "gbsde_lab", "version": __version__, "schema_version": SCHEMA_VERSION,
            "python": platform.python_version(), "files": sorted(written + manifest.pop("extra_files", [])),
            **manifest}
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(full, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return written


def _jsonable(obj):
    try:
        return float(obj)
    except (TypeError, ValueError):
        return str(obj)

"""Parsers for the lowmach text artifacts (file-format interface only)."""

from __future__ import annotations

import csv
import os

from . import MissingQuantity

REPORT_MAGIC = "lowmach-rate-report"
SUPPORTED_VERSION = 1


def parse_rate_report(path):
    """Return (runs, slopes): per-epsilon value dicts and per-quantity
    slope dicts, with numbers parsed as floats and the raw strings kept
    under *_raw keys so annotations can quote the file verbatim."""
    if not os.path.exists(path):
        raise MissingQuantity(f"report file {path} does not exist")
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith(REPORT_MAGIC):
        raise MissingQuantity(f"{path} is not a rate report")
    version = int(lines[0].split()[1])
    if version != SUPPORTED_VERSION:
        raise MissingQuantity(
            f"{path}: unsupported report version {version}")
    runs, slopes = [], {}
    section, current = None, None

    def flush():
        if section == "run" and current:
            runs.append(dict(current))
        elif section == "slope" and current:
            slopes[current["quantity"]] = dict(current)

    for line in lines[1:]:
        if line.startswith("["):
            flush()
            section = line.strip("[]")
            current = {}
            continue
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if sep and section in ("run", "slope"):
            current[key] = value
    flush()

    parsed_runs = []
    for r in runs:
        row = {}
        for key, value in r.items():
            row[key + "_raw"] = value
            try:
                row[key] = float(value)
            except ValueError:
                row[key] = value
        parsed_runs.append(row)
    parsed_slopes = {}
    for name, s in slopes.items():
        d = {k + "_raw": v for k, v in s.items()}
        d.update({k: _maybe_float(v) for k, v in s.items()})
        parsed_slopes[name] = d
    return parsed_runs, parsed_slopes


def _maybe_float(text):
    try:
        return float(text)
    except ValueError:
        return text


def read_csv_columns(path):
    """CSV -> dict of column name to list of floats (strings preserved in
    a parallel '<name>_raw' entry)."""
    if not os.path.exists(path):
        raise MissingQuantity(f"csv file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingQuantity(f"{path} is empty") from None
        cols = {name: [] for name in header}
        raw = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                raw[name].append(value)
                try:
                    cols[name].append(float(value))
                except ValueError:
                    cols[name].append(float("nan"))
    out = dict(cols)
    for name in header:
        out[name + "_raw"] = raw[name]
    return out

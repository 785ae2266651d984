"""Render volsamp expected-error CSVs into publication-style figure grids.

The input is the frozen CSV schema of the ``volsamp expected-error``
command (columns N, m, expected_error, sigma_m, expected_leverage,
upper_bound, lower_bound, tail_fraction).  A figure spec lays the files
out on a panel grid: one row per parameter value, one column per quantity
kind ("leverage" or "error"), one curve per configured m plus a bound
curve per panel.  Rendering is read-only over the CSVs and deterministic
given identical inputs and tool versions.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KIND_COLUMNS = {"leverage": "expected_leverage", "error": "expected_error"}
REQUIRED_COLUMNS = ("N", "m")
SPEC_KEYS = {"name", "rows", "columns", "m_values", "log_y", "format", "title_template"}
FORMATS = ("png", "svg")


class SchemaError(ValueError):
    """A CSV or figure spec does not match the frozen schema."""


@dataclass(frozen=True)
class FigureSpec:
    """Panel-grid description: rows are parameter values (one CSV each),
    columns are quantity kinds."""

    name: str
    rows: tuple[dict, ...]  # {"csv": path, "label": str}
    columns: tuple[str, ...]
    m_values: tuple[int, ...]
    log_y: bool = True
    format: str = "png"
    title_template: str = "{label}"

    @classmethod
    def from_mapping(cls, raw: dict) -> "FigureSpec":
        if not isinstance(raw, dict):
            raise SchemaError("figure spec must be a JSON object")
        unknown = set(raw) - SPEC_KEYS
        if unknown:
            raise SchemaError(f"unknown figure-spec keys: {sorted(unknown)}")
        for key in ("name", "rows", "columns", "m_values"):
            if key not in raw:
                raise SchemaError(f"figure spec is missing {key!r}")
        rows = raw["rows"]
        if not isinstance(rows, list) or not rows:
            raise SchemaError("'rows' must be a non-empty list")
        for row in rows:
            if not isinstance(row, dict) or "csv" not in row or "label" not in row:
                raise SchemaError("each row needs 'csv' and 'label'")
        columns = tuple(raw["columns"])
        if not columns or any(c not in KIND_COLUMNS for c in columns):
            raise SchemaError(f"'columns' must be a non-empty subset of {sorted(KIND_COLUMNS)}")
        m_values = tuple(int(m) for m in raw["m_values"])
        if not m_values:
            raise SchemaError("'m_values' must be non-empty")
        fmt = raw.get("format", "png")
        if fmt not in FORMATS:
            raise SchemaError(f"'format' must be one of {FORMATS}")
        return cls(
            name=str(raw["name"]),
            rows=tuple(rows),
            columns=columns,
            m_values=m_values,
            log_y=bool(raw.get("log_y", True)),
            format=fmt,
            title_template=str(raw.get("title_template", "{label}")),
        )

    @classmethod
    def from_file(cls, path: str) -> "FigureSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))


def load_table(path: str, value_columns: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read the CSV and return the needed columns as float arrays.

    Missing columns raise SchemaError naming the column; empty cells become
    NaN (the bound column is empty where the bound is undefined).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            needed = REQUIRED_COLUMNS + value_columns
            for col in needed:
                if col not in header:
                    raise SchemaError(f"{path}: missing column {col!r}")
            rows = list(reader)
    except FileNotFoundError:
        raise SchemaError(f"{path}: no such CSV") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out: dict[str, np.ndarray] = {}
    for col in needed:
        out[col] = np.array([float(r[col]) if r[col] != "" else np.nan for r in rows])
    return out


def _panel(ax, table, kind: str, m_values, log_y: bool, title: str) -> int:
    """Draw one panel; returns the number of curves drawn."""
    value_col = KIND_COLUMNS[kind]
    curves = 0
    for m in m_values:
        mask = table["m"] == m
        order = np.argsort(table["N"][mask])
        ax.plot(table["N"][mask][order], table[value_col][mask][order], label=f"m={m}")
        curves += 1
    if kind == "error":
        mask = ~np.isnan(table["upper_bound"])
        n_vals, idx = np.unique(table["N"][mask], return_index=True)
        ax.plot(n_vals, table["upper_bound"][mask][idx], "k--", label="UB")
    else:
        n_vals = np.unique(table["N"])
        ax.plot(n_vals, np.ones_like(n_vals), "k--", label="cap")
    curves += 1
    if kind == "error" and log_y:
        ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel(value_col)
    ax.set_title(title)
    ax.legend(fontsize="x-small")
    return curves


def render(spec: FigureSpec, out_dir: str) -> dict:
    """Render the figure grid; returns a report with the files written and
    the curve count per panel."""
    os.makedirs(out_dir, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = spec.name
    n_rows, n_cols = len(spec.rows), len(spec.columns)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(4.5 * n_cols, 3.0 * n_rows), squeeze=False
    )
    value_columns = tuple(KIND_COLUMNS[c] for c in spec.columns) + ("upper_bound",)
    panels = []
    for i, row in enumerate(spec.rows):
        table = load_table(row["csv"], value_columns)
        for j, kind in enumerate(spec.columns):
            title = spec.title_template.format(label=row["label"], kind=kind)
            curves = _panel(axes[i][j], table, kind, spec.m_values, spec.log_y, title)
            panels.append({"row": row["label"], "column": kind, "curves": curves})
    fig.tight_layout()
    path = os.path.join(out_dir, f"{spec.name}.{spec.format}")
    metadata = {"Date": None} if spec.format == "svg" else None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
    return {"files": [path], "panels": panels}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="volsamp-plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render a figure spec from experiment CSVs")
    p.add_argument("--spec", required=True, help="path to the figure-spec JSON")
    p.add_argument("--out", required=True, help="output directory for images")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_file(args.spec)
        report = render(spec, args.out)
    except (SchemaError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(report))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""File formats: chain CSVs, summaries, metadata sidecars, reports.

Every output file begins with commented provenance lines carrying the full
resolved configuration and seed, so a fit can be re-run from any of its own
outputs.  Numbers are serialized with 17 significant digits, which
round-trips doubles exactly.  Timings and counters go only to the metadata
sidecar, keeping chain files byte-identical across repeated seeded runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain

__all__ = [
    "format_float",
    "provenance_lines",
    "write_chain_csv",
    "read_chain_csv",
    "write_summary_csv",
    "write_table_csv",
    "write_metadata",
]


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def provenance_lines(resolved: dict) -> list:
    return [f"# {key} = {resolved[key]}" for key in sorted(resolved)]


def _write_commented(fh, resolved: dict | None) -> None:
    if resolved:
        for line in provenance_lines(resolved):
            fh.write(line + "\n")


def write_chain_csv(path, chain: PosteriorChain, resolved: dict | None = None) -> None:
    """One row per stored draw, one column per scalar parameter."""
    path = Path(path)
    names = chain.param_names()
    mat = chain.to_matrix()
    with path.open("w", newline="") as fh:
        _write_commented(fh, resolved)
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in mat:
            writer.writerow([format_float(v) for v in row])


def read_chain_csv(path) -> tuple[dict, list, np.ndarray]:
    """Reload a chain file: (provenance, parameter names, draw matrix)."""
    path = Path(path)
    header: dict = {}
    names: list = []
    rows = []
    with path.open() as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            if not names:
                names = next(csv.reader([line]))
                continue
            rows.append([float(v) for v in next(csv.reader([line]))])
    if not names:
        raise ValueError(f"{path} contains no chain header row")
    return header, names, np.array(rows)


def write_summary_csv(path, summaries, resolved: dict | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        _write_commented(fh, resolved)
        writer = csv.writer(fh)
        writer.writerow(["parameter", "mean", "sd", "q2.5", "q50", "q97.5", "ess"])
        for s in summaries:
            writer.writerow(
                [s.name] + [format_float(v) for v in (s.mean, s.sd, s.q025, s.q50, s.q975, s.ess)]
            )


def write_table_csv(path, names: list, columns: list, resolved: dict | None = None) -> None:
    """Generic plot-ready CSV: named columns of equal length."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    with path.open("w", newline="") as fh:
        _write_commented(fh, resolved)
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(cols[0].shape[0]):
            writer.writerow([format_float(c[i]) for c in cols])


def write_metadata(path, sections: dict) -> None:
    """Key-value metadata grouped by [section] headers."""
    path = Path(path)
    with path.open("w") as fh:
        for section, kv in sections.items():
            fh.write(f"[{section}]\n")
            for key in sorted(kv):
                fh.write(f"{key} = {kv[key]}\n")
            fh.write("\n")

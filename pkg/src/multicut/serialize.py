"""Deterministic serialization: solution JSON and 17-digit CSV tables."""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .equilibrium import EquilibriumSolution

__all__ = ["format_float", "write_csv", "csv_text", "solution_record", "dump_json"]


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return f"{float(x):.17g}"


def csv_text(header: Sequence[str], columns: Iterable[np.ndarray]) -> str:
    cols = [np.asarray(c).ravel() for c in columns]
    if len({c.size for c in cols}) > 1:
        raise ValueError("CSV columns differ in length")
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*cols):
        buf.write(",".join(v if isinstance(v, str) else format_float(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path: str | Path | None, header: Sequence[str], columns: Iterable[np.ndarray]) -> str:
    """Write to ``path`` (or return only, when ``path`` is ``None``)."""
    text = csv_text(header, columns)
    if path is not None:
        Path(path).write_text(text)
    return text


def dump_json(obj) -> str:
    """Sorted keys, fixed indentation, shortest round-trip floats."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def solution_record(sol: EquilibriumSolution, density_table: str | None = None) -> dict:
    """JSON-ready summary; re-readable as a configuration."""
    if sol.potential.description is None:
        raise ValueError("potential has no description and cannot be serialized")
    cache = sol.cache
    rec = {
        "kind": "solution",
        "potential": sol.potential.description,
        "genus": sol.genus,
        "endpoints": [float(e) for e in sol.support.array],
        "cycles": cache.cycles,
        "mesh": {"n": cache.n, "n_gap": cache.n_gap},
        "A": float(sol.A),
        "V_J": float(sol.V_J),
        "A_translation": float(sol.A_shift),
        "residual": [float(r) for r in sol.residual],
        "residual_norm": sol.residual_norm,
        "cut_masses": [float(m) for m in sol.sigma.cut_masses()],
        "probe_A_spread": float(np.ptp(sol.probe_A)) if sol.probe_A.size else None,
    }
    if density_table is not None:
        rec["density_table"] = density_table
    return rec

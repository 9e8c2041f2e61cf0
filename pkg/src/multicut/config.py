"""Run configuration: JSON parsing, schema validation and defaults.

A configuration names a potential and an initial support; everything else
has a default. ``oracle`` needs only the potential and ``verify`` needs
neither. A solution file written by ``solve`` is accepted wherever a
configuration is, and rebuilds the solution at its stored endpoints without
iterating. Unknown top-level keys are ignored so that solution records,
which carry extra diagnostics, read back as configurations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .equilibrium import SolveOptions
from .potential import Perturbation, PotentialError, PotentialSpec
from .surface import CYCLE_CONVENTIONS, Support, SurfaceError

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "SCHEMA"]


class ConfigError(ValueError):
    pass


_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_FIELD = {"type": "object", "required": ["form"]}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["config", "solution"]},
        "potential": _FIELD,
        "genus": {"type": "integer", "minimum": 0},
        "initial_support": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "endpoints": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "cycles": {"enum": list(CYCLE_CONVENTIONS)},
        "mesh": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 8},
                "n_gap": {"type": "integer", "minimum": 8},
            },
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "newton": _POS,
                "fd_step": _POS,
                "collapse": _POS,
                "positivity": _POS,
                "mass": _POS,
            },
            "additionalProperties": False,
        },
        "max_iter": {"type": "integer", "minimum": 1},
        "kernel": {
            "type": "object",
            "properties": {
                "grid": {"type": "integer", "minimum": 1},
                "exclusion": _POS,
                "method": {"enum": ["pi", "direct"]},
            },
            "additionalProperties": False,
        },
        "perturbation": _FIELD,
        "test_function": _FIELD,
        "oracle": {
            "type": "object",
            "properties": {
                "box": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "n": {"type": "integer", "minimum": 2},
                "iters": {"type": "integer", "minimum": 1},
                "self_energy": {"type": "boolean"},
                "threshold": _POS,
            },
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "tolerances": {"type": "object", "additionalProperties": _NONNEG},
                "only": {"type": "array", "items": {"type": "string"}},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
    },
}


@dataclass
class RunConfig:
    potential: PotentialSpec | None
    support: Support | None
    genus: int | None
    cycles: str = "gap"
    options: SolveOptions = field(default_factory=SolveOptions)
    mass_tol: float = 1e-9
    kernel_grid: int = 20
    exclusion: float | None = None
    kernel_method: str = "pi"
    perturbation: Perturbation | None = None
    test_function: Perturbation | None = None
    oracle_box: tuple[float, float] = (-3.0, 3.0)
    oracle_n: int = 4000
    oracle_iters: int = 20000
    oracle_self_energy: bool = True
    oracle_threshold: float = 1e-8
    verify_tolerances: dict[str, float] = field(default_factory=dict)
    verify_only: list[str] | None = None
    output: str | None = None
    is_solution: bool = False
    raw: dict = field(default_factory=dict, repr=False)
    source: str = "<config>"

    def require_potential(self) -> None:
        if self.potential is None:
            raise ConfigError(f"{self.source}: this command needs a 'potential'")

    def require_problem(self) -> None:
        """Raise unless a potential and a support were given."""
        if self.potential is None or self.support is None:
            raise ConfigError(f"{self.source}: this command needs 'potential' and "
                              f"'initial_support' (or a solution file)")


def _loads(text: str, source: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    return data


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}")
    return parse_config(_loads(text, str(path)), str(path))


def parse_config(data: dict, source: str = "<config>") -> RunConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: invalid value at {where}: {exc.message}")

    is_solution = data.get("kind") == "solution"
    key = "endpoints" if is_solution else "initial_support"
    if is_solution and not ("potential" in data and key in data):
        raise ConfigError(f"{source}: solution file lacks 'potential' or 'endpoints'")
    if key in data and "potential" not in data:
        raise ConfigError(f"{source}: '{key}' given without a 'potential'")
    try:
        potential = PotentialSpec.from_description(data["potential"]) if "potential" in data else None
        support = Support(tuple(float(e) for e in data[key])) if key in data else None
        pert = Perturbation.from_description(data["perturbation"]) if "perturbation" in data else None
        test = Perturbation.from_description(data["test_function"]) if "test_function" in data else None
    except (PotentialError, SurfaceError, KeyError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}")
    genus = data.get("genus", support.genus if support else None)
    if support is not None and genus != support.genus:
        raise ConfigError(f"{source}: genus {genus} does not match the {len(support.array)} "
                          f"endpoints given (genus {support.genus})")

    mesh = data.get("mesh", {})
    tols = data.get("tolerances", {})
    base = SolveOptions()
    opts = SolveOptions(
        tol=tols.get("newton", base.tol),
        max_iter=data.get("max_iter", base.max_iter),
        n=mesh.get("n", base.n),
        n_gap=mesh.get("n_gap", base.n_gap),
        fd_step=tols.get("fd_step", base.fd_step),
        collapse_tol=tols.get("collapse", base.collapse_tol),
        positivity_tol=tols.get("positivity", base.positivity_tol),
    )
    kern = data.get("kernel", {})
    orc = data.get("oracle", {})
    ver = data.get("verify", {})
    box = tuple(float(b) for b in orc.get("box", (-3.0, 3.0)))
    if not box[0] < box[1]:
        raise ConfigError(f"{source}: oracle box must be increasing")
    return RunConfig(
        potential=potential,
        support=support,
        genus=genus,
        cycles=data.get("cycles", "gap"),
        options=opts,
        mass_tol=tols.get("mass", 1e-9),
        kernel_grid=kern.get("grid", 20),
        exclusion=kern.get("exclusion"),
        kernel_method=kern.get("method", "pi"),
        perturbation=pert,
        test_function=test,
        oracle_box=box,
        oracle_n=orc.get("n", 4000),
        oracle_iters=orc.get("iters", 20000),
        oracle_self_energy=orc.get("self_energy", True),
        oracle_threshold=orc.get("threshold", 1e-8),
        verify_tolerances=dict(ver.get("tolerances", {})),
        verify_only=ver.get("only"),
        output=data.get("output"),
        is_solution=is_solution,
        raw=data,
        source=source,
    )

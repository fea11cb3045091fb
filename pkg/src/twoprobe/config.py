"""JSON run configuration: schema checks and conversion to domain objects.

Layout::

    {
      "backend": "bogoliubov" | "exact",
      "model": {"num_sites", "num_particles", "hopping", "interaction",
                "chemical_potential", "boundary", "n_max"},
      "probes": {"coupling", "separations", "site_left"},
      "equilibrium": {"kind": "ground_state" | "thermal", "beta"},
      "grid": {"step", "count"},
      "noise": {"runs", "seed", "pairs"},
      "fit": {"degree_re", "degree_im", "parity"},
      "sweep": {"parameter": "interaction" | "n_max" | "beta", "values"}
    }

Unknown keys anywhere are rejected.  A run manifest written by the CLI is
also accepted; its embedded configuration is used.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .model import ConfigError, EquilibriumSpec, ModelSpec, ProbeLayout, TimeGrid, validate
from .protocol import NoiseSpec

__all__ = ["RunConfig", "load_config", "parse_config", "SCHEMA"]

_NUM = (int, float)
SCHEMA = {
    "backend": str,
    "model": {
        "num_sites": int, "num_particles": int, "hopping": _NUM, "interaction": _NUM,
        "chemical_potential": _NUM, "boundary": str, "n_max": int,
    },
    "probes": {"coupling": _NUM, "separations": list, "site_left": int},
    "equilibrium": {"kind": str, "beta": _NUM},
    "grid": {"step": _NUM, "count": int},
    "noise": {"runs": int, "seed": int, "pairs": int, "model": str},
    "fit": {"degree_re": int, "degree_im": int, "parity": bool},
    "sweep": {"parameter": str, "values": list},
}
REQUIRED = {"model": ("num_sites", "num_particles"), "probes": ("coupling",)}
SWEEPABLE = ("interaction", "n_max", "beta")


def _check(doc: dict, schema: dict, where: str = ""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    for key, value in doc.items():
        path = f"{where}.{key}" if where else key
        if key not in schema:
            raise ConfigError(f"unknown key {path!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            _check(value, expected, path)
        elif isinstance(value, bool) and expected is not bool:
            raise ConfigError(f"{path} must be {getattr(expected, '__name__', 'a number')}, got a boolean")
        elif not isinstance(value, expected):
            name = expected.__name__ if isinstance(expected, type) else "number"
            raise ConfigError(f"{path} must be of type {name}, got {type(value).__name__}")


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    backend: str
    model: ModelSpec
    n_max: int
    coupling: float
    separations: tuple
    site_left: int
    equilibrium: EquilibriumSpec
    grid: TimeGrid
    noise: NoiseSpec | None
    fit: dict
    sweep: dict | None

    @property
    def seed(self) -> int:
        return self.noise.seed if self.noise is not None else int(self.raw.get("noise", {}).get("seed", 0))


def parse_config(doc: dict) -> RunConfig:
    if "manifest_version" in doc:
        doc = doc["config"]
    doc = copy.deepcopy(doc)
    _check(doc, SCHEMA)
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in doc.get(section, {}):
                raise ConfigError(f"missing required key {section}.{key}")

    m = doc["model"]
    model = ModelSpec(
        num_sites=m["num_sites"], num_particles=m["num_particles"],
        hopping=float(m.get("hopping", 1.0)), interaction=float(m.get("interaction", 0.0)),
        chemical_potential=float(m.get("chemical_potential", 0.0)),
        boundary=m.get("boundary", "periodic"),
    )
    p = doc["probes"]
    separations = tuple(p.get("separations", [0]))
    if not separations or not all(isinstance(s, int) and not isinstance(s, bool) for s in separations):
        raise ConfigError("probes.separations must be a non-empty list of integers")
    e = doc.get("equilibrium", {})
    equilibrium = EquilibriumSpec(e.get("kind", "ground_state"), e.get("beta"))
    g = doc.get("grid", {})
    grid = TimeGrid(float(g.get("step", 0.01)), g.get("count", 20))
    noise = NoiseSpec(**doc["noise"]) if "noise" in doc else None
    backend = doc.get("backend", "bogoliubov")
    if backend not in ("bogoliubov", "exact"):
        raise ConfigError(f"backend must be 'bogoliubov' or 'exact', got {backend!r}")
    fit = {"degree_re": 4, "degree_im": 3, "parity": True}
    fit.update(doc.get("fit", {}))
    sweep = doc.get("sweep")
    if sweep is not None:
        if sweep.get("parameter") not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter must be one of {SWEEPABLE}")
        if not sweep.get("values"):
            raise ConfigError("sweep.values must be a non-empty list")

    site_left = p.get("site_left", 0)
    coupling = float(p["coupling"])
    for s in separations:
        validate(model, ProbeLayout.from_separation(s, coupling, site_left), equilibrium, grid)
    return RunConfig(doc, backend, model, m.get("n_max", 4), coupling, separations, site_left,
                     equilibrium, grid, noise, fit, sweep)


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc)

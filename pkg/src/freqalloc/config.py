"""Run configuration and layout files.

A run configuration is a JSON object::

    {
      "lattice": {"kind": "chain", "cells": 8, "periodic": true},
      "architecture": "cr-qubit",
      "thresholds": {"delta_A1": 17},
      "solver": {"band": [4600, 5400], "alpha": -330, "node_limit": 2000},
      "dispersion": {"sigma": 50, "trials": 10000, "seed": 0},
      "output_dir": "out"
    }

``lattice`` may instead be a path to a graph JSON file. Relative paths are
resolved against the directory of the configuration file. Every key is
optional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .architecture import Architecture
from .constraints import FrequencyAssignment, ThresholdTable
from .graph import DeviceGraph, GraphError, LatticeSpec, build_lattice
from .solver import SolveConfig, SolveResult
from .yields import DispersionModel


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def read_json(path: str | Path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


@dataclass
class RunConfig:
    lattice: LatticeSpec | Path = field(default_factory=lambda: LatticeSpec("chain", 8, True))
    architecture: Architecture = Architecture.CR_QUBIT
    thresholds: ThresholdTable = field(default_factory=ThresholdTable)
    solver: SolveConfig = field(default_factory=SolveConfig)
    dispersion: DispersionModel = field(default_factory=lambda: DispersionModel(50.0, 10_000, 0))
    output_dir: Path = Path(".")

    def graph(self) -> DeviceGraph:
        if isinstance(self.lattice, LatticeSpec):
            return build_lattice(self.lattice)
        return DeviceGraph.load(self.lattice)

    def table(self) -> ThresholdTable:
        return self.thresholds.with_architecture(self.architecture)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {"lattice", "architecture", "thresholds", "solver", "dispersion", "output_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        try:
            if "lattice" in data:
                cfg.lattice = _lattice(data["lattice"], base)
            if "architecture" in data:
                cfg.architecture = Architecture.parse(data["architecture"])
            if "thresholds" in data:
                cfg.thresholds = ThresholdTable.from_dict(data["thresholds"])
            if "solver" in data:
                cfg.solver = _solver(data["solver"])
            if "dispersion" in data:
                d = dict(data["dispersion"])
                cfg.dispersion = DispersionModel(
                    float(d.pop("sigma", 50.0)), int(d.pop("trials", 10_000)), int(d.pop("seed", 0))
                )
                if d:
                    raise ConfigError(f"unknown dispersion keys: {', '.join(sorted(d))}")
            if "output_dir" in data:
                cfg.output_dir = base / str(data["output_dir"])
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError, GraphError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(read_json(path), path.parent)


def _lattice(value, base: Path) -> LatticeSpec | Path:
    if isinstance(value, str):
        path = base / value
        if not path.exists():
            raise ConfigError(f"graph file not found: {path}")
        return path
    value = dict(value)
    kind = value.pop("kind")
    cells = value.pop("cells", None)
    periodic = bool(value.pop("periodic", True))
    if value:
        raise ConfigError(f"unknown lattice keys: {', '.join(sorted(value))}")
    if cells is None:
        spec = LatticeSpec.standard(kind)
        return replace(spec, periodic=periodic)
    return LatticeSpec(kind, int(cells), periodic)


def _solver(value: dict) -> SolveConfig:
    value = dict(value)
    names = {f.name for f in fields(SolveConfig)}
    unknown = set(value) - names
    if unknown:
        raise ConfigError(f"unknown solver keys: {', '.join(sorted(unknown))}")
    if "band" in value:
        value["band"] = tuple(float(v) for v in value["band"])
    return SolveConfig(**value)


def _clean_stats(stats):
    # wall-clock entries would make otherwise identical runs differ
    if isinstance(stats, dict):
        return {k: _clean_stats(v) for k, v in stats.items() if k != "wall_time"}
    if isinstance(stats, float) and not math.isfinite(stats):
        return None
    return stats


def layout_document(result: SolveResult, graph: DeviceGraph, table: ThresholdTable) -> dict:
    doc = result.to_dict(graph, table)
    doc["stats"] = _clean_stats(doc["stats"])
    for key in ("R", "min_margin"):
        if not math.isfinite(doc[key]):
            doc[key] = None
    return doc


def write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")


@dataclass
class Layout:
    assignment: FrequencyAssignment
    graph: DeviceGraph | None
    architecture: Architecture | None


def load_layout(path: str | Path) -> Layout:
    data = read_json(path)
    try:
        freqs = data["frequencies"]
        if freqs is None:
            raise ConfigError(f"{path}: layout has no frequencies")
        anharms = data.get("anharmonicities")
        if anharms is None:
            anharms = [float(data.get("alpha", SolveConfig().alpha))] * len(freqs)
        drives = {(int(i), int(j)): float(v) for i, j, v in data.get("drives", [])}
        assignment = FrequencyAssignment(freqs, anharms, drives)
        graph = DeviceGraph.from_dict(data["graph"]) if "graph" in data else None
        arch = Architecture.parse(data["architecture"]) if "architecture" in data else None
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, GraphError) as exc:
        raise ConfigError(f"{path}: malformed layout: {exc}") from exc
    return Layout(assignment, graph, arch)

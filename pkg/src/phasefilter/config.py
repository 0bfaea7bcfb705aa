"""JSON run configuration: schema, dotted-path overrides and object construction.

Complex matrices are written either as nested real lists or as
``{"re": [[...]], "im": [[...]]}``.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

import jsonschema
import numpy as np

from .filters import CountingVariant, HomodyneIntegrator
from .gaussian import GaussianForm
from .interferometer import InterferometerModel
from .operators import (
    DiagonalSpectrum,
    LinearizedOscillator,
    diagonal_state,
    gaussian_state,
    pure_state,
)
from .trajectories import CoherentAmplitude, TrajectoryConfig

OUTPUT_DIR_ENV = "PHASEFILTER_OUTPUT_DIR"


class ConfigError(ValueError):
    """Configuration failed schema or physical validation."""


_NUMBER = {"type": "number"}
_REAL_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUMBER}}
_MATRIX = {
    "oneOf": [
        _REAL_MATRIX,
        {
            "type": "object",
            "properties": {"re": _REAL_MATRIX, "im": _REAL_MATRIX},
            "required": ["re"],
            "additionalProperties": False,
        },
    ]
}
_STATE = {
    "oneOf": [
        _MATRIX,
        {
            "type": "object",
            "properties": {
                "type": {"const": "diagonal"},
                "weights": {"type": "array", "items": _NUMBER, "minItems": 1},
            },
            "required": ["type", "weights"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "pure"},
                "re": {"type": "array", "items": _NUMBER, "minItems": 1},
                "im": {"type": "array", "items": _NUMBER},
            },
            "required": ["type", "re"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "gaussian"},
                "mean_q": _NUMBER,
                "mean_p": _NUMBER,
                "var_q": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["type"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["model", "drive", "scheme", "dt", "T", "seed", "initial_state"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["phase"],
            "additionalProperties": False,
            "properties": {
                "phase": {
                    "oneOf": [
                        {
                            "type": "object",
                            "properties": {
                                "type": {"const": "diagonal"},
                                "eigenvalues": {"type": "array", "items": _NUMBER, "minItems": 1},
                                "hbar": {"type": "number", "exclusiveMinimum": 0},
                            },
                            "required": ["type", "eigenvalues"],
                            "additionalProperties": False,
                        },
                        {
                            "type": "object",
                            "properties": {
                                "type": {"const": "oscillator"},
                                "k": _NUMBER,
                                "n": {"type": "integer"},
                                "fock_dim": {"type": "integer", "minimum": 2},
                                "hbar": {"type": "number", "exclusiveMinimum": 0},
                            },
                            "required": ["type", "k"],
                            "additionalProperties": False,
                        },
                    ]
                },
                "hamiltonian": {"oneOf": [{"const": "zero"}, _MATRIX]},
            },
        },
        "drive": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"t0": _NUMBER, "t1": _NUMBER, "re": _NUMBER, "im": _NUMBER},
                "required": ["t0", "t1", "re"],
                "additionalProperties": False,
            },
        },
        "scheme": {"enum": ["homodyne", "counting"]},
        "counting_variant": {"enum": ["paper", "unitary"]},
        "integrator": {"enum": ["kraus", "euler"]},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "ensemble_size": {"type": "integer", "minimum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "initial_state": _STATE,
        "filter_initial_state": _STATE,
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "stride": {"type": "integer", "minimum": 1},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["csv", "json"]},
                    "uniqueItems": True,
                },
            },
        },
        "gaussian": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mean_q": _NUMBER,
                "mean_p": _NUMBER,
                "V": {"type": "number", "exclusiveMinimum": 0},
                "C": _NUMBER,
                "W": {"type": "number", "exclusiveMinimum": 0},
                "k": _NUMBER,
                "form": {"enum": ["paper", "derived"]},
                "paired": {"type": "boolean"},
            },
        },
        "collapse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"threshold": {"type": "number", "exclusiveMinimum": 0.5, "maximum": 1}},
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"quick": {"type": "boolean"}},
        },
    },
}

DEFAULTS = {
    "counting_variant": "unitary",
    "integrator": "kraus",
    "ensemble_size": 100,
    "workers": 1,
    "output": {"stride": 1, "formats": ["csv", "json"]},
}


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(doc: dict, assignment: str) -> None:
    """Apply ``a.b.0.c=value``; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form path=value")
    path, raw = assignment.split("=", 1)
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {assignment!r} has an empty path")
    node: Any = doc
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key)
                node[idx]
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"override path {path!r}: bad list index {key!r}") from exc
            if last:
                node[idx] = _parse_value(raw)
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[key] = _parse_value(raw)
            else:
                node = node.setdefault(key, {})
        else:
            raise ConfigError(f"override path {path!r} descends into a scalar")


def _merge_defaults(doc: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


def resolve(doc: dict, overrides: Iterable[str] = ()) -> dict:
    """Defaults, then overrides, then schema validation. Returns a new document."""
    doc = _merge_defaults(copy.deepcopy(doc))
    for item in overrides:
        apply_override(doc, item)
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    return doc


def load(path, overrides: Iterable[str] = ()) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve(doc, overrides)


def _matrix(spec) -> np.ndarray:
    if isinstance(spec, dict):
        re = np.asarray(spec["re"], dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        if im.shape != re.shape:
            raise ConfigError("real and imaginary parts differ in shape")
        return re + 1j * im
    return np.asarray(spec, dtype=complex)


@dataclass
class Built:
    """Objects constructed from a resolved document."""

    model: InterferometerModel
    drive: CoherentAmplitude
    initial_state: np.ndarray
    filter_initial_state: Optional[np.ndarray]
    trajectory: TrajectoryConfig


def build_model(doc: dict) -> InterferometerModel:
    phase = doc["model"]["phase"]
    if phase["type"] == "diagonal":
        spec = DiagonalSpectrum(tuple(phase["eigenvalues"]))
    else:
        spec = LinearizedOscillator(
            phase["k"], phase.get("n", 0), phase.get("fock_dim", 30), phase.get("hbar", 1.0)
        )
    ham = doc["model"].get("hamiltonian", "zero")
    ham = None if ham == "zero" else _matrix(ham)
    return InterferometerModel.from_spec(spec, ham)


def build_drive(doc: dict) -> CoherentAmplitude:
    try:
        return CoherentAmplitude(
            tuple((s["t0"], s["t1"], complex(s["re"], s.get("im", 0.0))) for s in doc["drive"])
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_state(spec, model: InterferometerModel) -> np.ndarray:
    if isinstance(spec, dict) and spec.get("type") == "diagonal":
        return diagonal_state(spec["weights"])
    if isinstance(spec, dict) and spec.get("type") == "pure":
        re = np.asarray(spec["re"], dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        return pure_state(re + 1j * im)
    if isinstance(spec, dict) and spec.get("type") == "gaussian":
        if not isinstance(model.spec, LinearizedOscillator):
            raise ConfigError("a gaussian initial state needs the oscillator phase model")
        osc = model.spec
        return gaussian_state(
            osc.fock_dim, osc.hbar, spec.get("mean_q", 0.0), spec.get("mean_p", 0.0), spec.get("var_q")
        )
    return _matrix(spec)


def build(doc: dict) -> Built:
    """Construct model, drive and trajectory config; physical checks raise ConfigError."""
    try:
        model = build_model(doc)
        drive = build_drive(doc)
        rho0 = build_state(doc["initial_state"], model)
        frho = doc.get("filter_initial_state")
        frho = None if frho is None else build_state(frho, model)
        traj = TrajectoryConfig(
            model=model,
            drive=drive,
            scheme=doc["scheme"],
            dt=doc["dt"],
            T=doc["T"],
            seed=doc["seed"],
            initial_state=rho0,
            filter_initial_state=frho,
            counting_variant=CountingVariant(doc["counting_variant"]),
            record_stride=doc["output"]["stride"],
            integrator=HomodyneIntegrator(doc["integrator"]),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return Built(model, drive, traj.initial_state, traj.filter_initial_state, traj)


def gaussian_settings(doc: dict) -> dict:
    """Gaussian-filter block with defaults; ``k`` falls back to the oscillator model."""
    g = dict(doc.get("gaussian", {}))
    phase = doc["model"]["phase"]
    if "k" not in g:
        if phase["type"] != "oscillator":
            raise ConfigError("gaussian.k is required unless the phase model is an oscillator")
        g["k"] = phase["k"]
    g.setdefault("form", "paper")
    g.setdefault("paired", False)
    g["form"] = GaussianForm(g["form"])
    return g


def output_dir(doc: dict, override: Optional[str] = None) -> Path:
    if override:
        return Path(override)
    configured = doc.get("output", {}).get("dir")
    if configured:
        return Path(configured)
    return Path(os.environ.get(OUTPUT_DIR_ENV, "phasefilter_output"))

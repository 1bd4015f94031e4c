"""Experiment configuration: schema, loading and object construction.

Configs are YAML (plain JSON also parses).  Every key carries its unit in the
name (``field_gauss``, ``detuning_hz``, ``rabi_mhz`` ...) and unknown keys are
rejected.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import yaml

from .dynamics import ControlErrorModel, NoiseModel, calibrate_noise
from .gates import GateSpec
from .register import GAUSS, TWO_PI, NuclearSpin, SpinRegister


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


def _obj(properties: dict, required: tuple[str, ...] = ()) -> dict:
    return {"type": "object", "properties": properties, "required": list(required), "additionalProperties": False}


_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM = {"type": "number"}
_INT1 = {"type": "integer", "minimum": 1}

SCHEMA: dict = _obj(
    {
        "register": _obj(
            {
                "field_gauss": _POS,
                "m_s": {"enum": [-1, 1]},
                "nuclei": {
                    "type": "array",
                    "minItems": 1,
                    "items": _obj(
                        {"a_perp_khz": _NUM, "a_par_khz": _NUM, "label": {"type": "string"},
                         "gamma_mhz_per_tesla": _POS},
                        ("a_perp_khz", "a_par_khz"),
                    ),
                },
                "internuclear": {
                    "type": "array",
                    "items": _obj(
                        {"pair": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                  "minItems": 2, "maxItems": 2},
                         "b_khz": _NUM},
                        ("pair", "b_khz"),
                    ),
                },
            },
            ("field_gauss", "nuclei"),
        ),
        "sequence": _obj(
            {
                "variant": {"enum": ["AXY4", "AXY8"]},
                "k_dd": {"enum": [1, 3]},
                "target": {"type": "integer", "minimum": 0},
                "axis": {"enum": ["x", "y"]},
                "angle_rad": _NUM,
                "repetitions": {"oneOf": [_INT1, {"const": "auto"}]},
                "rabi_mhz": _POS,
                "f_target": _NUM,
                "parity": {"enum": ["even", "odd"]},
                "n_min": _INT1,
                "n_max": _INT1,
                "target_fidelity": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "instantaneous": {"type": "boolean"},
                "tau_offsets": {"type": "array", "items": _NUM, "minItems": 1},
            }
        ),
        "errors": _obj({"detuning_hz": _NUM, "rabi_error": _NUM}),
        "noise": _obj({"t1_s": _POS, "temperature_k": _POS}, ("t1_s", "temperature_k")),
        "qec": _obj(
            {
                "p": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 0.5},
                                {"type": "array", "minItems": 1,
                                 "items": {"type": "number", "minimum": 0, "maximum": 0.5}}]},
                "averaging": {"enum": ["two_design", "haar"]},
                "samples": {"type": "integer", "minimum": 2},
                "gates": {"enum": ["ideal", "simulated"]},
                "target_fidelity": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "repetitions": {"type": "array", "items": {"type": "array", "items": _INT1,
                                                            "minItems": 2, "maxItems": 2}},
                "flip_errors": {"type": "boolean"},
            }
        ),
        "filter": _obj(
            {
                "f_target": _NUM,
                "f_compare": _NUM,
                "repetitions": _INT1,
                "omega_min_rel": _POS,
                "omega_max_rel": _POS,
                "points": {"type": "integer", "minimum": 2},
            }
        ),
        "soft_control": _obj(
            {
                "sigma_over_t": _POS,
                "spectator": {"type": "integer", "minimum": 0},
                "n_min": _INT1,
                "n_max": _INT1,
                "steps": {"type": "integer", "minimum": 1},
                "sampling_tau": {"type": "array", "items": _POS},
            }
        ),
        "abundance": _obj(
            {
                "thresholds_khz": {"type": "array", "items": _POS, "minItems": 1},
                "p13c": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            }
        ),
        "output": _obj({"formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1}}),
    },
    ("register",),
)


def validate(config: Any) -> dict:
    """Schema-check ``config``; the error message names the offending path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {e.message}")
    return config


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return validate(data if data is not None else {})


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def require(config: dict, *path: str) -> Any:
    node = config
    for i, key in enumerate(path):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"config error at {'/'.join(path[: i + 1])}: required by this command")
        node = node[key]
    return node


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_register(config: dict) -> SpinRegister:
    block = require(config, "register")
    khz = TWO_PI * 1e3
    nuclei = []
    for i, n in enumerate(block["nuclei"]):
        kwargs = {"label": n.get("label", f"C{i + 1}")}
        if "gamma_mhz_per_tesla" in n:
            kwargs["gyromagnetic_ratio"] = TWO_PI * 1e6 * n["gamma_mhz_per_tesla"]
        nuclei.append(NuclearSpin.from_components(n["a_perp_khz"] * khz, n["a_par_khz"] * khz, **kwargs))
    couplings = {tuple(c["pair"]): c["b_khz"] * khz for c in block.get("internuclear", [])}
    return SpinRegister(tuple(nuclei), block["field_gauss"] * GAUSS, block.get("m_s", -1),
                        internuclear_couplings=couplings)


def sequence_options(config: dict) -> dict:
    s = config.get("sequence", {})
    return {
        "variant": s.get("variant", "AXY8"),
        "k_dd": s.get("k_dd", 1),
        "rabi": TWO_PI * 1e6 * s.get("rabi_mhz", 20.0),
        "instantaneous": s.get("instantaneous", False),
    }


def build_gate_spec(config: dict) -> GateSpec:
    s = config.get("sequence", {})
    return GateSpec(s.get("target", 0), s.get("axis", "x"), s.get("angle_rad", np.pi / 2))


def build_errors(config: dict) -> ControlErrorModel | None:
    e = config.get("errors")
    if e is None:
        return None
    return ControlErrorModel(TWO_PI * e.get("detuning_hz", 0.0), e.get("rabi_error", 0.0))


def build_noise(config: dict, register: SpinRegister) -> NoiseModel | None:
    n = config.get("noise")
    if n is None:
        return None
    return calibrate_noise(n["t1_s"], n["temperature_k"], register.transition_frequency, register.constants)

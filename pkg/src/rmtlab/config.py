"""Run configuration: JSON schema, defaults and loading."""

from __future__ import annotations

import copy
import json
import math

import jsonschema

from rmtlab.ensembles import EnsembleConfig, MAX_N, ParameterError
from rmtlab.stable_laws import DeformationSpec

SCHEMA_VERSION = "rmtlab/1"

EXPERIMENTS = ("density", "locallaw", "deloc", "gaps", "compare", "fixedpoint", "titail",
               "laplace", "dbm", "validate", "selftest")


class ConfigError(ValueError):
    """Schema or parameter problem detected before any computation."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 1}
_complex = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_numlist = {"type": "array", "items": _num, "minItems": 1}

# experiment-specific parameters and their defaults
PARAM_DEFAULTS = {
    "density": {"E_min": -5.0, "E_max": 5.0, "n_E": 81, "eta_pair": [1e-3, 5e-4], "bins": 50,
                "esd_l1_max": 0.08},
    "locallaw": {"E_min": 0.5, "E_max": 1.5, "n_E": 5, "etas": [0.3], "matrix": "X",
                 "mean_dev_max": 0.02, "max_R_eta_exponent": 0.4},
    "deloc": {"E_min": 0.5, "E_max": 1.5, "bound_exponent": 0.25, "fraction": 0.95,
              "goe_control": True},
    "gaps": {"E": 1.0, "goe_E": 0.0, "k_exponent": 0.6, "ks_max": 0.05, "matrix": "H"},
    "compare": {"z": [1.0, 0.1], "gamma_grid": [0.0, 0.25, 0.5, 0.75, 1.0], "gap_max": 0.1},
    "fixedpoint": {"z": [0.05, 0.5], "grid_size": 64, "tolerance": 1e-7, "cross_tol": 1e-3},
    "titail": {"eta": 0.3, "E": 1.0, "samples": 5000, "slope_tol": 0.25},
    "laplace": {"t": 1.0, "samples": 100000, "slack": 0.05, "char_slack": 5.0},
    "dbm": {"E": 1.0, "eta_factor": 2.0, "eta_exponent": 0.75, "bound_exponent": 0.25,
            "fraction": 0.95},
    "validate": {},
    "selftest": {},
}

_param_schema = {
    "E_min": _num, "E_max": _num, "n_E": _int, "eta_pair": _numlist, "bins": _int,
    "esd_l1_max": _pos, "etas": _numlist, "matrix": {"enum": ["X", "H"]}, "mean_dev_max": _pos,
    "max_R_eta_exponent": _pos, "bound_exponent": _pos, "fraction": _pos, "goe_control": {"type": "boolean"},
    "E": _num, "goe_E": _num, "k_exponent": _pos, "ks_max": _pos, "z": _complex,
    "gamma_grid": _numlist, "gap_max": _pos, "grid_size": _int, "tolerance": _pos, "cross_tol": _pos,
    "eta": _pos, "samples": _int, "slope_tol": _pos, "t": _num, "slack": _pos, "char_slack": _pos,
    "eta_factor": _pos, "eta_exponent": _pos,
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "experiment"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "experiment": {"enum": list(EXPERIMENTS)},
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "required": ["N", "alpha"],
            "properties": {
                "N": {"type": "integer", "minimum": 1}, "alpha": _num, "b": _num, "nu": _num,
                "rho": _num, "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "deformation": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"variant": {"enum": ["none", "bounded_symmetric"]},
                                   "half_width": _pos},
                },
                "max_N": {"type": "integer", "minimum": 1},
            },
        },
        "trials": _int,
        "threads": _int,
        "output_dir": {"type": "string"},
        "checks": {"type": "boolean"},
        "params": {"type": "object"},
    },
}


def _params_schema(experiment):
    keys = PARAM_DEFAULTS[experiment]
    return {"type": "object", "additionalProperties": False,
            "properties": {k: _param_schema[k] for k in keys}}


class RunConfig:
    """A validated configuration.  ``raw`` keeps the document exactly as loaded."""

    def __init__(self, raw: dict, text: str | None = None):
        self.raw = raw
        self.text = text if text is not None else json.dumps(raw, sort_keys=True)
        validate_document(raw)
        self.experiment = raw["experiment"]
        self.trials = raw.get("trials", 10)
        self.threads = raw.get("threads")
        self.output_dir = raw.get("output_dir", "rmtlab-out")
        self.checks = raw.get("checks", True)
        self.params = copy.deepcopy(PARAM_DEFAULTS[self.experiment])
        self.params.update(raw.get("params", {}))
        self.ensemble = None
        if "ensemble" in raw:
            e = raw["ensemble"]
            try:
                self.ensemble = EnsembleConfig.build(
                    e["N"], e["alpha"], e.get("b"), e.get("nu"), e.get("rho"), e.get("seed", 0),
                    DeformationSpec.from_dict(e.get("deformation")), e.get("max_N", MAX_N))
            except (ParameterError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
        elif self.experiment != "selftest":
            raise ConfigError(f"experiment {self.experiment!r} needs an 'ensemble' section")

    @property
    def seed(self):
        return self.ensemble.seed if self.ensemble is not None else 0


def validate_document(raw):
    try:
        jsonschema.validate(raw, SCHEMA)
        jsonschema.validate(raw.get("params", {}), _params_schema(raw["experiment"]))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    for key, val in raw.get("params", {}).items():
        vals = val if isinstance(val, list) else [val]
        if any(isinstance(v, float) and not math.isfinite(v) for v in vals):
            raise ConfigError(f"parameter {key!r} must be finite")


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return RunConfig(raw, text)

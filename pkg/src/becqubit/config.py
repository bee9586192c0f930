"""Experiment configuration files.

One JSON object per file.  ``experiment`` selects the kind; the remaining
keys are kind-specific (see ``SCHEMAS``).  Every numeric value must be
finite.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .errors import ConfigError

KINDS = ("flow", "discriminate", "meanfield-error", "correlators", "orth-scaling")
WORKERS_ENV = "BECQUBIT_WORKERS"

_positive = {"type": "number", "exclusiveMinimum": 0}
_number = {"type": "number"}
_scheme = {"enum": ["simple", "cy", "childs-young"]}

_COMMON = {
    "experiment": {"enum": list(KINDS)},
    "output": {"type": "string", "minLength": 1},
    "seed": {"type": "integer", "minimum": 0},
    "workers": {"type": "integer", "minimum": 1},
    "dt": _positive,
    "description": {"type": "string"},
}


def _schema(required, properties):
    return {
        "type": "object",
        "required": ["experiment", *required],
        "properties": {**_COMMON, **properties},
        "additionalProperties": False,
    }


SCHEMAS = {
    "flow": _schema(["grid", "g"], {
        "grid": {
            "type": "object",
            "required": ["n_theta", "n_phi"],
            "properties": {"n_theta": {"type": "integer", "minimum": 1},
                           "n_phi": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "v01": _number, "bz": _number, "g": _number,
        "nonlinear": {"type": "boolean"},
    }),
    "discriminate": _schema(["theta_ab", "g", "shots"], {
        "scheme": _scheme,
        "theta_ab": {"type": "number", "minimum": 0, "maximum": math.pi},
        "g": _number,
        "shots": {"type": "integer", "minimum": 1},
        "t_max": _positive,
        "orth_eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    }),
    "meanfield-error": _schema(["n_values", "t_values"], {
        "n_values": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "t_values": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "big_k": _number, "big_k_prime": _number,
        "omega0": _positive, "omega": _number,
        "v00": _number, "v11": _number, "v01": _number,
        "initial_bloch": {"type": "array", "minItems": 3, "maxItems": 3, "items": _number},
    }),
    "correlators": _schema(["n_values"], {
        "n_values": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "encodings": {"type": "array", "minItems": 1, "items": {"enum": ["fn", "cat"]}},
        "states": {"type": "integer", "minimum": 1},
    }),
    "orth-scaling": _schema(["theta_values", "g"], {
        "scheme": _scheme,
        "theta_values": {"type": "array", "minItems": 1,
                         "items": {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi}},
        "g": _number,
        "t_max": _positive,
        "orth_eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    }),
}

DEFAULTS = {
    "flow": {"v01": 0.0, "bz": 0.0, "nonlinear": True},
    "discriminate": {"scheme": "simple", "orth_eps": 1e-4},
    "meanfield-error": {"big_k": 1.0, "big_k_prime": 0.0, "omega0": 1.0, "omega": 0.5,
                        "v00": 0.0, "v11": 0.0, "v01": 0.5, "initial_bloch": [1.0, 0.0, 0.0]},
    "correlators": {"encodings": ["fn", "cat"], "states": 10},
    "orth-scaling": {"scheme": "simple", "orth_eps": 1e-4},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict
    output: str
    seed: int
    workers: int
    raw: dict


def _nonfinite_paths(value, path="$"):
    if isinstance(value, float) and not math.isfinite(value):
        yield path
    elif isinstance(value, dict):
        for k, v in value.items():
            yield from _nonfinite_paths(v, f"{path}.{k}")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            yield from _nonfinite_paths(v, f"{path}[{i}]")


def _format_error(err: jsonschema.ValidationError) -> str:
    where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return f"{where}: {err.message}"


def check(raw) -> list[str]:
    """All violations in a parsed config, without running anything."""
    if not isinstance(raw, dict):
        return ["$: config must be a JSON object"]
    violations = [f"{p}: value must be finite" for p in _nonfinite_paths(raw)]
    kind = raw.get("experiment")
    if kind not in SCHEMAS:
        violations.append(f"$.experiment: must be one of {', '.join(KINDS)} (got {kind!r})")
        return violations
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    violations.extend(_format_error(e) for e in errors)
    if kind == "meanfield-error" and "initial_bloch" in raw and not violations:
        r = raw["initial_bloch"]
        if abs(math.sqrt(sum(c * c for c in r)) - 1.0) > 1e-9:
            violations.append("$.initial_bloch: must lie on the unit sphere")
    return violations


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror or exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc


def default_workers(configured: int | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError([f"{WORKERS_ENV} must be a positive integer, got {env!r}"]) from None
        if value < 1:
            raise ConfigError([f"{WORKERS_ENV} must be a positive integer, got {env!r}"])
        return value
    return configured or os.cpu_count() or 1


def load(path, seed: int | None = None, output: str | None = None) -> ExperimentConfig:
    raw = read_json(path)
    violations = check(raw)
    if violations:
        raise ConfigError(violations)
    kind = raw["experiment"]
    params = {**DEFAULTS[kind], **{k: v for k, v in raw.items() if k not in _COMMON or k == "dt"}}
    out = output or raw.get("output") or str(Path("results") / Path(path).stem)
    return ExperimentConfig(
        kind=kind,
        params=params,
        output=out,
        seed=raw.get("seed", 0) if seed is None else seed,
        workers=default_workers(raw.get("workers")),
        raw=raw,
    )

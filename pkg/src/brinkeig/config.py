# -*- coding: utf-8 -*-
"""Problem configuration: JSON schema, validation, and builders.

A configuration binds a geometry, an element family, physical parameters,
solver settings, and either a uniform-level study or an adaptive run.
`load_config` validates against the published schema and returns a
ProblemConfig whose `canonical()` form round-trips.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import jsonschema
import numpy as np

from . import mesh2d
from .assembly import PhysicalParams
from .eigensolve import SolverConfig
from .elements import family_by_name


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending location."""


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["geometry", "family", "study"],
    "additionalProperties": False,
    "properties": {
        "geometry": {
            "type": "object",
            "required": ["kind", "n"],
            "additionalProperties": False,
            "properties": {
                "kind": {
                    "enum": ["unit_square", "unit_square_quality", "lshape"]
                },
                "n": {"type": "integer", "minimum": 1},
                "subdomain_box": {
                    "type": ["array", "null"],
                    "items": {"type": "number"},
                    "minItems": 4,
                    "maxItems": 4,
                },
                "layout": {
                    "type": "object",
                    "additionalProperties": {"type": "integer", "minimum": 0},
                },
                "variant": {"enum": ["full_dirichlet", "mixed"]},
                "gamma2_segments": {
                    "type": ["array", "null"],
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 4,
                        "maxItems": 4,
                    },
                },
            },
        },
        "family": {"enum": ["mini", "taylor_hood"]},
        "nu": {"type": "number", "exclusiveMinimum": 0},
        "permeability_inverse": {
            "type": "object",
            "additionalProperties": {
                "anyOf": [
                    {"type": "number", "minimum": 0},
                    {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": {"type": "number"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                        "minItems": 2,
                        "maxItems": 2,
                    },
                ]
            },
        },
        "nev": {"type": "integer", "minimum": 1},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shift": {"type": "number"},
                "krylov_dim": {"type": ["integer", "null"], "minimum": 2},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_restarts": {"type": "integer", "minimum": 1},
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gamma2_term": {"type": ["boolean", "null"]}},
        },
        "study": {
            "type": "object",
            "required": ["mode"],
            "properties": {"mode": {"enum": ["uniform", "adaptive"]}},
        },
        "output_dir": {"type": "string"},
    },
}

_UNIFORM_SCHEMA = {
    "type": "object",
    "required": ["mode", "levels"],
    "additionalProperties": False,
    "properties": {
        "mode": {"const": "uniform"},
        "levels": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 1,
        },
        "compute_eta": {"type": "boolean"},
    },
}

_ADAPTIVE_SCHEMA = {
    "type": "object",
    "required": ["mode", "max_iterations"],
    "additionalProperties": False,
    "properties": {
        "mode": {"const": "adaptive"},
        "target": {"type": "integer", "minimum": 1},
        "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_iterations": {"type": "integer", "minimum": 1},
        "dof_budget": {"type": ["integer", "null"], "minimum": 1},
        "lambda_ref": {"type": ["number", "null"]},
    },
}


@dataclass
class ProblemConfig:
    """Validated problem configuration with materialized defaults."""

    geometry: dict
    family: str
    nu: float = 1.0
    permeability_inverse: dict = field(default_factory=lambda: {0: 0.0})
    nev: int = 5
    solver: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    output_dir: str = "out"

    def canonical(self):
        """Fully populated plain-dict form (stable key order on dump)."""
        geo = {
            "kind": self.geometry["kind"],
            "n": int(self.geometry["n"]),
            "subdomain_box": self.geometry.get("subdomain_box"),
        }
        if geo["kind"] == "lshape":
            geo["layout"] = {
                k: int(v) for k, v in sorted(self.geometry.get("layout", {}).items())
            }
            geo["variant"] = self.geometry.get("variant", "full_dirichlet")
            geo["gamma2_segments"] = self.geometry.get("gamma2_segments")
        out = {
            "geometry": geo,
            "family": self.family,
            "nu": float(self.nu),
            "permeability_inverse": {
                str(k): (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in sorted(self.permeability_inverse.items())
            },
            "nev": int(self.nev),
            "solver": {
                "shift": float(self.solver.get("shift", 0.0)),
                "krylov_dim": self.solver.get("krylov_dim"),
                "tol": float(self.solver.get("tol", 1e-10)),
                "max_restarts": int(self.solver.get("max_restarts", 50)),
            },
            "estimator": {"gamma2_term": self.estimator.get("gamma2_term")},
            "study": dict(self.study),
            "output_dir": self.output_dir,
        }
        if out["study"].get("mode") == "uniform":
            out["study"].setdefault("compute_eta", False)
        else:
            out["study"].setdefault("target", 1)
            out["study"].setdefault("theta", 0.5)
            out["study"].setdefault("dof_budget", None)
            out["study"].setdefault("lambda_ref", None)
        return out

    def geometry_tags(self):
        geo = self.geometry
        if geo["kind"] in ("unit_square", "unit_square_quality"):
            return {0, 1} if geo.get("subdomain_box") else {0}
        tags = {0}
        tags.update(int(v) for v in geo.get("layout", {}).values())
        return tags

    def physical_params(self):
        return PhysicalParams(
            nu=self.nu, permeability_inverse=self.permeability_inverse
        )

    def solver_config(self, nev=None):
        return SolverConfig(
            nev=nev if nev is not None else self.nev,
            shift=self.solver.get("shift", 0.0),
            krylov_dim=self.solver.get("krylov_dim"),
            tol=self.solver.get("tol", 1e-10),
            max_restarts=self.solver.get("max_restarts", 50),
        )

    def element_family(self):
        return family_by_name(self.family)

    def build_mesh(self, n=None):
        """Construct the configured geometry, optionally overriding n."""
        geo = self.geometry
        n = int(n if n is not None else geo["n"])
        kind = geo["kind"]
        if kind == "unit_square":
            return mesh2d.generate_unit_square(n, geo.get("subdomain_box"))
        if kind == "unit_square_quality":
            return mesh2d.generate_unit_square_quality(n, geo.get("subdomain_box"))
        layout = {k: int(v) for k, v in (geo.get("layout") or {}).items()}
        return mesh2d.generate_lshape(
            n,
            layout=layout,
            variant=geo.get("variant", "full_dirichlet"),
            gamma2_segments=geo.get("gamma2_segments"),
        )

    def mesh_factory(self):
        return lambda n: self.build_mesh(n)


def _validate(instance):
    try:
        jsonschema.validate(instance, SCHEMA)
        mode_schema = (
            _UNIFORM_SCHEMA
            if instance["study"].get("mode") == "uniform"
            else _ADAPTIVE_SCHEMA
        )
        jsonschema.validate(instance["study"], mode_schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError("config field %s: %s" % (path, exc.message)) from exc


def config_from_dict(raw):
    """Validate a plain dict and return a ProblemConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    _validate(raw)
    geo = dict(raw["geometry"])
    kind = geo["kind"]
    if kind == "lshape":
        n = int(geo["n"])
        if n % 2 != 0:
            raise ConfigError("config field geometry/n: lshape requires even n")
        layout = geo.get("layout") or {}
        unknown = set(layout) - {"lower_left", "upper_left", "upper_right"}
        if unknown:
            raise ConfigError(
                "config field geometry/layout: unknown sub-squares %s"
                % sorted(unknown)
            )
        if geo.get("variant", "full_dirichlet") == "mixed" and not geo.get(
            "gamma2_segments"
        ):
            raise ConfigError(
                "config field geometry/gamma2_segments: the mixed variant "
                "needs at least one do-nothing boundary segment"
            )
    perm_raw = raw.get("permeability_inverse", {"0": 0.0})
    perm = {}
    for key, value in perm_raw.items():
        try:
            tag = int(key)
        except ValueError:
            raise ConfigError(
                "config field permeability_inverse/%s: tag must be an integer"
                % key
            ) from None
        if isinstance(value, list):
            perm[tag] = np.asarray(value, dtype=float)
        else:
            if value < 0:
                raise ConfigError(
                    "config field permeability_inverse/%s: kappa must be >= 0" % key
                )
            perm[tag] = float(value)
    cfg = ProblemConfig(
        geometry=geo,
        family=raw["family"],
        nu=float(raw.get("nu", 1.0)),
        permeability_inverse=perm,
        nev=int(raw.get("nev", 5)),
        solver=dict(raw.get("solver", {})),
        estimator=dict(raw.get("estimator", {})),
        study=dict(raw["study"]),
        output_dir=raw.get("output_dir", "out"),
    )
    missing = cfg.geometry_tags() - set(perm)
    if missing:
        raise ConfigError(
            "config field permeability_inverse: no entry for geometry tags %s"
            % sorted(missing)
        )
    try:
        cfg.physical_params()
    except ValueError as exc:
        raise ConfigError("config field permeability_inverse: %s" % exc) from exc
    if cfg.study["mode"] == "adaptive" and cfg.study.get("target", 1) > cfg.nev:
        raise ConfigError(
            "config field study/target: target exceeds nev=%d" % cfg.nev
        )
    return cfg


def load_config(path):
    """Read and validate a JSON configuration file."""
    try:
        with open(path) as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            "%s:%d:%d: invalid JSON: %s" % (path, exc.lineno, exc.colno, exc.msg)
        ) from exc
    return config_from_dict(raw)


def dump_config(cfg, path):
    with open(path, "w") as handle:
        json.dump(cfg.canonical(), handle, indent=2, sort_keys=True)
        handle.write("\n")

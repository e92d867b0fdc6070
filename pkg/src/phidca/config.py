"""Strict JSON run configurations.

Schema (unknown keys are errors)::

    {
      "fixture": "lasso-2d" | {"name": "pl-quad", "params": {"mu": 0.5}},
      "coupling": {"kind": "Bregman", "h": "quadratic", "L": 13.8},   # optional
      "algorithm": "plain" | {"kind": "averaged", "p": 1, "schedule": "builtin" | [..]},
      "x0": [0.9, 1.2],                                               # optional
      "max_iter": 1000, "min_iter": 0, "gap_tol": 1e-10, "inner_tol": 1e-10,
      "checks": ["decrease", {"kind": "qlinear", "mu1": 0.5}, ...],
      "output_dir": "out/run1",
      "record_timing": false
    }

A batch file is ``{"runs": [config, ...]}``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConfigError, PhiDCAError
from .couplings import make_coupling
from .fixtures import get_fixture

RUN_KEYS = {"fixture", "coupling", "algorithm", "x0", "max_iter", "min_iter", "gap_tol", "inner_tol",
            "checks", "output_dir", "record_timing"}
CHECK_KEYS = {
    "decrease": set(),
    "envelope": {"bound", "H", "nu", "p", "L_p", "L", "L_h", "r0", "inf_F"},
    "qlinear": {"mu1", "mu2", "inf_F"},
    "subgradient-grid": {"spacing", "tol"},
    "oracle-grid": {"spacing", "records"},
}


@dataclass
class RunConfig:
    fixture: str
    fixture_params: dict
    coupling: Optional[dict]
    averaged: bool
    p: float
    schedule: Optional[list]
    x0: Optional[list]
    max_iter: int
    min_iter: int
    gap_tol: float
    inner_tol: float
    checks: list
    output_dir: Optional[str]
    record_timing: bool
    raw: dict = field(default_factory=dict)

    def digest(self):
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def build_problem(self):
        try:
            problem = get_fixture(self.fixture, **self.fixture_params)
            if self.coupling is not None:
                params = dict(self.coupling)
                problem = problem.with_coupling(make_coupling(params.pop("kind"), **params))
        except PhiDCAError as exc:
            raise ConfigError(str(exc)) from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid coupling: {exc}") from None
        return problem

    def start(self, problem):
        x0 = problem.meta["x0"] if self.x0 is None else np.asarray(self.x0, dtype=float)
        if x0.shape != (problem.dim,):
            raise ConfigError(f"x0 must have {problem.dim} entries")
        return x0


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _number(d, key, default, positive=True):
    v = d.get(key, default)
    _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"{key} must be a number")
    _require(np.isfinite(v) and (v > 0 or not positive), f"{key} must be positive and finite")
    return v


def _integer(d, key, default, minimum):
    v = d.get(key, default)
    _require(isinstance(v, int) and not isinstance(v, bool) and v >= minimum,
             f"{key} must be an integer >= {minimum}")
    return v


def _checks(items):
    _require(isinstance(items, list), "checks must be a list")
    out = []
    for item in items:
        if isinstance(item, str):
            item = {"kind": item}
        _require(isinstance(item, dict) and "kind" in item, "each check needs a kind")
        kind = item["kind"]
        _require(kind in CHECK_KEYS, f"unknown check {kind!r}")
        extra = set(item) - {"kind"} - CHECK_KEYS[kind]
        _require(not extra, f"unknown keys for check {kind}: {sorted(extra)}")
        if kind == "envelope":
            _require(item.get("bound") in ("hoelder", "tensor", "aniso"),
                     "envelope bound must be hoelder, tensor or aniso")
        if kind == "qlinear":
            _require("mu1" in item, "qlinear check needs mu1")
        out.append(dict(item))
    return out


def parse_run(d):
    """Validate one run dict and return a :class:`RunConfig`."""
    _require(isinstance(d, dict), "run configuration must be a JSON object")
    extra = set(d) - RUN_KEYS
    _require(not extra, f"unknown configuration keys: {sorted(extra)}")
    _require("fixture" in d, "fixture is required")
    fx = d["fixture"]
    if isinstance(fx, str):
        name, params = fx, {}
    else:
        _require(isinstance(fx, dict) and set(fx) <= {"name", "params"} and "name" in fx,
                 "fixture must be a name or {name, params}")
        name, params = fx["name"], fx.get("params", {})
        _require(isinstance(params, dict), "fixture params must be an object")
    from .fixtures import CATALOG

    _require(name in CATALOG, f"unknown fixture {name!r}")
    coupling = d.get("coupling")
    if coupling is not None:
        _require(isinstance(coupling, dict) and "kind" in coupling, "coupling must be {kind, ...}")
    alg = d.get("algorithm", "plain")
    averaged, p, schedule = False, 1.0, None
    if alg != "plain":
        _require(isinstance(alg, dict) and alg.get("kind") == "averaged"
                 and set(alg) <= {"kind", "p", "schedule"},
                 "algorithm must be 'plain' or {kind: averaged, p, schedule}")
        averaged = True
        p = _number(alg, "p", 1.0)
        sched = alg.get("schedule", "builtin")
        if sched != "builtin":
            _require(isinstance(sched, list) and all(isinstance(v, (int, float)) and 0 <= v <= 1 for v in sched),
                     "schedule must be 'builtin' or a list of weights in [0, 1]")
            schedule = [float(v) for v in sched]
    x0 = d.get("x0")
    if x0 is not None:
        _require(isinstance(x0, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0),
                 "x0 must be a list of numbers")
    out = d.get("output_dir")
    _require(out is None or isinstance(out, str), "output_dir must be a string")
    timing = d.get("record_timing", False)
    _require(isinstance(timing, bool), "record_timing must be a boolean")
    cfg = RunConfig(
        fixture=name,
        fixture_params=dict(params),
        coupling=None if coupling is None else dict(coupling),
        averaged=averaged,
        p=float(p),
        schedule=schedule,
        x0=x0,
        max_iter=_integer(d, "max_iter", 1000, 1),
        min_iter=_integer(d, "min_iter", 0, 0),
        gap_tol=float(_number(d, "gap_tol", 1e-10)),
        inner_tol=float(_number(d, "inner_tol", 1e-10)),
        checks=_checks(d.get("checks", [])),
        output_dir=out,
        record_timing=timing,
        raw=d,
    )
    if schedule is not None:
        _require(len(schedule) >= cfg.max_iter, "explicit schedule is shorter than max_iter")
    return cfg


def load_config(path):
    """Load a config file; returns a list of :class:`RunConfig` (one unless batch)."""
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(d, dict) and "runs" in d:
        _require(set(d) == {"runs"} and isinstance(d["runs"], list) and d["runs"],
                 "batch config must be {runs: [...]} with at least one run")
        return [parse_run(r) for r in d["runs"]]
    return [parse_run(d)]

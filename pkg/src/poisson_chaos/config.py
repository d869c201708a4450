"""Experiment configuration: a JSON file naming the intensity, the
functionals (expression sources plus optional envelope and monotone
declarations), and the numeric knobs shared by all commands."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .charlier import FiniteIntensity, TruncationPolicy
from .errors import ConfigError, DslError
from .functional import Functional, parse_functional

__all__ = ["FunctionalSpec", "ExperimentConfig", "DEFAULT_CONFIG"]

DEFAULT_CONFIG: dict = {
    "intensity": [1.0, 0.5],
    "functionals": {
        "linear": {"source": "n1 + n2", "envelope": {"c": 1.0, "p": 1.0}, "increasing": [1, 2]},
        "quadratic": {"source": "(n1 + n2)^2", "envelope": {"c": 1.0, "p": 2.0}, "increasing": [1, 2]},
        "indicator": {"source": "ind(n1 >= 1)", "envelope": {"c": 1.0, "p": 0.0}, "increasing": [1, 2]},
        "exponential": {"source": "exp(-n1 - n2)", "envelope": {"c": 1.0, "p": 0.0}, "increasing": []},
    },
    "n_max": 4,
    "k": 3,
    "tail_epsilon": 1e-12,
    "quadrature_nodes": 16,
    "seed": 20240801,
    "n_samples": 100000,
    "marked": False,
    "outputs": "out",
    "z_threshold": 4.0,
    "tolerance_override": None,
}

_RANGES = {
    "n_max": (1, 8),
    "k": (1, 3),
    "quadrature_nodes": (2, 200),
    "n_samples": (1, 10_000_000),
}


@dataclass(frozen=True)
class FunctionalSpec:
    source: str
    envelope: tuple[float, float] | None = None
    increasing: tuple[int, ...] | None = None  # 1-based sites, matching n1..nk


@dataclass(frozen=True)
class ExperimentConfig:
    intensity: tuple[float, ...]
    functionals: dict[str, FunctionalSpec]
    n_max: int
    k: int  # bracket order: variance tables run k = 1..k
    tail_epsilon: float
    quadrature_nodes: int
    seed: int
    n_samples: int
    marked: bool
    outputs: str
    z_threshold: float
    tolerance_override: float | None

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls.from_dict(DEFAULT_CONFIG)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(str(path), "config file not found")
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}")
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("<root>", "config must be a JSON object")
        merged = {**DEFAULT_CONFIG, **dict(raw)}
        unknown = set(merged) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")

        intensity = _positive_floats(merged["intensity"], "intensity")
        functionals = _functionals(merged["functionals"], len(intensity))
        n_max = _int_in_range(merged["n_max"], "n_max")
        k = _int_in_range(merged["k"], "k")
        nodes = _int_in_range(merged["quadrature_nodes"], "quadrature_nodes")
        n_samples = _int_in_range(merged["n_samples"], "n_samples")
        eps = merged["tail_epsilon"]
        if not (isinstance(eps, (int, float)) and 0.0 < float(eps) < 1.0):
            raise ConfigError("tail_epsilon", "must be a number in (0, 1)")
        seed = merged["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        marked = merged["marked"]
        if not isinstance(marked, bool):
            raise ConfigError("marked", "must be a boolean")
        outputs = merged["outputs"]
        if not isinstance(outputs, str) or not outputs:
            raise ConfigError("outputs", "must be a nonempty path string")
        zt = merged["z_threshold"]
        if not (isinstance(zt, (int, float)) and float(zt) > 0):
            raise ConfigError("z_threshold", "must be a positive number")
        tol = merged["tolerance_override"]
        if tol is not None and not (isinstance(tol, (int, float)) and float(tol) >= 0):
            raise ConfigError("tolerance_override", "must be null or a nonnegative number")

        return cls(
            intensity=intensity,
            functionals=functionals,
            n_max=n_max,
            k=k,
            tail_epsilon=float(eps),
            quadrature_nodes=nodes,
            seed=seed,
            n_samples=n_samples,
            marked=marked,
            outputs=outputs,
            z_threshold=float(zt),
            tolerance_override=None if tol is None else float(tol),
        )

    def finite_intensity(self) -> FiniteIntensity:
        return FiniteIntensity(self.intensity)

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(tail_epsilon=self.tail_epsilon)

    def functional_objects(self) -> dict[str, Functional]:
        out: dict[str, Functional] = {}
        k = len(self.intensity)
        for name, spec in self.functionals.items():
            try:
                f = parse_functional(
                    spec.source,
                    k,
                    envelope=spec.envelope,
                    increasing=(None if spec.increasing is None else [i - 1 for i in spec.increasing]),
                    name=name,
                )
            except DslError as exc:
                raise ConfigError(f"functionals.{name}.source", str(exc))
            out[name] = f
        return out


def _positive_floats(value: Any, path: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "must be a nonempty list of positive numbers")
    out = []
    for i, x in enumerate(value):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise ConfigError(f"{path}[{i}]", "must be a number")
        x = float(x)
        if not (x > 0 and math.isfinite(x)):
            raise ConfigError(f"{path}[{i}]", "must be positive and finite")
        out.append(x)
    if len(out) > 6:
        raise ConfigError(path, "at most 6 sites are supported at desk scale")
    return tuple(out)


def _int_in_range(value: Any, path: str) -> int:
    lo, hi = _RANGES[path]
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(path, "must be an integer")
    if not lo <= value <= hi:
        raise ConfigError(path, f"must lie in [{lo}, {hi}]")
    return value


def _functionals(value: Any, k: int) -> dict[str, FunctionalSpec]:
    if not isinstance(value, Mapping) or not value:
        raise ConfigError("functionals", "must be a nonempty map of named functionals")
    out: dict[str, FunctionalSpec] = {}
    for name, spec in value.items():
        base = f"functionals.{name}"
        if not isinstance(spec, Mapping):
            raise ConfigError(base, "must be an object")
        unknown = set(spec) - {"source", "envelope", "increasing"}
        if unknown:
            raise ConfigError(f"{base}.{sorted(unknown)[0]}", "unknown field")
        if "source" not in spec or not isinstance(spec["source"], str) or not spec["source"].strip():
            raise ConfigError(f"{base}.source", "missing or empty expression source")
        envelope = None
        if spec.get("envelope") is not None:
            env = spec["envelope"]
            if not isinstance(env, Mapping) or set(env) - {"c", "p"}:
                raise ConfigError(f"{base}.envelope", "must be an object with fields c and p")
            try:
                c, p = float(env["c"]), float(env["p"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"{base}.envelope", "fields c and p must be numbers")
            if not (c > 0 and math.isfinite(c)) or not (p >= 0 and math.isfinite(p)):
                raise ConfigError(f"{base}.envelope", "needs c > 0 and p >= 0")
            envelope = (c, p)
        increasing = None
        if spec.get("increasing") is not None:
            inc = spec["increasing"]
            if not isinstance(inc, list):
                raise ConfigError(f"{base}.increasing", "must be a list of 1-based site indices")
            sites = []
            for i, site in enumerate(inc):
                if not isinstance(site, int) or isinstance(site, bool) or not 1 <= site <= k:
                    raise ConfigError(f"{base}.increasing[{i}]", f"must be an integer in [1, {k}]")
                sites.append(site)
            increasing = tuple(sorted(set(sites)))
        out[str(name)] = FunctionalSpec(spec["source"], envelope, increasing)
    return out

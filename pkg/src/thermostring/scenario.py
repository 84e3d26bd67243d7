"""Scenario files: a YAML document describing one run and the checks to apply.

Example::

    domain: {a: 0.0, b: 1.0}
    mu: 0.5
    initial:
      u0: {profile: sine, amplitude: 0.1}
      v0: {profile: constant, value: 0.0}
      theta0: {profile: cosine, offset: 1.0, amplitude: 0.5}
    scheme: fd
    grid: {n: 256}
    galerkin: {m: 32}
    time: {dt: auto, t_end: 50.0, sample_every: 20}
    checks:
      - {name: entropy-monotone, tolerance: 1.0e-8}
      - positivity
    output: {directory: out/fixed_seed}

Initial fields may also be inline arrays of ``n + 1`` nodal values. JSON is
valid YAML, so JSON scenario files load too.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Union

import numpy as np
import yaml

from .core import (
    PROFILE_KINDS,
    Grid,
    ProblemConfig,
    Profile,
    ThermostringError,
    _PROFILE_PARAMS,
)


class ScenarioError(ThermostringError, ValueError):
    pass


InitialEntry = Union[Profile, tuple]


@dataclass(frozen=True)
class CheckSpec:
    name: str
    tolerance: float | None = None


@dataclass(frozen=True)
class Scenario:
    a: float
    b: float
    mu: float
    u0: InitialEntry
    v0: InitialEntry
    theta0: InitialEntry
    t_end: float
    n: int = 128
    scheme: str = "fd"
    modes: int = 16
    dt: float | str = "auto"
    sample_every: int = 1
    theta_floor_abort: float = 1e-10
    checks: tuple[CheckSpec, ...] = ()
    output: str | None = None
    name: str = "scenario"

    def to_config(self) -> ProblemConfig:
        def as_spec(entry):
            return entry if isinstance(entry, Profile) else np.asarray(entry, dtype=float)

        return ProblemConfig(
            grid=Grid(self.a, self.b, self.n),
            mu=self.mu,
            u0=as_spec(self.u0),
            v0=as_spec(self.v0),
            theta0=as_spec(self.theta0),
            t_end=self.t_end,
            dt=self.dt,
            scheme=self.scheme,
            galerkin_modes=self.modes,
            sample_every=self.sample_every,
            theta_floor_abort=self.theta_floor_abort,
        )

    def with_overrides(self, **overrides: Any) -> Scenario:
        """Copy with the non-``None`` overrides applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def config_hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]


_TOP_KEYS = {
    "name", "domain", "mu", "initial", "scheme", "grid", "galerkin", "time",
    "checks", "output", "theta_floor_abort",
}
_SECTION_KEYS = {
    "domain": {"a", "b"},
    "initial": {"u0", "v0", "theta0"},
    "grid": {"n"},
    "galerkin": {"m"},
    "time": {"dt", "t_end", "sample_every"},
    "output": {"directory"},
}
_REQUIRED = {"domain": {"a", "b"}, "initial": {"u0", "v0", "theta0"}, "time": {"t_end"}}


def _line_of(text: str, path: tuple) -> int | None:
    """1-based line of the YAML node at ``path`` (keys and list indices)."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return None
    line = node.start_mark.line + 1 if node is not None else None
    for part in path:
        if isinstance(node, yaml.MappingNode):
            match = next((kv for kv in node.value if kv[0].value == part), None)
            if match is None:
                break
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


class _Parser:
    def __init__(self, text: str, source: str, strict: bool):
        self.text = text
        self.source = source
        self.strict = strict
        self.warnings: list[str] = []

    def fail(self, path: tuple, message: str) -> ScenarioError:
        line = _line_of(self.text, path)
        where = f"{self.source}:{line}" if line else self.source
        key = ".".join(str(p) for p in path) or "<root>"
        return ScenarioError(f"{where}: {key}: {message}")

    def keys(self, data: Any, path: tuple, allowed: set, required: set = frozenset()) -> dict:
        if not isinstance(data, dict):
            raise self.fail(path, "expected a mapping")
        unknown = sorted(set(data) - allowed, key=str)
        for k in unknown:
            if self.strict:
                raise self.fail(path + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
            self.warnings.append(f"{self.source}: ignoring unknown key {'.'.join(map(str, path + (k,)))}")
        for k in sorted(required - set(data)):
            raise self.fail(path, f"missing required key {k!r}")
        return {k: v for k, v in data.items() if k in allowed}

    def number(self, value: Any, path: tuple, integer: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(path, f"expected a number, got {value!r}")
        if integer:
            if int(value) != value:
                raise self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)

    def initial(self, value: Any, path: tuple) -> InitialEntry:
        if isinstance(value, list):
            return tuple(self.number(x, path + (i,)) for i, x in enumerate(value))
        if isinstance(value, dict):
            kind = value.get("profile")
            if kind not in PROFILE_KINDS:
                raise self.fail(path + ("profile",), f"expected one of {', '.join(PROFILE_KINDS)}")
            allowed = {"profile"} | set(_PROFILE_PARAMS[kind])
            params = self.keys(value, path, allowed)
            return Profile(
                kind,
                tuple(
                    (k, self.number(v, path + (k,), integer=k in ("mode", "power")))
                    for k, v in params.items()
                    if k != "profile"
                ),
            )
        raise self.fail(path, "expected a profile mapping or a list of nodal values")

    def checks(self, value: Any, path: tuple) -> tuple[CheckSpec, ...]:
        from .checks import CHECKS

        if not isinstance(value, list):
            raise self.fail(path, "expected a list of checks")
        out = []
        for i, item in enumerate(value):
            if isinstance(item, str):
                item = {"name": item}
            item = self.keys(item, path + (i,), {"name", "tolerance"}, {"name"})
            name = item["name"]
            if name not in CHECKS:
                raise self.fail(path + (i, "name"), f"unknown check {name!r}; known: {', '.join(CHECKS)}")
            tol = item.get("tolerance")
            out.append(CheckSpec(name, None if tol is None else self.number(tol, path + (i, "tolerance"))))
        names = [c.name for c in out]
        if len(set(names)) != len(names):
            raise self.fail(path, "each check may appear only once")
        return tuple(out)

    def parse(self) -> Scenario:
        try:
            data = yaml.safe_load(self.text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{self.source}:{mark.line + 1}" if mark else self.source
            raise ScenarioError(f"{where}: not valid YAML: {getattr(exc, 'problem', exc)}") from exc
        top = self.keys(data, (), _TOP_KEYS, {"domain", "mu", "initial", "time"})
        sec = {}
        for name, allowed in _SECTION_KEYS.items():
            if name in top:
                sec[name] = self.keys(top[name], (name,), allowed, _REQUIRED.get(name, set()))
            else:
                sec[name] = {}
        kw: dict[str, Any] = {
            "a": self.number(sec["domain"]["a"], ("domain", "a")),
            "b": self.number(sec["domain"]["b"], ("domain", "b")),
            "mu": self.number(top["mu"], ("mu",)),
            "t_end": self.number(sec["time"]["t_end"], ("time", "t_end")),
        }
        for f in ("u0", "v0", "theta0"):
            kw[f] = self.initial(sec["initial"][f], ("initial", f))
        if "name" in top:
            kw["name"] = str(top["name"])
        if "scheme" in top:
            if top["scheme"] not in ("fd", "galerkin"):
                raise self.fail(("scheme",), "expected 'fd' or 'galerkin'")
            kw["scheme"] = top["scheme"]
        if "n" in sec["grid"]:
            kw["n"] = self.number(sec["grid"]["n"], ("grid", "n"), integer=True)
        if "m" in sec["galerkin"]:
            kw["modes"] = self.number(sec["galerkin"]["m"], ("galerkin", "m"), integer=True)
        if "dt" in sec["time"]:
            dt = sec["time"]["dt"]
            kw["dt"] = "auto" if dt == "auto" else self.number(dt, ("time", "dt"))
        if "sample_every" in sec["time"]:
            kw["sample_every"] = self.number(sec["time"]["sample_every"], ("time", "sample_every"), integer=True)
        if "theta_floor_abort" in top:
            kw["theta_floor_abort"] = self.number(top["theta_floor_abort"], ("theta_floor_abort",))
        if "checks" in top:
            kw["checks"] = self.checks(top["checks"], ("checks",))
        if "directory" in sec["output"]:
            kw["output"] = str(sec["output"]["directory"])
        scenario = Scenario(**kw)
        try:
            scenario.to_config()
        except ThermostringError as exc:
            raise ScenarioError(f"{self.source}: {exc}") from exc
        return scenario


def parse_scenario(text: str, source: str = "<scenario>", strict: bool = True) -> Scenario:
    """Parse scenario text.

    With ``strict=False`` unknown keys are dropped and reported through
    :func:`parse_scenario_with_warnings` instead of raising.
    """
    return _Parser(text, source, strict).parse()


def parse_scenario_with_warnings(text: str, source: str = "<scenario>", strict: bool = True):
    parser = _Parser(text, source, strict)
    return parser.parse(), parser.warnings


def load_scenario(path: str | Path, strict: bool = True) -> Scenario:
    path = Path(path)
    scenario = parse_scenario(path.read_text(), str(path), strict)
    return scenario


def _initial_to_data(entry: InitialEntry) -> Any:
    if isinstance(entry, Profile):
        return {"profile": entry.kind, **dict(entry.params)}
    return [float(x) for x in entry]


def to_dict(scenario: Scenario) -> dict:
    data: dict[str, Any] = {
        "name": scenario.name,
        "domain": {"a": scenario.a, "b": scenario.b},
        "mu": scenario.mu,
        "initial": {f: _initial_to_data(getattr(scenario, f)) for f in ("u0", "v0", "theta0")},
        "scheme": scenario.scheme,
        "grid": {"n": scenario.n},
        "galerkin": {"m": scenario.modes},
        "time": {"dt": scenario.dt, "t_end": scenario.t_end, "sample_every": scenario.sample_every},
        "theta_floor_abort": scenario.theta_floor_abort,
        "checks": [
            {"name": c.name} if c.tolerance is None else {"name": c.name, "tolerance": c.tolerance}
            for c in scenario.checks
        ],
    }
    if scenario.output is not None:
        data["output"] = {"directory": scenario.output}
    return data


def serialize(scenario: Scenario) -> str:
    return yaml.safe_dump(to_dict(scenario), sort_keys=False, default_flow_style=None)

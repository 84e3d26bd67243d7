"""Scenario orchestration: single runs, paired stability runs, refinement sweeps."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import galerkin, solver_fd
from .checks import CHECKS, NEEDS_SNAPSHOTS
from .core import (
    ConfigError,
    Grid,
    ProblemConfig,
    Profile,
    StringState,
    diff_interior,
    evaluate_initial,
    l2_norm,
    validate_initial,
)
from .diagnostics import DiagnosticsRow
from .scenario import Scenario, load_scenario
from .timeloop import RunResult

log = logging.getLogger(__name__)

CSV_HEADER = DiagnosticsRow.header()
MAX_SWEEP_WORK = 2**22
THREADS_ENV = "THERMOSTRING_THREADS"


def run_config(config: ProblemConfig, keep_snapshots: bool = True) -> RunResult:
    backend = solver_fd if config.scheme == "fd" else galerkin
    return backend.run(config, keep_snapshots=keep_snapshots)


def _worker_count(requested: int | None, jobs: int) -> int:
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(requested, jobs))


def run_many(configs: Sequence[ProblemConfig], workers: int | None = None, keep_snapshots: bool = True) -> list[RunResult]:
    """Run independent configs, in a process pool when more than one worker is allowed.

    Every run is deterministic and owns its state, so pooled and sequential
    results are identical.
    """
    workers = _worker_count(workers, len(configs))
    if workers == 1:
        return [run_config(c, keep_snapshots) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_config, configs, [keep_snapshots] * len(configs)))


# -- single scenario ------------------------------------------------------


@dataclass(frozen=True)
class CheckVerdict:
    name: str
    passed: bool
    measured: float
    tolerance: float
    paper_ref: str

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def record(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "paper_ref": self.paper_ref,
        }


@dataclass
class VerdictReport:
    scenario: str
    config_hash: str
    scheme: str
    steps: int
    dt: float
    checks: list[CheckVerdict]
    wall_time: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        # wall time is left out so identical inputs give identical files
        return {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "scheme": self.scheme,
            "steps": self.steps,
            "dt": self.dt,
            "passed": self.passed,
            "checks": [c.record() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary_lines(self) -> list[str]:
        return [
            f"{c.status.upper():4s} {c.name}: measured={c.measured:.6g} tolerance={c.tolerance:.6g}"
            for c in self.checks
        ]


def evaluate_checks(scenario: Scenario, result: RunResult) -> list[CheckVerdict]:
    verdicts = []
    for spec in scenario.checks:
        check = CHECKS[spec.name]
        tol = check.default_tolerance if spec.tolerance is None else spec.tolerance
        measured, passed = check.evaluate(result, tol)
        verdicts.append(CheckVerdict(spec.name, bool(passed), float(measured), float(tol), check.paper_ref))
    return verdicts


def write_csv(rows: Sequence[DiagnosticsRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row.values()])


def read_csv(path: Path) -> list[DiagnosticsRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [DiagnosticsRow(*map(float, line)) for line in reader]


def _as_scenario(source: Scenario | str | Path, strict: bool = True) -> Scenario:
    return source if isinstance(source, Scenario) else load_scenario(source, strict)


def run_scenario(
    source: Scenario | str | Path,
    out_dir: str | Path | None = None,
    write: bool = True,
) -> tuple[RunResult, VerdictReport]:
    """Run a scenario, evaluate its checks and write ``diagnostics.csv`` + ``report.json``.

    Initial data is validated before anything is written, so a rejected
    scenario leaves no output behind. Solver errors propagate with the
    failing time attached.
    """
    scenario = _as_scenario(source)
    config = scenario.to_config()
    validate_initial(config)
    config.time_steps()
    keep = any(c.name in NEEDS_SNAPSHOTS for c in scenario.checks)

    start = time.perf_counter()
    result = run_config(config, keep_snapshots=keep)
    verdicts = evaluate_checks(scenario, result)
    report = VerdictReport(
        scenario=scenario.name,
        config_hash=scenario.config_hash(),
        scheme=scenario.scheme,
        steps=result.steps,
        dt=result.dt,
        checks=verdicts,
        wall_time=time.perf_counter() - start,
    )
    if write:
        directory = Path(out_dir or scenario.output or "output")
        directory.mkdir(parents=True, exist_ok=True)
        write_csv(result.rows, directory / "diagnostics.csv")
        (directory / "report.json").write_text(report.to_json())
        log.info("wrote %s", directory)
    return result, report


# -- backend comparison ---------------------------------------------------


def state_gaps(a: StringState, b: StringState, grid: Grid) -> dict[str, float]:
    return {
        "u": l2_norm(a.u - b.u, grid),
        "v": l2_norm(a.v - b.v, grid),
        "theta": l2_norm(a.theta - b.theta, grid),
    }


def compare_backends(source: Scenario | str | Path, workers: int | None = None) -> dict[str, float]:
    """L2 gaps between the FD and Galerkin final states of one scenario."""
    scenario = _as_scenario(source)
    base = scenario.to_config()
    configs = [replace(base, scheme="fd"), replace(base, scheme="galerkin")]
    for c in configs:
        c.time_steps()
    fd, gal = run_many(configs, workers, keep_snapshots=False)
    return state_gaps(fd.final, gal.final, base.grid)


# -- stability in the initial data ----------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Direction of an initial-data perturbation; scaled to a target size when run."""

    du0: object = Profile.make("sine", amplitude=1.0, mode=2)
    dv0: object = Profile.make("sine", amplitude=1.0, mode=1)
    dtheta0: object = Profile.make("cosine", amplitude=1.0, mode=2)


def initial_distance(a: StringState, b: StringState, grid: Grid) -> float:
    """``|u gap|_H1 + |v gap|_L2 + |theta gap|_L2`` with the H1_0 norm taken as ``|u_x|``."""
    return (
        l2_norm(diff_interior(a.u - b.u, grid), grid)
        + l2_norm(a.v - b.v, grid)
        + l2_norm(a.theta - b.theta, grid)
    )


@dataclass
class StabilityReport:
    delta0: float
    times: np.ndarray
    deltas: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.deltas / self.delta0 if self.delta0 > 0 else np.zeros_like(self.deltas)

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.deltas.size else 0.0

    @property
    def final_ratio(self) -> float:
        return float(self.ratios[-1]) if self.deltas.size else 0.0

    def lines(self) -> list[str]:
        return [
            f"delta0={self.delta0:.6g}",
            f"delta(T)={self.deltas[-1]:.6g} at T={self.times[-1]:.6g}",
            f"delta(T)/delta0={self.final_ratio:.6g}",
            f"max_t delta(t)/delta0={self.max_ratio:.6g}",
        ]


def stability_pair(
    source: Scenario | str | Path,
    perturbation: Perturbation | None = None,
    delta0: float | None = None,
    workers: int | None = None,
) -> StabilityReport:
    """Run the scenario and a perturbed copy and track their distance at each sample.

    With ``delta0`` given, the perturbation is rescaled so the initial
    distance equals it exactly; otherwise it is used as is. No pass/fail is
    attached: the ratio ``delta(t)/delta0`` is reported as an empirical
    stability constant.
    """
    scenario = _as_scenario(source)
    base = scenario.to_config()
    grid = base.grid
    s0 = validate_initial(base)
    p = perturbation or Perturbation()
    du = evaluate_initial(p.du0, grid)
    dv = evaluate_initial(p.dv0, grid)
    dth = evaluate_initial(p.dtheta0, grid)
    for name, arr in (("du0", du), ("dv0", dv)):
        if abs(arr[0]) > 1e-12 or abs(arr[-1]) > 1e-12:
            raise ConfigError(f"perturbation {name} must vanish at both endpoints")
    du[0] = du[-1] = dv[0] = dv[-1] = 0.0
    size = initial_distance(s0, StringState(0.0, s0.u + du, s0.v + dv, s0.theta + dth), grid)
    scale = 1.0
    if delta0 is not None:
        if delta0 == 0 or size == 0:
            scale = 0.0
        else:
            scale = delta0 / size
    perturbed = replace(
        base, u0=s0.u + scale * du, v0=s0.v + scale * dv, theta0=s0.theta + scale * dth
    )
    try:
        validate_initial(perturbed)
    except Exception as exc:
        raise ConfigError(f"perturbation makes the initial data inadmissible: {exc}") from exc

    ref, pert = run_many([replace(base, u0=s0.u, v0=s0.v, theta0=s0.theta), perturbed], workers)
    d0 = initial_distance(ref.initial, pert.initial, grid)
    deltas = np.array([initial_distance(a, b, grid) for a, b in zip(ref.snapshots, pert.snapshots)])
    times = np.array([s.t for s in ref.snapshots])
    return StabilityReport(d0, times, deltas)


# -- refinement sweeps ----------------------------------------------------

SWEEP_METRICS = ("u", "v", "theta")


@dataclass
class SweepTable:
    ns: list[int]
    dts: list[float]
    errors: dict[str, list[float]]
    orders: dict[str, list[float | str]]
    reference: str

    def lines(self) -> list[str]:
        head = ["n", "dt"] + [f"err_{m}" for m in SWEEP_METRICS] + [f"order_{m}" for m in SWEEP_METRICS]
        out = [",".join(head)]
        for i, (n, dt) in enumerate(zip(self.ns, self.dts)):
            cells = [str(n), repr(dt)]
            cells += [repr(self.errors[m][i]) for m in SWEEP_METRICS]
            for m in SWEEP_METRICS:
                o = self.orders[m][i] if i < len(self.orders[m]) else ""
                cells.append(o if isinstance(o, str) else repr(o))
            out.append(",".join(cells))
        return out


def _observed_order(coarse: float, fine: float) -> float | str:
    if coarse == 0 and fine == 0:
        return "exact"
    if fine == 0:
        return math.inf
    return math.log2(coarse / fine)


def _on_coarse(values: np.ndarray, factor: int) -> np.ndarray:
    return values[::factor]


ExactSolution = Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray, np.ndarray]]


def refinement_sweep(
    source: Scenario | str | Path,
    levels: int = 3,
    exact: ExactSolution | None = None,
    workers: int | None = None,
) -> SweepTable:
    """Re-run the scenario at ``n, 2n, 4n, ...`` with ``dt`` tied to ``dx``.

    Errors are L-infinity distances of the final ``u``, ``v``, ``theta`` on
    the coarse nodes, measured against ``exact(x, t)`` when given and
    against the finest level otherwise. Without an exact solution the
    observed orders come from successive differences between neighbouring
    levels, which stay unbiased when the finest level is itself inexact.
    """
    if levels < 3:
        raise ValueError("a refinement sweep needs at least 3 levels")
    scenario = _as_scenario(source)
    base = scenario.to_config()
    configs = []
    for i in range(levels):
        f = 2**i
        dt = "auto" if base.dt == "auto" else float(base.dt) / f
        grid = base.grid.refined(f)
        configs.append(
            replace(
                base,
                grid=grid,
                dt=dt,
                galerkin_modes=base.galerkin_modes * f,
                u0=_refine_initial(base.u0, f),
                v0=_refine_initial(base.v0, f),
                theta0=_refine_initial(base.theta0, f),
            )
        )
    work = 0
    for c in configs:
        _, steps = c.time_steps()
        work += (c.grid.n + 1) * max(steps, 1)
    if work > MAX_SWEEP_WORK:
        raise ConfigError(f"sweep needs {work} node-steps, above the {MAX_SWEEP_WORK} guard")
    configs = [replace(c, sample_every=max(1, c.time_steps()[1])) for c in configs]
    results = run_many(configs, workers, keep_snapshots=False)

    finals = [r.final for r in results]
    errors: dict[str, list[float]] = {m: [] for m in SWEEP_METRICS}
    orders: dict[str, list[float | str]] = {m: [] for m in SWEEP_METRICS}
    if exact is not None:
        for r in results:
            ue, ve, te = exact(r.config.grid.nodes, r.final.t)
            for m, ref in zip(SWEEP_METRICS, (ue, ve, te)):
                errors[m].append(float(np.abs(getattr(r.final, m) - ref).max()))
        for m in SWEEP_METRICS:
            orders[m] = [_observed_order(e0, e1) for e0, e1 in zip(errors[m], errors[m][1:])]
        reference = "exact"
    else:
        finest = finals[-1]
        for i, s in enumerate(finals):
            f = 2 ** (levels - 1 - i)
            for m in SWEEP_METRICS:
                errors[m].append(float(np.abs(getattr(s, m) - _on_coarse(getattr(finest, m), f)).max()))
        for m in SWEEP_METRICS:
            diffs = [
                float(np.abs(getattr(finals[i], m) - _on_coarse(getattr(finals[i + 1], m), 2)).max())
                for i in range(levels - 1)
            ]
            orders[m] = [_observed_order(d0, d1) for d0, d1 in zip(diffs, diffs[1:])]
        reference = "finest"
    return SweepTable(
        ns=[c.grid.n for c in configs],
        dts=[r.dt for r in results],
        errors=errors,
        orders=orders,
        reference=reference,
    )


def _refine_initial(spec, factor: int):
    # analytic profiles re-sample on the finer grid; tabulated data cannot be refined
    if isinstance(spec, np.ndarray) and spec.ndim == 1:
        raise ConfigError("refinement sweeps need analytic initial profiles, not inline arrays")
    return spec

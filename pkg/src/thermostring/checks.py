"""Named invariant checks evaluated on a finished run.

Each check maps a :class:`~thermostring.timeloop.RunResult` and a tolerance
to ``(measured, passed)``. The registry also carries the default tolerance
and the property of the model that the check stands for.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diagnostics import cfhs_check, entropy_l1
from .timeloop import RunResult

# ratios below this are treated as 0/0 on a flat trajectory
TINY = 1e-300


@dataclass(frozen=True)
class Check:
    name: str
    default_tolerance: float
    paper_ref: str
    evaluate: Callable[[RunResult, float], tuple[float, bool]]


def _split_max(values: np.ndarray, frac: float = 0.5) -> tuple[float, float]:
    k = max(1, int(len(values) * frac))
    return float(values[:k].max()), float(values[k:].max()) if len(values) > k else float(values[-1])


def _growth(early: float, late: float) -> float:
    """Relative excess of ``late`` over ``early`` (0 when both vanish)."""
    if early <= TINY:
        return 0.0 if late <= TINY else np.inf
    return late / early - 1.0


def positivity(r: RunResult, tol: float):
    m = float(r.column("inf_theta").min())
    return m, m > tol


def entropy_monotone(r: RunResult, tol: float):
    s = r.column("entropy")
    if len(s) < 2:
        return 0.0, True
    drop = float(np.max((s[:-1] - s[1:]) / (1.0 + np.abs(s[:-1]))))
    return drop, drop <= tol


def entropy_identity(r: RunResult, tol: float):
    s = r.column("entropy")
    c = r.column("cumulative_production")
    m = float(np.max(np.abs(s - s[0] - c)))
    return m, m <= tol


def production_monotone(r: RunResult, tol: float):
    c = r.column("cumulative_production")
    drop = float(np.max(c[:-1] - c[1:], initial=0.0))
    return max(drop, 0.0), drop <= tol


def energy_conservation(r: RunResult, tol: float):
    e = r.column("energy")
    m = float(np.max(np.abs(e - e[0])) / abs(e[0]))
    return m, m <= tol


def entropy_bound(r: RunResult, tol: float):
    grid = r.config.grid
    tau = np.array([entropy_l1(s, grid) for s in r.snapshots])
    early, late = _split_max(tau)
    m = _growth(early, late)
    return m, m <= tol


def temperature_bounds(r: RunResult, tol: float):
    sup = r.column("sup_theta")
    inv = 1.0 / r.column("inf_theta")
    q = len(sup) // 4
    if q < 1:
        return 0.0, True
    worst = 0.0
    for series in (sup, inv):
        before = series[2 * q : 3 * q].max()
        last = series[3 * q :].max()
        worst = max(worst, abs(last - before) / before)
    return float(worst), worst <= tol


def fisher_bounded(r: RunResult, tol: float):
    early, late = _split_max(r.column("fisher"))
    m = _growth(early, late)
    return m, m <= tol


def cfhs(r: RunResult, tol: float):
    grid = r.config.grid
    results = [cfhs_check(s.theta, grid) for s in r.snapshots]
    failures = sum(not x.holds for x in results)
    return float(failures), failures <= tol


def flat_string(r: RunResult, tol: float):
    h1 = r.column("u_h1")
    m = 0.0 if h1[-1] <= TINY else h1[-1] / max(h1[0], TINY)
    return float(m), m <= tol


def velocity_decay(r: RunResult, tol: float):
    ut = r.column("ut_l2")
    m = 0.0 if ut[-1] <= TINY else ut[-1] / ut.max()
    return float(m), m <= tol


def uniform_temperature(r: RunResult, tol: float):
    m = r.rows[-1].theta_l2_err / r.prediction.theta_inf
    return float(m), m <= tol


def production_converged(r: RunResult, tol: float):
    c = r.column("cumulative_production")
    k = int(0.9 * (len(c) - 1))
    m = 0.0 if c[-1] <= TINY else (c[-1] - c[k]) / c[-1]
    return float(m), m <= tol


def momentum_residual(r: RunResult, tol: float):
    res = r.column("momentum_residual_l2")
    res = res[np.isfinite(res)]
    m = float(res.max()) if res.size else 0.0
    return m, m <= tol


def fixed_point(r: RunResult, tol: float):
    s0 = r.initial
    m = 0.0
    for s in r.snapshots + [r.final]:
        m = max(
            m,
            float(np.abs(s.u - s0.u).max()),
            float(np.abs(s.v - s0.v).max()),
            float(np.abs(s.theta - s0.theta).max()),
        )
    return m, m <= tol


CHECKS: dict[str, Check] = {
    c.name: c
    for c in (
        Check("positivity", 0.0, "temperature stays positive", positivity),
        Check("entropy-monotone", 1e-8, "second law: entropy of log-temperature is nondecreasing", entropy_monotone),
        Check("entropy-identity", 1e-2, "entropy growth equals the integrated production of log-temperature gradients", entropy_identity),
        Check("production-monotone", 0.0, "cumulative entropy production is nondecreasing", production_monotone),
        Check("energy-conservation", 1e-2, "energy balance: kinetic + elastic + thermal energy is conserved", energy_conservation),
        Check("entropy-bound", 0.1, "time-uniform bound on the L1 norm of log-temperature", entropy_bound),
        Check("temperature-bounds", 0.05, "time-uniform upper and positive lower temperature bounds", temperature_bounds),
        Check("fisher-bounded", 0.1, "time-uniform bound on the Fisher-information functional", fisher_bounded),
        Check("cfhs", 0.0, "functional inequality with constant 13/8 holds for every temperature snapshot", cfhs),
        Check("flat-string", 0.05, "displacement decays to zero in H1_0", flat_string),
        Check("velocity-decay", 0.05, "velocity decays to zero in L2", velocity_decay),
        Check("uniform-temperature", 0.02, "temperature converges in L2 to the uniform energy-determined limit", uniform_temperature),
        Check("production-converged", 0.01, "total entropy production is finite", production_converged),
        Check("momentum-residual", 1e-6, "momentum equation holds pointwise", momentum_residual),
        Check("fixed-point", 1e-12, "flat string at uniform temperature is a steady state", fixed_point),
    )
}

NEEDS_SNAPSHOTS = {"entropy-bound", "cfhs", "fixed-point"}

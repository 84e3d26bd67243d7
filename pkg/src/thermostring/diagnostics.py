"""Functionals monitored along a trajectory.

Everything here is computed from grid snapshots, never from solver
internals, so FD and Galerkin runs are measured identically.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .core import (
    Grid,
    NonpositiveTemperatureError,
    StringState,
    ThermostringError,
    _check_length,
    diff_fourth,
    diff_interior,
    end_slopes,
    l2_norm,
    quadrature,
    second_diff,
    second_diff_even,
)

CFHS_CONSTANT = 13.0 / 8.0
NEUMANN_TOL = 1e-6


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    energy: float
    entropy: float
    entropy_production: float
    fisher: float
    sup_theta: float
    inf_theta: float
    u_h1: float
    ut_l2: float
    theta_l2_err: float
    cumulative_production: float
    momentum_residual_l2: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> tuple[float, ...]:
        return astuple(self)


@dataclass(frozen=True)
class SteadyStatePrediction:
    theta_inf: float
    initial_energy: float


def _positive_theta(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.min() <= 0:
        raise NonpositiveTemperatureError(f"temperature minimum {theta.min():.6g} is not positive")
    return theta


def energy(state: StringState, grid: Grid) -> float:
    """Kinetic + elastic + thermal energy, ``E = 1/2 |v|^2 + 1/2 |u_x|^2 + int theta``."""
    ux = diff_interior(state.u, grid)
    return 0.5 * quadrature(state.v**2, grid) + 0.5 * quadrature(ux**2, grid) + quadrature(state.theta, grid)


def theta_infinity(initial: StringState, grid: Grid) -> SteadyStatePrediction:
    """Uniform limit temperature: discrete initial energy spread over the string."""
    e0 = energy(initial, grid)
    return SteadyStatePrediction(e0 / grid.length, e0)


def entropy(state: StringState, grid: Grid) -> float:
    return quadrature(np.log(_positive_theta(state.theta)), grid)


def production_from_theta(theta: np.ndarray, grid: Grid) -> float:
    tau_x = diff_fourth(np.log(_positive_theta(theta)), grid)
    return quadrature(tau_x**2, grid)


def entropy_production(state: StringState, grid: Grid) -> float:
    """``D = int (log theta)_x^2``, the rate at which the entropy grows."""
    return production_from_theta(state.theta, grid)


def entropy_l1(state: StringState, grid: Grid) -> float:
    return quadrature(np.abs(np.log(_positive_theta(state.theta))), grid)


def fisher_functional(state: StringState, grid: Grid) -> float:
    """``int theta_x^2/theta + int u_tx^2 + int u_xx^2``."""
    theta = _positive_theta(state.theta)
    theta_x = diff_fourth(theta, grid)
    u_tx = diff_fourth(state.v, grid)
    u_xx = second_diff(state.u, grid, bc="dirichlet")
    return (
        quadrature(theta_x**2 / theta, grid)
        + quadrature(u_tx**2, grid)
        + quadrature(u_xx**2, grid)
    )


def fisher_dissipation(state: StringState, grid: Grid) -> float:
    """``int theta [(log theta)_xx]^2``, the sink in the Fisher-functional balance."""
    theta = _positive_theta(state.theta)
    return quadrature(theta * second_diff(np.log(theta), grid) ** 2, grid)


def fisher_coupling(state: StringState, grid: Grid, mu: float) -> float:
    """``(mu/2) int (theta_x^2 / theta) u_tx``, the exchange term of the same balance."""
    theta = _positive_theta(state.theta)
    theta_x = diff_fourth(theta, grid)
    return 0.5 * mu * quadrature(theta_x**2 / theta * diff_fourth(state.v, grid), grid)


@dataclass(frozen=True)
class CfhsResult:
    lhs: float
    rhs: float
    holds: bool

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))


def cfhs_check(psi, grid: Grid, neumann_tol: float = NEUMANN_TOL) -> CfhsResult:
    """Check ``int [(psi^1/2)_xx]^2 <= 13/8 int psi [(log psi)_xx]^2``.

    Both second derivatives use the seven-point sixth-order stencil with even ghost
    reflection. ``psi`` must be positive with vanishing end slopes, measured
    relative to the largest interior slope.
    """
    psi = _check_length(psi, grid)
    if psi.min() <= 0:
        raise NonpositiveTemperatureError("cfhs_check needs a positive function")
    left, right = end_slopes(psi, grid)
    scale = max(1.0, float(np.abs(diff_interior(psi, grid)).max()))
    if max(abs(left), abs(right)) > neumann_tol * scale:
        raise ThermostringError(
            f"psi is not Neumann-compatible: end slopes {left:.3g}, {right:.3g}"
        )
    lhs = quadrature(second_diff_even(np.sqrt(psi), grid) ** 2, grid)
    rhs = CFHS_CONSTANT * quadrature(psi * second_diff_even(np.log(psi), grid) ** 2, grid)
    return CfhsResult(lhs, rhs, bool(lhs <= rhs * (1 + 1e-6) + 1e-12))


def momentum_residual(
    prev: StringState, cur: StringState, nxt: StringState, grid: Grid, mu: float, dt: float | None = None
) -> float:
    """L2 norm over interior nodes of the discrete ``u_tt - u_xx - mu theta_x``.

    ``u_tt`` is the centred three-level difference, so the three snapshots
    must be equally spaced in time.
    """
    h_back = cur.t - prev.t
    h_fwd = nxt.t - cur.t
    if dt is None:
        dt = h_fwd
    if h_back <= 0 or not (
        math.isclose(h_back, dt, rel_tol=1e-8) and math.isclose(h_fwd, dt, rel_tol=1e-8)
    ):
        raise ThermostringError(
            f"snapshots are not equally spaced: {h_back:.6g} and {h_fwd:.6g} (dt={dt:.6g})"
        )
    u_tt = (nxt.u - 2.0 * cur.u + prev.u) / dt**2
    u_xx = second_diff(cur.u, grid, bc="dirichlet")
    theta_x = diff_interior(cur.theta, grid)
    res = (u_tt - u_xx - mu * theta_x)[1:-1]
    return math.sqrt(grid.dx * float(np.sum(res**2)))


def convergence_metrics(
    state: StringState, prediction: SteadyStatePrediction, grid: Grid
) -> tuple[float, float, float]:
    """``(|u_x|, |u_t|, |theta - theta_inf|)``, all L2 norms."""
    return (
        l2_norm(diff_interior(state.u, grid), grid),
        l2_norm(state.v, grid),
        l2_norm(state.theta - prediction.theta_inf, grid),
    )


def diagnostics_row(
    state: StringState,
    grid: Grid,
    prediction: SteadyStatePrediction,
    cumulative_production: float,
    momentum_residual_l2: float,
) -> DiagnosticsRow:
    u_h1, ut_l2, theta_err = convergence_metrics(state, prediction, grid)
    return DiagnosticsRow(
        t=state.t,
        energy=energy(state, grid),
        entropy=entropy(state, grid),
        entropy_production=entropy_production(state, grid),
        fisher=fisher_functional(state, grid),
        sup_theta=float(state.theta.max()),
        inf_theta=float(state.theta.min()),
        u_h1=u_h1,
        ut_l2=ut_l2,
        theta_l2_err=theta_err,
        cumulative_production=cumulative_production,
        momentum_residual_l2=momentum_residual_l2,
    )

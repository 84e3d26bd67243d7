"""Finite-difference integrator for the coupled wave/heat string.

One step, from ``(u, v, theta)`` at ``t`` to ``t + dt``:

1. half kick   ``v += dt/2 * (u_xx + mu * theta_x)``
2. drift       ``u += dt * v``
3. heat        backward Euler for ``theta`` with source ``mu * theta * v_x``,
   ``v_x`` taken with the summation-by-parts adjoint of the ``theta_x`` stencil
4. half kick   ``v += dt/2 * (u_xx + mu * theta_x)`` with the new fields

The wave part is the velocity form of the leapfrog scheme, so three
consecutive displacements satisfy the three-level central scheme exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    Grid,
    InstabilityError,
    ProblemConfig,
    StringState,
    diff_sbp,
    validate_initial,
)
from .heat import BLOWUP, NeumannHeatStep


def wave_acceleration(u: np.ndarray, theta: np.ndarray, grid: Grid, mu: float) -> np.ndarray:
    """Discrete ``u_xx + mu * theta_x`` at interior nodes, zero at the pinned ends."""
    h = grid.dx
    acc = np.zeros_like(u)
    acc[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2 + mu * (theta[2:] - theta[:-2]) / (2.0 * h)
    return acc


@dataclass
class FdScheme:
    grid: Grid
    mu: float
    dt: float
    theta_floor_abort: float = 1e-10
    heat: NeumannHeatStep = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0 < self.dt <= self.grid.dx * (1 + 1e-12):
            raise ConfigError(f"dt={self.dt:g} violates the wave CFL bound dt <= dx={self.grid.dx:g}")
        self.heat = NeumannHeatStep(self.grid, self.dt, self.mu, self.theta_floor_abort)

    @classmethod
    def from_config(cls, config: ProblemConfig) -> FdScheme:
        dt, _ = config.time_steps()
        return cls(config.grid, config.mu, dt, config.theta_floor_abort)

    def step(self, state: StringState) -> StringState:
        grid, mu, dt = self.grid, self.mu, self.dt
        t_new = state.t + dt
        u, v, theta = state.u, state.v, state.theta
        v_half = v + 0.5 * dt * wave_acceleration(u, theta, grid, mu)
        u_new = u + dt * v_half
        u_new[0] = u_new[-1] = 0.0
        theta_new = self.heat(theta, diff_sbp(v_half, grid), t_new)
        v_new = v_half + 0.5 * dt * wave_acceleration(u_new, theta_new, grid, mu)
        v_new[0] = v_new[-1] = 0.0
        if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))) or max(
            np.abs(u_new).max(), np.abs(v_new).max()
        ) > BLOWUP:
            raise InstabilityError("displacement or velocity blew up", t_new)
        return StringState(t_new, u_new, v_new, theta_new)


def step(state: StringState, scheme: FdScheme) -> StringState:
    return scheme.step(state)


def run(config: ProblemConfig, keep_snapshots: bool = True):
    """Integrate ``config`` with the FD backend; see :func:`thermostring.timeloop.integrate`."""
    from .timeloop import integrate

    scheme = FdScheme.from_config(config)
    initial = validate_initial(config)
    _, steps = config.time_steps()
    return integrate(
        initial,
        scheme.step,
        lambda s: s,
        config,
        steps,
        keep_snapshots=keep_snapshots,
    )

"""Half-Galerkin backend: displacement in a sine basis, temperature on the grid.

With ``phi_k(x) = sin(k pi (x - a) / L)`` the stiffness form is diagonal, so
the wave part is ``m`` oscillators

    c_k'' + lambda_k c_k = -mu * (2 / L) * int theta * phi_k' dx,

``lambda_k = (k pi / L)**2``, coupled to the temperature only through the
trapezoid quadratures on the shared grid. The oscillators are advanced by
Stormer-Verlet (kick-drift-kick); temperature reuses the FD heat substep with
``u_tx`` rebuilt from the analytic basis derivatives.
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
    _check_length,
    validate_initial,
)
from .heat import BLOWUP, NeumannHeatStep

MIN_NODES_PER_MODE = 8


def basis_eval(k: int, grid: Grid) -> np.ndarray:
    """``phi_k`` sampled at the nodes, with exact zeros at both ends."""
    if k < 1:
        raise ValueError(f"basis index must be >= 1, got {k}")
    phi = np.sin(k * np.pi * (grid.nodes - grid.a) / grid.length)
    phi[0] = phi[-1] = 0.0
    return phi


def basis_derivative(k: int, grid: Grid) -> np.ndarray:
    if k < 1:
        raise ValueError(f"basis index must be >= 1, got {k}")
    kk = k * np.pi / grid.length
    return kk * np.cos(kk * (grid.nodes - grid.a))


def _basis_matrix(m: int, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    phi = np.array([basis_eval(k, grid) for k in range(1, m + 1)])
    dphi = np.array([basis_derivative(k, grid) for k in range(1, m + 1)])
    return phi, dphi


def project(f, m: int, grid: Grid) -> np.ndarray:
    """L2 projection coefficients ``c_k = (2 / L) * int f phi_k`` for k = 1..m."""
    if m < 1:
        raise ValueError("need at least one mode")
    f = _check_length(f, grid)
    phi, _ = _basis_matrix(m, grid)
    return (2.0 / grid.length) * (phi * grid.weights) @ f


@dataclass(frozen=True, eq=False)
class GalerkinState:
    t: float
    c: np.ndarray
    cdot: np.ndarray
    theta: np.ndarray


@dataclass
class GalerkinScheme:
    grid: Grid
    mu: float
    dt: float
    modes: int
    theta_floor_abort: float = 1e-10
    phi: np.ndarray = field(init=False, repr=False)
    dphi: np.ndarray = field(init=False, repr=False)
    lam: np.ndarray = field(init=False, repr=False)
    heat: NeumannHeatStep = field(init=False, repr=False)

    def __post_init__(self) -> None:
        grid, m = self.grid, self.modes
        if m < 1:
            raise ConfigError("galerkin_modes must be >= 1")
        if grid.n < MIN_NODES_PER_MODE * m:
            raise ConfigError(
                f"n={grid.n} cannot resolve {m} modes; need n >= {MIN_NODES_PER_MODE * m}"
            )
        self.lam = (np.arange(1, m + 1) * np.pi / grid.length) ** 2
        if self.dt > 2.0 / np.sqrt(self.lam[-1]):
            raise ConfigError(
                f"dt={self.dt:g} exceeds the oscillator bound 2/sqrt(lambda_m)={2.0 / np.sqrt(self.lam[-1]):g}"
            )
        self.phi, self.dphi = _basis_matrix(m, grid)
        # coupling rows: (2/L) * trapezoid(theta * phi_k')
        self._coupling = (2.0 / grid.length) * self.dphi * grid.weights
        self.heat = NeumannHeatStep(grid, self.dt, self.mu, self.theta_floor_abort)

    @classmethod
    def from_config(cls, config: ProblemConfig) -> GalerkinScheme:
        dt, _ = config.time_steps()
        return cls(config.grid, config.mu, dt, config.galerkin_modes, config.theta_floor_abort)

    def acceleration(self, c: np.ndarray, theta: np.ndarray) -> np.ndarray:
        # phi_k' integrates to zero, so only theta - theta(a) couples; this keeps
        # a uniform temperature from leaking into the modes through rounding
        return -self.lam * c - self.mu * (self._coupling @ (theta - theta[0]))

    def initial_state(self, state: StringState) -> GalerkinState:
        return GalerkinState(
            state.t,
            project(state.u, self.modes, self.grid),
            project(state.v, self.modes, self.grid),
            np.array(state.theta, dtype=float),
        )

    def to_string_state(self, gs: GalerkinState) -> StringState:
        return StringState(gs.t, gs.c @ self.phi, gs.cdot @ self.phi, gs.theta)

    def step(self, gs: GalerkinState) -> GalerkinState:
        dt = self.dt
        t_new = gs.t + dt
        cdot_half = gs.cdot + 0.5 * dt * self.acceleration(gs.c, gs.theta)
        c_new = gs.c + dt * cdot_half
        theta_new = self.heat(gs.theta, cdot_half @ self.dphi, t_new)
        cdot_new = cdot_half + 0.5 * dt * self.acceleration(c_new, theta_new)
        if not (np.all(np.isfinite(c_new)) and np.all(np.isfinite(cdot_new))) or max(
            np.abs(c_new).max(), np.abs(cdot_new).max()
        ) > BLOWUP:
            raise InstabilityError("modal coefficients blew up", t_new)
        return GalerkinState(t_new, c_new, cdot_new, theta_new)

    def modal_energy(self, gs: GalerkinState) -> float:
        """Wave energy of the coefficients, ``(L/4) * sum(cdot**2 + lambda * c**2)``."""
        return 0.25 * self.grid.length * float(np.sum(gs.cdot**2 + self.lam * gs.c**2))


def step(state: GalerkinState, scheme: GalerkinScheme) -> GalerkinState:
    return scheme.step(state)


def run(config: ProblemConfig, keep_snapshots: bool = True):
    """Integrate ``config`` with the Galerkin backend.

    Snapshots and diagnostics are taken on the grid reconstruction, so the
    result has the same shape as the FD backend's.
    """
    from .timeloop import integrate

    scheme = GalerkinScheme.from_config(config)
    initial = scheme.initial_state(validate_initial(config))
    _, steps = config.time_steps()
    return integrate(
        initial,
        scheme.step,
        scheme.to_string_state,
        config,
        steps,
        keep_snapshots=keep_snapshots,
    )

"""Backward-Euler Neumann heat substep shared by the FD and Galerkin solvers."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .core import Grid, InstabilityError, PositivityLossError, second_diff

BLOWUP = 1e12


class NeumannHeatStep:
    """Advance ``theta_t = theta_xx + mu * theta * w`` by one backward-Euler step.

    Diffusion is implicit with ghost reflection at both ends; the source is
    explicit in ``theta`` (lagged) and uses the supplied ``w = u_tx``. It is
    applied as the exact factor ``exp(dt * mu * w)`` rather than ``1 + dt * mu * w``:
    then ``log theta`` moves by exactly ``dt * mu * w`` before diffusion, and
    the backward-Euler inverse (row-stochastic, symmetric in the trapezoid
    weights) can only raise ``int log theta``.

    Scaling the two boundary rows by 1/2 (the trapezoid weights) turns the
    ghost-node matrix into a symmetric positive definite one, which is
    Cholesky-factored once and reused every step. The solve is done for the
    increment, so a uniform temperature with no source is reproduced bit for bit.
    """

    def __init__(self, grid: Grid, dt: float, mu: float, floor: float = 1e-10):
        self.grid = grid
        self.dt = dt
        self.mu = mu
        self.floor = floor
        r = dt / grid.dx**2
        n1 = grid.n + 1
        diag = np.full(n1, 1.0 + 2.0 * r)
        diag[0] = diag[-1] = 0.5 + r
        upper = np.full(n1, -r)
        upper[0] = 0.0
        # upper-form banded storage: row 0 superdiagonal, row 1 diagonal
        self._chol = cholesky_banded(np.vstack([upper, diag]), lower=False)
        self._rowscale = np.ones(n1)
        self._rowscale[0] = self._rowscale[-1] = 0.5

    def __call__(self, theta: np.ndarray, w: np.ndarray, t_new: float) -> np.ndarray:
        rhs = self.dt * second_diff(theta, self.grid) + theta * np.expm1(self.dt * self.mu * w)
        new = theta + cho_solve_banded((self._chol, False), rhs * self._rowscale)
        if not np.all(np.isfinite(new)) or np.abs(new).max() > BLOWUP:
            raise InstabilityError("temperature blew up", t_new)
        low = new.min()
        if low <= self.floor:
            raise PositivityLossError(
                f"temperature fell to {low:.3g}, at or below the abort floor {self.floor:g}", t_new
            )
        return new

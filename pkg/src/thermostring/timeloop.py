"""Backend-agnostic time loop: steps a solver and records diagnostics."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from .core import ProblemConfig, StringState
from .diagnostics import (
    DiagnosticsRow,
    SteadyStatePrediction,
    diagnostics_row,
    momentum_residual,
    production_from_theta,
    theta_infinity,
)


@dataclass
class RunResult:
    config: ProblemConfig
    dt: float
    steps: int
    prediction: SteadyStatePrediction
    rows: list[DiagnosticsRow]
    snapshots: list[StringState]
    initial: StringState
    final: StringState
    extra: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str):
        import numpy as np

        return np.array([getattr(r, name) for r in self.rows])


def _residual_center(k: int, steps: int) -> int:
    # a centred three-level stencil needs a step on each side
    return min(max(k, 1), steps - 1)


def integrate(
    initial: Any,
    advance: Callable[[Any], Any],
    to_grid: Callable[[Any], StringState],
    config: ProblemConfig,
    steps: int,
    keep_snapshots: bool = True,
) -> RunResult:
    """Run ``steps`` steps of ``advance`` and sample every ``config.sample_every``.

    The final step is always sampled, so there are ``1 + ceil(steps / every)``
    rows. ``to_grid`` maps the solver's native state onto a :class:`StringState`.
    Each row's momentum residual uses the centred triple around its step
    (shifted inward at the first and last step); with fewer than two steps
    it is NaN.
    """
    grid, mu = config.grid, config.mu
    dt, _ = config.time_steps()
    every = config.sample_every

    state = initial
    gstate = to_grid(state)
    initial_grid = gstate
    prediction = theta_infinity(gstate, grid)

    rows: list[DiagnosticsRow] = []
    snapshots: list[StringState] = []
    pending: deque[tuple[int, StringState, float]] = deque()
    window: deque[StringState] = deque([gstate], maxlen=3)

    cumulative = 0.0
    d_prev = production_from_theta(gstate.theta, grid)

    def emit(k: int, s: StringState, cum: float, residual: float) -> None:
        rows.append(diagnostics_row(s, grid, prediction, cum, residual))
        if keep_snapshots:
            snapshots.append(s)

    def flush(center: int) -> None:
        if not pending or _residual_center(pending[0][0], steps) != center:
            return
        residual = momentum_residual(window[0], window[1], window[2], grid, mu, dt)
        while pending and _residual_center(pending[0][0], steps) == center:
            k, s, cum = pending.popleft()
            emit(k, s, cum, residual)

    pending.append((0, gstate, 0.0))
    for j in range(1, steps + 1):
        state = advance(state)
        gstate = to_grid(state)
        window.append(gstate)
        d_new = production_from_theta(gstate.theta, grid)
        cumulative += 0.5 * dt * (d_prev + d_new)
        d_prev = d_new
        if j % every == 0 or j == steps:
            pending.append((j, gstate, cumulative))
        if j >= 2:
            flush(j - 1)
    # only runs shorter than two steps leave rows without a residual
    while pending:
        k, s, cum = pending.popleft()
        emit(k, s, cum, math.nan)

    return RunResult(
        config=config,
        dt=dt,
        steps=steps,
        prediction=prediction,
        rows=rows,
        snapshots=snapshots,
        initial=initial_grid,
        final=gstate,
    )

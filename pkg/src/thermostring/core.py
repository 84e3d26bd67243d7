"""Grid, state containers and the discrete calculus shared by both solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np


class ThermostringError(Exception):
    """Base class for every error raised by this package."""


class InvalidDomainError(ThermostringError, ValueError):
    pass


class LengthMismatchError(ThermostringError, ValueError):
    pass


class ConfigError(ThermostringError, ValueError):
    pass


class NonpositiveTemperatureError(ThermostringError, ValueError):
    pass


class BoundaryMismatchError(ThermostringError, ValueError):
    pass


class SolverError(ThermostringError, RuntimeError):
    """Raised when time integration cannot continue.

    ``t`` is the time level the failing step was trying to reach.
    """

    def __init__(self, message: str, t: float | None = None):
        if t is not None:
            message = f"{message} (t={t:.6g})"
        super().__init__(message)
        self.t = t


class PositivityLossError(SolverError):
    pass


class InstabilityError(SolverError):
    pass


BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of ``n`` cells on ``[a, b]`` (``n + 1`` nodes)."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise InvalidDomainError("domain endpoints must be finite")
        if self.a >= self.b:
            raise InvalidDomainError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 4:
            raise InvalidDomainError(f"need an integer n >= 4, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        # a + i*dx rather than linspace so that the spacing is exactly uniform
        x = self.a + self.dx * np.arange(self.n + 1)
        x[-1] = self.b
        return x

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights, so that ``weights @ f`` integrates f."""
        w = np.full(self.n + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def refined(self, factor: int = 2) -> Grid:
        return Grid(self.a, self.b, self.n * factor)


def make_grid(a: float, b: float, n: int) -> Grid:
    return Grid(float(a), float(b), n)


def _check_length(f: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n + 1,):
        raise LengthMismatchError(f"expected {grid.n + 1} nodal values, got shape {f.shape}")
    return f


def quadrature(f, grid: Grid) -> float:
    """Composite trapezoid rule for the integral of nodal values over [a, b]."""
    f = _check_length(f, grid)
    return float(grid.dx * (f.sum() - 0.5 * (f[0] + f[-1])))


def diff_interior(f, grid: Grid) -> np.ndarray:
    """First derivative: central differences inside, one-sided 3-point at the ends.

    Second-order accurate everywhere and exact on quadratics.
    """
    f = _check_length(f, grid)
    h = grid.dx
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    # written in differences so constants give exactly zero
    d[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h)
    d[-1] = (4.0 * (f[-1] - f[-2]) - (f[-1] - f[-3])) / (2.0 * h)
    return d


def diff_sbp(f, grid: Grid) -> np.ndarray:
    """First derivative that is the trapezoid-weighted adjoint of the interior central difference.

    Central inside, first-order one-sided at the two end nodes. For any ``g``
    vanishing at both ends, ``quadrature(g * diff_sbp(f)) == -quadrature(f * central(g))``
    (summation by parts), and ``quadrature(diff_sbp(f)) == f[-1] - f[0]`` exactly.
    """
    f = _check_length(f, grid)
    h = grid.dx
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    d[0] = (f[1] - f[0]) / h
    d[-1] = (f[-1] - f[-2]) / h
    return d


def second_diff(f, grid: Grid, bc: str = "neumann") -> np.ndarray:
    """Three-point second derivative with ghost reflection at both ends.

    ``bc="neumann"`` mirrors evenly (f[-1] = f[1]), matching the heat operator.
    ``bc="dirichlet"`` mirrors oddly about a zero endpoint value, which gives
    a zero second derivative at the ends.
    """
    f = _check_length(f, grid)
    h2 = grid.dx**2
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    if bc == "neumann":
        d[0] = 2.0 * (f[1] - f[0]) / h2
        d[-1] = 2.0 * (f[-2] - f[-1]) / h2
    elif bc == "dirichlet":
        d[0] = d[-1] = 0.0
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return d


def second_diff_even(f, grid: Grid) -> np.ndarray:
    """Sixth-order seven-point second derivative with even (Neumann) reflection.

    Three ghost nodes per side mirror the interior, which is exact for
    functions whose odd derivatives vanish at the endpoints.
    """
    f = _check_length(f, grid)
    g = np.concatenate([f[3:0:-1], f, f[-2:-5:-1]])
    c = np.array([2.0, -27.0, 270.0, 0.0, 270.0, -27.0, 2.0]) / (180.0 * grid.dx**2)
    n1 = f.size
    # centre weight folded into differences, so constants map to exactly zero
    return sum(c[j] * (g[j : j + n1] - f) for j in range(7) if j != 3)


def diff_fourth(f, grid: Grid) -> np.ndarray:
    """Fourth-order first derivative: five-point central inside, one-sided near the ends."""
    f = _check_length(f, grid)
    h12 = 12.0 * grid.dx
    d = np.empty_like(f)
    d[2:-2] = (8.0 * (f[3:-1] - f[1:-3]) - (f[4:] - f[:-4])) / h12
    c0 = np.array([48.0, -36.0, 16.0, -3.0])
    c1 = np.array([-3.0, 18.0, -6.0, 1.0])
    d[0] = c0 @ (f[1:5] - f[0]) / h12
    d[1] = c1 @ (f[[0, 2, 3, 4]] - f[1]) / h12
    d[-1] = -(c0 @ (f[-2:-6:-1] - f[-1])) / h12
    d[-2] = -(c1 @ (f[[-1, -3, -4, -5]] - f[-2])) / h12
    return d


def end_slopes(f, grid: Grid) -> tuple[float, float]:
    """Fourth-order one-sided first derivatives at ``a`` and ``b``."""
    f = _check_length(f, grid)
    c = np.array([48.0, -36.0, 16.0, -3.0]) / (12.0 * grid.dx)
    return float(c @ (f[1:5] - f[0])), float(-(c @ (f[-2:-6:-1] - f[-1])))


def l2_norm(f, grid: Grid) -> float:
    f = _check_length(f, grid)
    return math.sqrt(max(quadrature(f * f, grid), 0.0))


@dataclass(frozen=True, eq=False)
class StringState:
    """Nodal displacement, velocity and temperature at time ``t``."""

    t: float
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        for name in ("u", "v", "theta"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.u.shape == self.v.shape == self.theta.shape) or self.u.ndim != 1:
            raise LengthMismatchError("u, v and theta must be 1-D arrays of equal length")

    def check(self, floor: float = 0.0) -> None:
        """Raise if the state violates the Dirichlet, positivity or finiteness invariants."""
        for name in ("u", "v", "theta"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InstabilityError(f"non-finite values in {name}", self.t)
        for name in ("u", "v"):
            arr = getattr(self, name)
            if abs(arr[0]) > BOUNDARY_TOL or abs(arr[-1]) > BOUNDARY_TOL:
                raise BoundaryMismatchError(f"{name} does not vanish at the endpoints")
        if self.theta.min() <= floor:
            raise NonpositiveTemperatureError(
                f"temperature min {self.theta.min():.6g} is not above {floor:g}"
            )


# -- initial data -----------------------------------------------------------

PROFILE_KINDS = ("constant", "sine", "cosine", "polynomial-bump", "gaussian-bump")

_PROFILE_PARAMS = {
    "constant": {"value": 0.0},
    "sine": {"amplitude": 1.0, "mode": 1, "offset": 0.0},
    "cosine": {"amplitude": 1.0, "mode": 1, "offset": 0.0},
    "polynomial-bump": {"amplitude": 1.0, "power": 1, "offset": 0.0},
    "gaussian-bump": {"amplitude": 1.0, "center": 0.5, "width": 0.1, "offset": 0.0},
}


@dataclass(frozen=True)
class Profile:
    """Named analytic initial profile.

    Positions are measured through ``s = (x - a) / (b - a)`` so the same
    parameters describe the same shape on any interval:

    * ``constant``: ``value``
    * ``sine``: ``offset + amplitude * sin(mode * pi * s)``
    * ``cosine``: ``offset + amplitude * cos(mode * pi * s)``
    * ``polynomial-bump``: ``offset + amplitude * (4 s (1 - s)) ** power``
    * ``gaussian-bump``: ``offset + amplitude * exp(-((s - center) / width) ** 2)``
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _PROFILE_PARAMS:
            raise ConfigError(f"unknown profile {self.kind!r}; expected one of {PROFILE_KINDS}")
        params = dict(self.params)
        unknown = set(params) - set(_PROFILE_PARAMS[self.kind])
        if unknown:
            raise ConfigError(f"profile {self.kind!r} has no parameter(s) {sorted(unknown)}")
        object.__setattr__(self, "params", tuple(sorted(params.items())))

    @classmethod
    def make(cls, kind: str, **params) -> Profile:
        return cls(kind, tuple(params.items()))

    def param(self, name: str) -> float:
        return dict(self.params).get(name, _PROFILE_PARAMS[self.kind][name])

    def __call__(self, x: np.ndarray, a: float, b: float) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - a) / (b - a)
        p = self.param
        if self.kind == "constant":
            return np.full_like(s, p("value"))
        if self.kind == "sine":
            return p("offset") + p("amplitude") * np.sin(p("mode") * np.pi * s)
        if self.kind == "cosine":
            return p("offset") + p("amplitude") * np.cos(p("mode") * np.pi * s)
        if self.kind == "polynomial-bump":
            return p("offset") + p("amplitude") * (4.0 * s * (1.0 - s)) ** p("power")
        return p("offset") + p("amplitude") * np.exp(-(((s - p("center")) / p("width")) ** 2))


InitialSpec = Union[Profile, np.ndarray, Callable[[np.ndarray], np.ndarray], float]


def evaluate_initial(spec: InitialSpec, grid: Grid) -> np.ndarray:
    """Sample an initial-data spec at the grid nodes.

    Accepts a :class:`Profile`, a tabulated vector of length ``n + 1``, a
    plain callable of ``x`` or a scalar constant.
    """
    if isinstance(spec, Profile):
        return spec(grid.nodes, grid.a, grid.b)
    if callable(spec):
        return np.asarray(spec(grid.nodes), dtype=float) * np.ones(grid.n + 1)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n + 1, float(arr))
    return _check_length(arr, grid).copy()


@dataclass(frozen=True)
class ProblemConfig:
    grid: Grid
    mu: float
    u0: InitialSpec
    v0: InitialSpec
    theta0: InitialSpec
    t_end: float
    dt: float | str = "auto"
    scheme: str = "fd"
    galerkin_modes: int = 16
    sample_every: int = 1
    theta_floor_abort: float = 1e-10

    def __post_init__(self) -> None:
        if self.scheme not in ("fd", "galerkin"):
            raise ConfigError(f"scheme must be 'fd' or 'galerkin', got {self.scheme!r}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end must be a finite non-negative number")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ConfigError(f"dt must be positive or 'auto', got {self.dt!r}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError("sample_every must be a positive integer")
        if int(self.galerkin_modes) != self.galerkin_modes or self.galerkin_modes < 1:
            raise ConfigError("galerkin_modes must be a positive integer")
        if not self.theta_floor_abort > 0:
            raise ConfigError("theta_floor_abort must be positive")

    def time_steps(self) -> tuple[float, int]:
        """Resolved ``(dt, number of steps)``.

        The step is shrunk (never enlarged) so that a whole number of steps
        lands exactly on ``t_end``. ``"auto"`` starts from ``0.9 * dx``.
        """
        dt = 0.9 * self.grid.dx if self.dt == "auto" else float(self.dt)
        if dt > self.grid.dx * (1 + 1e-12):
            raise ConfigError(f"dt={dt:g} violates the wave CFL bound dt <= dx={self.grid.dx:g}")
        if self.t_end == 0:
            return dt, 0
        steps = max(1, math.ceil(self.t_end / dt - 1e-9))
        return self.t_end / steps, steps


def validate_initial(config: ProblemConfig) -> StringState:
    """Evaluate the initial data on the grid and check it is admissible."""
    grid = config.grid
    u0 = evaluate_initial(config.u0, grid)
    v0 = evaluate_initial(config.v0, grid)
    theta0 = evaluate_initial(config.theta0, grid)
    for name, arr in (("u0", u0), ("v0", v0), ("theta0", theta0)):
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"{name} has non-finite values")
    for name, arr in (("u0", u0), ("v0", v0)):
        if abs(arr[0]) > BOUNDARY_TOL or abs(arr[-1]) > BOUNDARY_TOL:
            raise BoundaryMismatchError(
                f"{name} must vanish at both endpoints, got {arr[0]:.3g} and {arr[-1]:.3g}"
            )
    if theta0.min() <= 0:
        raise NonpositiveTemperatureError(
            f"theta0 must be positive, minimum on the grid is {theta0.min():.6g}"
        )
    # exact zeros so that round-off in sin(k*pi) does not leak into the solvers
    u0[0] = u0[-1] = v0[0] = v0[-1] = 0.0
    return StringState(0.0, u0, v0, theta0)

"""Uniform 1-D trait grids, trapezoidal quadrature and density states."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ContractViolation, DegenerateStateError

# Relative tolerance on the trapezoid mass for a state to count as normalized.
NORMALIZED_RTOL = 1e-10

MODES = ("q", "n")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[x_min, x_max]`` with ``n_nodes`` nodes."""

    x_min: float
    x_max: float
    n_nodes: int

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ContractViolation(f"need at least 3 nodes, got {self.n_nodes}")
        if not self.x_max > self.x_min:
            raise ContractViolation("x_max must exceed x_min")

    @classmethod
    def symmetric(cls, half_width=2.0, spacing=0.02):
        """Grid on ``[-half_width, half_width]`` with the given spacing."""
        n = int(round(2 * half_width / spacing)) + 1
        return cls(-half_width, half_width, n)

    @property
    def spacing(self):
        return (self.x_max - self.x_min) / (self.n_nodes - 1)

    def node(self, i):
        return self.x_min + i * self.spacing

    @cached_property
    def x(self):
        nodes = self.x_min + np.arange(self.n_nodes) * self.spacing
        nodes[-1] = self.x_max
        nodes.flags.writeable = False
        return nodes

    @cached_property
    def weights(self):
        w = np.full(self.n_nodes, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        w.flags.writeable = False
        return w

    def refined(self, factor=2):
        """Grid over the same interval with spacing divided by ``factor``."""
        return Grid1D(self.x_min, self.x_max, factor * (self.n_nodes - 1) + 1)

    def index_of(self, x):
        return int(round((x - self.x_min) / self.spacing))


@dataclass(frozen=True)
class DensityState:
    """Nonnegative grid function at a given time.

    ``mode`` is ``"q"`` for a probability density (trait distribution) and
    ``"n"`` for an unnormalized population density.
    """

    grid: Grid1D
    values: np.ndarray
    time: float = 0.0
    mode: str = "q"
    dirichlet: bool = field(default=False, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ContractViolation(
                f"values has shape {v.shape}, grid has {self.grid.n_nodes} nodes")
        if self.mode not in MODES:
            raise ContractViolation(f"unknown mode {self.mode!r}")
        if np.any(v < 0):
            raise ContractViolation("density values must be nonnegative")
        if self.dirichlet:
            v[0] = v[-1] = 0.0
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def mass(self):
        return trapezoid(self.values, self.grid)

    def with_values(self, values, time=None, mode=None):
        return DensityState(self.grid, values,
                            self.time if time is None else time,
                            self.mode if mode is None else mode,
                            self.dirichlet)


def trapezoid(values, grid):
    """Trapezoid-rule integral of a grid function."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.n_nodes:
        raise ContractViolation(
            f"length {values.shape[-1]} does not match grid ({grid.n_nodes} nodes)")
    return values @ grid.weights


def normalize(state):
    """Rescale ``state`` to unit trapezoid mass; returns a ``q``-mode state."""
    mass = trapezoid(state.values, state.grid)
    if not np.isfinite(mass) or mass <= 0:
        raise DegenerateStateError(f"cannot normalize a state with mass {mass!r}")
    return DensityState(state.grid, state.values / mass, state.time, "q",
                        state.dirichlet)


def is_normalized(state, rtol=NORMALIZED_RTOL):
    return abs(trapezoid(state.values, state.grid) - 1.0) <= rtol


def require_normalized(state, what="state"):
    mass = trapezoid(state.values, state.grid)
    if abs(mass - 1.0) > NORMALIZED_RTOL:
        raise ContractViolation(f"{what} must be normalized (mass={mass!r})")


def cumulative_trapezoid(values, grid):
    """Running trapezoid integral, 0 at the first node."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * grid.spacing * (values[1:] + values[:-1]), out=out[1:])
    return out


def cdf(state):
    """Cumulative distribution function of a normalized state on its grid."""
    require_normalized(state)
    return cumulative_trapezoid(state.values, state.grid)


def indicator_density(grid, center, half_width, time=0.0, dirichlet=True):
    """Normalized indicator of ``|x - center| < half_width``.

    Nodes get the value ``1 / (2 half_width)`` before normalization, matching
    the usual block initial condition; nodes on the interval edge (up to
    rounding) get half of it, so the trapezoid mean is exactly ``center``
    when the edges fall on nodes.  Grid clipping is absorbed by the
    normalization.
    """
    d = np.abs(grid.x - center) - half_width
    edge = np.abs(d) <= 1e-9 * grid.spacing
    values = np.where(edge, 0.25 / half_width, np.where(d < 0, 0.5 / half_width, 0.0))
    return normalize(DensityState(grid, values, time, "q", dirichlet))


def gaussian_values(grid, mean, std):
    return np.exp(-0.5 * ((grid.x - mean) / std) ** 2) / (np.sqrt(2 * np.pi) * std)


def gaussian_density(grid, mean, std, time=0.0, normalized=True):
    state = DensityState(grid, gaussian_values(grid, mean, std), time, "q")
    return normalize(state) if normalized else state

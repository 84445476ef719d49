"""Central moments, Gaussian ansatz and 1-D Wasserstein distances."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import ContractViolation
from .grid import (DensityState, cdf, gaussian_values, normalize,
                   require_normalized, trapezoid)

DEFAULT_LEVELS = 4096
PLATEAU_SLOPE = 1e-15


@dataclass(frozen=True)
class MomentRecord:
    """Diagnostics of one simulation state.  Field order is the CSV header."""

    time: float
    rho: float
    m1: float
    m2c: float
    m2k0c: float
    m_abs_3: float
    fbar: float
    dbar: float
    w1_to_gaussian: float
    leaked_mass: float
    rho2: float = float("nan")
    mass_defect: float = 0.0

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def as_row(self):
        return [getattr(self, name) for name in self.field_names()]


@dataclass(frozen=True)
class QuantileFunction:
    levels: np.ndarray
    values: np.ndarray


def mean(q):
    return trapezoid(q.grid.x * q.values, q.grid)


def central_moment(q, k, absolute=False):
    """k-th central moment of a normalized density; ``k=1`` returns the mean."""
    require_normalized(q, "q")
    if k < 1:
        raise ContractViolation("moment order must be >= 1")
    m1 = mean(q)
    if k == 1:
        return m1
    d = q.grid.x - m1
    if absolute:
        d = np.abs(d)
    return trapezoid(d ** k * q.values, q.grid)


def central_moments(q, kmax):
    """Array ``[1, 0, M2, ..., M_kmax]`` of central moments (index = order)."""
    require_normalized(q, "q")
    d = q.grid.x - mean(q)
    out = np.array([trapezoid(d ** k * q.values, q.grid) for k in range(kmax + 1)])
    out[0], out[1] = 1.0, 0.0
    return out


def gaussian_ansatz(mean, epsilon, grid, time=0.0):
    """Normalized grid Gaussian with the given mean and standard deviation ``epsilon``."""
    if epsilon < 2 * grid.spacing:
        warnings.warn(f"epsilon={epsilon} is under two grid spacings; the Gaussian "
                      "is poorly resolved", RuntimeWarning, stacklevel=2)
    state = DensityState(grid, gaussian_values(grid, mean, epsilon), time, "q")
    return normalize(state)


def _check_pair(a, b):
    if a.grid != b.grid:
        raise ContractViolation("densities must share a grid")
    require_normalized(a, "a")
    require_normalized(b, "b")


def quantile_function(q, n_levels=DEFAULT_LEVELS):
    """Quantiles at the midpoints of ``n_levels`` uniform probability cells."""
    F = cdf(q)
    F = np.maximum.accumulate(F)
    # break plateaus so the inverse interpolation is well defined
    F = F + PLATEAU_SLOPE * np.arange(F.size)
    levels = (np.arange(n_levels) + 0.5) / n_levels
    return QuantileFunction(levels, np.interp(levels * F[-1], F, q.grid.x))


def wasserstein(p, a, b, n_levels=DEFAULT_LEVELS):
    """``W_p`` distance between two normalized densities on the same grid.

    ``p = 1`` integrates ``|F_a - F_b|``; larger ``p`` uses the quantile
    representation ``(int_0^1 |Q_a - Q_b|^p du)^(1/p)``.
    """
    _check_pair(a, b)
    if p < 1:
        raise ContractViolation("Wasserstein order must be >= 1")
    if p == 1:
        return trapezoid(np.abs(cdf(a) - cdf(b)), a.grid)
    qa = quantile_function(a, n_levels).values
    qb = quantile_function(b, n_levels).values
    return float(np.mean(np.abs(qa - qb) ** p) ** (1.0 / p))


def w1_to_gaussian(q, epsilon):
    """W1 distance to the Gaussian with the same mean and variance eps^2."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        g = gaussian_ansatz(mean(q), epsilon, q.grid)
    return wasserstein(1, q, g)

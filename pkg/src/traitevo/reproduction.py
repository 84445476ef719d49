"""The infinitesimal-model reproduction operator.

For a probability density ``q`` the normalized operator is

    T[q](x) = int int G(x - (y + y')/2) q(y) q(y') dy dy',
    G(x) = exp(-x^2 / eps^2) / (eps sqrt(pi)),

i.e. offspring are Gaussian with variance ``eps^2 / 2`` around the parental
midpoint.  On a grid with trapezoid weights ``w`` the discrete double sum is

    T_k = sum_i sum_j (w q)_i (w q)_j G(x_k - (x_i + x_j)/2).

Midpoints of two grid nodes lie on the half-spacing grid, so grouping pairs by
``s = i + j`` gives ``T_k = sum_s h_s G((2k - s) dx/2)`` with ``h`` the
discrete self-convolution of ``w q``.  ``reproduce_fast`` evaluates that with
FFTs; ``reproduce_reference`` evaluates the nested sum directly.  Both compute
the same finite sum, which is why they agree to rounding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np
from scipy import fft as sp_fft

from .errors import ConfigurationError, ContractViolation, DegenerateStateError
from .grid import DensityState, Grid1D, require_normalized, trapezoid

SQRT_PI = np.sqrt(np.pi)

# Reference path drops kernel values beyond this many eps (exp(-64) ~ 1.6e-28).
REFERENCE_TRUNCATION = 8.0
# Mass closer than this many eps to the boundary triggers a leak warning.
LEAK_WIDTH = 4.0


class BoundaryLeakWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SegregationKernel:
    """Gaussian segregation kernel with parameter ``epsilon`` (variance eps^2/2)."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be positive")

    @property
    def variance(self):
        return 0.5 * self.epsilon ** 2

    def density(self, x):
        eps = self.epsilon
        return np.exp(-(np.asarray(x) / eps) ** 2) / (eps * SQRT_PI)

    def even_moment(self, l):
        """``E[xi^(2l)] = sigma_l eps^(2l)`` with ``sigma_l = (2l-1)!!/2^l``."""
        return float(gamma_moment_coefficient(l)) * self.epsilon ** (2 * l)


def gamma_moment_coefficient(l):
    """Exact ``sigma_l`` such that the 2l-th kernel moment is sigma_l eps^(2l)."""
    double_fact = 1
    for k in range(1, 2 * l, 2):
        double_fact *= k
    return Fraction(double_fact, 2 ** l)


@dataclass(frozen=True)
class MidpointDensity:
    """Density of ``(Y + Y')/2`` for i.i.d. ``Y, Y'`` on the half-spacing grid."""

    grid: Grid1D
    values: np.ndarray
    boundary_leak: bool = False

    @property
    def mass(self):
        return trapezoid(self.values, self.grid)

    @property
    def mean(self):
        return trapezoid(self.grid.x * self.values, self.grid)


def _check_leak(q, kernel):
    if kernel is None:
        return False
    x = q.grid.x
    width = LEAK_WIDTH * kernel.epsilon
    near = (x - q.grid.x_min < width) | (q.grid.x_max - x < width)
    leaked = trapezoid(np.where(near, q.values, 0.0), q.grid)
    if leaked > 1e-12:
        warnings.warn(
            f"density carries mass {leaked:.3g} within {LEAK_WIDTH:g} eps of the "
            "boundary; reproduction will leak mass", BoundaryLeakWarning,
            stacklevel=3)
        return True
    return False


def midpoint_density(q, kernel=None):
    """Law of the parental midpoint ``(Y+Y')/2`` for ``Y, Y' ~ q`` i.i.d.

    The result lives on the half-spacing grid over the same interval, which
    holds every midpoint of two grid nodes exactly, so no mass is clipped.
    Passing ``kernel`` enables the boundary-leak check.
    """
    require_normalized(q, "q")
    leak = _check_leak(q, kernel)
    wq = q.values * q.grid.weights
    h = np.convolve(wq, wq)
    half = q.grid.refined(2)
    return MidpointDensity(half, h / half.spacing, leak)


class FastReproducer:
    """FFT evaluation of the reproduction operator on a fixed grid.

    ``padding`` is the zero padding in units of the domain width; anything
    below one width lets the circular convolution wrap around.
    """

    def __init__(self, grid, kernel, padding=1.0):
        if padding < 1.0:
            raise ConfigurationError(
                f"FFT padding {padding} is below one domain width; the circular "
                "convolution would wrap around")
        self.grid = grid
        self.kernel = kernel
        self.padding = padding
        n_half = 2 * grid.n_nodes - 1
        self.fft_len = sp_fft.next_fast_len(int(np.ceil((1 + padding) * (n_half - 1))) + 1,
                                            real=True)
        self._kernel_hat = _kernel_spectrum(grid, kernel.epsilon, self.fft_len)

    def raw(self, q_values):
        """Unrenormalized ``T[q]`` on the grid for a normalized ``q``."""
        wq = np.asarray(q_values) * self.grid.weights
        wq_hat = sp_fft.rfft(wq, self.fft_len)
        conv = sp_fft.irfft(wq_hat * wq_hat * self._kernel_hat, self.fft_len)
        out = conv[0:2 * self.grid.n_nodes - 1:2]
        return np.maximum(out, 0.0)

    def __call__(self, q_values):
        out = self.raw(q_values)
        return out / trapezoid(out, self.grid)


@lru_cache(maxsize=64)
def _kernel_spectrum(grid, epsilon, fft_len):
    n_half = 2 * grid.n_nodes - 1
    offsets = np.arange(n_half) * (0.5 * grid.spacing)
    g = np.zeros(fft_len)
    vals = SegregationKernel(epsilon).density(offsets)
    g[:n_half] = vals
    g[fft_len - (n_half - 1):] = vals[:0:-1]
    spec = sp_fft.rfft(g)
    spec.flags.writeable = False
    return spec


@lru_cache(maxsize=16)
def _fast_reproducer(grid, epsilon, padding):
    return FastReproducer(grid, SegregationKernel(epsilon), padding)


def reproduce_fast(q, kernel, padding=1.0, renormalize=True):
    """``T[q]`` through the midpoint factorization and FFT convolution."""
    require_normalized(q, "q")
    op = _fast_reproducer(q.grid, kernel.epsilon, padding)
    if type(kernel) is not SegregationKernel:
        op = FastReproducer(q.grid, kernel, padding)
    out = op(q.values) if renormalize else op.raw(q.values)
    return DensityState(q.grid, out, q.time, "q" if renormalize else "n", q.dirichlet)


def reproduce_reference(q, kernel, renormalize=True, chunk=8):
    """``T[q]`` by direct nested trapezoid quadrature, O(N^3).

    Only meant for test-sized grids (N <= 256).  Kernel tails beyond
    ``REFERENCE_TRUNCATION * eps`` are dropped.
    """
    require_normalized(q, "q")
    grid = q.grid
    x = grid.x
    wq = q.values * grid.weights
    support = np.flatnonzero(wq)
    wq_s = wq[support]
    pair_weight = np.outer(wq_s, wq_s)
    mid = 0.5 * (x[support][:, None] + x[support][None, :])
    cutoff = REFERENCE_TRUNCATION * kernel.epsilon
    out = np.empty(grid.n_nodes)
    for start in range(0, grid.n_nodes, chunk):
        xs = x[start:start + chunk]
        d = xs[:, None, None] - mid[None, :, :]
        g = np.where(np.abs(d) <= cutoff, kernel.density(d), 0.0)
        out[start:start + chunk] = np.einsum("kij,ij->k", g, pair_weight)
    if renormalize:
        out = out / trapezoid(out, grid)
    return DensityState(grid, out, q.time, "q" if renormalize else "n", q.dirichlet)


def reproduce_unnormalized(n, kernel, method="fast", padding=1.0):
    """Unnormalized operator ``T[n] = rho * T[n / rho]`` with ``rho`` the mass of ``n``.

    The normalized operator is not renormalized here, so any mass that the
    kernel pushes past the domain edge is lost rather than redistributed.
    """
    rho = trapezoid(n.values, n.grid)
    if not np.isfinite(rho) or rho <= 0:
        raise DegenerateStateError(f"population has mass {rho!r}")
    q = DensityState(n.grid, n.values / rho, n.time, "q", n.dirichlet)
    if method == "fast":
        out = reproduce_fast(q, kernel, padding=padding, renormalize=False)
    elif method == "reference":
        out = reproduce_reference(q, kernel, renormalize=False)
    else:
        raise ContractViolation(f"unknown method {method!r}")
    return DensityState(n.grid, rho * out.values, n.time, "n", n.dirichlet)


def offspring_central_moment(central_moments, epsilon, k):
    """Predicted 2k-th central moment of ``T[q]`` from those of ``q``.

    ``central_moments[j]`` must hold the j-th central moment of ``q`` for
    ``j = 0..2k`` (with ``central_moments[0] = 1`` and ``[1] = 0``).  Sum of
    ``C(2k,2l) sigma_{k-l} eps^(2(k-l)) 4^-l sum_j C(2l,j) M_{2l-j} M_j``.
    """
    M = central_moments
    total = 0.0
    for l in range(k + 1):
        inner = sum(comb(2 * l, j) * M[2 * l - j] * M[j] for j in range(2 * l + 1))
        total += (comb(2 * k, 2 * l) * float(gamma_moment_coefficient(k - l))
                  * epsilon ** (2 * (k - l)) * inner / 4 ** l)
    return total

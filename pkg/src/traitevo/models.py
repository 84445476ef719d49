"""Scenario definitions: birth rates, mortality families, optima, predator-prey ecology."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation
from .grid import require_normalized, trapezoid

FD_STEP = 1e-4


def central_difference(fn, x, order=1, step=FD_STEP):
    x = np.asarray(x, dtype=float)
    if order == 1:
        return (fn(x + step) - fn(x - step)) / (2 * step)
    if order == 2:
        return (fn(x + step) - 2 * fn(x) + fn(x - step)) / step ** 2
    if order == 3:
        return (fn(x + 2 * step) - 2 * fn(x + step) + 2 * fn(x - step)
                - fn(x - 2 * step)) / (2 * step ** 3)
    raise ContractViolation(f"unsupported derivative order {order}")


@dataclass(frozen=True)
class TraitFunction:
    """Scalar function of the trait with optional analytic derivatives.

    Missing derivatives fall back to central differences.
    """

    name: str
    value: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    d3: Optional[Callable] = None

    def __call__(self, x):
        return self.value(x)

    def derivative(self, x, order=1):
        analytic = self.d1 if order == 1 else self.d2 if order == 2 else self.d3 if order == 3 else None
        if analytic is not None:
            return analytic(x)
        return central_difference(self.value, x, order)


def floored_square_contact(floor=0.1):
    """Contact rate ``f(x) = max(x, floor)^2``."""
    return TraitFunction(
        f"max(x,{floor:g})^2",
        lambda x: np.maximum(x, floor) ** 2,
        lambda x: 2.0 * np.maximum(x, floor) * np.greater(x, floor),
        lambda x: 2.0 * np.greater(x, floor),
        lambda x: 0.0 * np.asarray(x, dtype=float),
    )


def capped_linear_relief(kappa1=1.0, slope=0.4):
    """Competition relief ``delta(x) = slope * min(kappa1, max(x, 0))``."""
    def d1(x):
        return slope * ((np.greater(x, 0.0) & np.less(x, kappa1)) + 0.0)

    zero = lambda x: 0.0 * np.asarray(x, dtype=float)  # noqa: E731
    return TraitFunction(f"{slope:g}*min({kappa1:g},max(x,0))",
                         lambda x: slope * np.minimum(kappa1, np.maximum(x, 0.0)),
                         d1, zero, zero)


def polynomial(coeffs, name=None):
    """``sum_k coeffs[k] x^k`` with exact derivatives."""
    p = np.polynomial.Polynomial(coeffs)
    d = [p.deriv(k) for k in (1, 2, 3)]
    return TraitFunction(name or f"poly{tuple(coeffs)}", p, d[0], d[1], d[2])


def zero_function():
    return polynomial([0.0], "0")


@dataclass(frozen=True)
class OptimumTrajectory:
    """Location ``X(t)`` of the mortality minimum; ``X(0) = 0`` for every kind."""

    kind: str = "constant"
    speed: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0

    KINDS = ("constant", "linear_ramp", "sinusoidal")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ContractViolation(f"unknown optimum kind {self.kind!r}")
        if self.kind == "sinusoidal" and not self.period > 0:
            raise ContractViolation("sinusoidal optimum needs a positive period")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear_ramp":
            return self.speed * t
        if self.kind == "sinusoidal":
            return self.amplitude * np.sin(2 * np.pi * t / self.period)
        return np.zeros_like(t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear_ramp":
            return np.full_like(t, self.speed)
        if self.kind == "sinusoidal":
            w = 2 * np.pi / self.period
            return self.amplitude * w * np.cos(w * t)
        return np.zeros_like(t)

    @property
    def max_speed(self):
        if self.kind == "linear_ramp":
            return abs(self.speed)
        if self.kind == "sinusoidal":
            return abs(self.amplitude) * 2 * np.pi / self.period
        return 0.0

    def drift_integral(self, eta, epsilon, horizon, n=4001):
        """``sup_t int_0^t |X'(s)| exp(-eta (t-s)/eps^2) ds`` on ``[0, horizon]``.

        Dividing by ``epsilon`` gives the smallest admissible ``L_X``.
        """
        t = np.linspace(0.0, horizon, n)
        dt = t[1] - t[0]
        speed = np.abs(self.derivative(t))
        decay = np.exp(-eta * dt / epsilon ** 2)
        acc, best = 0.0, 0.0
        # exact for piecewise-constant |X'| on each cell
        gain = (1 - decay) * epsilon ** 2 / eta
        for k in range(1, n):
            acc = acc * decay + 0.5 * (speed[k] + speed[k - 1]) * gain
            best = max(best, acc)
        return best


@dataclass(frozen=True)
class QuadraticMortality:
    """``m(y, t) = (A/2) (y - c)^2`` in the coordinate shifted by the optimum.

    ``center`` is 0 for admissible scenarios; a nonzero value only serves the
    closed-form ODE checks and fails the audit.
    """

    curvature: float = 1.0
    center: float = 0.0
    growth_exponent: int = 2

    def __call__(self, y, t=0.0):
        return 0.5 * self.curvature * (np.asarray(y, dtype=float) - self.center) ** 2

    def d1(self, y, t=0.0):
        return self.curvature * (np.asarray(y, dtype=float) - self.center)

    def d2(self, y, t=0.0):
        return np.full_like(np.asarray(y, dtype=float), self.curvature)

    def d3(self, y, t=0.0):
        return np.zeros_like(np.asarray(y, dtype=float))


@dataclass(frozen=True)
class BirthRate:
    """``r(t) = base + amplitude sin(2 pi t / period)``."""

    base: float = 1.0
    amplitude: float = 0.0
    period: float = 1.0

    def __call__(self, t):
        if self.amplitude == 0.0:
            return self.base
        return self.base + self.amplitude * np.sin(2 * np.pi * np.asarray(t) / self.period)

    @property
    def lower_bound(self):
        return self.base - abs(self.amplitude)


@dataclass(frozen=True)
class SingleSpeciesSpec:
    epsilon: float
    birth_rate: BirthRate = field(default_factory=BirthRate)
    mortality: QuadraticMortality = field(default_factory=QuadraticMortality)
    optimum: OptimumTrajectory = field(default_factory=OptimumTrajectory)
    kappa: float = 1.0
    audit_window: float = 0.5
    lag_bound: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be positive")
        if not self.kappa > 0:
            raise ContractViolation("kappa must be positive")

    def limit(self):
        """The limiting (eps -> 0) problem; the built-in families do not depend on eps."""
        return self


HOLLING_REDUCED = "holling_reduced"
MASS_ACTION = "mass_action"
MORTALITY_FAMILIES = (HOLLING_REDUCED, MASS_ACTION)


@dataclass(frozen=True)
class PredatorPreySpec:
    epsilon: float
    contact: TraitFunction = field(default_factory=floored_square_contact)
    relief: TraitFunction = field(default_factory=capped_linear_relief)
    r1: float = 1.0
    h: float = 0.0
    kappa1: float = 1.0
    gamma: float = 1.0
    kappa2: float = 1.0
    tau: float = 0.0
    mortality_family: str = MASS_ACTION
    g_exponent: int = 1
    search_band: tuple = (0.1, 1.5)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be positive")
        if self.mortality_family not in MORTALITY_FAMILIES:
            raise ContractViolation(f"unknown mortality family {self.mortality_family!r}")
        if self.tau < 0:
            raise ContractViolation("tau must be nonnegative")
        if self.g_exponent not in (1, 2):
            raise ContractViolation("g_exponent must be 1 or 2")
        if not self.search_band[1] > self.search_band[0]:
            raise ContractViolation("search_band must be an increasing pair")

    @property
    def coupled(self):
        return self.tau > 0

    @property
    def contact_scale(self):
        return self.gamma / self.kappa2


def eval_mortality_single(spec, x, t):
    """Mortality ``m(x - X(t), t)`` of the single-species model."""
    return spec.mortality(np.asarray(x, dtype=float) - spec.optimum.value(t), t)


def mortality_single_gradient(spec, x, t, order=1):
    y = np.asarray(x, dtype=float) - spec.optimum.value(t)
    return {1: spec.mortality.d1, 2: spec.mortality.d2, 3: spec.mortality.d3}[order](y, t)


def holling_F(spec, x, I, C):
    """``F(x, I, C) = f(x) C / (1 + h C I)^2``."""
    return spec.contact(x) * C / (1.0 + spec.h * C * I) ** 2


def eval_mortality_prey(spec, x, rho1, fbar):
    """Trait-dependent part of the prey mortality.

    ``holling_reduced``: ``(g/k2 F(x, rho1, fbar) - delta(x)) rho1``.
    ``mass_action``: ``rho1 fbar f(x) - delta(x)``.
    The uniform competition ``kappa1 rho1`` is added separately by the stepper.
    """
    x = np.asarray(x, dtype=float)
    if spec.mortality_family == MASS_ACTION:
        return rho1 * fbar * spec.contact(x) - spec.relief(x)
    return (spec.contact_scale * holling_F(spec, x, rho1, fbar) - spec.relief(x)) * rho1


def prey_mortality_derivative(spec, x, rho1, fbar, order=1):
    """x-derivative of ``eval_mortality_prey`` with ``rho1`` and ``fbar`` frozen."""
    df = spec.contact.derivative(x, order)
    dd = spec.relief.derivative(x, order)
    if spec.mortality_family == MASS_ACTION:
        return rho1 * fbar * df - dd
    scale = spec.contact_scale * fbar / (1.0 + spec.h * fbar * rho1) ** 2
    return (scale * df - dd) * rho1


def coupled_prey_mortality(spec, x, rho1, rho2, fbar):
    """Trait-dependent prey mortality of the full predator-prey system (no ``kappa1 rho1``)."""
    x = np.asarray(x, dtype=float)
    return (spec.contact(x) * rho2 / (1.0 + spec.h * fbar * rho1)
            - spec.relief(x) * rho1)


def predator_growth(spec, rho1, rho2, fbar):
    """Right side of ``tau d rho2/dt``."""
    intake = spec.gamma * fbar * rho1 / (1.0 + spec.h * fbar * rho1)
    return (intake - spec.kappa2 * rho2) * rho2


def quasi_steady_predator(spec, rho1, fbar):
    return spec.gamma * fbar * rho1 / (spec.kappa2 * (1.0 + spec.h * fbar * rho1))


def averaged(q, fn):
    """``int fn(y) q(y) dy`` for a normalized density."""
    require_normalized(q, "q")
    return trapezoid(fn(q.grid.x) * q.values, q.grid)


def averaged_contact(q, spec):
    return averaged(q, spec.contact)


def averaged_relief(q, spec):
    return averaged(q, spec.relief)

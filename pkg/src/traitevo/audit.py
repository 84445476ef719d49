"""Runtime checks of the structural hypotheses a scenario must satisfy.

Single species: H0-H4 and H7.  Predator-prey: A0-A2 and the dissipation
rate of A5.  Every check reports a margin (positive when it passes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, AuditFailure, NumericalError
from .models import PredatorPreySpec, SingleSpeciesSpec, eval_mortality_prey
from .theory import discover_band, find_fixed_point, growth_G_dI


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def add(self, name, margin, detail="", passed=None):
        ok = bool(margin > 0) if passed is None else bool(passed)
        self.checks.append(HypothesisCheck(name, ok, float(margin), detail))

    def raise_if_failed(self):
        if not self.passed:
            names = ", ".join(c.name for c in self.failures)
            raise AuditFailure(f"hypothesis audit failed: {names}", self.checks)

    def as_dict(self):
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "margin": c.margin,
                        "detail": c.detail} for c in self.checks],
            "values": {k: float(v) for k, v in self.values.items()},
        }


def _sample_times(horizon, n=65):
    return np.linspace(0.0, max(horizon, 1e-12), n)


def audit_single(spec, grid, horizon, k0=2):
    """Check H0-H4 and H7 on the grid over ``[0, horizon]``.

    Mortality is examined in the coordinate shifted by the optimum, on the
    grid's own interval ``(-L, L)``.
    """
    rep = AuditReport()
    y = grid.x
    dx = grid.spacing
    times = _sample_times(horizon)
    mort = spec.mortality
    m = np.array([mort(y, t) for t in times])

    inf_m = m.min(axis=1)
    # the infimum must vanish up to the value of m one grid cell from its minimum
    slack = 0.5 * np.max(np.abs(mort.d2(y, 0.0))) * dx ** 2 + 1e-14
    rep.add("H0", min(m.min() + 1e-15, slack - np.max(np.abs(inf_m))),
            f"min m = {m.min():.3g}, max |inf_x m| = {np.max(np.abs(inf_m)):.3g}")

    grad0 = max(abs(float(mort.d1(0.0, t))) for t in times)
    second = np.diff(m, 2, axis=1) / dx ** 2
    a0 = float(second.min())
    rep.add("H1", a0 if grad0 <= 1e-12 else -grad0,
            f"|dm/dx(0)| = {grad0:.3g}, min second difference = {a0:.6g}")
    rep.values["A0"] = a0

    r_min = min(float(np.min(spec.birth_rate(times))), spec.birth_rate.lower_bound)
    m_max = float(m.max())
    rep.add("H2", r_min - m_max, f"min r = {r_min:.6g}, max m = {m_max:.6g}")
    rep.values["r_L"] = r_min

    p = mort.growth_exponent
    third = np.diff(m, 3, axis=1) / dx ** 3
    centers = 0.5 * (y[1:-2] + y[2:-1])
    a_m = float(np.max(np.abs(third) / (1.0 + np.abs(centers) ** (p - 1))))
    rep.add("H3", 1.0, f"A_m = {a_m:.3g} with p = {p}", passed=np.isfinite(a_m) and p > 1)
    rep.values["A_m"] = a_m

    eta = r_min * (1.0 - 4.0 ** (-k0)) - m_max
    rep.add("H4", eta, f"eta = {eta:.6g} with k0 = {k0}")
    rep.values["eta"] = eta

    x0 = float(spec.optimum.value(0.0))
    if eta > 0:
        drift = spec.optimum.drift_integral(eta, spec.epsilon, max(horizon, 1e-9))
        lx = drift / spec.epsilon
    else:
        lx = np.inf
    rep.add("H7", spec.lag_bound - lx if abs(x0) <= 1e-12 else -abs(x0),
            f"X(0) = {x0:.3g}, required L_X = {lx:.6g} (bound {spec.lag_bound:g})")
    rep.values["L_X"] = lx
    return rep


def audit_prey(spec, grid, k0=2):
    """Check A0-A2 and the dissipation rate ``eta`` for a predator-prey scenario."""
    rep = AuditReport()
    x = grid.x
    slack = spec.kappa1 - spec.relief(x)
    rep.add("A0", float(slack.min()), f"min kappa1 - delta = {slack.min():.6g}")
    rep.values["kappa_star"] = float(slack.min())
    try:
        fp = find_fixed_point(spec)
        band = discover_band(spec, fp)
    except (AssumptionViolation, NumericalError) as exc:
        rep.add("A1", -1.0, str(exc))
        rep.add("A2", -1.0, "no fixed point")
        rep.add("A5", -1.0, "no fixed point")
        return rep
    dG = float(growth_G_dI(spec, fp.x, fp.population))
    rep.add("A1", min(band.half_width, band.g_star),
            f"x* = {fp.x:.10g}, I(x*) = {fp.population:.10g}, L1 = {band.half_width:.4g}, "
            f"G* = {band.g_star:.4g}, dG/dI(x*) = {dG:.4g}")
    rep.add("A2", band.a0, f"curvature at x* = {fp.curvature:.6g}, min over band = {band.a0:.6g}")
    rep.values.update(x_star=fp.x, I_star=fp.population, L1=band.half_width,
                      I_L=band.i_low, I_U=band.i_high, G_star=band.g_star, A0=band.a0)

    inside = x[band.contains(x)]
    C = float(spec.contact(fp.x))
    m = eval_mortality_prey(spec, inside, fp.population, C)
    m_ref = float(eval_mortality_prey(spec, fp.x, fp.population, C))
    excess = float(np.max(m - m_ref)) if inside.size else 0.0
    eta = spec.r1 * (1.0 - 4.0 ** (-k0)) - excess
    rep.add("A5", eta, f"eta = {eta:.6g} with k0 = {k0}, max excess mortality {excess:.4g}")
    rep.values["eta"] = eta
    return rep


def audit(spec, grid, horizon=16.0, k0=2):
    if isinstance(spec, SingleSpeciesSpec):
        return audit_single(spec, grid, horizon, k0)
    if isinstance(spec, PredatorPreySpec):
        return audit_prey(spec, grid, k0)
    raise TypeError(f"unsupported spec type {type(spec).__name__}")

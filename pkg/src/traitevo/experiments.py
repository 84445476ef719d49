"""Run pipeline: simulation, theory overlay and the gap diagnostics derived from both."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audit import audit
from .grid import trapezoid
from .models import (PredatorPreySpec, SingleSpeciesSpec, coupled_prey_mortality,
                     eval_mortality_prey, eval_mortality_single)
from .stepper import run_to_horizon
from .theory import integrate_canonical

GAP_FIELDS = ("time", "m1_gap", "rho_gap", "w1", "m2c_gap")
SETTLE_TIME = 1.0


@dataclass
class Gaps:
    """Simulation-vs-theory differences at every record time."""

    time: np.ndarray
    m1_gap: np.ndarray
    rho_gap: np.ndarray
    w1: np.ndarray
    m2c_gap: np.ndarray

    def terminal(self):
        return {k: float(getattr(self, k)[-1]) for k in GAP_FIELDS[1:]}

    def sup_after(self, t0=SETTLE_TIME):
        keep = self.time >= t0
        if not keep.any():
            keep = np.ones_like(self.time, dtype=bool)
        return {k: float(np.max(getattr(self, k)[keep])) for k in GAP_FIELDS[1:]}


@dataclass
class RunResult:
    config: object
    built: object
    run: object
    theory: object
    gaps: Gaps | None
    summary: dict = field(default_factory=dict)

    @property
    def status(self):
        return self.run.status


def compute_theory(built, horizon, check_band=True):
    """Canonical-equation overlay started from the initial mean and its eps -> 0 limit."""
    return integrate_canonical(built.spec, built.initial_mean, horizon, dt=built.theory_dt,
                               z0_limit=built.limit_mean, check_band=check_band)


def compute_gaps(run, theory):
    recs = run.records
    t = np.array([r.time for r in recs])
    th = theory.at(t)
    m1 = np.array([r.m1 for r in recs])
    rho = np.array([r.rho for r in recs])
    ref = th.i_of_z if isinstance(run.spec, PredatorPreySpec) else th.rho_limit
    return Gaps(t, np.abs(m1 - th.zbar_eps), np.abs(rho - ref),
                np.array([r.w1_to_gaussian for r in recs]),
                np.abs(np.array([r.m2c for r in recs]) - run.epsilon ** 2))


def mortality_profiles(spec, grid, snap):
    """Mortality seen by the population at a snapshot and its concentrated-limit counterpart.

    The counterpart freezes the population size and replaces the averaged
    contact by its value at the mean trait.
    """
    x = grid.x
    if isinstance(spec, SingleSpeciesSpec):
        m = eval_mortality_single(spec, x, snap.time)
        return m, m
    fbar = trapezoid(spec.contact(x) * snap.q, grid)
    c = float(spec.contact(trapezoid(x * snap.q, grid)))
    if spec.coupled:
        m = coupled_prey_mortality(spec, x, snap.rho, snap.rho2, fbar)
        m_lim = coupled_prey_mortality(spec, x, snap.rho, snap.rho2 * c / fbar, c)
    else:
        m = eval_mortality_prey(spec, x, snap.rho, fbar)
        m_lim = eval_mortality_prey(spec, x, snap.rho, c)
    return m + spec.kappa1 * snap.rho, m_lim + spec.kappa1 * snap.rho


def execute(config, force=False, with_theory=True):
    """Build and run one scenario; numerical errors propagate to the caller."""
    built = config.build()
    report = audit(built.spec, built.grid, built.scheme.horizon, built.scheme.k0)
    run = run_to_horizon(built.spec, built.scheme, built.grid, built.initial, built.rho0,
                         built.rho2_0, force=force, audit_report=report)
    theory = gaps = None
    summary = {"status": run.status, "epsilon": built.spec.epsilon}
    if with_theory:
        check = not force or report.passed
        theory = compute_theory(built, run.metadata["horizon"], check_band=check)
        gaps = compute_gaps(run, theory)
        summary.update({f"terminal_{k}": v for k, v in gaps.terminal().items()})
        summary.update({f"sup_{k}": v for k, v in gaps.sup_after().items()})
    return RunResult(config, built, run, theory, gaps, summary)


def fit_slope(epsilons, values):
    """Least-squares slope of ``log(values)`` against ``log(epsilons)``; nan if undetermined."""
    e = np.asarray(epsilons, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v) & (v > 0) & np.isfinite(e) & (e > 0)
    if ok.sum() < 2 or np.unique(e[ok]).size < 2:
        return float("nan")
    return float(np.polyfit(np.log(e[ok]), np.log(v[ok]), 1)[0])

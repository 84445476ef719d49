"""Explicit forward-in-time scheme for the single-species and predator-prey models.

Time bookkeeping: ``run.time`` is always the slow time ``t`` of the
population equations (the one multiplied by ``eps^2`` on the left).  With
``clock="slow"`` a step of size ``dt`` advances ``t`` by ``dt`` and the
right-hand side is multiplied by ``dt / eps^2``; with ``clock="fast"`` the
right-hand side is multiplied by ``dt`` and ``t`` advances by ``dt eps^2``.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .audit import audit
from .errors import (ConfigurationError, ExtinctionEvent, NumericalBlowUpError,
                     StabilityError)
from .grid import DensityState, normalize, trapezoid
from .metrics import MomentRecord, mean, w1_to_gaussian
from .models import (PredatorPreySpec, SingleSpeciesSpec, coupled_prey_mortality,
                     eval_mortality_prey, eval_mortality_single, predator_growth)
from .reproduction import _fast_reproducer

CLOCKS = ("slow", "fast")
MODES = ("q", "n")


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters; ``None`` fields are resolved per scenario."""

    dt: float | None = None
    n_steps: int | None = None
    horizon: float = 16.0
    clock: str = "slow"
    mode: str = "q"
    renormalize_each_step: bool = True
    boundary: str = "dirichlet"
    record_stride: int = 1
    safety_factor: float = 1.0
    allow_large_dt: bool = False
    negativity_floor: float = 1e-12
    padding: float = 1.0
    k0: int = 2
    snapshot_times: tuple = ()
    substep_fraction: float = 0.1

    def __post_init__(self):
        if self.clock not in CLOCKS:
            raise ConfigurationError(f"unknown clock {self.clock!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.boundary != "dirichlet":
            raise ConfigurationError("only Dirichlet boundaries are supported")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1")
        if self.horizon < 0:
            raise ConfigurationError("horizon must be nonnegative")
        if self.safety_factor > 1 and not self.allow_large_dt:
            raise ConfigurationError("safety_factor above 1 needs allow_large_dt")

    def resolve(self, epsilon):
        """Fill in ``dt`` and ``n_steps`` and enforce the step-size guard."""
        # the guard caps the per-step coefficient at 1/2, in the clock's own units
        scale = epsilon ** 2 if self.clock == "slow" else 1.0
        limit = 0.5 * scale * self.safety_factor
        dt = limit if self.dt is None else float(self.dt)
        if dt <= 0:
            raise ConfigurationError("dt must be positive")
        if dt > limit * (1 + 1e-12) and not self.allow_large_dt:
            raise ConfigurationError(
                f"dt={dt:g} exceeds the stability guard {limit:g} ({self.clock} clock)")
        slow_dt = dt if self.clock == "slow" else dt * epsilon ** 2
        n = self.n_steps
        if n is None:
            n = int(np.ceil(self.horizon / slow_dt - 1e-9))
        return replace(self, dt=dt, n_steps=int(n))

    def coefficient(self, epsilon):
        """Multiplier of the right-hand side per step."""
        return self.dt / epsilon ** 2 if self.clock == "slow" else self.dt

    def slow_step(self, epsilon):
        return self.dt if self.clock == "slow" else self.dt * epsilon ** 2


@dataclass(frozen=True)
class Snapshot:
    time: float
    q: np.ndarray
    rho: float
    rho2: float


@dataclass
class SimulationRun:
    """Mutable state of one simulation plus its diagnostics."""

    spec: object
    scheme: SchemeConfig
    state: DensityState
    rho: float
    rho2: float = float("nan")
    step_index: int = 0
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    status: str = "ok"
    last_leak: float = 0.0
    last_defect: float = 0.0

    @property
    def grid(self):
        return self.state.grid

    @property
    def time(self):
        return self.state.time

    @property
    def epsilon(self):
        return self.spec.epsilon

    def q(self):
        return self.state if self.state.mode == "q" else normalize(self.state)


def _operator(run):
    return _fast_reproducer(run.grid, run.epsilon, run.scheme.padding)


def _accept(run, values, step):
    """Finite check, negativity floor and Dirichlet zeros for an updated grid function."""
    if not np.all(np.isfinite(values)):
        raise NumericalBlowUpError(f"non-finite density at step {step}", step=step)
    low = float(values.min())
    if low < 0:
        scale = float(values.max())
        if -low > run.scheme.negativity_floor * scale:
            raise StabilityError(
                f"negative density {low:.3g} (max {scale:.3g}) at step {step}", step=step)
        clipped = -trapezoid(np.minimum(values, 0.0), run.grid)
        run.metadata["clipped_mass"] = run.metadata.get("clipped_mass", 0.0) + clipped
        run.metadata["clipped_steps"] = run.metadata.get("clipped_steps", 0) + 1
        values = np.maximum(values, 0.0)
    values[0] = values[-1] = 0.0
    return values


def _check_population(run, value, name, t):
    if not np.isfinite(value):
        raise NumericalBlowUpError(f"{name} became non-finite at t={t:.6g}", step=run.step_index)
    if value <= 0:
        raise ExtinctionEvent(f"{name} reached {value:.3g} at t={t:.6g}", time=t)


def _advance_q(run, mortality, birth, coef):
    """Shared q-mode update ``q + c (r (T - q) - (m - mbar) q)`` with renormalization."""
    q = run.state
    op = _operator(run)
    raw = op.raw(q.values)
    raw_mass = trapezoid(raw, run.grid)
    T = raw / raw_mass
    mbar = trapezoid(mortality * q.values, run.grid)
    new = q.values + coef * (birth * (T - q.values) - (mortality - mbar) * q.values)
    new = _accept(run, new, run.step_index)
    mass = trapezoid(new, run.grid)
    run.last_leak = 1.0 - raw_mass
    run.last_defect = abs(mass - 1.0)
    if mass <= 0:
        raise NumericalBlowUpError(f"density lost all mass at step {run.step_index}",
                                   step=run.step_index)
    if run.scheme.renormalize_each_step:
        new = new / mass
    return new, mbar


def step_single(run):
    """One explicit step of the single-species model (``q`` or ``n`` mode)."""
    spec, scheme = run.spec, run.scheme
    eps = spec.epsilon
    coef = scheme.coefficient(eps)
    t = run.time
    t_new = (run.step_index + 1) * scheme.slow_step(eps)
    x = run.grid.x
    m = eval_mortality_single(spec, x, t)
    r = float(spec.birth_rate(t))
    if run.state.mode == "q":
        new, mbar = _advance_q(run, m, r, coef)
        rho = run.rho + coef * (r - mbar - spec.kappa * run.rho) * run.rho
        _check_population(run, rho, "population", t_new)
        run.state = DensityState(run.grid, new, t_new, "q", True)
        run.rho = float(rho)
    else:
        n = run.state.values
        rho = trapezoid(n, run.grid)
        op = _operator(run)
        raw = rho * op.raw(n / rho)
        new = n + coef * (r * raw - (m + spec.kappa * rho) * n)
        new = _accept(run, new, run.step_index)
        run.last_leak = rho - trapezoid(raw, run.grid)
        run.last_defect = 0.0
        rho_new = trapezoid(new, run.grid)
        _check_population(run, rho_new, "population", t_new)
        run.state = DensityState(run.grid, new, t_new, "n", True)
        run.rho = float(rho_new)
    run.step_index += 1
    return run


def step_prey_predator(run):
    """One explicit step of the prey equation; coupled mode also advances the predator."""
    spec, scheme = run.spec, run.scheme
    eps = spec.epsilon
    coef = scheme.coefficient(eps)
    slow = scheme.slow_step(eps)
    t_new = (run.step_index + 1) * slow
    x = run.grid.x
    q = run.state
    fbar = trapezoid(spec.contact(x) * q.values, run.grid)
    rho1 = run.rho
    if spec.coupled:
        m = coupled_prey_mortality(spec, x, rho1, run.rho2, fbar)
    else:
        m = eval_mortality_prey(spec, x, rho1, fbar)
    new, mbar = _advance_q(run, m, spec.r1, coef)
    rho1_new = rho1 + coef * (spec.r1 - mbar - spec.kappa1 * rho1) * rho1
    _check_population(run, rho1_new, "prey population", t_new)
    if spec.coupled:
        n_sub = max(1, int(np.ceil(slow / (scheme.substep_fraction * spec.tau))))
        h = slow / n_sub
        rho2 = run.rho2
        for _ in range(n_sub):
            rho2 = rho2 + (h / spec.tau) * predator_growth(spec, rho1, rho2, fbar)
            _check_population(run, rho2, "predator population", t_new)
        run.rho2 = float(rho2)
    run.state = DensityState(run.grid, new, t_new, "q", True)
    run.rho = float(rho1_new)
    run.step_index += 1
    return run


def record(run):
    """Append a MomentRecord for the current state."""
    spec = run.spec
    q = run.q()
    g = run.grid
    m1 = mean(q)
    d = g.x - m1
    m2 = trapezoid(d * d * q.values, g)
    m2k = trapezoid(d ** (2 * run.scheme.k0) * q.values, g)
    m3 = trapezoid(np.abs(d) ** 3 * q.values, g)
    if isinstance(spec, PredatorPreySpec):
        fbar = trapezoid(spec.contact(g.x) * q.values, g)
        dbar = trapezoid(spec.relief(g.x) * q.values, g)
    else:
        fbar = dbar = float("nan")
    rec = MomentRecord(
        time=float(run.time), rho=float(run.rho), m1=float(m1), m2c=float(m2),
        m2k0c=float(m2k), m_abs_3=float(m3), fbar=float(fbar), dbar=float(dbar),
        w1_to_gaussian=float(w1_to_gaussian(q, spec.epsilon)),
        leaked_mass=float(run.last_leak), rho2=float(run.rho2),
        mass_defect=float(run.last_defect))
    if run.records and rec.time <= run.records[-1].time:
        raise StabilityError("record times must increase", step=run.step_index)
    run.records.append(rec)
    return rec


def _snapshot_due(run, pending):
    half = 0.5 * run.scheme.slow_step(run.epsilon)
    return [ts for ts in pending if run.time >= ts - half]


def run_to_horizon(spec, scheme, grid, initial, rho0, rho2_0=None, force=False,
                   audit_report=None):
    """Run the scheme for ``scheme.n_steps`` steps from ``initial``.

    ``initial`` is a ``q`` density (scaled by ``rho0`` in ``n`` mode).  The
    hypothesis audit must pass unless ``force`` is set.  An extinction event
    stops the run early with ``status == "extinct"``; other numerical errors
    propagate.
    """
    started = _time.perf_counter()
    if isinstance(spec, PredatorPreySpec) and scheme.mode != "q":
        raise ConfigurationError("predator-prey runs use q mode")
    scheme = scheme.resolve(spec.epsilon)
    report = audit_report if audit_report is not None else audit(
        spec, grid, scheme.horizon, scheme.k0)
    if not report.passed and not force:
        report.raise_if_failed()
    if initial.grid != grid:
        raise ConfigurationError("initial state lives on a different grid")
    q0 = normalize(DensityState(grid, initial.values, 0.0, "q", True))
    if scheme.mode == "n":
        state = DensityState(grid, rho0 * q0.values, 0.0, "n", True)
        rho = trapezoid(state.values, grid)
    else:
        state, rho = q0, float(rho0)
    coupled = isinstance(spec, PredatorPreySpec) and spec.coupled
    if coupled and not (rho2_0 is not None and rho2_0 > 0):
        raise ConfigurationError("coupled mode needs a positive initial predator population")
    run = SimulationRun(spec, scheme, state, rho, float(rho2_0) if coupled else float("nan"))
    run.metadata.update(audit=report.as_dict(), forced=bool(force and not report.passed),
                        clipped_mass=0.0, clipped_steps=0)
    step = step_prey_predator if isinstance(spec, PredatorPreySpec) else step_single
    pending = sorted(float(t) for t in scheme.snapshot_times)
    leak_total = 0.0
    max_lag = 0.0

    def take_snapshots():
        nonlocal pending
        for ts in _snapshot_due(run, pending):
            run.snapshots[ts] = Snapshot(run.time, run.q().values.copy(), run.rho, run.rho2)
        pending = [ts for ts in pending if ts not in run.snapshots]

    def observe():
        nonlocal max_lag
        take_snapshots()
        if isinstance(spec, SingleSpeciesSpec):
            lag = abs(run.records[-1].m1 - float(spec.optimum.value(run.time)))
            max_lag = max(max_lag, lag)

    record(run)
    observe()
    try:
        for k in range(scheme.n_steps):
            step(run)
            leak_total += run.last_leak
            if (k + 1) % scheme.record_stride == 0 or k + 1 == scheme.n_steps:
                record(run)
                observe()
            elif pending:
                take_snapshots()
    except ExtinctionEvent as exc:
        run.status = "extinct"
        run.metadata["extinction_time"] = exc.time
        run.metadata["extinction_message"] = str(exc)
    run.metadata.update(
        steps=run.step_index, dt=scheme.dt, n_steps=scheme.n_steps, clock=scheme.clock,
        mode=scheme.mode, horizon=scheme.horizon, final_time=run.time,
        leaked_mass_total=leak_total, wall_time=_time.perf_counter() - started,
        status=run.status)
    if isinstance(spec, SingleSpeciesSpec):
        run.metadata["max_lag"] = max_lag
    return run

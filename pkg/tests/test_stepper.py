import numpy as np
import pytest

from traitevo.errors import AuditFailure, ConfigurationError, StabilityError
from traitevo.grid import Grid1D, gaussian_density, indicator_density, trapezoid
from traitevo.models import (BirthRate, OptimumTrajectory, PredatorPreySpec, QuadraticMortality,
                             SingleSpeciesSpec, quasi_steady_predator)
from traitevo.stepper import SchemeConfig, Snapshot, run_to_horizon
from traitevo.theory import solve_equilibrium


def single(eps=0.2, **kw):
    return SingleSpeciesSpec(eps, mortality=QuadraticMortality(0.4), kappa=2.0, **kw)


def test_step_guard_and_resolution():
    s = SchemeConfig(horizon=1.0).resolve(0.2)
    assert s.dt == pytest.approx(0.02) and s.n_steps == 50
    with pytest.raises(ConfigurationError):
        SchemeConfig(dt=0.05).resolve(0.2)
    assert SchemeConfig(dt=0.05, allow_large_dt=True).resolve(0.2).dt == 0.05
    fast = SchemeConfig(clock="fast", horizon=1.0).resolve(0.2)
    assert fast.dt == 0.5 and fast.coefficient(0.2) == 0.5
    assert fast.n_steps == 50
    assert s.coefficient(0.2) == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        SchemeConfig(clock="fast", dt=0.6).resolve(0.2)


@pytest.mark.parametrize("kw", [dict(clock="weird"), dict(mode="m"), dict(record_stride=0),
                                dict(safety_factor=2.0), dict(boundary="periodic")])
def test_scheme_validation(kw):
    with pytest.raises(ConfigurationError):
        SchemeConfig(**kw)


def test_single_species_q_and_n_modes_agree(grid):
    spec = single()
    q0 = gaussian_density(grid, 0.1, 0.2)
    runs = [run_to_horizon(spec, SchemeConfig(horizon=2.0, mode=m), grid, q0, 0.45)
            for m in ("q", "n")]
    a, b = (r.records[-1] for r in runs)
    assert a.time == b.time == pytest.approx(2.0)
    # the two modes split the update differently; they agree to O(dt)
    assert a.m1 == pytest.approx(b.m1, abs=2e-4)
    assert a.rho == pytest.approx(b.rho, rel=1e-3)


def test_slow_and_fast_clocks_agree(grid):
    spec = single()
    q0 = gaussian_density(grid, 0.1, 0.2)
    slow = run_to_horizon(spec, SchemeConfig(horizon=1.0), grid, q0, 0.45)
    fast = run_to_horizon(spec, SchemeConfig(horizon=1.0, clock="fast", dt=0.5), grid, q0, 0.45)
    assert slow.records[-1].time == fast.records[-1].time
    assert slow.records[-1].m1 == pytest.approx(fast.records[-1].m1, abs=1e-12)


def test_stationary_population_at_fixed_optimum(grid):
    # without selection pressure the population relaxes to (r - mbar) / kappa
    spec = single(eps=0.2)
    run = run_to_horizon(spec, SchemeConfig(horizon=8.0), grid, gaussian_density(grid, 0.0, 0.2),
                         0.3)
    last = run.records[-1]
    assert last.m1 == pytest.approx(0.0, abs=1e-10)
    assert last.rho == pytest.approx((1 - 0.2 * last.m2c) / 2, rel=1e-6)


def test_snapshots_and_record_stride(grid):
    run = run_to_horizon(single(), SchemeConfig(horizon=1.0, record_stride=7,
                                                snapshot_times=(0.0, 0.5, 1.0)),
                         grid, gaussian_density(grid, 0.0, 0.2), 0.45)
    assert sorted(run.snapshots) == [0.0, 0.5, 1.0]
    snap = run.snapshots[0.5]
    assert isinstance(snap, Snapshot) and snap.time == pytest.approx(0.5)
    assert trapezoid(snap.q, grid) == pytest.approx(1.0)
    times = [r.time for r in run.records]
    assert times[-1] == pytest.approx(1.0) and np.all(np.diff(times) > 0)
    assert len(times) == 1 + 50 // 7 + 1


def test_audit_enforced_unless_forced(grid):
    spec = SingleSpeciesSpec(0.2, mortality=QuadraticMortality(0.5))
    q0 = gaussian_density(grid, 0.0, 0.2)
    with pytest.raises(AuditFailure):
        run_to_horizon(spec, SchemeConfig(horizon=0.1), grid, q0, 0.4)
    run = run_to_horizon(spec, SchemeConfig(horizon=0.1), grid, q0, 0.4, force=True)
    assert run.metadata["forced"]


def test_extinction_stops_run(grid):
    spec = SingleSpeciesSpec(0.2, birth_rate=BirthRate(1.0), mortality=QuadraticMortality(0.4),
                             optimum=OptimumTrajectory("linear_ramp", speed=3.0), kappa=2.0)
    run = run_to_horizon(spec, SchemeConfig(horizon=4.0), grid,
                         gaussian_density(grid, 0.0, 0.2), 0.45, force=True)
    assert run.status == "extinct"
    assert 0 < run.metadata["extinction_time"] < 4.0


def test_oversized_step_is_unstable(grid):
    spec = single(eps=0.1)
    with pytest.raises(StabilityError):
        run_to_horizon(spec, SchemeConfig(dt=0.05, allow_large_dt=True, horizon=1.0), grid,
                       indicator_density(grid, 0.0, 0.1), 0.45)


def test_predator_prey_runs_need_q_mode(grid):
    with pytest.raises(ConfigurationError):
        run_to_horizon(PredatorPreySpec(0.2), SchemeConfig(mode="n"), grid,
                       gaussian_density(grid, 0.8, 0.2), 1.0)


def test_coupled_mode_needs_predator(grid):
    spec = PredatorPreySpec(0.2, mortality_family="holling_reduced", tau=1e-3)
    with pytest.raises(ConfigurationError):
        run_to_horizon(spec, SchemeConfig(horizon=0.1), grid, gaussian_density(grid, 0.8, 0.2), 1.0)


def test_prey_run_diagnostics(grid):
    spec = PredatorPreySpec(0.2)
    q0 = indicator_density(grid, 0.9, 0.2)
    run = run_to_horizon(spec, SchemeConfig(horizon=2.0, snapshot_times=(2.0,)), grid, q0,
                         solve_equilibrium(spec, 0.9))
    rec = run.records[-1]
    assert run.status == "ok" and rec.time == pytest.approx(2.0)
    assert rec.mass_defect < 1e-6 and np.isnan(rec.rho2)
    assert rec.fbar == pytest.approx(trapezoid(spec.contact(grid.x) * run.state.values, grid))
    assert run.metadata["steps"] == 100


def test_coupled_predator_stays_quasi_steady(grid):
    spec = PredatorPreySpec(0.2, mortality_family="holling_reduced", h=0.5, tau=0.2 ** 4)
    q0 = indicator_density(grid, 0.9, 0.2)
    rho1 = solve_equilibrium(spec, 0.9)
    fbar = trapezoid(spec.contact(grid.x) * q0.values, grid)
    run = run_to_horizon(spec, SchemeConfig(horizon=1.0), grid, q0, rho1,
                         quasi_steady_predator(spec, rho1, fbar))
    rec = run.records[-1]
    assert rec.rho2 == pytest.approx(quasi_steady_predator(spec, rec.rho, rec.fbar), rel=0.02)


@pytest.mark.slow
def test_grid_refinement_changes_terminal_mean_little():
    spec = PredatorPreySpec(0.2)
    out = []
    for spacing in (0.02, 0.01):
        g = Grid1D.symmetric(2.0, spacing)
        run = run_to_horizon(spec, SchemeConfig(horizon=16.0, record_stride=100), g,
                             indicator_density(g, 0.9, 0.2), solve_equilibrium(spec, 0.9))
        out.append(run.records[-1].m1)
    assert abs(out[0] - out[1]) < 1e-3

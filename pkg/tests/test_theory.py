import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from traitevo.errors import AmbiguityError, BandExitError, PreconditionError
from traitevo.models import (OptimumTrajectory, PredatorPreySpec, QuadraticMortality,
                             SingleSpeciesSpec, TraitFunction, polynomial)
from traitevo.theory import (EquilibriumBranch, discover_band, equilibrium_along,
                             equilibrium_closed_form, find_fixed_point, growth_G, growth_G_dI,
                             hbar_bound, hbar_map, integrate_canonical, logistic_closed_form,
                             logistic_tracker, solve_equilibrium, solve_hbar)


@pytest.fixture
def scheme():
    return PredatorPreySpec(0.2)


@pytest.fixture
def holling():
    return PredatorPreySpec(0.2, mortality_family="holling_reduced", h=0.5)


def test_equilibrium_at_initial_trait(scheme):
    # (1 + 0.4 * 0.8) / (0.8^4 + 1)
    assert equilibrium_closed_form(scheme, 0.8) == pytest.approx(0.9364358683, abs=1e-10)
    assert solve_equilibrium(scheme, 0.8, method="root") == pytest.approx(0.9364358683, abs=1e-10)


def test_fixed_point_against_independent_root(scheme):
    # stationarity of f^2 I - delta with I from the closed form reduces to
    # (1 + 0.4 x) 2 x^3 / (x^4 + 1) = 0.4 on 0.1 < x < 1
    oracle = brentq(lambda x: (1 + 0.4 * x) * 2 * x ** 3 / (x ** 4 + 1) - 0.4, 0.2, 0.9,
                    xtol=1e-15)
    fp = find_fixed_point(scheme)
    assert fp.x == pytest.approx(oracle, abs=1e-10)
    assert fp.x == pytest.approx(0.5643248495883401, abs=1e-12)
    assert fp.curvature > 0


def test_holling_roots_are_stable(holling):
    xs = np.linspace(0.2, 1.0, 9)
    for x in xs:
        I = solve_equilibrium(holling, x)
        assert abs(growth_G(holling, x, I)) < 1e-12
        assert growth_G_dI(holling, x, I) < 0
    assert np.allclose(equilibrium_along(holling, xs),
                       [solve_equilibrium(holling, x) for x in xs], atol=1e-12)
    br = EquilibriumBranch(holling)
    br(xs)
    assert np.allclose(br(xs + 1e-3), [solve_equilibrium(holling, x + 1e-3) for x in xs],
                       atol=1e-11)


def test_ambiguous_equilibrium_is_detected():
    # strong saturating predation: G dips below zero, recovers past the
    # handling-time hump, and turns negative again under competition
    weird = TraitFunction("w", lambda x: 0 * np.asarray(x) + 1.0)
    spec = PredatorPreySpec(0.2, contact=weird, relief=polynomial([0.0]),
                            mortality_family="holling_reduced", h=4.0, gamma=16.0, r1=0.6,
                            kappa1=0.05)
    with pytest.raises(AmbiguityError):
        solve_equilibrium(spec, 0.5)


def test_band_contains_fixed_point(scheme):
    band = discover_band(scheme)
    assert band.contains(band.x_star)
    assert band.half_width > 0.3 and band.a0 > 0 and band.g_star > 0
    assert band.i_low < band.i_high


def test_canonical_ode_matches_scipy(holling):
    traj = integrate_canonical(holling, 0.9, 5.0, dt=1e-2)
    ref = solve_ivp(lambda t, z: [-(holling.contact_scale
                                    * holling.contact.derivative(z[0])
                                    * float(holling.contact(z[0]))
                                    / (1 + holling.h * float(holling.contact(z[0]))
                                       * solve_equilibrium(holling, z[0])) ** 2
                                    - holling.relief.derivative(z[0]))
                                  * solve_equilibrium(holling, z[0])],
                    (0, 5), [0.9], rtol=1e-11, atol=1e-12)
    assert traj.zbar_eps[-1] == pytest.approx(ref.y[0, -1], abs=1e-7)
    assert np.allclose(traj.i_of_z, equilibrium_along(holling, traj.zbar_eps), atol=1e-12)


def test_canonical_converges_to_fixed_point(scheme):
    traj = integrate_canonical(scheme, 0.8, 50.0, dt=1e-2)
    assert traj.zbar_0[-1] == pytest.approx(find_fixed_point(scheme).x, abs=1e-8)


def test_band_exit_is_reported(scheme):
    with pytest.raises(BandExitError):
        integrate_canonical(scheme, 1.45, 1.0, dt=1e-2)


def test_single_species_closed_form_and_population():
    spec = SingleSpeciesSpec(0.1, mortality=QuadraticMortality(0.5, center=0.2), kappa=2.0)
    traj = integrate_canonical(spec, -0.4, 4.0, dt=1e-2)
    exact = 0.2 + (-0.6) * np.exp(-0.5 * traj.times)
    assert np.max(np.abs(traj.zbar_eps - exact)) < 1e-9
    assert np.allclose(traj.rho_limit, (1 - 0.25 * (traj.zbar_0 - 0.2) ** 2) / 2)


def test_moving_optimum_lag():
    spec = SingleSpeciesSpec(0.1, mortality=QuadraticMortality(2.0),
                             optimum=OptimumTrajectory("linear_ramp", speed=0.3))
    traj = integrate_canonical(spec, 0.0, 20.0, dt=1e-2)
    assert traj.zbar_eps[-1] - 0.3 * 20.0 == pytest.approx(-0.15, abs=1e-9)


def test_trajectory_interpolation(scheme):
    traj = integrate_canonical(scheme, 0.8, 1.0, dt=1e-2)
    mid = traj.at([0.005])
    assert mid.zbar_eps[0] == pytest.approx(0.5 * (traj.zbar_eps[0] + traj.zbar_eps[1]))
    assert traj.columns().shape == (traj.times.size, 5)


def test_hbar_properties():
    eta, lx, eps = 0.2, 0.5, 0.1
    eta2 = hbar_bound(eta, lx)
    sol = solve_hbar(eta, eta2, lx, lambda t: 0.1 * np.abs(np.cos(t)), eps, 4.0)
    assert sol.values[0] == 2.0
    assert sol.sup <= 3.0
    again = hbar_map(sol.values, sol.xdot_abs, eta, eta2, eps, sol.times[1])
    assert np.max(np.abs(again - sol.values)) <= 1e-10
    with pytest.raises(PreconditionError):
        solve_hbar(eta, 2 * eta2, lx, lambda t: 0 * t, eps, 1.0)


def test_hbar_without_coupling_is_explicit():
    sol = solve_hbar(0.3, 0.0, 1.0, lambda t: 0 * t, 0.1, 1.0)
    assert np.allclose(sol.values, 1 + np.exp(-30 * sol.times))


def test_logistic_tracker_matches_closed_form():
    eps = 0.1
    t, y = logistic_tracker(lambda t: 0 * t + 1.3, lambda t: 0 * t + 0.8, 0.2, eps, 0.05,
                            max_step=1e-6)
    assert np.max(np.abs(y - logistic_closed_form(1.3, 0.8, 0.2, eps, t))) < 1e-9

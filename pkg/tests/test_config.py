import numpy as np
import pytest

from traitevo.config import bundled_scenarios, load_config, parse_config
from traitevo.errors import ConfigurationError
from traitevo.models import PredatorPreySpec, SingleSpeciesSpec


def test_bundled_scenarios_present():
    assert {"paper_fig12_eps02", "paper_fig12_eps01", "single_species", "coupled_tau",
            "holling_reduced", "predator_prey_sweep", "single_species_sweep"} <= set(
        bundled_scenarios())


@pytest.mark.parametrize("name,eps", [("paper_fig12_eps02", 0.2), ("paper_fig12_eps01", 0.1)])
def test_prey_experiment_values(name, eps):
    cfg = load_config(name)
    b = cfg.build()
    assert b.grid.spacing == pytest.approx(0.02) and b.grid.x[-1] == 2.0
    assert b.scheme.resolve(eps).dt == pytest.approx(eps ** 2 / 2)
    assert b.initial_mean == pytest.approx(0.8 + eps / 2)
    assert b.spec.r1 == 1 and b.spec.kappa1 == 1 and b.spec.h == 0
    assert cfg["scenario.horizon"] == 16 and cfg["scenario.snapshot_times"] == (2.0, 16.0)
    assert b.rho0 == pytest.approx((1 + 0.4 * b.initial_mean) / (b.initial_mean ** 4 + 1))


def test_defaults_fill_everything():
    cfg = parse_config("")
    assert cfg.model == "predator_prey_reduced" and cfg["grid.spacing"] == 0.02
    assert isinstance(cfg.build().spec, PredatorPreySpec)


def test_resolved_config_round_trips():
    cfg = load_config("single_species")
    again = parse_config(cfg.resolved_ini())
    assert again.values == cfg.values
    assert isinstance(again.build().spec, SingleSpeciesSpec)


def test_coupled_defaults():
    b = load_config("coupled_tau").build()
    assert b.spec.tau == pytest.approx(0.2 ** 4)
    assert b.rho2_0 > 0


@pytest.mark.parametrize("text", [
    "[scenario]\nbogus = 1\n",
    "[nonsense]\n",
    "[scenario]\nepsilon = abc\n",
    "[scenario]\nmodel = fish\n",
    "[scenario]\nepsilon = -1\n",
    "[ecology]\nmortality_family = other\n",
    "[scenario]\nmodel = predator_prey_coupled\n",
    "[sweep]\nepsilons = 0.2, -0.1\n",
    "not an ini file",
])
def test_malformed_configs_rejected(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_build_time_errors():
    with pytest.raises(ConfigurationError):
        parse_config("[grid]\nspacing = 0.03\n").build()
    with pytest.raises(ConfigurationError):
        parse_config("[initial]\nmean_base = 5\n").build()
    with pytest.raises(ConfigurationError):
        parse_config("[initial]\nshape = triangle\n").build()
    with pytest.raises(ConfigurationError):
        load_config("no_such_scenario")


def test_with_epsilon_is_a_copy():
    cfg = load_config("predator_prey_sweep")
    other = cfg.with_epsilon(0.1)
    assert other["scenario.epsilon"] == 0.1 and cfg["scenario.epsilon"] == 0.2
    assert np.isclose(other.build().initial_mean, 0.85)

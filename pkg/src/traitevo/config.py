"""INI scenario files: parsing, defaults and construction of runnable objects."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, TraitEvoError
from .grid import Grid1D, gaussian_density, indicator_density, trapezoid
from .models import (HOLLING_REDUCED, MORTALITY_FAMILIES, BirthRate,
                     OptimumTrajectory, PredatorPreySpec, QuadraticMortality,
                     SingleSpeciesSpec, quasi_steady_predator, floored_square_contact,
                     capped_linear_relief)
from .stepper import SchemeConfig
from .theory import solve_equilibrium

MODEL_KINDS = ("single_species", "predator_prey_reduced", "predator_prey_coupled")

# section -> key -> (type, default).  ``None`` defaults are resolved per epsilon.
SCHEMA = {
    "scenario": {
        "name": (str, "scenario"),
        "model": (str, "predator_prey_reduced"),
        "epsilon": (float, 0.2),
        "horizon": (float, 16.0),
        "snapshot_times": ("floats", (2.0, 16.0)),
        "seed": (int, 0),
        "description": (str, ""),
    },
    "grid": {
        "half_width": (float, 2.0),
        "spacing": (float, 0.02),
    },
    "scheme": {
        "dt": ("optfloat", None),
        "clock": (str, "slow"),
        "mode": (str, "q"),
        "record_stride": (int, 1),
        "safety_factor": (float, 1.0),
        "allow_large_dt": (bool, False),
        "negativity_floor": (float, 1e-12),
        "padding": (float, 1.0),
        "k0": (int, 2),
        "substep_fraction": (float, 0.1),
        "theory_dt": (float, 1e-2),
    },
    "ecology": {
        "mortality_family": (str, "mass_action"),
        "r1": (float, 1.0),
        "h": (float, 0.0),
        "kappa1": (float, 1.0),
        "gamma": (float, 1.0),
        "kappa2": (float, 1.0),
        "tau": ("optfloat", None),
        "g_exponent": (int, 1),
        "contact_floor": (float, 0.1),
        "relief_slope": (float, 0.4),
        "search_band": ("floats", (0.1, 1.5)),
    },
    "single": {
        "birth_rate": (float, 1.0),
        "birth_amplitude": (float, 0.0),
        "birth_period": (float, 1.0),
        "curvature": (float, 0.4),
        "kappa": (float, 2.0),
        "optimum": (str, "sinusoidal"),
        "optimum_speed": (float, 0.0),
        "optimum_amplitude": (float, 0.2),
        "optimum_period": (float, 8.0),
        "lag_bound": (float, 1.0),
    },
    "initial": {
        "shape": (str, "indicator"),
        "mean_base": ("optfloat", None),
        "mean_eps_coeff": (float, 0.5),
        "half_width": ("optfloat", None),
        "rho0": ("optfloat", None),
        "rho2_0": ("optfloat", None),
    },
    "sweep": {
        "epsilons": ("floats", (0.4, 0.2, 0.1)),
    },
}


def _parse(kind, raw, where):
    try:
        if kind is str:
            return raw.strip()
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "optfloat":
            return None if raw.strip() in ("", "auto", "none") else float(raw)
        if kind == "floats":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{where}: cannot parse {raw!r}") from exc


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class Built:
    """Everything needed to start one run."""

    spec: object
    grid: Grid1D
    scheme: SchemeConfig
    initial: object
    rho0: float
    rho2_0: float | None
    initial_mean: float
    limit_mean: float
    theory_dt: float


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def name(self):
        return self["scenario.name"]

    @property
    def model(self):
        return self["scenario.model"]

    @property
    def epsilons(self):
        return self["sweep.epsilons"]

    def resolved_ini(self):
        """Text of the configuration with every default filled in."""
        cp = configparser.ConfigParser(interpolation=None)
        for section, keys in SCHEMA.items():
            cp[section] = {k: _format(self.values[section][k]) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def with_epsilon(self, epsilon):
        vals = {s: dict(v) for s, v in self.values.items()}
        vals["scenario"]["epsilon"] = float(epsilon)
        return ScenarioConfig(vals, self.source)

    # --- construction -----------------------------------------------------

    def grid(self):
        hw, sp = self["grid.half_width"], self["grid.spacing"]
        n = 2 * hw / sp
        if abs(n - round(n)) > 1e-9 * n:
            raise ConfigurationError("grid spacing must divide the domain width")
        return Grid1D.symmetric(hw, sp)

    def scheme(self):
        s = self.values["scheme"]
        return SchemeConfig(
            dt=s["dt"], horizon=self["scenario.horizon"], clock=s["clock"], mode=s["mode"],
            record_stride=s["record_stride"], safety_factor=s["safety_factor"],
            allow_large_dt=s["allow_large_dt"], negativity_floor=s["negativity_floor"],
            padding=s["padding"], k0=s["k0"],
            snapshot_times=tuple(self["scenario.snapshot_times"]),
            substep_fraction=s["substep_fraction"])

    def spec(self):
        eps = self["scenario.epsilon"]
        if self.model == "single_species":
            s = self.values["single"]
            return SingleSpeciesSpec(
                eps, BirthRate(s["birth_rate"], s["birth_amplitude"], s["birth_period"]),
                QuadraticMortality(s["curvature"]),
                OptimumTrajectory(s["optimum"], s["optimum_speed"], s["optimum_amplitude"],
                                  s["optimum_period"]),
                kappa=s["kappa"], lag_bound=s["lag_bound"])
        e = self.values["ecology"]
        tau = e["tau"]
        if self.model == "predator_prey_coupled":
            tau = eps ** 4 if tau is None else tau
            if tau <= 0:
                raise ConfigurationError("coupled model needs tau > 0")
        else:
            tau = 0.0
        return PredatorPreySpec(
            eps, floored_square_contact(e["contact_floor"]),
            capped_linear_relief(e["kappa1"], e["relief_slope"]),
            r1=e["r1"], h=e["h"], kappa1=e["kappa1"], gamma=e["gamma"], kappa2=e["kappa2"],
            tau=tau, mortality_family=e["mortality_family"], g_exponent=e["g_exponent"],
            search_band=tuple(e["search_band"]))

    def build(self):
        try:
            spec = self.spec()
            grid = self.grid()
            scheme = self.scheme()
        except TraitEvoError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(str(exc)) from exc
        eps = spec.epsilon
        ini = self.values["initial"]
        base = ini["mean_base"]
        if base is None:
            base = 0.0 if self.model == "single_species" else 0.8
        m0 = base + ini["mean_eps_coeff"] * eps
        width = eps if ini["half_width"] is None else ini["half_width"]
        if not grid.x_min < m0 < grid.x_max:
            raise ConfigurationError(f"initial mean {m0} outside the grid")
        if ini["shape"] == "indicator":
            q0 = indicator_density(grid, m0, width)
        elif ini["shape"] == "gaussian":
            q0 = gaussian_density(grid, m0, width)
        else:
            raise ConfigurationError(f"unknown initial shape {ini['shape']!r}")
        rho2 = None
        if isinstance(spec, SingleSpeciesSpec):
            rho0 = ini["rho0"]
            if rho0 is None:
                # limiting population at t = 0
                r = float(spec.birth_rate(0.0))
                rho0 = (r - float(spec.mortality(base - spec.optimum.value(0.0)))) / spec.kappa
        else:
            rho0 = ini["rho0"]
            if rho0 is None:
                rho0 = solve_equilibrium(spec, m0)
            if spec.coupled:
                rho2 = ini["rho2_0"]
                if rho2 is None:
                    fbar = trapezoid(spec.contact(grid.x) * q0.values, grid)
                    rho2 = quasi_steady_predator(spec, rho0, fbar)
        if not rho0 > 0:
            raise ConfigurationError(f"initial population {rho0} is not positive")
        return Built(spec, grid, scheme, q0, float(rho0), rho2, m0, base,
                     self["scheme.theory_dt"])


def parse_config(text, source="<string>"):
    """Parse INI text; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {k: default for k, (kind, default) in keys.items()}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"{source}: unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"{source}: unknown key {section}.{key}")
            kind = SCHEMA[section][key][0]
            values[section][key] = _parse(kind, raw, f"{source}: {section}.{key}")
    cfg = ScenarioConfig(values, source)
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.model not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model {cfg.model!r}; expected one of {MODEL_KINDS}")
    if cfg["ecology.mortality_family"] not in MORTALITY_FAMILIES:
        raise ConfigurationError(f"unknown mortality family {cfg['ecology.mortality_family']!r}")
    if cfg.model == "predator_prey_coupled" and cfg["ecology.mortality_family"] != HOLLING_REDUCED:
        raise ConfigurationError("the coupled model reduces to the holling_reduced family")
    if not cfg["scenario.epsilon"] > 0:
        raise ConfigurationError("epsilon must be positive")
    if any(e <= 0 for e in cfg.epsilons) or not cfg.epsilons:
        raise ConfigurationError("sweep epsilons must be positive")
    if len(cfg["ecology.search_band"]) != 2:
        raise ConfigurationError("search_band needs two values")
    if not np.isfinite(cfg["scenario.horizon"]) or cfg["scenario.horizon"] < 0:
        raise ConfigurationError("horizon must be a nonnegative number")


def load_config(path):
    """Load a scenario from a file path or the name of a bundled scenario."""
    p = Path(path)
    if p.exists():
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read {p}: {exc}") from exc
        return parse_config(text, str(p))
    name = str(path)
    if name in bundled_scenarios():
        text = resources.files("traitevo").joinpath("scenarios").joinpath(name + ".ini").read_text()
        return parse_config(text, name)
    raise ConfigurationError(f"no such config file or bundled scenario: {path}")


def bundled_scenarios():
    root = resources.files("traitevo").joinpath("scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))

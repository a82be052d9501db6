"""Experiment configuration: TOML ingestion, defaults and validation.

Top level keys are ``experiment``, ``seed`` and ``out``; tables are ``[grid]``,
``[solver]``, ``[initial]``, ``[forcing]`` and ``[params]``.  Unknown keys are
rejected everywhere.  See the README for the full schema.
"""

from __future__ import annotations

import copy
import inspect
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..fields import Grid, VectorField
from ..generators import GENERATORS, RANDOM_GENERATORS, make_field
from ..solver import SolverConfig

EXPERIMENTS = ("max_principle", "dissipative", "growth", "uniqueness", "smoothing", "lemmas")

GRID_DEFAULTS = {"n": 256, "L_over_pi": 32.0}

SOLVER_DEFAULTS = {
    "alpha": 0.0,
    "dt": 0.05,
    "t_end": 20.0,
    "diag_every": 10,
    "diag_R": 1.0,
    "diag_center": [0.0, 0.0],
    "snapshot_times": [],
    "adaptive": True,
}

# initial data, forcing and experiment parameters per experiment
EXPERIMENT_DEFAULTS = {
    "max_principle": {
        "solver": {"alpha": 1.0},
        "initial": {"generator": "random_band", "kmax": 8, "amplitude": 1.0},
        "forcing": {"generator": "random_band", "kmax": 3, "amplitude": 0.5},
        "params": {"seeds": [1, 2, 3, 4, 5], "alphas": [0.5, 1.0]},
    },
    "dissipative": {
        "solver": {"alpha": 1.0, "dt": 0.02},
        "initial": {"generator": "random_band", "kmax": 4, "amplitude": 5.0},
        "forcing": {"generator": "random_band", "kmax": 3, "amplitude": 0.5},
        "params": {"level_factor": 2.0, "stay_factor": 1.1, "radius_scale": 1.0},
    },
    "growth": {
        "solver": {"alpha": 0.0},
        "initial": {"generator": "random_band", "kmax": 4, "amplitude": 1.0},
        "forcing": {"generator": "sinusoidal_nondecaying", "amplitude": 0.5},
        "params": {"constant": [0.5, 0.0], "t_monotone": 2.0, "linear_factor": 2.0,
                   "radius_exponent": 4.0, "poly_exponent": 5.0, "mean_tol": 1e-12},
    },
    "uniqueness": {
        "solver": {"alpha": 0.5, "t_end": 5.0},
        "initial": {"generator": "random_band", "kmax": 4, "amplitude": 1.0},
        "forcing": {"generator": "none"},
        "params": {"epsilons": [1e-2, 1e-3, 1e-4, 1e-5], "perturbation_radius": 3.0,
                   "weight_R": 4.0, "samples": 5, "stability": 1.1},
    },
    "smoothing": {
        "solver": {"alpha": 0.0, "dt": 0.01, "t_end": 1.0, "diag_every": 2},
        "initial": {"generator": "rough_highfreq", "energy_slope": -1.0, "amplitude": 1.0},
        "forcing": {"generator": "none"},
        "params": {"grad_R": 4.0, "slope_floor": -0.6},
    },
    "lemmas": {
        "solver": {"t_end": 0.0},
        "initial": {"generator": "none"},
        "forcing": {"generator": "none"},
        "params": {"seeds": [1, 2, 3, 4, 5], "R": [2.0, 4.0, 8.0], "centers": 4, "triples": 10,
                   "p": 1.5, "q": 3.0, "linf_p": 4.0, "bernstein_j": [2, 3, 4, 5, 6],
                   "max_ratio": math.inf},
    },
}

# optional parameters without a default value
OPTIONAL_PARAMS = {
    "dissipative": ("level", "t_half", "gamma"),
}

TOP_LEVEL = ("experiment", "seed", "out", "grid", "solver", "initial", "forcing", "params")


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    grid: Grid
    solver: dict
    initial: dict
    forcing: dict
    params: dict
    out: str | None = None
    raw: dict = field(default_factory=dict)

    def solver_config(self, forcing=None, alpha=None, **overrides):
        s = dict(self.solver)
        s.update(overrides)
        return SolverConfig(
            grid=self.grid,
            dt=float(s["dt"]),
            t_end=float(s["t_end"]),
            alpha=float(s["alpha"] if alpha is None else alpha),
            forcing=forcing,
            diag_every=int(s["diag_every"]),
            diag_R=float(s["diag_R"]),
            diag_center=tuple(float(c) for c in s["diag_center"]),
            snapshot_times=tuple(float(t) for t in s["snapshot_times"]),
            adaptive=bool(s["adaptive"]),
        )

    def rng(self, offset=0):
        return np.random.default_rng(self.seed + offset)

    def make_initial(self, rng=None):
        return build_field(self.initial, self.grid, rng or self.rng())

    def make_forcing(self, rng=None):
        return build_field(self.forcing, self.grid, rng or self.rng(10_000))

    def echo(self):
        """Plain dictionary with every default filled (written to the manifest)."""
        return {
            "experiment": self.name,
            "seed": self.seed,
            "grid": {"n": self.grid.n, "L": self.grid.L},
            "solver": copy.deepcopy(self.solver),
            "initial": copy.deepcopy(self.initial),
            "forcing": copy.deepcopy(self.forcing),
            "params": {k: _jsonable(v) for k, v in self.params.items()},
        }


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def build_field(spec, grid, rng):
    """Velocity field from an ``[initial]`` / ``[forcing]`` table; ``None`` for generator none."""
    name = spec["generator"]
    params = {k: v for k, v in spec.items() if k != "generator"}
    if name == "none":
        return None
    if name == "constant":
        return VectorField.constant(grid, params["value"])
    return make_field(name, grid, rng if name in RANDOM_GENERATORS else None, **params)


def _check_keys(table, allowed, where):
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}; allowed: {', '.join(sorted(allowed))}")


def _generator_keys(name, where):
    if name == "none":
        return set()
    if name == "constant":
        return {"value"}
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ConfigError(
            f"unknown generator {name!r} in {where}; choose from "
            f"{', '.join(sorted(GENERATORS) + ['constant', 'none'])}"
        ) from None
    sig = inspect.signature(gen)
    return {p for p in sig.parameters if p not in ("grid", "rng")}


def _field_table(user, default, where):
    table = dict(user) if user else dict(default)
    if user and "generator" not in user:
        raise ConfigError(f"{where} needs a 'generator' key")
    if user and user["generator"] == default.get("generator"):
        table = {**default, **user}
    allowed = _generator_keys(table["generator"], where) | {"generator"}
    _check_keys(table, allowed, where)
    if table["generator"] == "constant":
        if "value" not in table or len(table["value"]) != 2:
            raise ConfigError(f"{where}: constant forcing needs 'value = [c1, c2]'")
    return table


def _grid_from(table):
    _check_keys(table, {"n", "L", "L_over_pi"}, "[grid]")
    if "L" in table and "L_over_pi" in table:
        raise ConfigError("[grid]: give either 'L' or 'L_over_pi', not both")
    n = table.get("n", GRID_DEFAULTS["n"])
    if "L" in table:
        L = float(table["L"])
    else:
        L = float(table.get("L_over_pi", GRID_DEFAULTS["L_over_pi"])) * math.pi
    try:
        return Grid(int(n), L)
    except ValueError as err:
        raise ConfigError(f"[grid]: {err}") from None


def _validate_params(name, params):
    p = params
    if name == "lemmas":
        if not (1 < p["p"] < math.inf and 1 < p["q"] < math.inf) or abs(1 / p["p"] + 1 / p["q"] - 1) > 1e-12:
            raise ConfigError(f"[params]: p={p['p']} and q={p['q']} must be conjugate exponents in (1, inf)")
        if not 2 < p["linf_p"] < math.inf:
            raise ConfigError(f"[params]: linf_p must satisfy 2 < p < inf, got {p['linf_p']}")
        if min(p["R"]) <= 0:
            raise ConfigError("[params]: R values must be positive")
    if name == "max_principle" and min(p["alphas"]) < 0:
        raise ConfigError("[params]: alphas must be >= 0")
    if name == "uniqueness" and min(p["epsilons"]) <= 0:
        raise ConfigError("[params]: epsilons must be positive")
    if name == "dissipative" and p["level_factor"] <= 0:
        raise ConfigError("[params]: level_factor must be positive")


def _cfl_check(cfg):
    """Reject a ``dt`` above ``h / (2 max|u0|)`` for the configured initial data."""
    if cfg.name == "lemmas":
        return
    u0 = cfg.make_initial()
    if u0 is None:
        return
    umax = u0.max_abs()
    if umax == 0:
        return
    bound = cfg.grid.h / (2 * umax)
    dt = cfg.solver["dt"]
    if dt > bound:
        raise ConfigError(
            f"dt={dt} violates the CFL bound h/(2 max|u0|) = {cfg.grid.h:.4g}/(2*{umax:.4g}) = {bound:.4g}"
        )


def config_from_dict(data, source="<dict>"):
    _check_keys(data, TOP_LEVEL, "the top level")
    if "experiment" not in data:
        raise ConfigError(f"{source}: missing 'experiment'; choose from {', '.join(EXPERIMENTS)}")
    name = data["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    defaults = EXPERIMENT_DEFAULTS[name]
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")

    grid = _grid_from(data.get("grid", {}))

    solver_user = data.get("solver", {})
    _check_keys(solver_user, SOLVER_DEFAULTS, "[solver]")
    solver = {**SOLVER_DEFAULTS, **defaults["solver"], **solver_user}

    initial = _field_table(data.get("initial"), defaults["initial"], "[initial]")
    forcing = _field_table(data.get("forcing"), defaults["forcing"], "[forcing]")

    params_user = data.get("params", {})
    allowed = set(defaults["params"]) | set(OPTIONAL_PARAMS.get(name, ()))
    _check_keys(params_user, allowed, "[params]")
    params = {**defaults["params"], **params_user}
    _validate_params(name, params)

    out = data.get("out")
    cfg = ExperimentConfig(name, seed, grid, solver, initial, forcing, params, out, raw=data)
    try:
        if name != "lemmas":
            cfg.solver_config()
    except ValueError as err:
        raise ConfigError(f"[solver]: {err}") from None
    _cfl_check(cfg)
    return cfg


def parse_config(path):
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: invalid TOML: {err}") from None
    return config_from_dict(data, str(path))

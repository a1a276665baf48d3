"""Experiment configuration, profiles and TOML loading."""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ESTIMATORS = ("oracle", "misspecified", "generative")
METHODS = ("conformal", "naive", "both")
ANGLE_MODES = ("fixed", "per_trial")

DEFAULT_ALPHAS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    num_antennas: int = 32
    latent_dim: int = 32
    snr_tr_db: float = -5.0
    snr_db: float = -5.0
    power: float = 1.0
    alpha_grid: tuple = DEFAULT_ALPHAS
    n_cal: int = 100
    n_test: int = 100
    n_trials: int = 200
    estimator: str = "generative"
    prior_scale: float = 0.1
    method: str = "both"
    n_train_generative: int = 20000
    em_max_iters: int = 500
    em_tol: float = 1e-6
    base_seed: int = 0
    pas_family: str = "laplacian"
    # None draws the mean angle uniformly from [-pi, pi)
    mean_angle: float | None = None
    angular_spread: float = math.radians(10.0)
    angle_mode: str = "fixed"
    element_spacing: float = 0.5
    grid_points: int = 1024
    mc_samples: int = 10000

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        self.validate()

    def validate(self) -> None:
        for name in ("num_antennas", "latent_dim", "n_cal", "n_test", "n_trials",
                     "n_train_generative", "em_max_iters", "mc_samples"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.latent_dim > self.num_antennas:
            raise ConfigError("latent_dim cannot exceed num_antennas")
        if not self.alpha_grid:
            raise ConfigError("alpha_grid must not be empty")
        if any(not 0 < a < 1 for a in self.alpha_grid):
            raise ConfigError("alphas must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(self.alpha_grid, self.alpha_grid[1:])):
            raise ConfigError("alpha_grid must be strictly increasing")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.angle_mode not in ANGLE_MODES:
            raise ConfigError(f"angle_mode must be one of {ANGLE_MODES}")
        if self.pas_family not in ("laplacian", "uniform", "point_mass"):
            raise ConfigError(f"unknown pas_family {self.pas_family!r}")
        if not (self.power > 0 and self.prior_scale > 0 and self.angular_spread > 0):
            raise ConfigError("power, prior_scale and angular_spread must be > 0")
        if self.estimator == "generative" and self.n_train_generative < self.latent_dim + 1:
            raise ConfigError("n_train_generative must exceed latent_dim")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be a 64-bit unsigned integer")

    @property
    def methods(self) -> tuple:
        return ("conformal", "naive") if self.method == "both" else (self.method,)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["alpha_grid"] = list(self.alpha_grid)
        return d


PROFILES = {
    "full": {},
    "fast": {"num_antennas": 8, "latent_dim": 8, "n_trials": 50, "n_train_generative": 5000},
}


def from_profile(name: str = "full", **overrides) -> ExperimentConfig:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return ExperimentConfig(**{**PROFILES[name], **overrides})


def load_config(path, profile: str = "full", **overrides) -> ExperimentConfig:
    """Build a config from a flat TOML file layered over a profile.

    Every key must be an ``ExperimentConfig`` field name; anything else is an
    error. ``overrides`` (e.g. from command-line flags) take precedence over
    the file.
    """
    with open(Path(path), "rb") as fh:
        data = tomllib.load(fh)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; got tables {nested}")
    try:
        return from_profile(profile, **{**data, **overrides})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

"""Experiment configuration read from a TOML file.

Layout (every key optional except where an experiment needs it)::

    [run]
    trials = 5000          # >= 100 for Monte Carlo experiments
    horizon = 200
    delta = 0.2
    lambda_grid = [0.3]    # or: lambda = 0.3
    seed = 7
    workers = 1
    output_path = "out"

    [model]                # coverage, online, batch, tightness
    target = "batch"       # martingale | batch | online | ville
    hypotheses = [0.0, 1.0, 2.0]
    loss = "quadratic"
    posterior_set = "auto" # auto | exact | finite
    prior_rule = "previous_posterior"   # online only: fixed | previous_posterior
    eta = 0.3              # ville only; defaults to the first lambda
    [model.data]
    family = "lognormal"
    mu = 0.0
    sigma = 1.0

    [bandit]
    eps = 0.05
    eps_schedule = "constant"   # constant | cube_root
    policy = "softmax"          # softmax | uniform
    temperature = 0.1
    arms = [{family = "lognormal", mu = -1.0, sigma = 0.5}, ...]

    [supermartingale]
    models = ["rademacher", "lognormal", "pareto"]
    etas = [0.05, 0.1, 0.5]

    [tightness]
    m_grid = [10, 100, 1000]
    K_bound = 1.0
    alpha = 0.5
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..bandit import BanditEnv, EpsSchedule, PolicySchedule
from ..distributions import Distribution
from ..errors import DomainError
from ..processes import STOCK_MODELS

EXPERIMENTS = ("coverage", "supermartingale", "tightness", "bandit", "online", "batch")
TARGETS = ("martingale", "batch", "online", "ville")
MONTE_CARLO = ("coverage", "supermartingale", "bandit", "online")


class ConfigError(ValueError):
    """Configuration could not be read or failed validation."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    trials: int = 1000
    horizon: int = 200
    delta: float = 0.2
    lambdas: tuple = (0.3,)
    seed: int = 0
    workers: int = 1
    output_path: str = "out"
    target: str = "batch"
    data: Distribution = field(default_factory=lambda: Distribution.lognormal(0.0, 1.0))
    hypotheses: tuple = (0.0, 1.0, 2.0)
    loss: str = "quadratic"
    posterior_set: str = "auto"
    prior_rule: str = "previous_posterior"
    eta: Optional[float] = None
    arms: tuple = (Distribution.lognormal(-1.0, 0.5), Distribution.lognormal(-0.5, 0.5))
    eps: float = 0.05
    eps_schedule: str = "constant"
    policy: str = "softmax"
    temperature: float = 0.1
    models: tuple = ("rademacher", "lognormal", "pareto")
    etas: tuple = (0.05, 0.1, 0.5)
    m_grid: tuple = (10, 100, 1000)
    K_bound: float = 1.0
    alpha: float = 0.5

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown value {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials: must be positive")
        if self.experiment in MONTE_CARLO and self.trials < 100:
            raise ConfigError(f"trials: Monte Carlo experiments need at least 100, got {self.trials}")
        if self.horizon < 1:
            raise ConfigError("horizon: must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta: must lie in (0, 1)")
        if len(self.lambdas) == 0:
            raise ConfigError("lambda_grid: must be nonempty")
        if any(not lam > 0 for lam in self.lambdas):
            raise ConfigError("lambda_grid: every lambda must be positive")
        if self.workers < 1:
            raise ConfigError("workers: must be positive")
        if self.target not in TARGETS:
            raise ConfigError(f"target: unknown value {self.target!r}")
        if len(self.hypotheses) < 1:
            raise ConfigError("hypotheses: must be nonempty")
        if self.loss not in ("quadratic", "absolute"):
            raise ConfigError(f"loss: unknown value {self.loss!r}")
        if self.posterior_set not in ("auto", "exact", "finite"):
            raise ConfigError(f"posterior_set: unknown value {self.posterior_set!r}")
        if self.prior_rule not in ("fixed", "previous_posterior"):
            raise ConfigError(f"prior_rule: unknown value {self.prior_rule!r}")
        if self.experiment == "bandit":
            try:
                self.bandit_env()
                self.schedule().check(len(self.arms))
            except DomainError as exc:
                raise ConfigError(f"bandit: {exc}") from exc
        if self.experiment == "supermartingale":
            bad = [m for m in self.models if m not in STOCK_MODELS]
            if bad:
                raise ConfigError(f"models: unknown increment models {bad}")
            if len(self.etas) == 0:
                raise ConfigError("etas: must be nonempty")
        if self.experiment == "tightness" and len(self.m_grid) == 0:
            raise ConfigError("m_grid: must be nonempty")
        return self

    @property
    def exact_sup(self) -> bool:
        if self.posterior_set == "auto":
            return len(self.hypotheses) <= 8
        return self.posterior_set == "exact"

    def bandit_env(self) -> BanditEnv:
        return BanditEnv(tuple(self.arms))

    def schedule(self) -> PolicySchedule:
        return PolicySchedule(base=self.policy, eps=EpsSchedule(self.eps_schedule, self.eps), temperature=self.temperature)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "trials": self.trials,
            "horizon": self.horizon,
            "delta": self.delta,
            "lambda_grid": list(self.lambdas),
            "seed": self.seed,
            "target": self.target,
            "data": self.data.to_dict(),
            "hypotheses": list(self.hypotheses),
            "loss": self.loss,
            "posterior_set": self.posterior_set,
            "prior_rule": self.prior_rule,
            "eta": self.eta,
            "arms": [a.to_dict() for a in self.arms],
            "eps": self.eps,
            "eps_schedule": self.eps_schedule,
            "policy": self.policy,
            "temperature": self.temperature,
            "models": list(self.models),
            "etas": list(self.etas),
            "m_grid": list(self.m_grid),
            "K_bound": self.K_bound,
            "alpha": self.alpha,
        }


def _dist(d, where: str) -> Distribution:
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError(f"{where}: expected a table with a 'family' key")
    try:
        return Distribution.from_dict(d)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(experiment: str, raw: dict) -> ExperimentConfig:
    run = raw.get("run", {})
    model = raw.get("model", {})
    bandit = raw.get("bandit", {})
    smart = raw.get("supermartingale", {})
    tight = raw.get("tightness", {})
    known = {"run", "model", "bandit", "supermartingale", "tightness", "experiment"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    kw = {}
    try:
        for key, cast in (("trials", int), ("horizon", int), ("delta", float), ("seed", int), ("workers", int), ("output_path", str)):
            if key in run:
                kw[key] = cast(run[key])
        if "lambda_grid" in run:
            kw["lambdas"] = tuple(float(x) for x in run["lambda_grid"])
        elif "lambda" in run:
            kw["lambdas"] = (float(run["lambda"]),)
        for key, cast in (("target", str), ("loss", str), ("posterior_set", str), ("prior_rule", str)):
            if key in model:
                kw[key] = cast(model[key])
        if "hypotheses" in model:
            kw["hypotheses"] = tuple(float(x) for x in model["hypotheses"])
        if "eta" in model:
            kw["eta"] = float(model["eta"])
        if "data" in model:
            kw["data"] = _dist(model["data"], "model.data")
        if "arms" in bandit:
            kw["arms"] = tuple(_dist(a, f"bandit.arms[{i}]") for i, a in enumerate(bandit["arms"]))
        for key, cast in (("eps", float), ("eps_schedule", str), ("policy", str), ("temperature", float)):
            if key in bandit:
                kw[key] = cast(bandit[key])
        if "models" in smart:
            kw["models"] = tuple(str(x) for x in smart["models"])
        if "etas" in smart:
            kw["etas"] = tuple(float(x) for x in smart["etas"])
        if "m_grid" in tight:
            kw["m_grid"] = tuple(int(x) for x in tight["m_grid"])
        if "K_bound" in tight:
            kw["K_bound"] = float(tight["K_bound"])
        if "alpha" in tight:
            kw["alpha"] = float(tight["alpha"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value: {exc}") from exc
    return ExperimentConfig(experiment=experiment, **kw).validate()


def load_config(path, experiment: str, **overrides) -> ExperimentConfig:
    try:
        raw = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    cfg = config_from_dict(experiment, raw)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides).validate()
    return cfg

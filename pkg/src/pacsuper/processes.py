"""Martingale bookkeeping and the exponential supermartingale

    V_m(eta) = exp(eta * M_m - eta^2 / 2 * ([M]_m + <M>_m)),

which stays a supermartingale for any square-integrable martingale, no
boundedness needed. Values are kept in the log domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._rng import trial_rng
from .distributions import Distribution
from .errors import DomainError


@dataclass(frozen=True)
class VariationLedger:
    """Running (M_m, [M]_m, <M>_m) for one martingale."""

    m: int = 0
    M: float = 0.0
    bracket: float = 0.0
    angle: float = 0.0


def accumulate(ledger: VariationLedger, x: float, cond_second_moment: float) -> VariationLedger:
    if cond_second_moment < 0:
        raise DomainError("conditional second moment must be nonnegative")
    return VariationLedger(
        m=ledger.m + 1,
        M=ledger.M + x,
        bracket=ledger.bracket + x * x,
        angle=ledger.angle + cond_second_moment,
    )


def bercu_touati_log_value(eta: float, ledger: VariationLedger) -> float:
    """log V_m(eta)."""
    if eta == 0:
        return 0.0
    return eta * ledger.M - 0.5 * eta * eta * (ledger.bracket + ledger.angle)


def log_process_path(eta: float, x: np.ndarray, csm: np.ndarray) -> np.ndarray:
    """log V_m(eta) for m = 1..n along each row of increments.

    Arrays have shape (..., n); the running sums are taken over the last axis.
    """
    x = np.asarray(x, dtype=float)
    csm = np.asarray(csm, dtype=float)
    if eta == 0:
        return np.zeros(x.shape)
    M = np.cumsum(x, axis=-1)
    var = np.cumsum(x * x + csm, axis=-1)
    return eta * M - 0.5 * eta * eta * var


@dataclass(frozen=True)
class IncrementModel:
    """Source of martingale differences.

    ``sampler(rng, n)`` returns ``(x, cond_second_moment)``, two arrays of
    length n. The contract is E[x | past] = 0 and E[x^2 | past] equal to the
    reported second moment; it can only be checked statistically.
    """

    sampler: Callable[[np.random.Generator, int], tuple]
    description: str

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        x, csm = self.sampler(rng, n)
        return np.asarray(x, dtype=float), np.broadcast_to(np.asarray(csm, dtype=float), (n,)).copy()


class _Zero:
    def __call__(self, rng, n):
        return np.zeros(n), np.zeros(n)


class _Rademacher:
    def __call__(self, rng, n):
        return rng.choice(np.array([-1.0, 1.0]), size=n), np.ones(n)


class _Centered:
    def __init__(self, dist: Distribution):
        self.dist = dist
        self.mean = dist.mean
        self.var = dist.variance
        if not math.isfinite(self.var):
            raise DomainError("increment model needs a finite variance")

    def __call__(self, rng, n):
        return self.dist.sample(rng, n) - self.mean, np.full(n, self.var)


def degenerate_model() -> IncrementModel:
    return IncrementModel(_Zero(), "x = 0, second moment 0")


def rademacher_model() -> IncrementModel:
    return IncrementModel(_Rademacher(), "x = +/-1 with probability 1/2, second moment 1")


def centered_model(dist: Distribution, description: str | None = None) -> IncrementModel:
    return IncrementModel(_Centered(dist), description or f"centered {dist.family} {dist.to_dict()}")


def centered_lognormal_model(mu: float = 0.0, sigma: float = 1.0) -> IncrementModel:
    return centered_model(Distribution.lognormal(mu, sigma), f"L - E[L], L ~ lognormal({mu}, {sigma})")


def centered_pareto_model(alpha: float = 3.0, x_min: float = 1.0) -> IncrementModel:
    # alpha = 3: finite variance, infinite third moment
    return centered_model(Distribution.pareto(alpha, x_min), f"X - E[X], X ~ Pareto(x_min={x_min}, alpha={alpha})")


STOCK_MODELS = {
    "rademacher": rademacher_model,
    "lognormal": centered_lognormal_model,
    "pareto": centered_pareto_model,
    "degenerate": degenerate_model,
}


@dataclass(frozen=True)
class MeanCheck:
    mean_by_step: np.ndarray
    stderr_by_step: np.ndarray
    increment_mean_by_step: np.ndarray
    increment_stderr_by_step: np.ndarray

    def supermartingale_ok(self, n_sigma: float = 3.0) -> bool:
        return bool(np.all(self.mean_by_step <= 1.0 + n_sigma * self.stderr_by_step))

    def centering_ok(self, n_sigma: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.increment_mean_by_step) <= n_sigma * self.increment_stderr_by_step + 1e-15))


def simulate_increments(model: IncrementModel, horizon: int, trials: int, seed: int, start: int = 0):
    """Stack ``trials`` independent paths; path t uses the stream (seed, start + t)."""
    xs = np.empty((trials, horizon))
    cs = np.empty((trials, horizon))
    for t in range(trials):
        xs[t], cs[t] = model.draw(trial_rng(seed, start + t), horizon)
    return xs, cs


def supermartingale_mean_check(
    model: IncrementModel, eta: float, horizon: int, trials: int, seed: int
) -> MeanCheck:
    """Monte Carlo mean of V_m(eta) at each m <= horizon.

    A valid model gives mean <= 1 + 3 * stderr at every step.
    """
    if trials < 100:
        raise DomainError("need at least 100 trials")
    if horizon < 1:
        raise DomainError("horizon must be positive")
    xs, cs = simulate_increments(model, horizon, trials, seed)
    v = np.exp(log_process_path(eta, xs, cs))
    sd = v.std(axis=0, ddof=1)
    inc_sd = xs.std(axis=0, ddof=1)
    return MeanCheck(
        mean_by_step=v.mean(axis=0),
        stderr_by_step=sd / math.sqrt(trials),
        increment_mean_by_step=xs.mean(axis=0),
        increment_stderr_by_step=inc_sd / math.sqrt(trials),
    )

"""Probability measures over hypothesis spaces.

Two families are representable: categorical weights over a finite set of
hypotheses, and diagonal Gaussians over R^d. Everything that aggregates
exponentials goes through a max-shifted log-sum-exp.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

_SUM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HypothesisSpace:
    """Either a finite set of labelled hypotheses or Euclidean space R^dim."""

    kind: str
    size: int = 0
    labels: tuple = ()
    dim: int = 0

    def __post_init__(self):
        if self.kind == "finite":
            if self.size < 1 or len(self.labels) != self.size:
                raise DomainError("finite hypothesis space needs size >= 1 and one label per hypothesis")
        elif self.kind == "euclidean":
            if self.dim < 1:
                raise DomainError("euclidean hypothesis space needs dim >= 1")
        else:
            raise DomainError(f"unknown hypothesis space kind {self.kind!r}")

    @classmethod
    def finite(cls, labels: Union[int, Sequence]) -> "HypothesisSpace":
        if isinstance(labels, (int, np.integer)):
            labels = range(int(labels))
        labels = tuple(labels)
        return cls("finite", size=len(labels), labels=labels)

    @classmethod
    def euclidean(cls, dim: int) -> "HypothesisSpace":
        return cls("euclidean", dim=int(dim))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def points(self) -> np.ndarray:
        """Labels as a float array; only meaningful for numeric labels."""
        if not self.is_finite:
            raise DomainError("points() is defined for finite spaces only")
        try:
            return np.asarray(self.labels, dtype=float)
        except (TypeError, ValueError) as exc:
            raise DomainError("hypothesis labels are not numeric") from exc

    def __eq__(self, other):
        if not isinstance(other, HypothesisSpace):
            return NotImplemented
        return (self.kind, self.size, self.labels, self.dim) == (other.kind, other.size, other.labels, other.dim)

    def __hash__(self):
        return hash((self.kind, self.size, self.labels, self.dim))


@dataclass(frozen=True, eq=False)
class Categorical:
    support: HypothesisSpace
    weights: np.ndarray

    def __post_init__(self):
        if not self.support.is_finite:
            raise DomainError("categorical measures live on finite spaces")
        w = _frozen(self.weights)
        if w.shape != (self.support.size,):
            raise DomainError(f"expected {self.support.size} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise DomainError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, support: HypothesisSpace) -> "Categorical":
        return cls(support, np.full(support.size, 1.0 / support.size))

    @classmethod
    def point_mass(cls, support: HypothesisSpace, index: int) -> "Categorical":
        w = np.zeros(support.size)
        w[index] = 1.0
        return cls(support, w)

    @classmethod
    def from_log_weights(cls, support: HypothesisSpace, log_w) -> "Categorical":
        log_w = np.asarray(log_w, dtype=float)
        if not np.any(np.isfinite(log_w)):
            raise DomainError("all weights are zero")
        w = np.exp(log_w - logsumexp(log_w))
        return cls(support, w / w.sum())

    def expect(self, values) -> float:
        """E_Q[values] with 0 * anything = 0 off the support."""
        v = np.asarray(values, dtype=float)
        mask = self.weights > 0
        return float(np.dot(self.weights[mask], v[mask]))


@dataclass(frozen=True, eq=False)
class DiagGaussian:
    support: HypothesisSpace
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        if self.support.is_finite:
            raise DomainError("Gaussian measures live on euclidean spaces")
        mu, var = _frozen(self.mean), _frozen(self.variance)
        if mu.shape != (self.support.dim,) or var.shape != (self.support.dim,):
            raise DomainError("mean and variance must both have length dim")
        if not np.all(var > 0) or not np.all(np.isfinite(var)) or not np.all(np.isfinite(mu)):
            raise DomainError("variances must be finite and strictly positive")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "variance", var)


PosteriorMeasure = Union[Categorical, DiagGaussian]
ScoreFunction = Union[Sequence[float], np.ndarray, Mapping, Callable]


def _score_vector(score: ScoreFunction, support: HypothesisSpace) -> np.ndarray:
    if isinstance(score, Mapping):
        try:
            return np.array([score[label] for label in support.labels], dtype=float)
        except KeyError as exc:
            raise DomainError(f"score undefined for hypothesis {exc.args[0]!r}") from exc
    if callable(score):
        return np.array([score(label) for label in support.labels], dtype=float)
    v = np.asarray(score, dtype=float)
    if v.shape != (support.size,):
        raise DomainError(f"score must have one value per hypothesis ({support.size}), got shape {v.shape}")
    return v


def _check_same(q: PosteriorMeasure, p: PosteriorMeasure) -> None:
    if type(q) is not type(p):
        raise DomainError("measures have different forms")
    if q.support != p.support:
        raise DomainError("measures live on different hypothesis spaces")


def kl_divergence(q: PosteriorMeasure, p: PosteriorMeasure) -> float:
    """KL(q, p); +inf when q charges an atom p does not."""
    _check_same(q, p)
    if isinstance(q, Categorical):
        mask = q.weights > 0
        if np.any(p.weights[mask] == 0):
            return float("inf")
        qa, pa = q.weights[mask], p.weights[mask]
        kl = float(np.sum(qa * (np.log(qa) - np.log(pa))))
    else:
        ratio = q.variance / p.variance
        kl = 0.5 * float(np.sum(ratio - 1.0 - np.log(ratio) + (q.mean - p.mean) ** 2 / p.variance))
    return max(kl, 0.0)


@dataclass(frozen=True)
class MeasureGap:
    lhs: float
    rhs: float
    slack: float


def change_of_measure_gap(psi: ScoreFunction, q: Categorical, p: Categorical) -> MeasureGap:
    """Both sides of E_Q[psi] <= KL(Q, P) + log E_P[exp psi]."""
    _check_same(q, p)
    if not isinstance(q, Categorical):
        raise DomainError("change-of-measure check needs a finite support")
    v = _score_vector(psi, q.support)
    lhs = q.expect(v)
    kl = kl_divergence(q, p)
    on_p = p.weights > 0
    log_mgf = float(logsumexp(v[on_p], b=p.weights[on_p]))
    rhs = kl + log_mgf
    return MeasureGap(lhs=lhs, rhs=rhs, slack=rhs - lhs)


def gibbs_log_weights(p: Categorical, score, beta: float) -> np.ndarray:
    """Unnormalized log P(h) - beta * score(h); -inf off P's support."""
    v = np.asarray(score, dtype=float)
    with np.errstate(divide="ignore"):
        log_p = np.log(p.weights)
    out = np.full(v.shape, -np.inf)
    on_p = p.weights > 0
    out[on_p] = log_p[on_p] - beta * v[on_p]
    return out


def gibbs_posterior(p: Categorical, score: ScoreFunction, beta: float) -> Categorical:
    """Q*(h) proportional to P(h) exp(-beta score(h)).

    This is the exact minimizer of E_Q[score] + KL(Q, P) / beta.
    """
    if not isinstance(p, Categorical):
        raise DomainError("Gibbs posterior is implemented for finite spaces only")
    if not beta > 0:
        raise DomainError("beta must be positive")
    v = _score_vector(score, p.support)
    return Categorical.from_log_weights(p.support, gibbs_log_weights(p, v, beta))


def gibbs_objective(q: Categorical, p: Categorical, score, beta: float) -> float:
    return q.expect(np.asarray(score, dtype=float)) + kl_divergence(q, p) / beta


def log_partition(p: Categorical, values) -> float:
    """log E_P[exp(values)], overflow-free."""
    v = np.asarray(values, dtype=float)
    on_p = p.weights > 0
    return float(logsumexp(v[on_p], b=p.weights[on_p]))

"""Gibbs-type learners over finite hypothesis sets.

The batch learner minimizes

    E_Q[(1/m) sum_i (loss(h, z_i) + lam/2 loss(h, z_i)^2)] + KL(Q, P) / (lam m)

and the online learner solves, at every round i,

    Q_{i+1} = argmin_Q E_Q[loss(h, z_i) + lam/2 loss(h, z_i)^2] + KL(Q, P_i) / lam

against a prior P_i built from z_1..z_{i-1} only. Both minimizers are Gibbs
measures. Each learner reports the matching certificate; population moments
come from the data model when it has them, otherwise a plug-in estimate is
used and the certificate is marked uncertified.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .certificates import BoundCertificate, EmpiricalMoments, OnlineStep, batch_bound, online_bound
from .distributions import Distribution
from .errors import DomainError, UnsupportedError
from .measures import Categorical, PosteriorMeasure, gibbs_posterior, kl_divergence


@dataclass(frozen=True)
class LossSpec:
    """Nonnegative loss l(h, z); ``fn`` must broadcast over numpy arrays."""

    kind: str
    fn: Optional[Callable] = None

    @classmethod
    def quadratic(cls) -> "LossSpec":
        return cls("quadratic")

    @classmethod
    def absolute(cls) -> "LossSpec":
        return cls("absolute")

    @classmethod
    def custom(cls, fn: Callable) -> "LossSpec":
        return cls("custom", fn)

    def __call__(self, h, z) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.kind == "quadratic":
            out = (h - z) ** 2
        elif self.kind == "absolute":
            out = np.abs(h - z)
        elif self.kind == "custom":
            out = np.asarray(self.fn(h, z), dtype=float)
        else:
            raise DomainError(f"unknown loss kind {self.kind!r}")
        if np.any(out < 0):
            raise DomainError("loss returned a negative value")
        return out

    def matrix(self, points: np.ndarray, z) -> np.ndarray:
        """loss[i, j] = l(points[j], z[i])."""
        z = np.asarray(z, dtype=float)
        return self(np.asarray(points)[None, :], z[:, None])


@dataclass(frozen=True)
class AnalyticMoments:
    """Population risk R(h) and second moment Quad(h) = E[l(h, z)^2] per hypothesis."""

    risk: np.ndarray
    quad: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return np.maximum(self.quad - self.risk**2, 0.0)


def quadratic_moments(dist: Distribution, points) -> AnalyticMoments:
    """Closed form for l(h, z) = (h - z)^2, computed around the mean of z."""
    d = np.asarray(points, dtype=float) - dist.mean
    c2 = dist.central_moment(2)
    c3 = dist.central_moment(3)
    c4 = dist.central_moment(4)
    risk = d**2 + c2
    if np.isinf(c4):
        quad = np.full(d.shape, np.inf)
    else:
        quad = d**4 + 6.0 * d**2 * c2 - 4.0 * d * c3 + c4
    return AnalyticMoments(risk=risk, quad=quad)


@dataclass(frozen=True)
class DataModel:
    """Either an iid stock sampler or an explicit finite stream."""

    kind: str
    distribution: Optional[Distribution] = None
    values: Optional[tuple] = None

    @classmethod
    def iid(cls, dist: Distribution) -> "DataModel":
        return cls("iid", distribution=dist)

    @classmethod
    def stream(cls, values: Sequence[float], source: Optional[Distribution] = None) -> "DataModel":
        """A fixed sequence; ``source`` marks it as a draw from a stock iid family."""
        return cls("stream", distribution=source, values=tuple(float(v) for v in values))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "iid":
            return self.distribution.sample(rng, n)
        if n > len(self.values):
            raise DomainError("stream is shorter than requested")
        return np.asarray(self.values[:n])

    def analytic_moments(self, loss: LossSpec, points) -> Optional[AnalyticMoments]:
        if self.distribution is None or loss.kind != "quadratic":
            return None
        return quadratic_moments(self.distribution, points)


def _require_finite(prior: PosteriorMeasure) -> None:
    if not isinstance(prior, Categorical):
        raise UnsupportedError("learners optimize over finite hypothesis spaces only")


@dataclass(frozen=True)
class BatchFit:
    posterior: Categorical
    certificate: BoundCertificate
    scores: np.ndarray


def batch_scores(losses: np.ndarray, lam: float) -> np.ndarray:
    """Per-hypothesis (1/m) sum_i (l + lam/2 l^2) from an (m, |H|) loss matrix."""
    return np.mean(losses + 0.5 * lam * losses**2, axis=0)


def fit_batch_gibbs(
    data,
    loss: LossSpec,
    prior: Categorical,
    lam: float,
    delta: float = 0.05,
    analytic: Optional[AnalyticMoments] = None,
) -> BatchFit:
    """Exact minimizer of the batch objective, with its anytime certificate."""
    _require_finite(prior)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    z = np.atleast_1d(np.asarray(data, dtype=float))
    m = z.shape[0]
    if m < 1:
        raise DomainError("need at least one sample")
    losses = loss.matrix(prior.support.points(), z)
    scores = batch_scores(losses, lam)
    posterior = gibbs_posterior(prior, scores, beta=lam * m)
    mean_sq = np.mean(losses**2, axis=0)
    quad = analytic.quad if analytic is not None else mean_sq
    moments = EmpiricalMoments(
        mean_loss=posterior.expect(losses.mean(axis=0)),
        mean_sq_loss=posterior.expect(mean_sq),
        quad=posterior.expect(quad),
        m=m,
    )
    cert = batch_bound(moments, kl_divergence(posterior, prior), delta, lam, certified=analytic is not None)
    return BatchFit(posterior=posterior, certificate=cert, scores=scores)


def batch_objective(q: Categorical, prior: Categorical, scores, lam: float, m: int) -> float:
    return q.expect(scores) + kl_divergence(q, prior) / (lam * m)


@dataclass(frozen=True)
class PriorRule:
    """How the round-i prior is formed from z_1..z_{i-1}.

    fixed:               P_i = initial for every i
    previous_posterior:  P_1 = initial, P_i = Q_{i-1}
    custom:              P_i = fn(prefix)
    """

    kind: str
    initial: Optional[Categorical] = None
    fn: Optional[Callable[[np.ndarray], Categorical]] = None

    @classmethod
    def fixed(cls, prior: Categorical) -> "PriorRule":
        return cls("fixed", initial=prior)

    @classmethod
    def previous_posterior(cls, initial: Categorical) -> "PriorRule":
        return cls("previous_posterior", initial=initial)

    @classmethod
    def custom(cls, fn: Callable[[np.ndarray], Categorical]) -> "PriorRule":
        return cls("custom", fn=fn)

    def prior_for(self, prefix: np.ndarray, last_posterior: Optional[Categorical]) -> Categorical:
        if self.kind == "fixed":
            return self.initial
        if self.kind == "previous_posterior":
            return self.initial if last_posterior is None else last_posterior
        if self.kind == "custom":
            # a read-only copy: the rule cannot see or alter anything but the prefix
            view = np.array(prefix, dtype=float)
            view.setflags(write=False)
            return self.fn(view)
        raise DomainError(f"unknown prior rule {self.kind!r}")


@dataclass
class LearnerTrace:
    priors: list
    posteriors: list
    per_step: list
    certificate: BoundCertificate
    cond_risk: np.ndarray = field(default_factory=lambda: np.zeros(0))
    certified: bool = True

    def certificate_at(self, m: int) -> BoundCertificate:
        return online_bound(self.per_step[:m], self.certificate.delta, self.certificate.lam, self.certified)

    def cumulative_bounds(self) -> np.ndarray:
        """Certificate value at every m = 1..n, in one pass."""
        lam = self.certificate.lam
        loss = np.cumsum([s.loss_Q for s in self.per_step])
        var = np.cumsum([s.vhat_Q + s.v_Q for s in self.per_step])
        kl = np.cumsum([s.kl_i for s in self.per_step])
        return loss + 0.5 * lam * var + kl / lam + np.log(1.0 / self.certificate.delta) / lam


def online_scores(loss_row: np.ndarray, lam: float) -> np.ndarray:
    return loss_row + 0.5 * lam * loss_row**2


def run_online_gibbs(
    stream,
    loss: LossSpec,
    prior_rule: PriorRule,
    lam: float,
    delta: float,
    analytic: Optional[AnalyticMoments] = None,
) -> LearnerTrace:
    """Sequential Gibbs learner; posterior i is paired with z_i and prior P_i.

    ``cond_risk[i]`` holds E_{Q_i}[R] when population moments are known.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    z = np.atleast_1d(np.asarray(stream.values if isinstance(stream, DataModel) else stream, dtype=float))
    if analytic is None and isinstance(stream, DataModel) and prior_rule.initial is not None:
        analytic = stream.analytic_moments(loss, prior_rule.initial.support.points())
    n = z.shape[0]
    if n < 1:
        raise DomainError("empty stream")

    priors, posteriors, steps = [], [], []
    cond_risk = np.zeros(n)
    last = None
    loss_hist = None
    for i in range(n):
        prior = prior_rule.prior_for(z[:i], last)
        _require_finite(prior)
        points = prior.support.points()
        if loss_hist is None:
            loss_hist = np.zeros((n, points.size))
        row = loss(points, z[i])
        loss_hist[i] = row
        post = gibbs_posterior(prior, online_scores(row, lam), beta=lam)
        if analytic is not None:
            cond_mean, cond_var = analytic.risk, analytic.variance
            cond_risk[i] = post.expect(analytic.risk)
        elif i > 0:
            cond_mean = loss_hist[:i].mean(axis=0)
            cond_var = loss_hist[:i].var(axis=0)
        else:
            cond_mean = np.zeros(points.size)
            cond_var = np.zeros(points.size)
        steps.append(
            OnlineStep(
                loss_Q=post.expect(row),
                vhat_Q=post.expect((row - cond_mean) ** 2),
                v_Q=post.expect(cond_var),
                kl_i=kl_divergence(post, prior),
            )
        )
        priors.append(prior)
        posteriors.append(post)
        last = post

    certified = analytic is not None
    cert = online_bound(steps, delta, lam, certified=certified)
    return LearnerTrace(priors=priors, posteriors=posteriors, per_step=steps, certificate=cert, cond_risk=cond_risk, certified=certified)


def online_objective(q: Categorical, prior: Categorical, scores, lam: float) -> float:
    return q.expect(scores) + kl_divergence(q, prior) / lam


@dataclass(frozen=True)
class MonitorRow:
    m: int
    lhs: float
    rhs: BoundCertificate
    violated: bool


def fixed_rule(prior: Categorical) -> Callable[[np.ndarray], Categorical]:
    return lambda prefix: prior


def gibbs_rule(prior: Categorical, loss: LossSpec, lam: float) -> Callable[[np.ndarray], Categorical]:
    """Batch Gibbs posterior on the prefix seen so far."""

    def rule(prefix):
        losses = loss.matrix(prior.support.points(), prefix)
        return gibbs_posterior(prior, batch_scores(losses, lam), beta=lam * len(prefix))

    return rule


def anytime_batch_monitor(
    data_model: DataModel,
    loss: LossSpec,
    prior: Categorical,
    posterior_rule: Callable[[np.ndarray], Categorical],
    lam: float,
    delta: float,
    horizon: int,
    rng: np.random.Generator,
) -> list[MonitorRow]:
    """Both sides of the anytime batch bound at every m <= horizon."""
    _require_finite(prior)
    points = prior.support.points()
    analytic = data_model.analytic_moments(loss, points)
    if analytic is None:
        raise UnsupportedError("monitoring needs a data model with analytic risks")
    z = data_model.sample(rng, horizon)
    losses = loss.matrix(points, z)
    cum = np.cumsum(losses, axis=0)
    cum_sq = np.cumsum(losses**2, axis=0)
    rows = []
    for m in range(1, horizon + 1):
        q = posterior_rule(z[:m])
        moments = EmpiricalMoments(
            mean_loss=q.expect(cum[m - 1] / m),
            mean_sq_loss=q.expect(cum_sq[m - 1] / m),
            quad=q.expect(analytic.quad),
            m=m,
        )
        cert = batch_bound(moments, kl_divergence(q, prior), delta, lam)
        lhs = q.expect(analytic.risk)
        rows.append(MonitorRow(m=m, lhs=lhs, rhs=cert, violated=bool(lhs > cert.value + 1e-9)))
    return rows

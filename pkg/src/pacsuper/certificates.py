"""Closed-form evaluators for the supermartingale PAC-Bayes bounds and the
classical bounds they are compared against.

Evaluators are pure arithmetic over caller-supplied statistics. Each returns a
:class:`BoundCertificate` whose terms are stored already scaled, so that
``value == empirical_term + kl_term + confidence_term + variance_term``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

_RECON_TOL = 1e-12


class Kind(str, enum.Enum):
    MARTINGALE = "Martingale"
    BATCH = "Batch"
    ONLINE = "Online"
    BANDIT = "Bandit"
    COR1 = "Cor1"
    COR2_ANYTIME = "Cor2Anytime"
    COR2_LOCAL = "Cor2Local"
    COR3 = "Cor3"
    SELDIN = "SeldinBaseline"
    CATONI = "CatoniBaseline"
    HYPE = "HypeBaseline"
    ONLINE_BOUNDED = "OnlineBoundedBaseline"


@dataclass(frozen=True)
class BoundCertificate:
    value: float
    kl_term: float
    confidence_term: float
    variance_term: float
    lam: float
    delta: float
    m: int
    kind: Kind
    empirical_term: float = 0.0
    valid: bool = True
    certified: bool = True

    def __post_init__(self):
        terms = (self.empirical_term, self.kl_term, self.confidence_term, self.variance_term)
        if any(t < 0 or math.isnan(t) for t in terms):
            raise DomainError(f"certificate terms must be nonnegative: {terms}")
        if any(math.isinf(t) for t in terms):
            if self.value != math.inf:
                raise DomainError("an infinite term must give an infinite value")
            return
        total = self.recompute()
        if abs(total - self.value) > _RECON_TOL * max(1.0, abs(total)):
            raise DomainError(f"value {self.value!r} does not match its terms ({total!r})")

    def recompute(self) -> float:
        return self.empirical_term + self.kl_term + self.confidence_term + self.variance_term

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "empirical_term": self.empirical_term,
            "kl_term": self.kl_term,
            "confidence_term": self.confidence_term,
            "variance_term": self.variance_term,
            "lambda": self.lam,
            "delta": self.delta,
            "m": self.m,
            "valid": self.valid,
            "certified": self.certified,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundCertificate":
        return cls(
            value=float(d["value"]),
            kl_term=float(d["kl_term"]),
            confidence_term=float(d["confidence_term"]),
            variance_term=float(d["variance_term"]),
            lam=float(d["lambda"]),
            delta=float(d["delta"]),
            m=int(d["m"]),
            kind=Kind(d["kind"]),
            empirical_term=float(d["empirical_term"]),
            valid=bool(d["valid"]),
            certified=bool(d["certified"]),
        )


def _make(kind, lam, delta, m, *, empirical=0.0, kl=0.0, conf=0.0, var=0.0, valid=True, certified=True):
    terms = (empirical, kl, conf, var)
    value = math.inf if any(math.isinf(t) for t in terms) else empirical + kl + conf + var
    return BoundCertificate(
        value=value,
        kl_term=kl,
        confidence_term=conf,
        variance_term=var,
        lam=lam,
        delta=delta,
        m=int(m),
        kind=kind,
        empirical_term=empirical,
        valid=valid,
        certified=certified,
    )


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")


def _check_lambda(lam: float) -> None:
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"lambda must be a positive finite number, got {lam!r}")


def _check_nonneg(**named) -> None:
    for name, v in named.items():
        if not v >= 0:
            raise DomainError(f"{name} must be nonnegative, got {v!r}")


def _check_m(m: int) -> None:
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m!r}")


def _over(numerator: float, denom: float) -> float:
    # keeps kl = +inf from turning into nan
    return math.inf if math.isinf(numerator) else numerator / denom


@dataclass(frozen=True)
class EmpiricalMoments:
    """Q-averaged sample statistics at sample size m.

    mean_loss is E_Q[R_m], mean_sq_loss is E_Q[(1/m) sum loss^2] and quad is
    E_Q[Quad], the population second moment of the loss.
    """

    mean_loss: float
    mean_sq_loss: float
    quad: float
    m: int

    def __post_init__(self):
        _check_nonneg(mean_loss=self.mean_loss, mean_sq_loss=self.mean_sq_loss, quad=self.quad)
        _check_m(self.m)


def martingale_bound(kl: float, delta: float, lam: float, bracket_Q: float, angle_Q: float, m: int = 1) -> BoundCertificate:
    """Upper bound on |M_m(Q)| valid for all m and Q simultaneously.

    (kl + log(2/delta)) / lam + lam / 2 * ([M]_m(Q) + <M>_m(Q))
    """
    _check_delta(delta)
    _check_lambda(lam)
    _check_nonneg(kl=kl, bracket_Q=bracket_Q, angle_Q=angle_Q)
    return _make(
        Kind.MARTINGALE, lam, delta, m,
        kl=_over(kl, lam),
        conf=math.log(2.0 / delta) / lam,
        var=0.5 * lam * (bracket_Q + angle_Q),
    )


def optimal_lambda_oracle(kl: float, delta: float, variance_sum: float) -> float:
    """Minimizer in lambda of the martingale bound.

    Diagnostic only: the minimizer depends on the data, so a bound evaluated
    at it is not certified.
    """
    _check_delta(delta)
    _check_nonneg(kl=kl)
    if not variance_sum > 0:
        raise DomainError("variance_sum must be positive")
    return math.sqrt(2.0 * (kl + math.log(2.0 / delta)) / variance_sum)


def batch_bound(moments: EmpiricalMoments, kl: float, delta: float, lam: float, certified: bool = True) -> BoundCertificate:
    """Anytime upper bound on E_Q[R] for iid data and a nonnegative loss."""
    _check_delta(delta)
    _check_lambda(lam)
    _check_nonneg(kl=kl)
    m = moments.m
    return _make(
        Kind.BATCH, lam, delta, m,
        empirical=moments.mean_loss,
        kl=_over(kl, lam * m),
        conf=math.log(2.0 / delta) / (lam * m),
        var=0.5 * lam * (moments.mean_sq_loss + moments.quad),
        certified=certified,
    )


@dataclass(frozen=True)
class OnlineStep:
    """Per-round statistics under the round's posterior Q_i."""

    loss_Q: float
    vhat_Q: float
    v_Q: float
    kl_i: float


def online_bound(steps: Sequence[OnlineStep], delta: float, lam: float, certified: bool = True) -> BoundCertificate:
    """Upper bound on the cumulative conditional risk sum_i E_{Q_i}[E[loss | past]]."""
    _check_delta(delta)
    _check_lambda(lam)
    if len(steps) == 0:
        raise DomainError("need at least one step")
    loss = np.array([s.loss_Q for s in steps], dtype=float)
    var = np.array([s.vhat_Q + s.v_Q for s in steps], dtype=float)
    kls = np.array([s.kl_i for s in steps], dtype=float)
    if np.any(loss < 0) or np.any(var < 0) or np.any(kls < 0):
        raise DomainError("online step statistics must be nonnegative")
    return _make(
        Kind.ONLINE, lam, delta, len(steps),
        empirical=float(loss.sum()),
        kl=_over(float(kls.sum()), lam),
        conf=math.log(1.0 / delta) / lam,
        var=0.5 * lam * float(var.sum()),
        certified=certified,
    )


def bandit_regret_bound(K: int, delta: float, m: int, eps_m: float, second_moment_bound: float = 1.0) -> BoundCertificate:
    """Single-time bound on |Delta(Q) - Delta_hat_m(Q)| over all Q on K arms.

    2 * sqrt(C (1 + 2K/delta)(log K + log(4/delta)) / (m eps_m)); with the
    default C = 1 this is the bound for rewards whose second moments are at
    most 1. The returned lambda is the deterministic tuning that attains it.
    """
    if int(K) != K or K < 2:
        raise DomainError("need at least two arms")
    _check_delta(delta)
    _check_m(m)
    if not 0 < eps_m <= 1:
        raise DomainError("eps_m must lie in (0, 1]")
    if eps_m * K > 1 + 1e-12:
        raise DomainError(f"eps_m * K = {eps_m * K} > 1: no policy has that floor")
    if not second_moment_bound > 0:
        raise DomainError("second_moment_bound must be positive")
    log_k, log_conf = math.log(K), math.log(4.0 / delta)
    slope = second_moment_bound * (1.0 + 2.0 * K / delta) / eps_m
    lam = math.sqrt((log_k + log_conf) / (slope * m))
    return _make(
        Kind.BANDIT, lam, delta, m,
        kl=log_k / (lam * m),
        conf=log_conf / (lam * m),
        var=lam * slope,
    )


def union_bound_weights(delta: float, k_max: int) -> np.ndarray:
    """delta_k = delta / (k (k + 1)) for k = 1..k_max; the full series sums to delta."""
    _check_delta(delta)
    k = np.arange(1, k_max + 1, dtype=float)
    return delta / (k * (k + 1.0))


def cor1_bound(
    kl: float,
    k: int,
    delta: float,
    lam_k: float,
    bracket_Q: float = 0.0,
    angle_Q: float = 0.0,
    *,
    c_sq_sum: float | None = None,
    m: int | None = None,
) -> BoundCertificate:
    """Martingale bound made uniform over a countable grid of (lambda_k, P_k).

    With ``c_sq_sum`` given, uses the bounded-increment form where the
    variance term is lam_k * sum_i C_i^2 (and k plays the role of m).
    """
    _check_delta(delta)
    _check_lambda(lam_k)
    _check_m(k)
    _check_nonneg(kl=kl, bracket_Q=bracket_Q, angle_Q=angle_Q)
    if c_sq_sum is None:
        var = 0.5 * lam_k * (bracket_Q + angle_Q)
    else:
        _check_nonneg(c_sq_sum=c_sq_sum)
        var = lam_k * c_sq_sum
    return _make(
        Kind.COR1, lam_k, delta, m if m is not None else k,
        kl=_over(kl, lam_k),
        conf=(2.0 * math.log(k + 1.0) + math.log(2.0 / delta)) / lam_k,
        var=var,
    )


@dataclass(frozen=True)
class Cor2Bounds:
    anytime: BoundCertificate
    local: BoundCertificate


def cor2_bounds(
    kl: float, delta: float, lam: float, m: int, K_bound: float, empirical_risk_Q: float = 0.0
) -> Cor2Bounds:
    """Bounded-loss bounds: an anytime two-sided gap bound and a single-m bound.

    anytime: (kl + log(2/delta)) / (lam m) + lam K^2
    local:   (kl + log(2/delta)) / lam + lam K^2 / m
    ``empirical_risk_Q`` is added to both so they read as risk bounds.
    """
    _check_delta(delta)
    _check_lambda(lam)
    _check_m(m)
    _check_nonneg(kl=kl, K_bound=K_bound, empirical_risk_Q=empirical_risk_Q)
    conf = math.log(2.0 / delta)
    anytime = _make(
        Kind.COR2_ANYTIME, lam, delta, m,
        empirical=empirical_risk_Q, kl=_over(kl, lam * m), conf=conf / (lam * m), var=lam * K_bound**2,
    )
    local = _make(
        Kind.COR2_LOCAL, lam, delta, m,
        empirical=empirical_risk_Q, kl=_over(kl, lam), conf=conf / lam, var=lam * K_bound**2 / m,
    )
    return Cor2Bounds(anytime=anytime, local=local)


def cor3_bound(moments: EmpiricalMoments, kl: float, delta: float, alpha: float, K2_Q: float) -> BoundCertificate:
    """HYPE-style bound driven by E_Q[K(h)^2] instead of an exponential moment.

    E_Q[(1/m) sum (loss + loss^2 / (2 m^(1-alpha)))] + (kl + log(1/delta)) / m^alpha
    + E_Q[K^2] / (2 m^(1-alpha)). ``moments.quad`` is ignored.
    """
    _check_delta(delta)
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha must lie in [0, 1]")
    _check_nonneg(kl=kl, K2_Q=K2_Q)
    m = moments.m
    half_w = 1.0 / (2.0 * m ** (1.0 - alpha))
    m_a = float(m) ** alpha
    return _make(
        Kind.COR3, m ** (alpha - 1.0), delta, m,
        empirical=moments.mean_loss,
        kl=_over(kl, m_a),
        conf=math.log(1.0 / delta) / m_a,
        var=half_w * (moments.mean_sq_loss + K2_Q),
    )


def baseline_seldin(
    kl: float,
    m: int,
    delta: float,
    lam_m: float,
    variance: float,
    mode: str = "variance",
    c_m: float | None = None,
) -> BoundCertificate:
    """PAC-Bayes-Bernstein inequality for bounded martingale differences.

    (kl + 2 log(m+1) + log(2/delta)) / lam_m + (e - 2) lam_m * variance, where
    ``variance`` is V_m(Q) (mode "variance") or sum_i C_i^2 (mode "cbound").
    The requirement lam_m <= 1 / C_m is recorded in ``valid``, not enforced.
    """
    if mode not in ("variance", "cbound"):
        raise DomainError(f"unknown mode {mode!r}")
    _check_delta(delta)
    _check_lambda(lam_m)
    _check_m(m)
    _check_nonneg(kl=kl, variance=variance)
    valid = True if c_m is None else bool(lam_m * c_m <= 1.0)
    return _make(
        Kind.SELDIN, lam_m, delta, m,
        kl=_over(kl, lam_m),
        conf=(2.0 * math.log(m + 1.0) + math.log(2.0 / delta)) / lam_m,
        var=(math.e - 2.0) * lam_m * variance,
        valid=valid,
    )


def baseline_catoni(kl: float, delta: float, lam: float, m: int, K_bound: float, empirical_risk_Q: float) -> BoundCertificate:
    """Bounded-loss single-m bound: R_m + (kl + log(1/delta)) / lam + lam K^2 / (2m)."""
    _check_delta(delta)
    _check_lambda(lam)
    _check_m(m)
    _check_nonneg(kl=kl, K_bound=K_bound, empirical_risk_Q=empirical_risk_Q)
    return _make(
        Kind.CATONI, lam, delta, m,
        empirical=empirical_risk_Q,
        kl=_over(kl, lam),
        conf=math.log(1.0 / delta) / lam,
        var=lam * K_bound**2 / (2.0 * m),
    )


def hype_exp_moment_log(prior_weights, envelope, m: int, alpha: float) -> float:
    """log E_P[exp(K(h)^2 / (2 m^(1 - 2 alpha)))] on a finite space."""
    w = np.asarray(prior_weights, dtype=float)
    k = np.asarray(envelope, dtype=float)
    on = w > 0
    return float(logsumexp(k[on] ** 2 / (2.0 * m ** (1.0 - 2.0 * alpha)), b=w[on]))


def baseline_hype(
    kl: float, delta: float, alpha: float, m: int, exp_moment_log: float, empirical_risk_Q: float
) -> BoundCertificate:
    """R_m + (kl + log(1/delta)) / m^alpha + exp_moment_log / m^alpha.

    ``lam`` on the certificate holds m^(alpha - 1), the equivalent temperature.
    """
    _check_delta(delta)
    _check_m(m)
    _check_nonneg(kl=kl, exp_moment_log=exp_moment_log, empirical_risk_Q=empirical_risk_Q)
    m_a = float(m) ** alpha
    return _make(
        Kind.HYPE, m ** (alpha - 1.0), delta, m,
        empirical=empirical_risk_Q,
        kl=_over(kl, m_a),
        conf=math.log(1.0 / delta) / m_a,
        var=exp_moment_log / m_a,
    )


def baseline_online_bounded(
    cumulative_loss_Q: float, kl_sum: float, delta: float, lam: float, m: int, K_bound: float
) -> BoundCertificate:
    """Bounded-loss online bound: sum loss + sum KL / lam + lam m K^2 / 2 + log(1/delta) / lam."""
    _check_delta(delta)
    _check_lambda(lam)
    _check_m(m)
    _check_nonneg(cumulative_loss_Q=cumulative_loss_Q, kl_sum=kl_sum, K_bound=K_bound)
    return _make(
        Kind.ONLINE_BOUNDED, lam, delta, m,
        empirical=cumulative_loss_Q,
        kl=_over(kl_sum, lam),
        conf=math.log(1.0 / delta) / lam,
        var=0.5 * lam * m * K_bound**2,
    )

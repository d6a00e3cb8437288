"""Side-by-side certificate values on one shared set of simulated statistics.

One data path is drawn; for each (m, lambda) the batch Gibbs posterior at m is
fixed and every evaluator sees the same KL, empirical moments and variances.
Rows carrying a martingale or online certificate are on the cumulative (sum)
scale; the rest bound the risk itself.
"""
from __future__ import annotations

import math

import numpy as np

from .._rng import trial_rng
from ..certificates import (
    EmpiricalMoments,
    baseline_catoni,
    baseline_hype,
    baseline_online_bounded,
    baseline_seldin,
    batch_bound,
    cor1_bound,
    cor2_bounds,
    cor3_bound,
    hype_exp_moment_log,
    martingale_bound,
)
from ..errors import DomainError
from ..learners import LossSpec, PriorRule, batch_scores, quadratic_moments, run_online_gibbs
from ..measures import Categorical, HypothesisSpace, gibbs_posterior, kl_divergence
from .config import ConfigError, ExperimentConfig

COLUMNS = {
    "m": int,
    "lambda": float,
    "certificate_kind": str,
    "value": float,
    "validity_flag": bool,
    "empirical_term": float,
    "kl_term": float,
    "confidence_term": float,
    "variance_term": float,
}


def loss_envelope(cfg: ExperimentConfig) -> float:
    """sup over z in the data support of max_h (h - z)^2; inf for unbounded data."""
    d = cfg.data
    if d.family == "uniform":
        lo, hi = d.loc, d.loc + d.scale
    elif d.family == "constant":
        lo = hi = d.loc
    else:
        return math.inf
    h = np.asarray(cfg.hypotheses, dtype=float)
    return float(np.max(np.maximum((h - lo) ** 2, (h - hi) ** 2)))


def _row(cert, name: str, bounded_ok: bool = True) -> dict:
    return {
        "m": cert.m,
        "lambda": cert.lam,
        "certificate_kind": name,
        "value": cert.value,
        "validity_flag": bool(cert.valid and cert.certified and bounded_ok),
        "empirical_term": cert.empirical_term,
        "kl_term": cert.kl_term,
        "confidence_term": cert.confidence_term,
        "variance_term": cert.variance_term,
    }


def run_tightness(cfg: ExperimentConfig) -> list[dict]:
    if cfg.loss != "quadratic":
        raise ConfigError("loss: tightness needs the quadratic loss")
    points = np.asarray(cfg.hypotheses, dtype=float)
    space = HypothesisSpace.finite(tuple(cfg.hypotheses))
    prior = Categorical.uniform(space)
    am = quadratic_moments(cfg.data, points)
    K = cfg.K_bound
    bounded = loss_envelope(cfg) <= K
    n = max(cfg.m_grid)
    z = cfg.data.sample(trial_rng(cfg.seed, 0), n)
    L = (points[None, :] - z[:, None]) ** 2
    cum = np.cumsum(L, axis=0)
    cum_sq = np.cumsum(L**2, axis=0)
    cum_dev = np.cumsum((L - am.risk) ** 2, axis=0)
    env_log = {m: hype_exp_moment_log(prior.weights, np.full(points.size, K), m, cfg.alpha) for m in cfg.m_grid}

    rows = []
    for lam in cfg.lambdas:
        trace = run_online_gibbs(z, LossSpec.quadratic(), PriorRule.previous_posterior(prior), lam, cfg.delta, analytic=am)
        for m in sorted(cfg.m_grid):
            emp = cum[m - 1] / m
            emp_sq = cum_sq[m - 1] / m
            q = gibbs_posterior(prior, batch_scores(L[:m], lam), beta=lam * m)
            kl = kl_divergence(q, prior)
            moments = EmpiricalMoments(q.expect(emp), q.expect(emp_sq), q.expect(am.quad), m)
            bracket = q.expect(cum_dev[m - 1])
            angle = m * q.expect(am.variance)
            c_sq = m * K**2
            cor2 = cor2_bounds(kl, cfg.delta, lam, m, K, moments.mean_loss)
            steps = trace.per_step[:m]
            try:
                hype = baseline_hype(kl, cfg.delta, cfg.alpha, m, env_log[m], moments.mean_loss)
            except DomainError:
                hype = None
            out = [
                _row(martingale_bound(kl, cfg.delta, lam, bracket, angle, m), "martingale"),
                _row(cor1_bound(kl, m, cfg.delta, lam, bracket, angle), "cor1_variance"),
                _row(cor1_bound(kl, m, cfg.delta, lam, c_sq_sum=c_sq, m=m), "cor1_cbound", bounded),
                _row(cor2.anytime, "cor2_anytime", bounded),
                _row(cor2.local, "cor2_local", bounded),
                _row(batch_bound(moments, kl, cfg.delta, lam), "batch"),
                _row(cor3_bound(moments, kl, cfg.delta, cfg.alpha, K**2), "cor3", bounded),
                _row(baseline_seldin(kl, m, cfg.delta, lam, angle, "variance", c_m=K), "seldin_variance", bounded),
                _row(baseline_seldin(kl, m, cfg.delta, lam, c_sq, "cbound", c_m=K), "seldin_cbound", bounded),
                _row(baseline_catoni(kl, cfg.delta, lam, m, K, moments.mean_loss), "catoni", bounded),
            ]
            if hype is not None:
                out.append(_row(hype, "hype", bounded))
            out.append(_row(trace.certificate_at(m), "online"))
            out.append(
                _row(
                    baseline_online_bounded(
                        sum(s.loss_Q for s in steps), sum(s.kl_i for s in steps), cfg.delta, lam, m, K
                    ),
                    "online_bounded",
                    bounded,
                )
            )
            rows.extend(out)
    return rows

"""Monte Carlo adjudication of the anytime bounds.

Every trial simulates one data path and asks whether the bound fails at any
m <= horizon. Left-hand sides are exact (population risks are closed form), so
a violation is a real violation, not estimation noise.

For a finite hypothesis set the supremum over all posteriors of (lhs - rhs) is
itself a log-partition function, so the "for all Q" quantifier can be checked
exactly: e.g. for the batch bound

    sup_Q [E_Q g - KL(Q, P) / (lam m)] = log E_P[exp(lam m g)] / (lam m).

The "finite" posterior set instead checks the prior, the point mass on the
risk minimizer and the Gibbs learner's posterior.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.special import logsumexp

from .._rng import GENERATOR_NAME, trial_rng
from ..bandit import variance_budget_ratio, variance_tail_threshold, simulate_batch
from ..certificates import bandit_regret_bound
from ..learners import quadratic_moments
from ..processes import STOCK_MODELS, supermartingale_mean_check
from .config import ExperimentConfig
from .parallel import map_chunks

_TOL = 1e-9


@dataclass
class CoverageReport:
    experiment: str
    target: str
    trials: int
    horizon: int
    delta: float
    lam: float
    violations_anytime: int
    violation_freq: float
    binomial_stderr: float
    first_violation_histogram: dict
    posterior_set: str
    seed: int
    generator: str = GENERATOR_NAME
    extras: dict = field(default_factory=dict)

    def within(self, n_sigma: float = 3.0) -> bool:
        return self.violation_freq <= self.delta + n_sigma * self.binomial_stderr

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "target": self.target,
            "trials": self.trials,
            "horizon": self.horizon,
            "delta": self.delta,
            "lambda": self.lam,
            "violations_anytime": self.violations_anytime,
            "violation_freq": self.violation_freq,
            "binomial_stderr": self.binomial_stderr,
            "first_violation_histogram": {str(k): v for k, v in sorted(self.first_violation_histogram.items())},
            "posterior_set": self.posterior_set,
            "seed": self.seed,
            "generator": self.generator,
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoverageReport":
        return cls(
            experiment=d["experiment"],
            target=d["target"],
            trials=int(d["trials"]),
            horizon=int(d["horizon"]),
            delta=float(d["delta"]),
            lam=float(d["lambda"]),
            violations_anytime=int(d["violations_anytime"]),
            violation_freq=float(d["violation_freq"]),
            binomial_stderr=float(d["binomial_stderr"]),
            first_violation_histogram={int(k): int(v) for k, v in d["first_violation_histogram"].items()},
            posterior_set=d["posterior_set"],
            seed=int(d["seed"]),
            generator=d["generator"],
            extras=d.get("extras", {}),
        )


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def _first(flags: np.ndarray) -> int:
    """1-based index of the first True, 0 if none."""
    idx = np.flatnonzero(flags)
    return int(idx[0]) + 1 if idx.size else 0


def _aggregate(cfg: ExperimentConfig, target: str, lam: float, firsts, posterior_set: str, extras=None) -> CoverageReport:
    hist: dict = {}
    for f in firsts:
        if f > 0:
            hist[f] = hist.get(f, 0) + 1
    n = len(firsts)
    v = sum(hist.values())
    return CoverageReport(
        experiment=cfg.experiment,
        target=target,
        trials=n,
        horizon=cfg.horizon,
        delta=cfg.delta,
        lam=lam,
        violations_anytime=v,
        violation_freq=v / n,
        binomial_stderr=binomial_stderr(cfg.delta, n),
        first_violation_histogram=hist,
        posterior_set=posterior_set,
        seed=cfg.seed,
        extras=extras or {},
    )


@dataclass(frozen=True)
class _Setup:
    points: np.ndarray
    log_prior: np.ndarray
    risk: np.ndarray
    quad: np.ndarray
    var: np.ndarray
    best: int


def _setup(cfg: ExperimentConfig) -> _Setup:
    points = np.asarray(cfg.hypotheses, dtype=float)
    if cfg.loss != "quadratic":
        raise ValueError("coverage experiments need the quadratic loss (closed-form risks)")
    am = quadratic_moments(cfg.data, points)
    return _Setup(
        points=points,
        log_prior=np.full(points.size, -math.log(points.size)),
        risk=am.risk,
        quad=am.quad,
        var=am.variance,
        best=int(np.argmin(am.risk)),
    )


def _q_dot(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise E_Q[v] with 0 * inf = 0; q has shape (n, |H|), v (|H|,) or (n, |H|)."""
    v = np.broadcast_to(v, q.shape)
    with np.errstate(invalid="ignore"):
        return np.where(q > 0, q * v, 0.0).sum(axis=1)


def _row_kl(q: np.ndarray, log_p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(q > 0, q * (np.log(q) - log_p), 0.0)
    return np.maximum(t.sum(axis=1), 0.0)


def _finite_set(s: _Setup, n: int, gibbs_logits: np.ndarray) -> list[np.ndarray]:
    k = s.points.size
    uniform = np.full((n, k), 1.0 / k)
    point = np.zeros((n, k))
    point[:, s.best] = 1.0
    gibbs = np.exp(gibbs_logits - logsumexp(gibbs_logits, axis=1, keepdims=True))
    return [uniform, point, gibbs]


def batch_paths(s: _Setup, z: np.ndarray, lam: float, delta: float):
    """Per-m violation flags for the batch bound: (exact supremum, finite set)."""
    n = z.size
    L = (s.points[None, :] - z[:, None]) ** 2
    m = np.arange(1, n + 1, dtype=float)[:, None]
    emp = np.cumsum(L, axis=0) / m
    emp_sq = np.cumsum(L**2, axis=0) / m
    with np.errstate(invalid="ignore"):
        penalty = emp + 0.5 * lam * emp_sq + 0.5 * lam * s.quad
        g = s.risk - penalty
        stat = logsumexp(s.log_prior + lam * m * g, axis=1)
    conf = math.log(2.0 / delta)
    exact = (stat - conf) / (lam * m[:, 0]) > _TOL

    gibbs_logits = s.log_prior - lam * m * (emp + 0.5 * lam * emp_sq)
    finite = np.zeros(n, dtype=bool)
    for q in _finite_set(s, n, gibbs_logits):
        lhs = _q_dot(q, s.risk)
        rhs = _q_dot(q, emp) + 0.5 * lam * _q_dot(q, emp_sq) + (_row_kl(q, s.log_prior) + conf) / (lam * m[:, 0]) + 0.5 * lam * _q_dot(q, s.quad)
        finite |= lhs > rhs + _TOL
    return exact, finite


def martingale_parts(s: _Setup, z: np.ndarray):
    """M_m(h), [M]_m(h), <M>_m(h) for M_m(h) = sum_i (loss(h, z_i) - R(h))."""
    n = z.size
    L = (s.points[None, :] - z[:, None]) ** 2
    X = L - s.risk
    m = np.arange(1, n + 1, dtype=float)[:, None]
    with np.errstate(invalid="ignore"):
        angle = m * s.var
    return np.cumsum(X, axis=0), np.cumsum(X**2, axis=0), angle


def martingale_paths(s: _Setup, z: np.ndarray, lam: float, delta: float):
    M, br, an = martingale_parts(s, z)
    conf = math.log(2.0 / delta)
    with np.errstate(invalid="ignore"):
        quad_var = 0.5 * lam * lam * (br + an)
        up = logsumexp(s.log_prior + lam * M - quad_var, axis=1)
        down = logsumexp(s.log_prior - lam * M - quad_var, axis=1)
    exact = (np.maximum(up, down) - conf) / lam > _TOL

    n = z.size
    m = np.arange(1, n + 1, dtype=float)[:, None]
    L = (s.points[None, :] - z[:, None]) ** 2
    emp = np.cumsum(L, axis=0) / m
    emp_sq = np.cumsum(L**2, axis=0) / m
    gibbs_logits = s.log_prior - lam * m * (emp + 0.5 * lam * emp_sq)
    finite = np.zeros(n, dtype=bool)
    for q in _finite_set(s, n, gibbs_logits):
        lhs = np.abs(_q_dot(q, M))
        rhs = (_row_kl(q, s.log_prior) + conf) / lam + 0.5 * lam * _q_dot(q, br + an)
        finite |= lhs > rhs + _TOL
    return exact, finite


def ville_log_path(s: _Setup, z: np.ndarray, eta: float) -> np.ndarray:
    """log Z_m with Z_m = E_P[exp(eta M_m(h) - eta^2/2 ([M]_m(h) + <M>_m(h)))]."""
    M, br, an = martingale_parts(s, z)
    with np.errstate(invalid="ignore"):
        return logsumexp(s.log_prior + eta * M - 0.5 * eta * eta * (br + an), axis=1)


def online_log_posteriors(s: _Setup, z: np.ndarray, lam: float, prior_rule: str):
    """Log priors and log posteriors of the sequential Gibbs learner, shape (n, |H|) each.

    Q_i is proportional to P_i exp(-lam (l_i + lam l_i^2 / 2)); with the previous
    posterior as prior this telescopes into a cumulative sum.
    """
    L = (s.points[None, :] - z[:, None]) ** 2
    score = L + 0.5 * lam * L**2
    if prior_rule == "previous_posterior":
        logits = s.log_prior - lam * np.cumsum(score, axis=0)
        log_q = logits - logsumexp(logits, axis=1, keepdims=True)
        log_p = np.vstack([s.log_prior[None, :], log_q[:-1]])
    else:
        log_p = np.broadcast_to(s.log_prior, L.shape)
        logits = log_p - lam * score
        log_q = logits - logsumexp(logits, axis=1, keepdims=True)
    return log_p, log_q


def online_paths(s: _Setup, z: np.ndarray, lam: float, delta: float, prior_rule: str):
    """Flags for the online bound: (exact supremum over posterior sequences, realized learner posteriors)."""
    L = (s.points[None, :] - z[:, None]) ** 2
    log_p, log_q = online_log_posteriors(s, z, lam, prior_rule)
    q = np.exp(log_q)
    vhat = (L - s.risk) ** 2
    with np.errstate(invalid="ignore"):
        kl = np.maximum(np.where(q > 0, q * (log_q - log_p), 0.0).sum(axis=1), 0.0)
    conf = math.log(1.0 / delta)
    bound = np.cumsum(_q_dot(q, L) + 0.5 * lam * (_q_dot(q, vhat) + _q_dot(q, s.var)) + kl / lam) + conf / lam
    realized = np.cumsum(_q_dot(q, s.risk)) > bound + _TOL

    with np.errstate(invalid="ignore"):
        inc = logsumexp(log_p + lam * (s.risk - L) - 0.5 * lam * lam * (vhat + s.var), axis=1)
    exact = np.cumsum(inc) > conf + _TOL * lam
    return exact, realized


def _coverage_chunk(cfg: ExperimentConfig, lam: float, first: int, count: int) -> list:
    s = _setup(cfg)
    out = []
    for t in range(first, first + count):
        z = cfg.data.sample(trial_rng(cfg.seed, t), cfg.horizon)
        if cfg.target == "batch":
            exact, finite = batch_paths(s, z, lam, cfg.delta)
        elif cfg.target == "martingale":
            exact, finite = martingale_paths(s, z, lam, cfg.delta)
        elif cfg.target == "online":
            exact, finite = online_paths(s, z, lam, cfg.delta, cfg.prior_rule)
        else:
            eta = cfg.eta if cfg.eta is not None else lam
            exact = ville_log_path(s, z, eta) > math.log(1.0 / cfg.delta)
            finite = exact
        out.append((_first(exact), _first(finite)))
    return out


def run_coverage(cfg: ExperimentConfig, lam: float | None = None) -> CoverageReport:
    """Anytime violation frequency of one bound at one lambda."""
    lam = cfg.lambdas[0] if lam is None else lam
    res = map_chunks(partial(_coverage_chunk, cfg, lam), cfg.trials, cfg.workers)
    exact_first = [r[0] for r in res]
    finite_first = [r[1] for r in res]
    if cfg.target == "ville":
        set_name = "ville_direct"
        chosen = exact_first
    elif cfg.target == "online":
        set_name = "exact_supremum" if cfg.exact_sup else "realized_posteriors"
        chosen = exact_first if cfg.exact_sup else finite_first
    else:
        set_name = "exact_supremum" if cfg.exact_sup else "finite:uniform+risk_minimizer+gibbs"
        chosen = exact_first if cfg.exact_sup else finite_first
    extras = {
        "exact_supremum_violations": sum(1 for f in exact_first if f),
        "finite_set_violations": sum(1 for f in finite_first if f),
        "data": cfg.data.to_dict(),
        "hypotheses": list(cfg.hypotheses),
    }
    if cfg.target == "ville":
        extras["eta"] = cfg.eta if cfg.eta is not None else lam
    return _aggregate(cfg, cfg.target, lam, chosen, set_name, extras)


def run_coverage_grid(cfg: ExperimentConfig) -> list[CoverageReport]:
    return [run_coverage(cfg, lam) for lam in cfg.lambdas]


def _bandit_chunk(cfg: ExperimentConfig, first: int, count: int) -> list:
    env = cfg.bandit_env()
    schedule = cfg.schedule()
    m = cfg.horizon
    eps_m = schedule.eps(m, env.K)
    cert = bandit_regret_bound(env.K, cfg.delta, m, eps_m, second_moment_bound=env.C)
    state = simulate_batch(env, schedule, m, cfg.seed, first, count)
    sup_gap = np.abs(env.gaps[None, :] - state.delta_hat).max(axis=1)
    ratio = variance_budget_ratio(state.V, env.C, m, eps_m)
    l6 = state.Vhat.max(axis=1) > variance_tail_threshold(env, m, eps_m, cfg.delta)
    floor_ok = state.min_floor_margin >= -1e-12
    return [
        (m if sup_gap[i] > cert.value else 0, float(sup_gap[i]), float(ratio[i]), bool(l6[i]), floor_ok)
        for i in range(count)
    ]


def run_bandit(cfg: ExperimentConfig) -> CoverageReport:
    """Single-time regret certificate coverage plus the variance budget and variance tail checks."""
    env = cfg.bandit_env()
    schedule = cfg.schedule()
    schedule.check(env.K)
    m = cfg.horizon
    eps_m = schedule.eps(m, env.K)
    cert = bandit_regret_bound(env.K, cfg.delta, m, eps_m, second_moment_bound=env.C)
    res = map_chunks(partial(_bandit_chunk, cfg), cfg.trials, cfg.workers, chunk_size=200)
    n = len(res)
    l6 = sum(1 for r in res if r[3])
    extras = {
        "certificate": cert.to_dict(),
        "K": env.K,
        "C": env.C,
        "eps_m": eps_m,
        "max_sup_gap": max(r[1] for r in res),
        "variance_budget_max_ratio": max(r[2] for r in res),
        "variance_budget_all_within": all(r[2] <= 1.0 + 1e-9 for r in res),
        "variance_tail_violations": l6,
        "variance_tail_freq": l6 / n,
        "variance_tail_threshold": variance_tail_threshold(env, m, eps_m, cfg.delta),
        "variance_tail_stderr": binomial_stderr(cfg.delta / 2.0, n),
        "policy_floor_ok": all(r[4] for r in res),
        "arms": [a.to_dict() for a in env.arms],
    }
    return _aggregate(cfg, "bandit", cert.lam, [r[0] for r in res], "all_posteriors:max_over_arms", extras)


def _smart_chunk(cfg: ExperimentConfig, combos: list, first: int, count: int) -> list:
    out = []
    for name, eta in combos[first : first + count]:
        chk = supermartingale_mean_check(STOCK_MODELS[name](), eta, cfg.horizon, cfg.trials, cfg.seed)
        out.append((name, eta, chk))
    return out


def run_supermartingale(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    """Mean of V_m(eta) per step for every (model, eta); returns (rows, summary)."""
    combos = [(name, float(eta)) for name in cfg.models for eta in cfg.etas]
    res = map_chunks(partial(_smart_chunk, cfg, combos), len(combos), cfg.workers, chunk_size=1)
    rows, checks = [], []
    for name, eta, chk in res:
        ok = chk.mean_by_step <= 1.0 + 3.0 * chk.stderr_by_step
        for i in range(cfg.horizon):
            rows.append(
                {
                    "model": name,
                    "eta": eta,
                    "m": i + 1,
                    "mean": float(chk.mean_by_step[i]),
                    "stderr": float(chk.stderr_by_step[i]),
                    "increment_mean": float(chk.increment_mean_by_step[i]),
                    "increment_stderr": float(chk.increment_stderr_by_step[i]),
                    "within": bool(ok[i]),
                }
            )
        checks.append(
            {
                "model": name,
                "eta": eta,
                "supermartingale_ok": chk.supermartingale_ok(),
                "centering_ok": chk.centering_ok(),
                "max_mean": float(chk.mean_by_step.max()),
            }
        )
    summary = {
        "experiment": "supermartingale",
        "trials": cfg.trials,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "generator": GENERATOR_NAME,
        "checks": checks,
        "all_ok": all(c["supermartingale_ok"] for c in checks),
    }
    return rows, summary


SUPERMARTINGALE_COLUMNS = {
    "model": str,
    "eta": float,
    "m": int,
    "mean": float,
    "stderr": float,
    "increment_mean": float,
    "increment_stderr": float,
    "within": bool,
}

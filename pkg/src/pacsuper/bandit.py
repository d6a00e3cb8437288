"""K-armed bandit with heavy-tailed rewards and importance-weighted regret estimates.

The state update is written once, over arrays of shape (trials, K), so a single
trace (trials = 1) and a batch of Monte Carlo traces go through exactly the same
arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import trial_rng
from .certificates import BoundCertificate, bandit_regret_bound
from .errors import DomainError
from .measures import Categorical


@dataclass(frozen=True)
class BanditEnv:
    arms: tuple
    C: float = None

    def __post_init__(self):
        arms = tuple(self.arms)
        if len(arms) < 2:
            raise DomainError("need at least two arms")
        m2 = np.array([a.raw_moment(2) for a in arms])
        if not np.all(np.isfinite(m2)):
            raise DomainError("every arm needs a finite second moment")
        object.__setattr__(self, "arms", arms)
        c = float(m2.max()) if self.C is None else float(self.C)
        if c < m2.max():
            raise DomainError(f"C = {c} is below the largest arm second moment {m2.max()}")
        object.__setattr__(self, "C", c)

    @property
    def K(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> np.ndarray:
        return np.array([a.mean for a in self.arms])

    @property
    def second_moments(self) -> np.ndarray:
        return np.array([a.raw_moment(2) for a in self.arms])

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))  # ties go to the lowest index

    @property
    def gaps(self) -> np.ndarray:
        mu = self.means
        return mu[self.best_arm] - mu

    def sample_rewards(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """(n, K) reward table: arm columns drawn one after another."""
        return np.column_stack([a.sample(rng, n) for a in self.arms])


@dataclass(frozen=True)
class EpsSchedule:
    """Exploration floor eps_i: constant, or min(1/K, i^(-1/3))."""

    kind: str = "constant"
    value: float = 0.05

    def __call__(self, i: int, K: int) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "cube_root":
            return min(1.0 / K, i ** (-1.0 / 3.0))
        raise DomainError(f"unknown eps schedule {self.kind!r}")


@dataclass(frozen=True)
class PolicySchedule:
    """pi_i = eps_i + (1 - K eps_i) * base_i, with base uniform or a softmax of R_hat."""

    base: str = "softmax"
    eps: EpsSchedule = field(default_factory=EpsSchedule)
    temperature: float = 0.1

    def check(self, K: int) -> None:
        if self.base not in ("uniform", "softmax"):
            raise DomainError(f"unknown policy base {self.base!r}")
        if self.eps.kind == "constant" and not 0 < self.eps.value <= 1.0 / K:
            raise DomainError(f"eps = {self.eps.value} must lie in (0, 1/K]")
        if not self.temperature > 0:
            raise DomainError("temperature must be positive")

    def policy(self, i: int, r_hat: np.ndarray) -> np.ndarray:
        """Policies for round i (1-based) from R_hat after i - 1 rounds; r_hat has shape (T, K)."""
        T, K = r_hat.shape
        eps = self.eps(i, K)
        if self.base == "uniform":
            return np.full((T, K), 1.0 / K)
        logits = r_hat / self.temperature
        logits = logits - logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        return eps + (1.0 - K * eps) * w


@dataclass
class BanditState:
    """Running sums for T parallel traces."""

    best: int
    gaps: np.ndarray
    m2: np.ndarray
    sum_iw: np.ndarray
    V: np.ndarray
    Vhat: np.ndarray
    rounds: int = 0
    min_floor_margin: float = math.inf

    @classmethod
    def start(cls, env: BanditEnv, trials: int = 1) -> "BanditState":
        K = env.K
        return cls(
            best=env.best_arm,
            gaps=env.gaps,
            m2=env.second_moments,
            sum_iw=np.zeros((trials, K)),
            V=np.zeros((trials, K)),
            Vhat=np.zeros((trials, K)),
        )

    @property
    def r_hat(self) -> np.ndarray:
        if self.rounds == 0:
            return np.zeros_like(self.sum_iw)
        return self.sum_iw / self.rounds

    @property
    def delta_hat(self) -> np.ndarray:
        r = self.r_hat
        return r[:, [self.best]] - r


def select_actions(pi: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(pi, axis=1)
    a = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(a, pi.shape[1] - 1)


def step(state: BanditState, schedule: PolicySchedule, u: np.ndarray, rewards: np.ndarray):
    """Advance every trace by one round; returns (pi, actions, observed, iw)."""
    i = state.rounds + 1
    pi = schedule.policy(i, state.r_hat)
    K = pi.shape[1]
    state.min_floor_margin = min(state.min_floor_margin, float((pi - schedule.eps(i, K)).min()))
    actions = select_actions(pi, u)
    rows = np.arange(pi.shape[0])
    observed = rewards[rows, actions]
    iw = np.zeros_like(pi)
    iw[rows, actions] = observed / pi[rows, actions]
    b = state.best
    incr = iw[:, [b]] - iw - state.gaps
    state.sum_iw += iw
    state.Vhat += incr**2
    v_inc = state.m2[b] / pi[:, [b]] + state.m2 / pi - state.gaps**2
    v_inc[:, b] = 0.0
    state.V += v_inc
    state.rounds = i
    return pi, actions, observed, iw, incr


@dataclass
class BanditTrace:
    """One episode: per-round records plus running statistics."""

    env: BanditEnv
    state: BanditState
    policies: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    iw: list = field(default_factory=list)
    increments: list = field(default_factory=list)

    @classmethod
    def start(cls, env: BanditEnv) -> "BanditTrace":
        return cls(env=env, state=BanditState.start(env, 1))

    @property
    def m(self) -> int:
        return self.state.rounds

    @property
    def r_hat(self) -> np.ndarray:
        return self.state.r_hat[0]

    @property
    def delta_hat(self) -> np.ndarray:
        return self.state.delta_hat[0]

    @property
    def V(self) -> np.ndarray:
        return self.state.V[0]

    @property
    def Vhat(self) -> np.ndarray:
        return self.state.Vhat[0]


def apply_round(trace: BanditTrace, schedule: PolicySchedule, u: float, reward_vector) -> BanditTrace:
    pi, a, r, iw, incr = step(trace.state, schedule, np.array([u]), np.asarray(reward_vector, dtype=float)[None, :])
    trace.policies.append(pi[0])
    trace.actions.append(int(a[0]))
    trace.rewards.append(float(r[0]))
    trace.iw.append(iw[0])
    trace.increments.append(incr[0])
    return trace


def play_round(env: BanditEnv, schedule: PolicySchedule, trace: BanditTrace, rng: np.random.Generator) -> BanditTrace:
    u = rng.random()
    return apply_round(trace, schedule, u, env.sample_rewards(rng, 1)[0])


def draw_round_inputs(env: BanditEnv, rng: np.random.Generator, m: int):
    """All randomness for an m-round episode, in a fixed order: action uniforms, then rewards."""
    return rng.random(m), env.sample_rewards(rng, m)


@dataclass(frozen=True)
class RegretStats:
    delta_Q: float
    delta_hat_Q: float
    v_Q: float
    vhat_Q: float


def regret_stats(trace: BanditTrace, q: Categorical) -> RegretStats:
    w = np.asarray(q.weights)
    if w.shape != (trace.env.K,):
        raise DomainError("posterior must be over the K arms")
    return RegretStats(
        delta_Q=float(w @ trace.env.gaps),
        delta_hat_Q=float(w @ trace.delta_hat),
        v_Q=float(w @ trace.V),
        vhat_Q=float(w @ trace.Vhat),
    )


def variance_budget_ratio(V: np.ndarray, C: float, m: int, eps_m: float) -> np.ndarray:
    """V_m(a) / (2 C m / eps_m), maximized over arms; 0 when m = 0."""
    if m == 0:
        return np.zeros(np.atleast_2d(V).shape[0])
    return np.atleast_2d(V).max(axis=1) / (2.0 * C * m / eps_m)


def lemma5_check(trace: BanditTrace, env: BanditEnv, eps_m: float) -> dict:
    return {"max_ratio": float(variance_budget_ratio(trace.V, env.C, trace.m, eps_m)[0])}


def variance_tail_threshold(env: BanditEnv, m: int, eps_m: float, delta: float) -> float:
    return 4.0 * env.C * env.K * m / (eps_m * delta)


def simulate_batch(env: BanditEnv, schedule: PolicySchedule, m: int, seed: int, first: int, count: int) -> BanditState:
    """Run traces first..first+count-1, trace t drawing from stream (seed, t)."""
    us, rewards = [], []
    for t in range(first, first + count):
        u, r = draw_round_inputs(env, trial_rng(seed, t), m)
        us.append(u)
        rewards.append(r)
    u = np.stack(us)
    rew = np.stack(rewards)
    state = BanditState.start(env, count)
    for i in range(m):
        step(state, schedule, u[:, i], rew[:, i, :])
    return state


def lemma6_check(env: BanditEnv, schedule: PolicySchedule, m: int, delta: float, trials: int, seed: int, scale: float = 1.0) -> dict:
    """Frequency over traces of max_a Vhat_m(a) > scale * 4 C K m / (eps_m delta)."""
    schedule.check(env.K)
    state = simulate_batch(env, schedule, m, seed, 0, trials)
    thr = scale * variance_tail_threshold(env, m, schedule.eps(m, env.K), delta)
    hits = int(np.sum(state.Vhat.max(axis=1) > thr))
    return {"violation_freq": hits / trials, "violations": hits, "threshold": thr}


@dataclass(frozen=True)
class QCheck:
    delta_Q: float
    delta_hat_Q: float
    covered: bool


@dataclass
class BanditResult:
    trace: BanditTrace
    certificate: BoundCertificate
    per_q: list
    sup_gap: float


def run_bandit_experiment(
    env: BanditEnv,
    schedule: PolicySchedule,
    m: int,
    delta: float,
    q_list: Sequence[Categorical],
    rng: np.random.Generator,
) -> BanditResult:
    """m rounds, then the single-time regret certificate checked for each q.

    ``sup_gap`` is max_a |Delta(a) - Delta_hat_m(a)|, the supremum of the
    estimation error over every posterior on the arms.
    """
    schedule.check(env.K)
    cert = bandit_regret_bound(env.K, delta, m, schedule.eps(m, env.K), second_moment_bound=env.C)
    trace = BanditTrace.start(env)
    u, rewards = draw_round_inputs(env, rng, m)
    for i in range(m):
        apply_round(trace, schedule, u[i], rewards[i])
    per_q = []
    for q in q_list:
        s = regret_stats(trace, q)
        per_q.append(QCheck(s.delta_Q, s.delta_hat_Q, bool(abs(s.delta_Q - s.delta_hat_Q) <= cert.value)))
    sup_gap = float(np.max(np.abs(env.gaps - trace.delta_hat)))
    return BanditResult(trace=trace, certificate=cert, per_q=per_q, sup_gap=sup_gap)

"""Stock real-valued families with closed-form raw moments.

Sampling uses numpy generators only, so every draw is reproducible from the
generator it is given. Raw moments are returned as +inf when they diverge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

FAMILIES = ("gaussian", "lognormal", "pareto", "student_t", "uniform", "constant")


@dataclass(frozen=True)
class Distribution:
    """A shifted/scaled stock family.

    Parameters by family:
      gaussian:   loc, scale
      lognormal:  mu, sigma (of the underlying normal), plus optional shift
      pareto:     x_min, alpha (tail index), plus optional shift
      student_t:  df, loc, scale
      uniform:    low, high (stored as loc = low, scale = high - low)
      constant:   loc
    """

    family: str
    loc: float = 0.0
    scale: float = 1.0
    shape: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family != "constant" and not self.scale > 0:
            raise DomainError("scale parameter must be positive")
        if self.family in ("pareto", "student_t") and not self.shape > 0:
            raise DomainError("tail parameter must be positive")

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "Distribution":
        return cls("gaussian", loc=mean, scale=sd)

    @classmethod
    def lognormal(cls, mu: float = 0.0, sigma: float = 1.0, shift: float = 0.0) -> "Distribution":
        # loc is an additive shift; the log-scale mean is stored in shape
        return cls("lognormal", loc=shift, scale=sigma, shape=mu)

    @classmethod
    def pareto(cls, alpha: float, x_min: float = 1.0, shift: float = 0.0) -> "Distribution":
        return cls("pareto", loc=shift, scale=x_min, shape=alpha)

    @classmethod
    def student_t(cls, df: float, loc: float = 0.0, scale: float = 1.0) -> "Distribution":
        return cls("student_t", loc=loc, scale=scale, shape=df)

    @classmethod
    def uniform(cls, low: float = 0.0, high: float = 1.0) -> "Distribution":
        return cls("uniform", loc=low, scale=high - low)

    @classmethod
    def constant(cls, value: float) -> "Distribution":
        return cls("constant", loc=value, scale=1.0)

    @classmethod
    def from_dict(cls, d: dict) -> "Distribution":
        d = dict(d)
        family = d.pop("family")
        builders = {
            "gaussian": cls.gaussian,
            "lognormal": cls.lognormal,
            "pareto": cls.pareto,
            "student_t": cls.student_t,
            "uniform": cls.uniform,
            "constant": cls.constant,
        }
        if family not in builders:
            raise DomainError(f"unknown family {family!r}")
        return builders[family](**d)

    def to_dict(self) -> dict:
        if self.family == "gaussian":
            return {"family": "gaussian", "mean": self.loc, "sd": self.scale}
        if self.family == "lognormal":
            return {"family": "lognormal", "mu": self.shape, "sigma": self.scale, "shift": self.loc}
        if self.family == "pareto":
            return {"family": "pareto", "alpha": self.shape, "x_min": self.scale, "shift": self.loc}
        if self.family == "student_t":
            return {"family": "student_t", "df": self.shape, "loc": self.loc, "scale": self.scale}
        if self.family == "uniform":
            return {"family": "uniform", "low": self.loc, "high": self.loc + self.scale}
        return {"family": "constant", "value": self.loc}

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        f = self.family
        if f == "gaussian":
            return rng.normal(self.loc, self.scale, size)
        if f == "lognormal":
            return self.loc + rng.lognormal(self.shape, self.scale, size)
        if f == "pareto":
            # numpy's pareto is Lomax: x_min * (1 + Lomax) is classical Pareto
            return self.loc + self.scale * (1.0 + rng.pareto(self.shape, size))
        if f == "student_t":
            return self.loc + self.scale * rng.standard_t(self.shape, size)
        if f == "uniform":
            return rng.uniform(self.loc, self.loc + self.scale, size)
        return np.full(size, float(self.loc))

    def _unshifted_moment(self, k: int) -> float:
        """E[Y^k] for the family before the additive shift."""
        f = self.family
        if k == 0:
            return 1.0
        if f == "gaussian":
            # moments of sd * Z
            return 0.0 if k % 2 else self.scale**k * _double_factorial(k - 1)
        if f == "lognormal":
            return math.exp(k * self.shape + 0.5 * k * k * self.scale**2)
        if f == "pareto":
            if self.shape <= k:
                return math.inf
            return self.shape * self.scale**k / (self.shape - k)
        if f == "student_t":
            if k % 2:
                return 0.0 if self.shape > k else math.inf
            if self.shape <= k:
                return math.inf
            nu = self.shape
            log_m = (
                0.5 * k * math.log(nu)
                + math.lgamma((k + 1) / 2)
                + math.lgamma((nu - k) / 2)
                - 0.5 * math.log(math.pi)
                - math.lgamma(nu / 2)
            )
            return self.scale**k * math.exp(log_m)
        if f == "uniform":
            return self.scale**k / (k + 1)
        return 0.0  # constant: all mass carried by the shift

    def raw_moment(self, k: int) -> float:
        """E[X^k] for integer k >= 0."""
        if k < 0:
            raise DomainError("moment order must be nonnegative")
        loc = float(self.loc)
        total = 0.0
        for j in range(k + 1):
            mj = self._unshifted_moment(j)
            if mj == 0.0:
                continue
            coef = math.comb(k, j) * loc ** (k - j)
            if math.isinf(mj):
                if coef == 0.0:
                    continue
                return math.inf
            total += coef * mj
        return total

    @property
    def mean(self) -> float:
        return self.raw_moment(1)

    @property
    def variance(self) -> float:
        m2 = self.raw_moment(2)
        if math.isinf(m2):
            return math.inf
        return max(m2 - self.mean**2, 0.0)

    def central_moment(self, k: int) -> float:
        mu = self.mean
        total = 0.0
        for j in range(k + 1):
            mj = self.raw_moment(j)
            coef = math.comb(k, j) * (-mu) ** (k - j)
            if math.isinf(mj):
                if coef == 0.0:
                    continue
                return math.inf
            total += coef * mj
        return total


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out

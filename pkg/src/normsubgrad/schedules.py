"""Step-size rules beta_k and the normalized step alpha_k.

All logarithms are natural logarithms, in the rule and in its square-sum bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, ContractError

KINDS = ("constant_horizon", "diminishing_sqrt_log", "quadratic_growth", "custom_sequence")


class OutOfHorizon(IndexError):
    pass


class StationaryPoint(ArithmeticError):
    """Raised instead of dividing by a zero normalizer; the caller must stop."""


@dataclass(frozen=True)
class StepSchedule:
    kind: str
    c: float = 1.0
    horizon: int | None = None
    mu: float | None = None
    lipschitz_estimate: float | None = None
    sequence: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant_horizon":
            if self.horizon is None or self.horizon < 0:
                raise ConfigurationError("constant_horizon needs a horizon T >= 0")
            if self.c <= 0:
                raise ConfigurationError("c must be positive")
        elif self.kind == "diminishing_sqrt_log":
            if self.c <= 0:
                raise ConfigurationError("c must be positive")
        elif self.kind == "quadratic_growth":
            if not self.mu or self.mu <= 0:
                raise ConfigurationError("quadratic_growth needs mu > 0")
            if not self.lipschitz_estimate or self.lipschitz_estimate <= 0:
                raise ConfigurationError("quadratic_growth needs lipschitz_estimate > 0")
        else:
            if not self.sequence or min(self.sequence) <= 0:
                raise ConfigurationError("custom_sequence needs positive entries")

    @property
    def length(self) -> int | None:
        """Number of defined steps, or None when the rule is unbounded."""
        if self.kind == "constant_horizon":
            return self.horizon + 1
        if self.kind == "custom_sequence":
            return len(self.sequence)
        return None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("constant_horizon", "diminishing_sqrt_log"):
            out["c"] = self.c
        if self.horizon is not None:
            out["T"] = self.horizon
        if self.mu is not None:
            out["mu"] = self.mu
        if self.lipschitz_estimate is not None:
            out["lipschitz_estimate"] = self.lipschitz_estimate
        if self.sequence:
            out["sequence"] = list(self.sequence)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "StepSchedule":
        return cls(kind=doc["kind"], c=doc.get("c", 1.0), horizon=doc.get("T"),
                   mu=doc.get("mu"), lipschitz_estimate=doc.get("lipschitz_estimate"),
                   sequence=tuple(doc.get("sequence", ())))


def constant_horizon(c: float, horizon: int) -> StepSchedule:
    return StepSchedule("constant_horizon", c=c, horizon=horizon)


def diminishing(c: float) -> StepSchedule:
    return StepSchedule("diminishing_sqrt_log", c=c)


def quadratic_growth(lipschitz_estimate: float, mu: float) -> StepSchedule:
    return StepSchedule("quadratic_growth", mu=mu, lipschitz_estimate=lipschitz_estimate)


def custom_sequence(values) -> StepSchedule:
    return StepSchedule("custom_sequence", sequence=tuple(float(v) for v in values))


def beta(schedule: StepSchedule, k: int) -> float:
    if k < 0:
        raise ContractError("k must be nonnegative")
    kind = schedule.kind
    if kind == "constant_horizon":
        if k > schedule.horizon:
            raise OutOfHorizon(f"k={k} beyond horizon T={schedule.horizon}")
        return schedule.c / math.sqrt(schedule.horizon + 1)
    if kind == "diminishing_sqrt_log":
        return schedule.c / (math.sqrt(k + 1) * math.log(k + 2))
    if kind == "quadratic_growth":
        return schedule.lipschitz_estimate / (schedule.mu * (k + 1))
    if k >= len(schedule.sequence):
        raise OutOfHorizon(f"k={k} beyond custom sequence of length {len(schedule.sequence)}")
    return schedule.sequence[k]


def betas(schedule: StepSchedule, count: int) -> np.ndarray:
    """beta_0, ..., beta_{count-1} as an array (vectorized ``beta``)."""
    k = np.arange(count, dtype=np.float64)
    kind = schedule.kind
    if kind == "constant_horizon":
        if count > schedule.horizon + 1:
            raise OutOfHorizon("requested more steps than the horizon allows")
        return np.full(count, schedule.c / math.sqrt(schedule.horizon + 1))
    if kind == "diminishing_sqrt_log":
        return schedule.c / (np.sqrt(k + 1) * np.log(k + 2))
    if kind == "quadratic_growth":
        return schedule.lipschitz_estimate / (schedule.mu * (k + 1))
    if count > len(schedule.sequence):
        raise OutOfHorizon("requested more steps than the custom sequence holds")
    return np.asarray(schedule.sequence[:count], dtype=np.float64)


def alpha(schedule: StepSchedule, k: int, gradient_norm: float,
          regularizer_lipschitz: float = 0.0) -> float:
    if gradient_norm < 0 or regularizer_lipschitz < 0:
        raise ContractError("norms must be nonnegative")
    denom = gradient_norm + regularizer_lipschitz
    if denom == 0.0:
        raise StationaryPoint("zero subgradient with L_r = 0")
    return beta(schedule, k) / denom


def beta_square_tail_bound(schedule: StepSchedule) -> float:
    """Upper bound on sum_k beta_k^2 over the whole rule."""
    kind = schedule.kind
    if kind == "constant_horizon":
        return schedule.c ** 2
    if kind == "diminishing_sqrt_log":
        return 2.0 * schedule.c ** 2 / math.log(2.0) ** 2
    if kind == "quadratic_growth":
        ratio = schedule.lipschitz_estimate / schedule.mu
        return ratio ** 2 * math.pi ** 2 / 6.0
    return float(np.sum(np.square(schedule.sequence)))

"""Closed-form statistical utilities: design effect, effective sample size,
and exact (Clopper-Pearson) binomial confidence limits."""
from __future__ import annotations

from dataclasses import dataclass

from scipy.special import betaincinv

from .errors import DomainError


@dataclass(frozen=True)
class ExactInterval:
    """Two-sided exact binomial confidence interval."""

    low: float
    high: float
    level: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.low <= self.high <= 1.0):
            raise DomainError(f"interval bounds out of order: [{self.low}, {self.high}]")

    def contains(self, p: float) -> bool:
        return self.low <= p <= self.high


def design_effect(m: float, rho: float) -> float:
    """Variance inflation 1 + (m - 1) * rho for cluster sampling.

    ``m`` is the mean cluster size (non-integer values are fine, variable
    cluster sizes being the motivating case) and ``rho`` the intraclass
    correlation coefficient.
    """
    if m < 1:
        raise DomainError(f"mean cluster size must be >= 1, got {m}")
    if not (0.0 <= rho <= 1.0):
        raise DomainError(f"ICC must lie in [0, 1], got {rho}")
    return 1.0 + (m - 1.0) * rho


def effective_sample_size(n_total: int, m: float, rho: float) -> float:
    """Total subject count deflated by the design effect."""
    if n_total < 1:
        raise DomainError(f"n_total must be >= 1, got {n_total}")
    return n_total / design_effect(m, rho)


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> ExactInterval:
    """Exact two-sided binomial confidence interval.

    Uses the beta-quantile characterization: the lower limit is the
    alpha/2 quantile of Beta(k, n - k + 1) and the upper limit the
    1 - alpha/2 quantile of Beta(k + 1, n - k), with the conventional
    closures at k = 0 and k = n.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not (0 <= successes <= trials):
        raise DomainError(f"successes must lie in [0, {trials}], got {successes}")
    if not (0.0 < level < 1.0):
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")

    alpha = 1.0 - level
    if successes == 0:
        low = 0.0
    else:
        low = float(betaincinv(successes, trials - successes + 1, alpha / 2.0))
    if successes == trials:
        high = 1.0
    else:
        high = float(betaincinv(successes + 1, trials - successes, 1.0 - alpha / 2.0))
    return ExactInterval(low=low, high=high, level=level)

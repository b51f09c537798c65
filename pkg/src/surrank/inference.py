"""Non-inferiority and equivalence testing of a candidate surrogate.

A candidate is useful when the treatment effect it captures, on the
probability scale, falls short of the effect on the response by less
than a margin epsilon.  The one-sided test rejects H0: delta >= epsilon
for small delta; the equivalence (two one-sided tests) variant also
rejects H0: delta <= -epsilon, guarding against candidates that overstate
the effect.  The margin can be fixed by the caller or derived from the
response effect and the study size so that the test retains a target
power against a completely uninformative candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import AlignmentError, ConfigurationError
from .rankstats import (
    PairedSample,
    TwoArmSample,
    UEstimate,
    normal_cdf,
    normal_quantile,
    u_statistic_paired,
    u_statistic_unpaired,
)
from .variance import (
    DeltaVariance,
    delta_variance_paired,
    delta_variance_unpaired,
    null_u_variance,
)

Mode = Literal["noninferiority", "tost"]


@dataclass(frozen=True)
class TestConfig:
    """Settings for a single surrogate test.

    ``epsilon=None`` derives the margin from the response effect via
    :func:`select_epsilon` using ``power``; a fixed ``epsilon`` ignores
    ``power``.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    alpha: float = 0.05
    power: float = 0.90
    epsilon: float | None = None
    mode: Mode = "noninferiority"

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ConfigurationError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if not 0.0 < self.power < 1.0:
            raise ConfigurationError(f"power must be in (0, 1), got {self.power}")
        if self.epsilon is not None:
            if not np.isfinite(self.epsilon) or self.epsilon < 0.0:
                raise ConfigurationError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.mode not in ("noninferiority", "tost"):
            raise ConfigurationError(f"mode must be 'noninferiority' or 'tost', got {self.mode!r}")


@dataclass(frozen=True)
class SurrogateTestResult:
    """Outcome of testing one candidate against the response."""

    u_response: float
    u_candidate: float
    delta: float
    sigma: float
    epsilon: float
    alpha: float
    mode: Mode
    p_value: float
    p_upper: float
    p_lower: float | None
    ci_lower: float
    ci_upper: float
    degenerate: bool

    @property
    def reject(self) -> bool:
        """True when the candidate passes at level alpha."""
        return self.p_value < self.alpha


def select_epsilon(u_response: UEstimate, *, alpha: float = 0.05, power: float = 0.90,
                   n1: int = 0, n0: int = 0, n: int = 0) -> float:
    """Margin that keeps the stated power against an uninformative candidate.

    A candidate with no treatment effect has U near 1/2 with null variance
    determined by the design and sample size.  The margin is the response
    effect minus the largest candidate effect

        u_star = 1/2 + sqrt(null_var) * (z_power + z_{1-alpha})

    that the one-sided test would still flag with probability ``power``,
    floored at zero.
    """
    if not 0.0 < alpha < 0.5:
        raise ConfigurationError(f"alpha must be in (0, 0.5), got {alpha}")
    if not 0.0 < power < 1.0:
        raise ConfigurationError(f"power must be in (0, 1), got {power}")
    if u_response.design == "unpaired":
        var0 = null_u_variance("unpaired", n1=n1, n0=n0)
    else:
        var0 = null_u_variance("paired", n=n, tie_fraction=u_response.tie_fraction)
    u_star = 0.5 + np.sqrt(var0) * (normal_quantile(power) + normal_quantile(1.0 - alpha))
    return float(max(0.0, u_response.value - u_star))


def _one_sided_p(delta: float, sigma: float, boundary: float, side: str) -> float:
    """P-value for H0: delta >= boundary (side 'upper') or delta <= boundary ('lower')."""
    if sigma > 0.0:
        z = (delta - boundary) / sigma
        return float(normal_cdf(z) if side == "upper" else normal_cdf(-z))
    # Degenerate variance: the estimate is treated as exact, and a value
    # sitting on the boundary cannot count as evidence against H0.
    if side == "upper":
        return 0.0 if delta < boundary else 1.0
    return 0.0 if delta > boundary else 1.0


def surrogate_test_from_estimates(u_response: UEstimate, u_candidate: UEstimate,
                                  variance: DeltaVariance, epsilon: float,
                                  *, alpha: float = 0.05, mode: Mode = "noninferiority",
                                  ) -> SurrogateTestResult:
    """Assemble the test from precomputed estimates.

    The confidence interval has level 1 - 2*alpha, matching the decision
    rule: the non-inferiority test rejects exactly when the upper limit
    is below epsilon, and the equivalence test rejects exactly when the
    whole interval lies strictly inside (-epsilon, epsilon), up to the
    degenerate zero-variance case.
    """
    if u_response.design != u_candidate.design or u_response.design != variance.design:
        raise AlignmentError("estimates and variance must share one design")
    delta = u_response.value - u_candidate.value
    sigma = variance.sigma

    p_upper = _one_sided_p(delta, sigma, epsilon, "upper")
    if mode == "tost":
        p_lower = _one_sided_p(delta, sigma, -epsilon, "lower")
        p_value = max(p_upper, p_lower)
    else:
        p_lower = None
        p_value = p_upper

    half_width = normal_quantile(1.0 - alpha) * sigma
    return SurrogateTestResult(
        u_response=u_response.value,
        u_candidate=u_candidate.value,
        delta=delta,
        sigma=sigma,
        epsilon=epsilon,
        alpha=alpha,
        mode=mode,
        p_value=p_value,
        p_upper=p_upper,
        p_lower=p_lower,
        ci_lower=delta - half_width,
        ci_upper=delta + half_width,
        degenerate=variance.degenerate,
    )


def surrogate_test(response, candidate, config: TestConfig = TestConfig()) -> SurrogateTestResult:
    """Test one candidate surrogate against the response on the same units.

    Both arguments must be :class:`TwoArmSample` or both
    :class:`PairedSample`.  With ``config.epsilon=None`` the margin is
    derived from the response effect at the configured power.
    """
    if isinstance(response, TwoArmSample) and isinstance(candidate, TwoArmSample):
        u_y = u_statistic_unpaired(response)
        u_s = u_statistic_unpaired(candidate)
        dv = delta_variance_unpaired(response, candidate)
        sizes = dict(n1=response.n1, n0=response.n0)
    elif isinstance(response, PairedSample) and isinstance(candidate, PairedSample):
        u_y = u_statistic_paired(response)
        u_s = u_statistic_paired(candidate)
        dv = delta_variance_paired(response, candidate)
        sizes = dict(n=response.n)
    else:
        raise AlignmentError("response and candidate must both be unpaired or both paired")

    if config.epsilon is not None:
        epsilon = config.epsilon
    else:
        epsilon = select_epsilon(u_y, alpha=config.alpha, power=config.power, **sizes)
    return surrogate_test_from_estimates(u_y, u_s, dv, epsilon, alpha=config.alpha,
                                         mode=config.mode)

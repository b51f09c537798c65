"""Variance estimation for the gap between two probability-scale effects.

The response and a candidate surrogate are measured on the same units, so
their U estimates are correlated.  The unpaired estimator projects each
statistic onto per-observation structural components (the average kernel
value of one observation against the whole opposite arm) and takes the
empirical variance of the componentwise differences; cross terms are then
handled automatically.  The paired estimator is the ordinary variance of
the per-unit kernel differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, InvalidInputError
from .rankstats import Design, PairedSample, TwoArmSample, require_min_size


@dataclass(frozen=True)
class DeltaVariance:
    """Standard error of delta = U_response - U_candidate, with diagnostics.

    ``treated_component`` and ``control_component`` are the two additive
    pieces of ``variance`` (for the paired design everything sits in the
    treated slot and the control slot is zero).
    """

    sigma: float
    variance: float
    design: Design
    treated_component: float
    control_component: float

    @property
    def degenerate(self) -> bool:
        """True when the estimated variance is exactly zero."""
        return self.variance == 0.0


def _g_matrix(treated: np.ndarray, control: np.ndarray) -> np.ndarray:
    """Kernel values for every treated-control pair, shape (n1, n0)."""
    gt = treated[:, None] > control[None, :]
    eq = treated[:, None] == control[None, :]
    return gt + 0.5 * eq


def _check_same_units(y_sizes: tuple[int, ...], s_sizes: tuple[int, ...]) -> None:
    if y_sizes != s_sizes:
        raise AlignmentError(
            f"response and candidate cover different units: sizes {y_sizes} vs {s_sizes}"
        )


def delta_variance_unpaired(response: TwoArmSample, candidate: TwoArmSample) -> DeltaVariance:
    """Structural-component variance of delta for the independent two-arm design.

    For each observation, average its kernel values against the whole
    opposite arm, once for the response and once for the candidate.  The
    variance of delta is var of the treated-side differences over n1 plus
    var of the control-side differences over n0 (both with ddof=1).
    """
    _check_same_units((response.n1, response.n0), (candidate.n1, candidate.n0))
    require_min_size("unpaired", response.n1, response.n0)

    g_y = _g_matrix(response.treated, response.control)
    g_s = _g_matrix(candidate.treated, candidate.control)

    diff_treated = g_y.mean(axis=1) - g_s.mean(axis=1)
    diff_control = g_y.mean(axis=0) - g_s.mean(axis=0)

    treated_component = float(np.var(diff_treated, ddof=1) / response.n1)
    control_component = float(np.var(diff_control, ddof=1) / response.n0)
    variance = treated_component + control_component
    return DeltaVariance(
        sigma=float(np.sqrt(variance)),
        variance=variance,
        design="unpaired",
        treated_component=treated_component,
        control_component=control_component,
    )


def paired_kernel_differences(response: PairedSample, candidate: PairedSample) -> np.ndarray:
    """Per-unit kernel difference d_i = g(Y_post, Y_pre) - g(S_post, S_pre)."""
    _check_same_units((response.n,), (candidate.n,))
    g_y = (response.post > response.pre) + 0.5 * (response.post == response.pre)
    g_s = (candidate.post > candidate.pre) + 0.5 * (candidate.post == candidate.pre)
    return g_y - g_s


def delta_variance_paired(response: PairedSample, candidate: PairedSample) -> DeltaVariance:
    """Variance of delta for the paired design: var(d_i, ddof=1) / n."""
    require_min_size("paired", response.n)
    d = paired_kernel_differences(response, candidate)
    variance = float(np.var(d, ddof=1) / d.size)
    return DeltaVariance(
        sigma=float(np.sqrt(variance)),
        variance=variance,
        design="paired",
        treated_component=variance,
        control_component=0.0,
    )


def null_u_variance(design: Design, *, n1: int = 0, n0: int = 0, n: int = 0,
                    tie_fraction: float = 0.0) -> float:
    """Variance of a single U estimate under no treatment effect.

    Unpaired: (n1 + n0 + 1) / (12 * n1 * n0), the continuous-data
    Mann-Whitney null variance.  Paired: (1 - tie_fraction) / (4 * n),
    a Bernoulli win indicator deflated by the observed tie mass.
    """
    if design == "unpaired":
        if n1 < 1 or n0 < 1:
            raise InvalidInputError("unpaired null variance needs n1 >= 1 and n0 >= 1")
        return (n1 + n0 + 1) / (12.0 * n1 * n0)
    if design == "paired":
        if n < 1:
            raise InvalidInputError("paired null variance needs n >= 1")
        if not 0.0 <= tie_fraction <= 1.0:
            raise InvalidInputError(f"tie fraction {tie_fraction} outside [0, 1]")
        return (1.0 - tie_fraction) / (4.0 * n)
    raise InvalidInputError(f"unknown design {design!r}")

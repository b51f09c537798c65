"""Rank-comparison kernels and probability-scale treatment-effect estimators.

The treatment effect on a variable is measured on the probability scale,
P(X^1 > X^0) + 0.5 * P(X^1 = X^0), and estimated by averaging the pairwise
win/tie kernel over all treated-control pairs (independent two-arm design)
or over within-unit pairs (paired design).  Ties contribute exactly 1/2
through the kernel; no midrank machinery is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .errors import AlignmentError, InsufficientDataError, InvalidInputError

Design = Literal["unpaired", "paired"]

# Above this pair count the unpaired estimator switches from the dense
# pairwise comparison to an O(N log N) rank-sum evaluation.  Both compute
# the identical value: every partial sum is an exact multiple of 1/2.
_DENSE_PAIR_LIMIT = 4_000_000


def _as_finite_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} must contain at least one observation")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class TwoArmSample:
    """Independent treated/control measurements of one variable."""

    treated: np.ndarray
    control: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "treated", _as_finite_vector(self.treated, "treated"))
        object.__setattr__(self, "control", _as_finite_vector(self.control, "control"))

    @property
    def n1(self) -> int:
        return self.treated.size

    @property
    def n0(self) -> int:
        return self.control.size


@dataclass(frozen=True)
class PairedSample:
    """Per-unit (post, pre) or (treated, control) measurement pairs of one variable."""

    post: np.ndarray
    pre: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "post", _as_finite_vector(self.post, "post"))
        object.__setattr__(self, "pre", _as_finite_vector(self.pre, "pre"))
        if self.post.size != self.pre.size:
            raise AlignmentError(
                f"paired sample length mismatch: {self.post.size} post vs {self.pre.size} pre"
            )

    @property
    def n(self) -> int:
        return self.post.size


@dataclass(frozen=True)
class UEstimate:
    """A probability-scale treatment-effect estimate in [0, 1].

    ``tie_fraction`` is the observed fraction of exactly tied comparisons;
    for the paired design it estimates the tie probability used by the
    null-variance formula, for the unpaired design it is informational.
    """

    value: float
    design: Design
    tie_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InvalidInputError(f"U estimate {self.value} outside [0, 1]")
        if not 0.0 <= self.tie_fraction <= 1.0:
            raise InvalidInputError(f"tie fraction {self.tie_fraction} outside [0, 1]")


def g_kernel(a: float, b: float) -> float:
    """Pairwise win/tie kernel: 1 if a > b, 1/2 if a == b, 0 if a < b."""
    if not (np.isfinite(a) and np.isfinite(b)):
        raise InvalidInputError("g_kernel requires finite inputs")
    if a > b:
        return 1.0
    if a == b:
        return 0.5
    return 0.0


def _u_unpaired_dense(treated: np.ndarray, control: np.ndarray) -> tuple[float, float]:
    gt = treated[:, None] > control[None, :]
    eq = treated[:, None] == control[None, :]
    pairs = treated.size * control.size
    value = (gt.sum() + 0.5 * eq.sum()) / pairs
    return float(value), float(eq.sum() / pairs)


def _u_unpaired_ranks(treated: np.ndarray, control: np.ndarray) -> tuple[float, float]:
    # Midrank identity: R1 - n1(n1+1)/2 = #wins + 0.5 * #ties, all terms
    # exact multiples of 1/2, so this matches the dense path bit for bit.
    n1, n0 = treated.size, control.size
    ranks = rankdata(np.concatenate([treated, control]))
    wins_plus_half_ties = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    value = wins_plus_half_ties / (n1 * n0)

    pooled, inverse = np.unique(np.concatenate([treated, control]), return_inverse=True)
    counts1 = np.bincount(inverse[:n1], minlength=pooled.size)
    counts0 = np.bincount(inverse[n1:], minlength=pooled.size)
    ties = float(np.dot(counts1, counts0))
    return float(value), ties / (n1 * n0)


def u_statistic_unpaired(sample: TwoArmSample) -> UEstimate:
    """Mann-Whitney-type estimate over all treated-control pairs.

    Returns the average of the win/tie kernel over the n1 * n0 pairwise
    comparisons, which lies on the grid k / (2 * n1 * n0).
    """
    if sample.n1 * sample.n0 <= _DENSE_PAIR_LIMIT:
        value, ties = _u_unpaired_dense(sample.treated, sample.control)
    else:
        value, ties = _u_unpaired_ranks(sample.treated, sample.control)
    return UEstimate(value=value, design="unpaired", tie_fraction=ties)


def u_statistic_paired(sample: PairedSample) -> UEstimate:
    """Within-unit win proportion for paired measurements.

    Averages the win/tie kernel over the n unit-level (post, pre)
    comparisons; values lie on the grid k / (2 * n).
    """
    gt = sample.post > sample.pre
    eq = sample.post == sample.pre
    value = (gt.sum() + 0.5 * eq.sum()) / sample.n
    return UEstimate(value=float(value), design="paired", tie_fraction=float(eq.mean()))


def delta_hat(u_y: UEstimate, u_s: UEstimate) -> float:
    """Gap between the treatment effect on the response and on a candidate."""
    if u_y.design != u_s.design:
        raise AlignmentError("cannot mix unpaired and paired estimates")
    return u_y.value - u_s.value


def normal_cdf(z) -> float | np.ndarray:
    """Standard normal distribution function."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("normal_cdf requires finite input")
    out = ndtr(z)
    return float(out) if out.ndim == 0 else out


def normal_quantile(p) -> float | np.ndarray:
    """Inverse of :func:`normal_cdf`; defined only on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise InvalidInputError("normal_quantile requires probabilities strictly inside (0, 1)")
    out = ndtri(p)
    return float(out) if out.ndim == 0 else out


def require_min_size(design: Design, *sizes: int, minimum: int = 2) -> None:
    """Raise when any arm (or the unit count) is below the estimator's minimum."""
    for size in sizes:
        if size < minimum:
            label = "units" if design == "paired" else "observations per arm"
            raise InsufficientDataError(f"need at least {minimum} {label}, got {size}")

"""Multiple-testing adjustments for screening many candidates at once.

Bonferroni controls the family-wise error rate; Benjamini-Hochberg
controls the false discovery rate under independence or positive
dependence; Benjamini-Yekutieli pays a log-factor premium to control the
FDR under arbitrary dependence, which is the safe default when candidates
are correlated markers measured on the same subjects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigurationError, InvalidInputError

Method = Literal["bonferroni", "bh", "by"]

_METHODS = ("bonferroni", "bh", "by")


@dataclass(frozen=True)
class AdjustedPValues:
    """Raw and adjusted p-values, in the caller's original order."""

    method: Method
    raw: np.ndarray
    adjusted: np.ndarray

    def n_significant(self, alpha: float) -> int:
        """Number of hypotheses with adjusted p strictly below alpha."""
        return int(np.sum(self.adjusted < alpha))


def _step_up(pvalues: np.ndarray, multiplier: float) -> np.ndarray:
    """Adjusted values q_(i) = min over j >= i of min(1, multiplier * p_(j) / j)."""
    m = pvalues.size
    order = np.argsort(pvalues, kind="stable")
    scaled = multiplier * pvalues[order] / np.arange(1, m + 1)
    adjusted_sorted = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    return adjusted


def adjust(pvalues, method: Method = "by") -> AdjustedPValues:
    """Adjust a family of p-values for multiplicity.

    The adjusted values support the usual decision shortcut: comparing
    them to alpha reproduces the corresponding step-up or Bonferroni
    procedure at level alpha.
    """
    raw = np.asarray(pvalues, dtype=float)
    if raw.ndim != 1 or raw.size == 0:
        raise InvalidInputError("pvalues must be a non-empty one-dimensional array")
    if not np.all(np.isfinite(raw)) or np.any(raw < 0.0) or np.any(raw > 1.0):
        raise InvalidInputError("pvalues must lie in [0, 1]")
    if method not in _METHODS:
        raise ConfigurationError(f"method must be one of {_METHODS}, got {method!r}")

    m = raw.size
    if method == "bonferroni":
        adjusted = np.minimum(1.0, m * raw)
    elif method == "bh":
        adjusted = _step_up(raw, float(m))
    else:
        harmonic = float(np.sum(1.0 / np.arange(1, m + 1)))
        adjusted = _step_up(raw, m * harmonic)
    return AdjustedPValues(method=method, raw=raw.copy(), adjusted=adjusted)

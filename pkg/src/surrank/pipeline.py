"""Two-stage screening and evaluation of candidate surrogates.

Stage one tests every candidate against the response on a screening split
and keeps those whose multiplicity-adjusted p-values clear the level.
Stage two collapses the kept candidates into a single weighted combination
and tests that combination on the held-out evaluation split, so that
selection and evaluation never touch the same observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    ConfigurationError,
    InvalidInputError,
    NoSurrogatesSelectedError,
    SurrankError,
)
from .inference import Mode, SurrogateTestResult, TestConfig, select_epsilon, \
    surrogate_test, surrogate_test_from_estimates
from .multitest import Method, adjust
from .rankstats import (
    Design,
    PairedSample,
    TwoArmSample,
    u_statistic_paired,
    u_statistic_unpaired,
)
from .variance import delta_variance_paired, delta_variance_unpaired


def _as_matrix(values, rows: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.shape[0] != rows:
        raise AlignmentError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Response and candidate measurements aligned subject-for-subject.

    The two blocks hold the treated and control arms for the unpaired
    design, or the post and pre measurements of the same units for the
    paired design.  Candidate column j of each block belongs to the same
    subject as the response entry in that row.
    """

    design: Design
    response_a: np.ndarray
    response_b: np.ndarray
    candidates_a: np.ndarray
    candidates_b: np.ndarray
    names: tuple[str, ...]
    ids_a: tuple[str, ...]
    ids_b: tuple[str, ...]

    def __post_init__(self):
        if self.design not in ("unpaired", "paired"):
            raise ConfigurationError(f"design must be 'unpaired' or 'paired', got {self.design!r}")
        resp_a = np.asarray(self.response_a, dtype=float)
        resp_b = np.asarray(self.response_b, dtype=float)
        for arr, label in ((resp_a, "response_a"), (resp_b, "response_b")):
            if arr.ndim != 1 or arr.size == 0:
                raise InvalidInputError(f"{label} must be a non-empty vector")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{label} contains non-finite values")
        object.__setattr__(self, "response_a", resp_a)
        object.__setattr__(self, "response_b", resp_b)
        object.__setattr__(
            self, "candidates_a", _as_matrix(self.candidates_a, resp_a.size, "candidates_a")
        )
        object.__setattr__(
            self, "candidates_b", _as_matrix(self.candidates_b, resp_b.size, "candidates_b")
        )
        if self.candidates_a.shape[1] != self.candidates_b.shape[1]:
            raise AlignmentError(
                f"candidate blocks disagree on p: {self.candidates_a.shape[1]} "
                f"vs {self.candidates_b.shape[1]}"
            )
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        if len(names) != self.candidates_a.shape[1]:
            raise AlignmentError(f"{len(names)} names for {self.candidates_a.shape[1]} candidates")
        if len(names) == 0:
            raise InvalidInputError("need at least one candidate")
        if len(set(names)) != len(names):
            raise InvalidInputError("candidate names must be unique")
        ids_a = tuple(str(i) for i in self.ids_a)
        ids_b = tuple(str(i) for i in self.ids_b)
        object.__setattr__(self, "ids_a", ids_a)
        object.__setattr__(self, "ids_b", ids_b)
        if len(ids_a) != resp_a.size or len(ids_b) != resp_b.size:
            raise AlignmentError("subject id count does not match observation count")
        if len(set(ids_a)) != len(ids_a) or len(set(ids_b)) != len(ids_b):
            raise InvalidInputError("subject ids must be unique within a block")
        if self.design == "paired":
            if resp_a.size != resp_b.size:
                raise AlignmentError(
                    f"paired blocks must have equal length, got {resp_a.size} and {resp_b.size}"
                )
            if ids_a != ids_b:
                raise AlignmentError("paired blocks must list the same units in the same order")

    @classmethod
    def unpaired(cls, response_treated, response_control, candidates_treated,
                 candidates_control, names=None, treated_ids=None, control_ids=None):
        """Build an independent two-arm dataset."""
        resp_t = np.asarray(response_treated, dtype=float)
        resp_c = np.asarray(response_control, dtype=float)
        cand_t = np.asarray(candidates_treated, dtype=float)
        names = _default_names(names, cand_t)
        ids_t = _default_ids(treated_ids, resp_t.size, "t")
        ids_c = _default_ids(control_ids, resp_c.size, "c")
        return cls("unpaired", resp_t, resp_c, candidates_treated, candidates_control,
                   names, ids_t, ids_c)

    @classmethod
    def paired(cls, response_post, response_pre, candidates_post, candidates_pre,
               names=None, subject_ids=None):
        """Build a paired (post, pre) dataset."""
        resp_post = np.asarray(response_post, dtype=float)
        cand_post = np.asarray(candidates_post, dtype=float)
        names = _default_names(names, cand_post)
        ids = _default_ids(subject_ids, resp_post.size, "u")
        return cls("paired", resp_post, response_pre, candidates_post, candidates_pre,
                   names, ids, ids)

    @property
    def p(self) -> int:
        return len(self.names)

    @property
    def n_a(self) -> int:
        return self.response_a.size

    @property
    def n_b(self) -> int:
        return self.response_b.size

    def response_sample(self):
        if self.design == "unpaired":
            return TwoArmSample(treated=self.response_a, control=self.response_b)
        return PairedSample(post=self.response_a, pre=self.response_b)

    def candidate_sample(self, name: str):
        try:
            j = self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown candidate {name!r}") from None
        if self.design == "unpaired":
            return TwoArmSample(treated=self.candidates_a[:, j], control=self.candidates_b[:, j])
        return PairedSample(post=self.candidates_a[:, j], pre=self.candidates_b[:, j])

    def take(self, rows_a, rows_b) -> "Dataset":
        """Subset by row indices (paired designs require identical index sets)."""
        rows_a = np.asarray(rows_a, dtype=int)
        rows_b = np.asarray(rows_b, dtype=int)
        return Dataset(
            self.design,
            self.response_a[rows_a],
            self.response_b[rows_b],
            self.candidates_a[rows_a],
            self.candidates_b[rows_b],
            self.names,
            tuple(self.ids_a[i] for i in rows_a),
            tuple(self.ids_b[i] for i in rows_b),
        )


def _default_names(names, candidates: np.ndarray) -> tuple[str, ...]:
    if names is not None:
        return tuple(str(n) for n in names)
    if candidates.ndim != 2:
        raise InvalidInputError(f"candidates must be two-dimensional, got shape {candidates.shape}")
    return tuple(f"S{j + 1}" for j in range(candidates.shape[1]))


def _default_ids(ids, size: int, prefix: str) -> tuple[str, ...]:
    if ids is not None:
        return tuple(str(i) for i in ids)
    return tuple(f"{prefix}{i + 1}" for i in range(size))


@dataclass(frozen=True)
class ScreeningRow:
    """Test summary for one candidate on the screening split."""

    name: str
    u_candidate: float
    delta: float
    sigma: float
    ci_lower: float
    ci_upper: float
    raw_p: float
    adjusted_p: float
    degenerate: bool


@dataclass(frozen=True)
class ScreeningReport:
    """Stage-one output: per-candidate rows plus the ordered selected set.

    ``selected`` is ordered by adjusted p, then absolute gap, then name,
    all ascending.  ``n_a``/``n_b`` record the screening-split block sizes
    that downstream weight flooring is based on.
    """

    rows: tuple[ScreeningRow, ...]
    selected: tuple[str, ...]
    epsilon_used: float
    method: Method | None
    alpha: float
    mode: Mode
    design: Design
    u_response: float
    n_a: int
    n_b: int

    def row(self, name: str) -> ScreeningRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise InvalidInputError(f"no screening row for candidate {name!r}")


@dataclass(frozen=True)
class CombinedSurrogate:
    """Weighted standardized sum over the selected candidates.

    ``standardization`` holds the per-member (mean, sd) actually used;
    members listed in ``degenerate_members`` had zero spread where the
    combination was formed and contribute nothing to its values.
    """

    members: tuple[str, ...]
    weights: tuple[float, ...]
    standardization: tuple[tuple[float, float], ...]
    degenerate_members: tuple[str, ...]

    def __post_init__(self):
        if len(self.members) != len(self.weights):
            raise AlignmentError("one weight per member required")
        if len(self.members) != len(self.standardization):
            raise AlignmentError("one (mean, sd) pair per member required")
        weights = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0.0):
            raise InvalidInputError("weights must be positive and finite")


@dataclass(frozen=True)
class PipelineResult:
    """Everything produced by one full screening-and-evaluation run."""

    screening: ScreeningReport
    combined: CombinedSurrogate
    evaluation: SurrogateTestResult
    split_ratio: float
    split_seed: int
    evaluation_data: Dataset
    gamma: TwoArmSample | PairedSample


def split(data: Dataset, ratio: float = 0.75, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Partition subjects into screening and evaluation splits.

    floor(ratio * n) subjects go to screening; the unpaired design is
    stratified so each arm is split at the same ratio.  The partition is
    a deterministic function of the seed and the block sizes.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    if data.design == "paired":
        first, second = _split_block(data.n_a, ratio, rng)
        screening = data.take(first, first)
        evaluation = data.take(second, second)
    else:
        first_a, second_a = _split_block(data.n_a, ratio, rng)
        first_b, second_b = _split_block(data.n_b, ratio, rng)
        screening = data.take(first_a, first_b)
        evaluation = data.take(second_a, second_b)
    for part, label in ((screening, "screening"), (evaluation, "evaluation")):
        if part.n_a < 2 or part.n_b < 2:
            raise ConfigurationError(
                f"ratio {ratio} leaves the {label} split with fewer than 2 observations "
                f"per block ({part.n_a} and {part.n_b})"
            )
    return screening, evaluation


def _split_block(n: int, ratio: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    k = int(np.floor(ratio * n))
    perm = rng.permutation(n)
    return np.sort(perm[:k]), np.sort(perm[k:])


def screen(data: Dataset, config: TestConfig = TestConfig(),
           method: Method | None = "bh") -> ScreeningReport:
    """Test every candidate against the response on one dataset.

    The margin is fixed by ``config.epsilon`` or derived once from the
    response effect; it is shared by all candidates.  ``method=None``
    skips the multiplicity adjustment (adjusted p equals raw p).
    Candidates with no spread in either block are uninformative and are
    reported with p = 1 and the degenerate flag instead of a test.
    """
    response = data.response_sample()
    if data.design == "unpaired":
        u_y = u_statistic_unpaired(response)
        sizes = dict(n1=data.n_a, n0=data.n_b)
    else:
        u_y = u_statistic_paired(response)
        sizes = dict(n=data.n_a)
    if config.epsilon is not None:
        epsilon = config.epsilon
    else:
        epsilon = select_epsilon(u_y, alpha=config.alpha, power=config.power, **sizes)

    names, results, constant = [], [], []
    for name in data.names:
        candidate = data.candidate_sample(name)
        if data.design == "unpaired":
            u_s = u_statistic_unpaired(candidate)
            dv = delta_variance_unpaired(response, candidate)
        else:
            u_s = u_statistic_paired(candidate)
            dv = delta_variance_paired(response, candidate)
        res = surrogate_test_from_estimates(u_y, u_s, dv, epsilon,
                                            alpha=config.alpha, mode=config.mode)
        is_constant = np.ptp(candidate.treated if data.design == "unpaired"
                             else candidate.post) == 0.0 and \
            np.ptp(candidate.control if data.design == "unpaired" else candidate.pre) == 0.0
        names.append(name)
        results.append(res)
        constant.append(is_constant)

    raw = np.array([1.0 if flat else res.p_value for res, flat in zip(results, constant)])
    adjusted = adjust(raw, method).adjusted if method is not None else raw

    rows = tuple(
        ScreeningRow(
            name=name,
            u_candidate=res.u_candidate,
            delta=res.delta,
            sigma=res.sigma,
            ci_lower=res.ci_lower,
            ci_upper=res.ci_upper,
            raw_p=float(p_raw),
            adjusted_p=float(p_adj),
            degenerate=bool(flat or res.degenerate),
        )
        for name, res, flat, p_raw, p_adj in zip(names, results, constant, raw, adjusted)
    )
    hits = [row for row in rows if row.adjusted_p < config.alpha]
    hits.sort(key=lambda row: (row.adjusted_p, abs(row.delta), row.name))
    return ScreeningReport(
        rows=rows,
        selected=tuple(row.name for row in hits),
        epsilon_used=float(epsilon),
        method=method,
        alpha=config.alpha,
        mode=config.mode,
        design=data.design,
        u_response=u_y.value,
        n_a=data.n_a,
        n_b=data.n_b,
    )


def weight_floor(design: Design, n_a: int, n_b: int) -> float:
    """Smallest gap magnitude distinguishable from zero on the estimate grid."""
    if design == "unpaired":
        return 1.0 / (2.0 * n_a * n_b)
    return 1.0 / (4.0 * n_a)


def weighted_standardized_sum(values_a: np.ndarray, values_b: np.ndarray, weights):
    """Per-subject weighted sum of columns standardized with pooled moments.

    Columns whose pooled sample sd is zero contribute nothing; the returned
    mask marks them.  Standardization uses the mean and ddof=1 sd over the
    rows of both blocks together.
    """
    weights = np.asarray(weights, dtype=float)
    pooled = np.vstack([values_a, values_b])
    means = pooled.mean(axis=0)
    sds = pooled.std(axis=0, ddof=1)
    degenerate = sds == 0.0
    scale = np.where(degenerate, 1.0, sds)
    effective = np.where(degenerate, 0.0, weights)
    gamma_a = ((values_a - means) / scale) @ effective
    gamma_b = ((values_b - means) / scale) @ effective
    return gamma_a, gamma_b, means, sds, degenerate


def combine(data: Dataset, report: ScreeningReport):
    """Collapse the selected candidates into one combined marker.

    Weights are inverse absolute gaps from the screening report, floored
    at the grid resolution of the screening split so that a gap of zero
    yields a large finite weight.  Member columns are standardized with
    pooled moments of ``data``, the dataset on which the combination is
    formed.  Returns the description and the per-subject values aligned
    like ``data``'s response.
    """
    if not report.selected:
        raise NoSurrogatesSelectedError("no candidates passed screening")
    if report.design != data.design:
        raise AlignmentError("screening report and dataset designs differ")
    missing = [name for name in report.selected if name not in data.names]
    if missing:
        raise AlignmentError(f"selected candidates absent from dataset: {missing}")

    floor = weight_floor(report.design, report.n_a, report.n_b)
    by_name = {row.name: row for row in report.rows}
    weights = np.array(
        [1.0 / max(abs(by_name[name].delta), floor) for name in report.selected]
    )
    cols = [data.names.index(name) for name in report.selected]
    gamma_a, gamma_b, means, sds, degenerate = weighted_standardized_sum(
        data.candidates_a[:, cols], data.candidates_b[:, cols], weights
    )
    combined = CombinedSurrogate(
        members=report.selected,
        weights=tuple(float(w) for w in weights),
        standardization=tuple((float(m), float(s)) for m, s in zip(means, sds)),
        degenerate_members=tuple(
            name for name, flat in zip(report.selected, degenerate) if flat
        ),
    )
    if data.design == "unpaired":
        gamma = TwoArmSample(treated=gamma_a, control=gamma_b)
    else:
        gamma = PairedSample(post=gamma_a, pre=gamma_b)
    return combined, gamma


def evaluate(data: Dataset, gamma, config: TestConfig = TestConfig()) -> SurrogateTestResult:
    """Test a combined marker against the response on the evaluation split.

    With ``config.epsilon=None`` the margin is re-derived from this
    split's own response effect and size.
    """
    response = data.response_sample()
    if isinstance(gamma, TwoArmSample):
        if data.design != "unpaired" or gamma.n1 != data.n_a or gamma.n0 != data.n_b:
            raise AlignmentError("combined marker does not align with the evaluation data")
    elif isinstance(gamma, PairedSample):
        if data.design != "paired" or gamma.n != data.n_a:
            raise AlignmentError("combined marker does not align with the evaluation data")
    else:
        raise InvalidInputError("gamma must be a TwoArmSample or PairedSample")
    return surrogate_test(response, gamma, config)


def run_pipeline(data: Dataset, ratio: float = 0.75, seed: int = 0,
                 config: TestConfig = TestConfig(),
                 method: Method | None = "bh") -> PipelineResult:
    """Run split, screening, combination, and evaluation end to end.

    The combination is formed on the evaluation split (weights come from
    screening, standardization moments from the evaluation data).  Errors
    raised by a stage are re-raised with the stage named.
    """
    screening_data, evaluation_data = _stage("split", split, data, ratio, seed)
    report = _stage("screening", screen, screening_data, config, method)
    combined, gamma = _stage("combination", combine, evaluation_data, report)
    evaluation = _stage("evaluation", evaluate, evaluation_data, gamma, config)
    return PipelineResult(
        screening=report,
        combined=combined,
        evaluation=evaluation,
        split_ratio=ratio,
        split_seed=seed,
        evaluation_data=evaluation_data,
        gamma=gamma,
    )


def _stage(label: str, fn, *args):
    try:
        return fn(*args)
    except SurrankError as err:
        raise type(err)(f"{label} stage: {err}") from err

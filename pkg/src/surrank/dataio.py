"""Delimited-text ingestion and report emission.

Input is a response file and a candidates file, both delimited text
with a header row.  Each row carries a subject id and an arm label
(unpaired) or a timepoint label (paired); paired files are pivoted on
the explicit timepoint labels so row order never determines alignment.
Rows with missing or non-numeric values are rejected with file and line
context rather than silently dropped.

All writers emit full-precision values (``repr`` of the float) so that
written datasets re-ingest to identical statistics; rounding for human
consumption lives in the separate formatting helpers.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata, spearmanr

from .errors import IngestError
from .inference import SurrogateTestResult
from .pipeline import CombinedSurrogate, Dataset, ScreeningReport
from .rankstats import Design

_MISSING_TOKENS = {"", "na", "nan", "null", "none"}
_MAX_REPORTED_PROBLEMS = 25


def default_delimiter(path: str) -> str:
    """Comma unless the extension marks the file as tab-separated."""
    extension = os.path.splitext(path)[1].lower()
    return "\t" if extension in (".tsv", ".tab") else ","


@dataclass(frozen=True)
class IngestSpec:
    """Where the data lives and how its columns are named.

    ``group_column`` holds the arm label for unpaired designs and the
    timepoint label for paired designs; ``group_a``/``group_b`` are the
    labels mapped to the first block (treated or post) and the second
    (control or pre).  Leaving them unset picks design-appropriate
    defaults.  ``delimiter`` of None is auto-detected per file from the
    extension.
    """

    response_path: str
    candidates_path: str
    design: Design = "unpaired"
    subject_column: str = "subject"
    group_column: str | None = None
    group_a: str | None = None
    group_b: str | None = None
    response_column: str = "response"
    delimiter: str | None = None

    def __post_init__(self):
        if self.design not in ("unpaired", "paired"):
            raise IngestError(f"design must be 'unpaired' or 'paired', got {self.design!r}")
        defaults = (("arm", "treated", "control") if self.design == "unpaired"
                    else ("timepoint", "post", "pre"))
        for field, default in zip(("group_column", "group_a", "group_b"), defaults):
            if getattr(self, field) is None:
                object.__setattr__(self, field, default)
        if self.group_a == self.group_b:
            raise IngestError(f"group labels must differ, both are {self.group_a!r}")


def _parse_cell(text: str | None) -> tuple[float, bool]:
    if text is None:
        return math.nan, False
    stripped = text.strip()
    if stripped.lower() in _MISSING_TOKENS:
        return math.nan, False
    try:
        value = float(stripped)
    except ValueError:
        return math.nan, False
    if not math.isfinite(value):
        return math.nan, False
    return value, True


def _read_rows(path: str, delimiter: str | None):
    """Header fields plus (line number, row dict) pairs."""
    sep = delimiter if delimiter is not None else default_delimiter(path)
    try:
        handle = open(path, newline="")
    except OSError as err:
        raise IngestError(f"cannot open {path}: {err}") from None
    with handle:
        reader = csv.DictReader(handle, delimiter=sep, restval=None, restkey="__extra__")
        if reader.fieldnames is None:
            raise IngestError(f"{path}: file is empty (no header row)")
        fields = [name.strip() for name in reader.fieldnames if name is not None]
        rows = [(reader.line_num, row) for row in reader]
    return fields, rows


class _ProblemLog:
    def __init__(self):
        self.items: list[str] = []

    def add(self, message: str) -> None:
        self.items.append(message)

    def raise_if_any(self) -> None:
        if not self.items:
            return
        shown = self.items[:_MAX_REPORTED_PROBLEMS]
        extra = len(self.items) - len(shown)
        if extra > 0:
            shown.append(f"... and {extra} more problem(s)")
        raise IngestError("ingestion failed:\n  " + "\n  ".join(shown))


def _collect_file(path: str, rows, spec: IngestSpec, value_columns: list[str],
                  problems: _ProblemLog):
    """Pivot rows into {(subject, group label): value vector} with diagnostics."""
    if not rows:
        raise IngestError(f"{path}: no data rows")

    cells: dict[tuple[str, str], np.ndarray] = {}
    first_line: dict[tuple[str, str], int] = {}
    order: list[str] = []
    for line, row in rows:
        where = f"{path}:{line}"
        if row.get("__extra__") is not None:
            problems.add(f"{where}: row has more fields than the header")
            continue
        subject = (row.get(spec.subject_column) or "").strip()
        if not subject:
            problems.add(f"{where}: empty {spec.subject_column!r} cell")
            continue
        group = (row.get(spec.group_column) or "").strip()
        if group not in (spec.group_a, spec.group_b):
            problems.add(
                f"{where}: unknown {spec.group_column!r} label {group!r} "
                f"(expected {spec.group_a!r} or {spec.group_b!r})"
            )
            continue
        key = (subject, group)
        if key in cells:
            problems.add(
                f"{where}: duplicate entry for subject {subject!r} with "
                f"{spec.group_column} {group!r} (first seen at line {first_line[key]})"
            )
            continue
        values = np.empty(len(value_columns))
        ok = True
        for j, column in enumerate(value_columns):
            value, numeric = _parse_cell(row.get(column))
            if not numeric:
                problems.add(
                    f"{where}: missing or non-numeric value {row.get(column)!r} "
                    f"in column {column!r}"
                )
                ok = False
                break
            values[j] = value
        if not ok:
            continue
        cells[key] = values
        first_line[key] = line
        if subject not in order:
            order.append(subject)
    return cells, order


def _split_unpaired(path: str, spec: IngestSpec, cells, order, problems: _ProblemLog):
    """Per-arm subject lists for a one-row-per-subject file."""
    arms: dict[str, str] = {}
    for subject in order:
        in_a = (subject, spec.group_a) in cells
        in_b = (subject, spec.group_b) in cells
        if in_a and in_b:
            problems.add(f"{path}: subject {subject!r} appears in both arms")
            continue
        arms[subject] = spec.group_a if in_a else spec.group_b
    return arms


def ingest(spec: IngestSpec) -> Dataset:
    """Load and align the response and candidate files into a Dataset."""
    problems = _ProblemLog()
    resp_fields, resp_raw = _read_rows(spec.response_path, spec.delimiter)
    cand_fields, cand_raw = _read_rows(spec.candidates_path, spec.delimiter)
    for path, fields, required in (
        (spec.response_path, resp_fields,
         (spec.subject_column, spec.group_column, spec.response_column)),
        (spec.candidates_path, cand_fields, (spec.subject_column, spec.group_column)),
    ):
        missing = [name for name in required if name not in fields]
        if missing:
            raise IngestError(
                f"{path}: missing column(s) {', '.join(repr(m) for m in missing)}"
            )
    names = [f for f in cand_fields
             if f not in (spec.subject_column, spec.group_column, "__extra__")]
    if not names:
        raise IngestError(f"{spec.candidates_path}: no candidate columns beyond "
                          f"{spec.subject_column!r} and {spec.group_column!r}")

    resp_cells, resp_order = _collect_file(
        spec.response_path, resp_raw, spec, [spec.response_column], problems
    )
    cand_cells, cand_order = _collect_file(
        spec.candidates_path, cand_raw, spec, names, problems
    )
    problems.raise_if_any()

    resp_subjects = {s for s, _ in resp_cells}
    cand_subjects = {s for s, _ in cand_cells}
    for subject in sorted(resp_subjects - cand_subjects):
        problems.add(f"subject {subject!r} is in {spec.response_path} but not "
                     f"{spec.candidates_path}")
    for subject in sorted(cand_subjects - resp_subjects):
        problems.add(f"subject {subject!r} is in {spec.candidates_path} but not "
                     f"{spec.response_path}")
    problems.raise_if_any()

    if spec.design == "paired":
        for subject in resp_order:
            for cells, path in ((resp_cells, spec.response_path),
                                (cand_cells, spec.candidates_path)):
                present = [g for g in (spec.group_a, spec.group_b) if (subject, g) in cells]
                if len(present) != 2:
                    problems.add(
                        f"{path}: subject {subject!r} has only "
                        f"{spec.group_column} {present[0]!r} (need both "
                        f"{spec.group_a!r} and {spec.group_b!r})"
                    )
        problems.raise_if_any()
        response_a = np.array([resp_cells[s, spec.group_a][0] for s in resp_order])
        response_b = np.array([resp_cells[s, spec.group_b][0] for s in resp_order])
        cands_a = np.array([cand_cells[s, spec.group_a] for s in resp_order])
        cands_b = np.array([cand_cells[s, spec.group_b] for s in resp_order])
        return Dataset.paired(response_a, response_b, cands_a, cands_b,
                              names=names, subject_ids=resp_order)

    resp_arms = _split_unpaired(spec.response_path, spec, resp_cells, resp_order, problems)
    cand_arms = _split_unpaired(spec.candidates_path, spec, cand_cells, cand_order, problems)
    problems.raise_if_any()
    for subject, arm in resp_arms.items():
        if cand_arms.get(subject, arm) != arm:
            problems.add(f"subject {subject!r} is {arm!r} in {spec.response_path} "
                         f"but {cand_arms[subject]!r} in {spec.candidates_path}")
    problems.raise_if_any()

    ids_a = [s for s in resp_order if resp_arms[s] == spec.group_a]
    ids_b = [s for s in resp_order if resp_arms[s] == spec.group_b]
    for label, ids in ((spec.group_a, ids_a), (spec.group_b, ids_b)):
        if not ids:
            raise IngestError(f"{spec.response_path}: no subjects with "
                              f"{spec.group_column} {label!r}")
    response_a = np.array([resp_cells[s, spec.group_a][0] for s in ids_a])
    response_b = np.array([resp_cells[s, spec.group_b][0] for s in ids_b])
    cands_a = np.array([cand_cells[s, spec.group_a] for s in ids_a])
    cands_b = np.array([cand_cells[s, spec.group_b] for s in ids_b])
    return Dataset.unpaired(response_a, response_b, cands_a, cands_b,
                            names=names, treated_ids=ids_a, control_ids=ids_b)


def _cell(value) -> str:
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table(path: str, fieldnames, rows, delimiter: str | None = None) -> None:
    """Write dict rows as delimited text with full-precision numbers."""
    sep = delimiter if delimiter is not None else default_delimiter(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, delimiter=sep, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_cell(row[name]) for name in fieldnames])


def read_table(path: str, delimiter: str | None = None):
    """Header fields and string-valued dict rows of a delimited file."""
    fields, numbered = _read_rows(path, delimiter)
    return fields, [row for _, row in numbered]


def write_dataset(data: Dataset, response_path: str, candidates_path: str,
                  spec: IngestSpec | None = None) -> IngestSpec:
    """Emit a Dataset in the ingestible two-file layout.

    Returns the IngestSpec that reads the files back; pass ``spec`` to
    control the column names and labels used.
    """
    if spec is None:
        spec = IngestSpec(response_path=response_path, candidates_path=candidates_path,
                          design=data.design)
    elif spec.design != data.design:
        raise IngestError(f"spec design {spec.design!r} does not match "
                          f"dataset design {data.design!r}")

    blocks = ((spec.group_a, data.ids_a, data.response_a, data.candidates_a),
              (spec.group_b, data.ids_b, data.response_b, data.candidates_b))
    resp_rows = []
    cand_rows = []
    for label, ids, response, candidates in blocks:
        for i, subject in enumerate(ids):
            base = {spec.subject_column: subject, spec.group_column: label}
            resp_rows.append({**base, spec.response_column: response[i]})
            cand_rows.append({**base, **dict(zip(data.names, candidates[i]))})
    write_table(response_path,
                [spec.subject_column, spec.group_column, spec.response_column],
                resp_rows, spec.delimiter)
    write_table(candidates_path,
                [spec.subject_column, spec.group_column, *data.names],
                cand_rows, spec.delimiter)
    return spec


SCREENING_FIELDS = ("name", "delta", "ci_lower", "ci_upper", "sigma",
                    "raw_p", "adjusted_p")


def screening_rows(report: ScreeningReport):
    """Screening rows as dicts, candidates with the strongest evidence first."""
    ordered = sorted(report.rows, key=lambda r: (r.adjusted_p, abs(r.delta), r.name))
    return [
        {
            "name": row.name,
            "delta": row.delta,
            "ci_lower": row.ci_lower,
            "ci_upper": row.ci_upper,
            "sigma": row.sigma,
            "raw_p": row.raw_p,
            "adjusted_p": row.adjusted_p,
        }
        for row in ordered
    ]


def write_screening_table(report: ScreeningReport, path: str,
                          delimiter: str | None = None) -> None:
    write_table(path, SCREENING_FIELDS, screening_rows(report), delimiter)


def write_selected(report: ScreeningReport, path: str) -> None:
    with open(path, "w") as handle:
        for name in report.selected:
            handle.write(name + "\n")


def write_weights(combined: CombinedSurrogate, path: str,
                  delimiter: str | None = None) -> None:
    rows = [
        {
            "name": name,
            "weight": weight,
            "mean": mean,
            "sd": sd,
            "degenerate": name in combined.degenerate_members,
        }
        for name, weight, (mean, sd) in zip(combined.members, combined.weights,
                                            combined.standardization)
    ]
    write_table(path, ("name", "weight", "mean", "sd", "degenerate"), rows, delimiter)


EVALUATION_FIELDS = ("marker", "u_response", "u_marker", "delta", "sigma", "epsilon",
                     "ci_lower", "ci_upper", "p_value", "reject")


def evaluation_rows(results: list[tuple[str, SurrogateTestResult]]):
    """One row of evaluation metrics per tested marker."""
    return [
        {
            "marker": label,
            "u_response": res.u_response,
            "u_marker": res.u_candidate,
            "delta": res.delta,
            "sigma": res.sigma,
            "epsilon": res.epsilon,
            "ci_lower": res.ci_lower,
            "ci_upper": res.ci_upper,
            "p_value": res.p_value,
            "reject": res.reject,
        }
        for label, res in results
    ]


def write_evaluation_summary(results: list[tuple[str, SurrogateTestResult]], path: str,
                             delimiter: str | None = None) -> None:
    write_table(path, EVALUATION_FIELDS, evaluation_rows(results), delimiter)


def write_volcano(report: ScreeningReport, path: str,
                  delimiter: str | None = None) -> None:
    """Effect size against evidence strength for every candidate."""
    with np.errstate(divide="ignore"):
        rows = [
            {
                "name": row.name,
                "delta": row.delta,
                "neg_log10_adjusted_p": float(-np.log10(row.adjusted_p)),
            }
            for row in report.rows
        ]
    write_table(path, ("name", "delta", "neg_log10_adjusted_p"), rows, delimiter)


def rank_scatter(response_values: np.ndarray, marker_values: np.ndarray):
    """Midranks of two aligned vectors and their Spearman correlation."""
    response_values = np.asarray(response_values, dtype=float)
    marker_values = np.asarray(marker_values, dtype=float)
    if response_values.shape != marker_values.shape or response_values.ndim != 1:
        raise IngestError("rank scatter needs two aligned 1-D vectors")
    response_ranks = rankdata(response_values)
    marker_ranks = rankdata(marker_values)
    rho = float(spearmanr(response_values, marker_values).statistic)
    return response_ranks, marker_ranks, rho


def write_rank_scatter(ids, blocks, response_values, marker_values, path: str,
                       delimiter: str | None = None) -> float:
    """Emit per-unit rank pairs; returns the Spearman correlation."""
    response_ranks, marker_ranks, rho = rank_scatter(response_values, marker_values)
    rows = [
        {
            "subject": subject,
            "block": block,
            "response_rank": r_rank,
            "marker_rank": m_rank,
        }
        for subject, block, r_rank, m_rank in zip(ids, blocks, response_ranks, marker_ranks)
    ]
    write_table(path, ("subject", "block", "response_rank", "marker_rank"), rows, delimiter)
    return rho


def format_screening_table(report: ScreeningReport, digits: int = 4,
                           limit: int | None = None) -> str:
    """Human-readable rendering pass; numbers are rounded here only."""
    rows = screening_rows(report)
    if limit is not None:
        rows = rows[:limit]
    header = list(SCREENING_FIELDS)
    rendered = [[row["name"], *(f"{row[f]:.{digits}g}" for f in header[1:])] for row in rows]
    widths = [max(len(header[j]), *(len(r[j]) for r in rendered)) if rendered
              else len(header[j]) for j in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for r in rendered:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines)

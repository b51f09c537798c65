# file_workflow.py
# The same two-stage analysis driven entirely through files and the CLI.
#
# A study arrives as two delimited tables: one with the primary response
# per subject, one with the candidate marker panel.  This script writes
# such a pair from synthetic data, runs the `surrank rise` subcommand
# in-process, and reads back every artifact it produces.
#
# Run with:  python3 demos/file_workflow.py

import tempfile
from pathlib import Path

from surrank import DgpConfig, generate
from surrank.cli import main
from surrank.dataio import read_table, write_dataset

workdir = Path(tempfile.mkdtemp(prefix="surrank_demo_"))
print(f"working in {workdir}")
print()

# -----------------------------
# Write the input tables
# -----------------------------
# write_dataset emits the response file (subject, arm, response) and the
# candidate file (subject, arm, one column per candidate) with
# full-precision values, so reading them back reproduces the dataset
# bit for bit.
sim = generate(DgpConfig(
    dgp="normal",
    scenario="ten_pct_valid",
    n1=120,
    n0=120,
    p_total=40,
    target_u_s=0.9,
    seed=5,
))
response_path = workdir / "response.csv"
candidates_path = workdir / "candidates.csv"
write_dataset(sim.dataset, response_path, candidates_path)
print(f"wrote {response_path.name} and {candidates_path.name} "
      f"({sim.dataset.n_a + sim.dataset.n_b} subjects, "
      f"{sim.dataset.p} candidates)")
print()

# -----------------------------
# Run the pipeline subcommand
# -----------------------------
# Identical to running from a shell:
#   surrank rise --response response.csv --candidates candidates.csv \
#       --correction bh --seed 0 --out out/
outdir = workdir / "out"
print("$ surrank rise ...")
code = main([
    "rise",
    "--response", str(response_path),
    "--candidates", str(candidates_path),
    "--correction", "bh",
    "--seed", "0",
    "--out", str(outdir),
])
print(f"exit code {code}")
print()

# -----------------------------
# Read back the artifacts
# -----------------------------
for name in sorted(p.name for p in outdir.iterdir()):
    print(f"  out/{name}")
print()

# The screening table carries one row per tested candidate.
fields, rows = read_table(outdir / "screening.csv")
kept = [row for row in rows if float(row["adjusted_p"]) < 0.05]
print(f"screening.csv: {len(rows)} rows, {len(kept)} below 0.05")

# selected.txt is the plain list of kept candidate names.
selected = (outdir / "selected.txt").read_text().split()
print(f"selected.txt:  {len(selected)} names, first few: {selected[:4]}")

# weights.csv holds the combination recipe learned on the screening split.
fields, rows = read_table(outdir / "weights.csv")
top = max(rows, key=lambda row: float(row["weight"]))
print(f"weights.csv:   heaviest member {top['name']} at {float(top['weight']):.4f}")

# evaluation.csv reports the held-out test: the combined marker first,
# then the strongest individual candidates retested under the same margin.
fields, rows = read_table(outdir / "evaluation.csv")
gamma = rows[0]
print(f"evaluation.csv: combined marker p = {float(gamma['p_value']):.4g}, "
      f"reject = {gamma['reject']}")

# scatter.csv pairs each evaluation subject's response rank with its
# combined-marker rank (the CLI printed the rank correlation on stdout).
fields, rows = read_table(outdir / "scatter.csv")
print(f"scatter.csv:   {len(rows)} subjects with response/marker ranks")

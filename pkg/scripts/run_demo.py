#!/usr/bin/env python3
"""End-to-end demo: synthesize the 998-patient cohort, run the pipeline,
and print the strongest outcome associations.

Usage: python scripts/run_demo.py [workdir]
"""

import json
import sys
import tempfile
from pathlib import Path

from cohortscope.cli import main as cli


def run(workdir: Path) -> None:
    synth = workdir / "synth"
    ingested = workdir / "ingested"
    final = workdir / "final"
    query = workdir / "query.json"
    points = workdir / "points.json"

    assert cli(["synth", "--out", str(synth)]) == 0
    assert cli([
        "ingest", "--input", str(synth / "fhir"),
        "--loinc-allowlist", str(synth / "allowlist.txt"),
        "--out", str(ingested), "--report", str(workdir / "ingest_report.json"),
    ]) == 0
    assert cli([
        "impute", "--dataset", str(ingested), "--out", str(final),
        "--report", str(workdir / "impute_report.json"),
    ]) == 0
    query.write_text(json.dumps({
        "sentinel": {"class": "ICD-10", "codes": [], "prefixes": []},
        "window_days": 365,
    }), encoding="utf-8")
    assert cli([
        "stats", "--dataset", str(final),
        "--vocab", str(synth / "vocab_edges.tsv"),
        "--manual", str(synth / "manual_edges.tsv"),
        "--query", str(query), "--budget", "50", "--out", str(points),
    ]) == 0

    body = json.loads(points.read_text())
    cohort = body["cohort"]
    print(f"\ncohort: {cohort['size']} patients, "
          f"{100 * cohort['prevalence']:.0f}% positive, "
          f"{100 * cohort['gender']['female'] / cohort['size']:.0f}% female")
    print(f"query matched {body['matched']} / "
          f"{body['matched'] + body['unmatched']} patients\n")
    print(f"{'corr':>7}  {'support':>7}  {'scent':>6}  label")
    ranked = sorted(body["points"], key=lambda p: -abs(p["correlation"]))
    for p in ranked[:15]:
        print(f"{p['correlation']:+7.3f}  {p['support']:7.3f}  "
              f"{p['scent']:6.3f}  {p['label'][:70]}")
    print(f"\nfull output in {workdir}")
    print(f"serve it:  cohortscope serve --dataset {final} "
          f"--vocab {synth / 'vocab_edges.tsv'} --manual {synth / 'manual_edges.tsv'}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        run(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory(prefix="cohortscope-demo-") as tmp:
            run(Path(tmp))

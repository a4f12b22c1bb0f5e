#!/usr/bin/env python3
"""Record real server responses as fixtures for the frontend test suite.

Two cohorts are used: the default 998-patient demo cohort (summary +
search fixtures) and the imputation batch-effect cohort (scatter /
drill-down / roll-up fixtures around the AST high node).

Usage: python scripts/make_ui_fixtures.py [outdir]
"""

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from cohortscope.hierarchy import build_hierarchy
from cohortscope.imputation import impute_and_categorize
from cohortscope.model import CohortDataset
from cohortscope.server import build_app
from cohortscope.synth import LabSpec, SynthConfig, generate

ANY_ICD10 = {"sentinel": {"class": "ICD-10", "codes": [], "prefixes": []},
             "window_days": 365}

BATCH_EFFECT_CONFIG = SynthConfig(
    seed=414,
    n_patients=2_000,
    planted_signals=(),
    background_event_types=8,
    background_rate=0.2,
    lab_specs=(
        LabSpec(
            loinc_code="1920-8",
            label="Aspartate aminotransferase (AST)",
            unit="U/L",
            low=10.0, high=40.0,
            tested_fraction=1.0,
            max_obs_per_patient=3,
            missing_range_fraction=0.25,
            global_arm_fraction=0.5,
            p_high_positive=0.7, p_high_negative=0.15,
            p_high_positive_global=0.15, p_high_negative_global=0.7,
        ),
    ),
)


def app_for(config: SynthConfig):
    result = generate(config)
    labs, _ = impute_and_categorize(result.observations)
    merged = CohortDataset(
        result.dataset.patients.values(),
        list(result.dataset.events) + [lab.to_event_record() for lab in labs],
    )
    hierarchy = build_hierarchy(
        result.vocab_edges, result.manual_edges, merged.observed_types()
    )
    return build_app(merged, hierarchy)


def write(outdir: Path, name: str, body: dict) -> None:
    path = outdir / f"{name}.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    print(f"wrote {path}")


def main(outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)

    with TestClient(app_for(SynthConfig())) as client:
        write(outdir, "summary", client.get("/cohort/summary").json())
        session = client.post("/query", json=ANY_ICD10).json()["session_id"]
        write(outdir, "search_vent",
              client.get("/search", params={"session": session, "q": "vent"}).json())

    with TestClient(app_for(BATCH_EFFECT_CONFIG)) as client:
        query_body = client.post("/query", json=ANY_ICD10).json()
        write(outdir, "query", query_body)
        session = query_body["session_id"]
        # coarsest cut (roots only), then walk down to the lab's category
        # nodes so the HIGH dot shows with its scent triangle
        minimum = client.get(
            "/scatter", params={"session": session, "budget": 1}
        ).json()["minimum_feasible_budget"]
        client.get("/scatter", params={"session": session, "budget": minimum})
        for step in ("LOINC/LOINC", "LOINC/covid-labs", "LOINC/1920-8"):
            body = client.get("/scatter", params={"session": session}).json()
            if any(p["node_id"] == step for p in body["points"]):
                client.post("/drilldown", json={"session": session, "node_id": step})
        scatter_high = client.get("/scatter", params={"session": session}).json()
        assert any(p["node_id"] == "LOINC/1920-8:HIGH"
                   for p in scatter_high["points"])
        write(outdir, "scatter_high", scatter_high)
        drilled = client.post(
            "/drilldown",
            json={"session": session, "node_id": "LOINC/1920-8:HIGH"},
        ).json()
        write(outdir, "drill_high", drilled)
        restored = client.post(
            "/rollup",
            json={"session": session, "node_id": "LOINC/1920-8:HIGH"},
        ).json()
        assert restored["points"] == scatter_high["points"]
        write(outdir, "rollup_high", restored)


if __name__ == "__main__":
    target = (
        Path(sys.argv[1])
        if len(sys.argv) > 1
        else Path(__file__).resolve().parent.parent / "frontend" / "test" / "fixtures"
    )
    main(target)

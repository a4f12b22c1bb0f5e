#!/usr/bin/env python3
"""Reconstruct the imputation batch-effect scenario: a lab whose globally
imputed HIGH results carry the opposite outcome association from the raw
ones, surfaced by the scent glyph and a drill-down.

Usage: python scripts/batch_effect_demo.py
"""

from cohortscope.hierarchy import build_hierarchy
from cohortscope.imputation import impute_and_categorize
from cohortscope.model import CohortDataset
from cohortscope.query import SentinelPredicate, TemporalQuery, run_query
from cohortscope.stats import AlignedStats
from cohortscope.synth import LabSpec, SynthConfig, generate


def main() -> None:
    config = SynthConfig(
        seed=414,
        n_patients=2_000,
        planted_signals=(),
        background_event_types=8,
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
    result = generate(config)
    labs, report = impute_and_categorize(result.observations)
    merged = CohortDataset(
        result.dataset.patients.values(),
        list(result.dataset.events) + [lab.to_event_record() for lab in labs],
    )
    hierarchy = build_hierarchy(
        result.vocab_edges, result.manual_edges, merged.observed_types()
    )
    aligned = run_query(
        merged,
        TemporalQuery(sentinel=SentinelPredicate(system="ICD-10"), window_days=365),
    )
    stats = AlignedStats(hierarchy, aligned, merged.labels())

    print("imputation mix:", report.by_provenance)
    high = "LOINC/1920-8:HIGH"
    point = stats.point(high)
    print(f"\nAST high: correlation {point.correlation:+.3f}, "
          f"support {point.support:.3f}, scent {point.scent:.3f}")
    print("the wide scent triangle says the subtypes disagree; drilling down:\n")
    for child in hierarchy.node(high).children:
        p = stats.point(child)
        print(f"  {p.correlation:+.3f}  (support {p.support:.3f}, "
              f"n={p.patient_count})  {p.label}")
    print("\nraw and patient-imputed results agree; the population-imputed "
          "slice reverses the sign, flagging the global imputation step.")


if __name__ == "__main__":
    main()

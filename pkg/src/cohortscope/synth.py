"""Deterministic synthetic cohort generator with planted outcome signals.

Produces a full input set for the pipeline: FHIR bundles, a LOINC
allowlist, vocabulary and manual hierarchy edge files, the equivalent
post-ingest dataset files, and a ground-truth manifest recording each
planted signal's analytic phi so recovery can be tested quantitatively.
"""

from __future__ import annotations

import datetime
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from . import dataset_io
from .fhir_ingest import EXT_COVID_LABEL, EXT_ETHNICITY, EXT_RACE
from .hierarchy import Edge, write_edge_file
from .model import (
    CohortDataset,
    CohortscopeError,
    EventRecord,
    EventType,
    PatientRecord,
    RawObservation,
)


class InvalidConfigError(CohortscopeError):
    pass


@dataclass(frozen=True)
class PlantedSignal:
    """An event type present with probability p_positive in positive patients
    and p_negative in negative ones."""

    code: str
    label: str
    p_positive: float
    p_negative: float
    system: str = "ICD-10"


@dataclass(frozen=True)
class LabSpec:
    """A lab test with a reference range and controllable missingness.

    A slice of tested patients (global_arm_fraction) never receives a
    range, so their results can only be categorized against the population
    mode; their own high-result probabilities default to the raw arm's but
    can be set separately to plant imputation batch effects.
    """

    loinc_code: str
    label: str
    unit: str
    low: float
    high: float
    tested_fraction: float = 0.5
    max_obs_per_patient: int = 3
    missing_range_fraction: float = 0.2
    global_arm_fraction: float = 0.1
    p_high_positive: float = 0.25
    p_high_negative: float = 0.2
    p_high_positive_global: float | None = None
    p_high_negative_global: float | None = None
    p_low: float = 0.05
    never_ranged: bool = False


ANCHOR_SIGNAL = PlantedSignal(
    code="Z00.0",
    label="Encounter for general adult medical examination",
    p_positive=1.0,
    p_negative=1.0,
)

DEFAULT_SIGNALS: tuple[PlantedSignal, ...] = (
    PlantedSignal("R05", "Cough", 0.55, 0.15),
    PlantedSignal("R50.9", "Fever, unspecified", 0.50, 0.12),
    PlantedSignal("J18.9", "Pneumonia, unspecified organism", 0.35, 0.08),
    PlantedSignal("R06.0", "Dyspnea", 0.40, 0.10),
    PlantedSignal("G47.33", "Obstructive sleep apnea", 0.18, 0.08),
    PlantedSignal("E78.5", "Hyperlipidemia, unspecified", 0.30, 0.15),
    PlantedSignal(
        "Z20.828",
        "Contact with and (suspected) exposure to other viral communicable diseases",
        0.04,
        0.35,
    ),
    PlantedSignal("U07.1", "COVID-19, virus identified", 0.45, 0.02),
)

# (system, code, label, chapter/group range code)
BACKGROUND_POOL: tuple[tuple[str, str, str, str], ...] = (
    ("ICD-10", "E11.9", "Type 2 diabetes mellitus without complications", "E00-E89"),
    ("ICD-10", "I10", "Essential (primary) hypertension", "I00-I99"),
    ("ICD-10", "K21.9", "Gastro-esophageal reflux disease without esophagitis", "K00-K95"),
    ("ICD-10", "M54.5", "Low back pain", "M00-M99"),
    ("ICD-10", "N39.0", "Urinary tract infection, site not specified", "N00-N99"),
    ("ICD-10", "F41.9", "Anxiety disorder, unspecified", "F01-F99"),
    ("ICD-10", "H52.4", "Presbyopia", "H00-H59"),
    ("ICD-10", "L30.9", "Dermatitis, unspecified", "L00-L99"),
    ("ICD-10", "D64.9", "Anemia, unspecified", "D50-D89"),
    ("ICD-10", "G43.909", "Migraine, unspecified, not intractable", "G00-G99"),
    ("ICD-10", "J30.9", "Allergic rhinitis, unspecified", "J00-J99"),
    ("ICD-10", "I25.10", "Atherosclerotic heart disease of native coronary artery", "I00-I99"),
    ("ICD-10", "K59.00", "Constipation, unspecified", "K00-K95"),
    ("ICD-10", "M25.50", "Pain in unspecified joint", "M00-M99"),
    ("ICD-10", "N18.9", "Chronic kidney disease, unspecified", "N00-N99"),
    ("ICD-10", "R51", "Headache", "R00-R99"),
    ("ICD-10", "D50.9", "Iron deficiency anemia, unspecified", "D50-D89"),
    ("ICD-10", "E03.9", "Hypothyroidism, unspecified", "E00-E89"),
    ("CPT4", "99213", "Office outpatient visit, established patient", "99201-99499"),
    ("CPT4", "99214", "Office outpatient visit, moderate complexity", "99201-99499"),
    ("CPT4", "71046", "Chest X-ray, 2 views", "70010-79999"),
    ("CPT4", "85025", "Complete blood count with differential", "80047-89398"),
    ("CPT4", "80053", "Comprehensive metabolic panel", "80047-89398"),
    ("CPT4", "94002", "Ventilator management, initial day", "94002-94799"),
    ("CPT4", "94010", "Spirometry", "94002-94799"),
    ("CPT4", "94660", "Continuous positive airway pressure ventilation initiation", "94002-94799"),
)

DEFAULT_LABS: tuple[LabSpec, ...] = (
    LabSpec(
        loinc_code="1920-8", label="Aspartate aminotransferase (AST)", unit="U/L",
        low=10.0, high=40.0, tested_fraction=0.6, missing_range_fraction=0.25,
        global_arm_fraction=0.15, p_high_positive=0.30, p_high_negative=0.22,
    ),
    LabSpec(
        loinc_code="1988-5", label="C-reactive protein (CRP)", unit="mg/L",
        low=0.0, high=5.0, tested_fraction=0.5, missing_range_fraction=0.2,
        global_arm_fraction=0.1, p_high_positive=0.45, p_high_negative=0.30,
        p_low=0.0,
    ),
    LabSpec(
        loinc_code="6690-2", label="Leukocytes (WBC)", unit="10*3/uL",
        low=4.5, high=11.0, tested_fraction=0.55, missing_range_fraction=0.15,
        global_arm_fraction=0.1, p_high_positive=0.25, p_high_negative=0.20,
        p_low=0.08,
    ),
    LabSpec(
        loinc_code="2532-0", label="Lactate dehydrogenase (LDH)", unit="U/L",
        low=120.0, high=246.0, tested_fraction=0.1, never_ranged=True,
        p_high_positive=0.3, p_high_negative=0.25,
    ),
)

ICD10_CHAPTERS: dict[str, str] = {
    "D50-D89": "Diseases of the blood and blood-forming organs",
    "E00-E89": "Endocrine, nutritional and metabolic diseases",
    "F01-F99": "Mental, behavioral and neurodevelopmental disorders",
    "G00-G99": "Diseases of the nervous system",
    "H00-H59": "Diseases of the eye and adnexa",
    "I00-I99": "Diseases of the circulatory system",
    "J00-J99": "Diseases of the respiratory system",
    "K00-K95": "Diseases of the digestive system",
    "L00-L99": "Diseases of the skin and subcutaneous tissue",
    "M00-M99": "Diseases of the musculoskeletal system and connective tissue",
    "N00-N99": "Diseases of the genitourinary system",
    "R00-R99": "Symptoms, signs and abnormal clinical and laboratory findings",
    "U00-U85": "Codes for special purposes",
    "Z00-Z99": "Factors influencing health status and contact with health services",
}

CPT4_GROUPS: dict[str, str] = {
    "99201-99499": "Evaluation and management",
    "70010-79999": "Diagnostic radiology",
    "80047-89398": "Pathology and laboratory",
    "94002-94799": "Pulmonary services",
}

SIGNAL_CHAPTERS: dict[str, str] = {
    "R05": "R00-R99",
    "R50.9": "R00-R99",
    "R06.0": "R00-R99",
    "R51": "R00-R99",
    "J18.9": "J00-J99",
    "E78.5": "E00-E89",
    "Z00.0": "Z00-Z99",
}

# codes supplemented through the manual edge file rather than the vocabulary
MANUAL_CHAPTERS: dict[str, str] = {
    "U07.1": "U00-U85",
    "Z20.828": "Z00-Z99",
}

ICD10_URI = "http://hl7.org/fhir/sid/icd-10"
CPT4_URI = "http://www.ama-assn.org/go/cpt"
LOINC_URI = "http://loinc.org"


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 20200401
    n_patients: int = 998
    positive_fraction: float = 0.79
    female_fraction: float = 0.60
    planted_signals: tuple[PlantedSignal, ...] = DEFAULT_SIGNALS
    background_event_types: int = len(BACKGROUND_POOL)
    background_rate: float = 0.25
    lab_specs: tuple[LabSpec, ...] = DEFAULT_LABS
    start_date: datetime.date = datetime.date(2020, 3, 1)
    start_jitter_days: int = 28
    max_offset_days: int = 365

    def validate(self) -> None:
        problems = []
        if self.n_patients < 1:
            problems.append("n_patients must be >= 1")
        for name in ("positive_fraction", "female_fraction", "background_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name} must be in [0, 1], got {v}")
        if not 0 <= self.background_event_types <= len(BACKGROUND_POOL):
            problems.append(
                f"background_event_types must be in [0, {len(BACKGROUND_POOL)}]"
            )
        for sig in self.planted_signals:
            for name in ("p_positive", "p_negative"):
                v = getattr(sig, name)
                if not 0.0 <= v <= 1.0:
                    problems.append(f"signal {sig.code}: {name} must be in [0, 1]")
        for lab in self.lab_specs:
            if lab.low > lab.high:
                problems.append(f"lab {lab.loinc_code}: low > high")
            if lab.max_obs_per_patient < 1:
                problems.append(f"lab {lab.loinc_code}: max_obs_per_patient must be >= 1")
            for name in (
                "tested_fraction", "missing_range_fraction", "global_arm_fraction",
                "p_high_positive", "p_high_negative", "p_low",
            ):
                v = getattr(lab, name)
                if not 0.0 <= v <= 1.0:
                    problems.append(f"lab {lab.loinc_code}: {name} must be in [0, 1]")
        if self.max_offset_days < 0 or self.start_jitter_days < 0:
            problems.append("day offsets must be non-negative")
        if problems:
            raise InvalidConfigError("; ".join(problems))

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_patients": self.n_patients,
            "positive_fraction": self.positive_fraction,
            "female_fraction": self.female_fraction,
            "planted_signals": [
                {
                    "class": s.system,
                    "code": s.code,
                    "label": s.label,
                    "p_positive": s.p_positive,
                    "p_negative": s.p_negative,
                }
                for s in self.planted_signals
            ],
            "background_event_types": self.background_event_types,
            "background_rate": self.background_rate,
            "lab_specs": [
                {
                    "loinc_code": lab.loinc_code,
                    "label": lab.label,
                    "unit": lab.unit,
                    "low": lab.low,
                    "high": lab.high,
                    "tested_fraction": lab.tested_fraction,
                    "max_obs_per_patient": lab.max_obs_per_patient,
                    "missing_range_fraction": lab.missing_range_fraction,
                    "global_arm_fraction": lab.global_arm_fraction,
                    "p_high_positive": lab.p_high_positive,
                    "p_high_negative": lab.p_high_negative,
                    "p_high_positive_global": lab.p_high_positive_global,
                    "p_high_negative_global": lab.p_high_negative_global,
                    "p_low": lab.p_low,
                    "never_ranged": lab.never_ranged,
                }
                for lab in self.lab_specs
            ],
            "start_date": self.start_date.isoformat(),
            "start_jitter_days": self.start_jitter_days,
            "max_offset_days": self.max_offset_days,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SynthConfig":
        if not isinstance(doc, dict):
            raise InvalidConfigError("config must be a JSON object")
        kwargs: dict = {}
        simple = (
            "seed", "n_patients", "positive_fraction", "female_fraction",
            "background_event_types", "background_rate", "start_jitter_days",
            "max_offset_days",
        )
        for key in simple:
            if key in doc:
                kwargs[key] = doc[key]
        if "start_date" in doc:
            kwargs["start_date"] = datetime.date.fromisoformat(doc["start_date"])
        if "planted_signals" in doc:
            kwargs["planted_signals"] = tuple(
                PlantedSignal(
                    code=s["code"],
                    label=s.get("label", s["code"]),
                    p_positive=s["p_positive"],
                    p_negative=s["p_negative"],
                    system=s.get("class", "ICD-10"),
                )
                for s in doc["planted_signals"]
            )
        if "lab_specs" in doc:
            defaults = LabSpec(loinc_code="", label="", unit="", low=0.0, high=1.0)
            labs = []
            for entry in doc["lab_specs"]:
                fields = {
                    k: entry[k]
                    for k in (
                        "loinc_code", "label", "unit", "low", "high",
                        "tested_fraction", "max_obs_per_patient",
                        "missing_range_fraction", "global_arm_fraction",
                        "p_high_positive", "p_high_negative",
                        "p_high_positive_global", "p_high_negative_global",
                        "p_low", "never_ranged",
                    )
                    if k in entry
                }
                labs.append(replace(defaults, **fields))
            kwargs["lab_specs"] = tuple(labs)
        try:
            config = cls(**kwargs)
        except TypeError as exc:
            raise InvalidConfigError(f"bad config field: {exc}") from exc
        config.validate()
        return config


def analytic_phi(p_positive: float, p_negative: float, positive_fraction: float) -> float:
    """Phi of the expected presence-by-outcome table for a planted signal."""
    q = positive_fraction
    a = q * p_positive
    b = (1.0 - q) * p_negative
    c = q * (1.0 - p_positive)
    d = (1.0 - q) * (1.0 - p_negative)
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    if denom <= 0.0:
        return 0.0
    return (a * d - b * c) / math.sqrt(denom)


@dataclass
class SynthResult:
    dataset: CohortDataset
    observations: list[RawObservation]
    bundles: list[dict]
    allowlist: list[str]
    vocab_edges: list[Edge]
    manual_edges: list[Edge]
    manifest: dict


def _exact_count(n: int, fraction: float) -> int:
    return int(n * fraction + 0.5)


def _shuffled_flags(rng: random.Random, n: int, n_true: int) -> list[bool]:
    flags = [True] * n_true + [False] * (n - n_true)
    rng.shuffle(flags)
    return flags


def _birth_date(age: int, reference: datetime.date) -> datetime.date:
    # mid-year offset so whole-year age recovery from birthDate is exact
    try:
        anniversary = reference.replace(year=reference.year - age)
    except ValueError:
        anniversary = reference.replace(year=reference.year - age, day=28)
    return anniversary - datetime.timedelta(days=180)


def build_edge_files(config: SynthConfig) -> tuple[list[Edge], list[Edge]]:
    """Vocabulary edges for standard chapters/groups plus manual supplements
    for COVID-specific codes and the lab grouping."""
    vocab: list[Edge] = []
    manual: list[Edge] = []
    for code, label in sorted(ICD10_CHAPTERS.items()):
        vocab.append(Edge("ICD-10", "ICD-10", "ICD-10", code, label))
    for code, label in sorted(CPT4_GROUPS.items()):
        vocab.append(Edge("CPT4", "CPT4", "CPT4", code, label))
    vocab.append(Edge("ICD-10", "G00-G99", "ICD-10", "G47", "Sleep disorders"))

    seen: set[tuple[str, str]] = set()

    chapter_by_letter = {code[0]: code for code in ICD10_CHAPTERS}

    def add_code(system: str, code: str, label: str, chapter: str | None) -> None:
        if (system, code) in seen:
            return
        seen.add((system, code))
        if code in MANUAL_CHAPTERS:
            manual.append(Edge(system, MANUAL_CHAPTERS[code], system, code, label))
            return
        if chapter is None:
            chapter = SIGNAL_CHAPTERS.get(code)
        if system == "ICD-10":
            if code == "G47.33":
                vocab.append(Edge("ICD-10", "G47", "ICD-10", code, label))
                return
            if chapter is None:
                chapter = chapter_by_letter.get(code[0])
            if chapter is None:
                manual.append(Edge(system, "ICD-10", system, code, label))
                return
            vocab.append(Edge(system, chapter, system, code, label))
        else:
            vocab.append(Edge(system, chapter or "99201-99499", system, code, label))

    add_code("ICD-10", ANCHOR_SIGNAL.code, ANCHOR_SIGNAL.label, None)
    for sig in config.planted_signals:
        add_code(sig.system, sig.code, sig.label, None)
    for system, code, label, chapter in BACKGROUND_POOL[: config.background_event_types]:
        add_code(system, code, label, chapter)
    manual.append(Edge("LOINC", "LOINC", "LOINC", "covid-labs",
                       "COVID-related laboratory tests"))
    for lab in config.lab_specs:
        manual.append(Edge("LOINC", "covid-labs", "LOINC", lab.loinc_code, lab.label))
    return vocab, manual


def generate(config: SynthConfig) -> SynthResult:
    """Generate the cohort; deterministic for a fixed config."""
    config.validate()
    rng = random.Random(config.seed)
    n = config.n_patients
    n_positive = _exact_count(n, config.positive_fraction)
    n_female = _exact_count(n, config.female_fraction)
    width = max(4, len(str(n - 1)))
    patient_ids = [f"P{i:0{width}d}" for i in range(n)]
    positive = dict(zip(patient_ids, _shuffled_flags(rng, n, n_positive)))
    female = dict(zip(patient_ids, _shuffled_flags(rng, n, n_female)))

    demographics: dict[str, dict] = {}
    events: list[EventRecord] = []
    observations: list[RawObservation] = []
    backgrounds = BACKGROUND_POOL[: config.background_event_types]

    for pid in patient_ids:
        demographics[pid] = {
            "gender": "female" if female[pid] else "male",
            "ethnicity": rng.choices(
                ["not-hispanic", "hispanic", "unknown"], weights=[85, 12, 3]
            )[0],
            "race": rng.choices(
                ["white", "black", "asian", "other", "unknown"],
                weights=[62, 22, 5, 8, 3],
            )[0],
            "age": rng.randint(0, 95),
        }
        day0 = config.start_date + datetime.timedelta(
            days=rng.randint(0, config.start_jitter_days)
        )
        demographics[pid]["day0"] = day0

        def on_day(offset: int) -> datetime.date:
            return day0 + datetime.timedelta(days=offset)

        events.append(
            EventRecord(
                patient_id=pid,
                date=day0,
                event_type=EventType(system="ICD-10", code=ANCHOR_SIGNAL.code),
            )
        )
        for sig in config.planted_signals:
            p = sig.p_positive if positive[pid] else sig.p_negative
            if rng.random() < p:
                events.append(
                    EventRecord(
                        patient_id=pid,
                        date=on_day(rng.randint(0, config.max_offset_days)),
                        event_type=EventType(system=sig.system, code=sig.code),
                    )
                )
        for system, code, _, _ in backgrounds:
            if rng.random() < config.background_rate:
                events.append(
                    EventRecord(
                        patient_id=pid,
                        date=on_day(rng.randint(0, config.max_offset_days)),
                        event_type=EventType(system=system, code=code),
                    )
                )
        for lab in config.lab_specs:
            if rng.random() >= lab.tested_fraction:
                continue
            in_global_arm = rng.random() < lab.global_arm_fraction
            if in_global_arm:
                p_high = (
                    lab.p_high_positive_global
                    if lab.p_high_positive_global is not None
                    else lab.p_high_positive
                ) if positive[pid] else (
                    lab.p_high_negative_global
                    if lab.p_high_negative_global is not None
                    else lab.p_high_negative
                )
            else:
                p_high = lab.p_high_positive if positive[pid] else lab.p_high_negative
            for _ in range(rng.randint(1, lab.max_obs_per_patient)):
                span = lab.high - lab.low
                draw = rng.random()
                if draw < p_high:
                    value = lab.high + (0.05 + 0.55 * rng.random()) * max(span, 1.0)
                elif draw < p_high + lab.p_low and lab.low > 0:
                    value = lab.low * (0.5 + 0.45 * rng.random())
                else:
                    value = lab.low + (0.02 + 0.96 * rng.random()) * span
                has_range = not (
                    lab.never_ranged
                    or in_global_arm
                    or rng.random() < lab.missing_range_fraction
                )
                observations.append(
                    RawObservation(
                        patient_id=pid,
                        date=on_day(rng.randint(0, config.max_offset_days)),
                        loinc_code=lab.loinc_code,
                        value=round(value, 2),
                        unit=lab.unit,
                        reference_low=lab.low if has_range else None,
                        reference_high=lab.high if has_range else None,
                    )
                )

    all_dates = [ev.date for ev in events] + [ob.date for ob in observations]
    reference_day = max(all_dates)
    patients = [
        PatientRecord(
            patient_id=pid,
            gender=demographics[pid]["gender"],
            ethnicity=demographics[pid]["ethnicity"],
            race=demographics[pid]["race"],
            age=demographics[pid]["age"],
            covid_label=positive[pid],
        )
        for pid in patient_ids
    ]
    dataset = CohortDataset(patients, events)
    observations.sort(key=RawObservation.sort_key)

    bundles = _build_bundles(config, dataset, observations, reference_day)
    vocab_edges, manual_edges = build_edge_files(config)
    q = n_positive / n
    manifest = {
        "config": config.to_json_dict(),
        "n_patients": n,
        "n_positive": n_positive,
        "n_female": n_female,
        "prevalence": q,
        "female_share": n_female / n,
        "anchor": {"class": "ICD-10", "code": ANCHOR_SIGNAL.code},
        "planted_signals": [
            {
                "class": sig.system,
                "code": sig.code,
                "label": sig.label,
                "p_positive": sig.p_positive,
                "p_negative": sig.p_negative,
                "analytic_phi": analytic_phi(sig.p_positive, sig.p_negative, q),
            }
            for sig in config.planted_signals
        ],
    }
    allowlist = sorted({lab.loinc_code for lab in config.lab_specs})
    return SynthResult(
        dataset=dataset,
        observations=observations,
        bundles=bundles,
        allowlist=allowlist,
        vocab_edges=vocab_edges,
        manual_edges=manual_edges,
        manifest=manifest,
    )


def _build_bundles(
    config: SynthConfig,
    dataset: CohortDataset,
    observations: list[RawObservation],
    reference_day: datetime.date,
) -> list[dict]:
    events_by_patient = dataset.events_by_patient()
    obs_by_patient: dict[str, list[RawObservation]] = {}
    for ob in observations:
        obs_by_patient.setdefault(ob.patient_id, []).append(ob)

    label_by_code: dict[tuple[str, str], str] = {}
    for sig in (ANCHOR_SIGNAL, *config.planted_signals):
        label_by_code[(sig.system, sig.code)] = sig.label
    for system, code, label, _ in BACKGROUND_POOL:
        label_by_code[(system, code)] = label

    bundles = []
    chunk = 100
    ids = sorted(dataset.patients)
    for start in range(0, len(ids), chunk):
        entries = []
        for pid in ids[start:start + chunk]:
            patient = dataset.patients[pid]
            entries.append({"resource": {
                "resourceType": "Patient",
                "id": pid,
                "gender": patient.gender,
                "birthDate": _birth_date(patient.age, reference_day).isoformat(),
                "extension": [
                    {"url": EXT_RACE, "valueString": patient.race},
                    {"url": EXT_ETHNICITY, "valueString": patient.ethnicity},
                    {"url": EXT_COVID_LABEL, "valueBoolean": patient.covid_label},
                ],
            }})
            for ev in events_by_patient[pid]:
                if ev.event_type.system == "ICD-10":
                    entries.append({"resource": {
                        "resourceType": "Condition",
                        "subject": {"reference": f"Patient/{pid}"},
                        "code": {"coding": [{
                            "system": ICD10_URI,
                            "code": ev.event_type.code,
                            "display": label_by_code.get(
                                ("ICD-10", ev.event_type.code), ev.event_type.code
                            ),
                        }]},
                        "onsetDateTime": ev.date.isoformat(),
                    }})
                else:
                    entries.append({"resource": {
                        "resourceType": "Procedure",
                        "subject": {"reference": f"Patient/{pid}"},
                        "code": {"coding": [{
                            "system": CPT4_URI,
                            "code": ev.event_type.code,
                            "display": label_by_code.get(
                                ("CPT4", ev.event_type.code), ev.event_type.code
                            ),
                        }]},
                        "performedDateTime": ev.date.isoformat(),
                    }})
            for ob in obs_by_patient.get(pid, []):
                resource = {
                    "resourceType": "Observation",
                    "subject": {"reference": f"Patient/{pid}"},
                    "code": {"coding": [{"system": LOINC_URI, "code": ob.loinc_code}]},
                    "effectiveDateTime": ob.date.isoformat(),
                    "valueQuantity": {"value": ob.value, "unit": ob.unit},
                }
                if ob.has_range():
                    resource["referenceRange"] = [{
                        "low": {"value": ob.reference_low},
                        "high": {"value": ob.reference_high},
                    }]
                entries.append({"resource": resource})
        bundles.append({
            "resourceType": "Bundle",
            "type": "collection",
            "entry": entries,
        })
    return bundles


def write_synth(out_dir: Path, result: SynthResult) -> None:
    """Write the full synthetic input layout under out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fhir_dir = out_dir / "fhir"
    fhir_dir.mkdir(exist_ok=True)
    for i, bundle in enumerate(result.bundles):
        with (fhir_dir / f"bundle_{i:03d}.json").open("w", encoding="utf-8") as fh:
            json.dump(bundle, fh, sort_keys=True, indent=1)
            fh.write("\n")
    (out_dir / "allowlist.txt").write_text(
        "".join(f"{code}\n" for code in result.allowlist), encoding="utf-8"
    )
    write_edge_file(out_dir / "vocab_edges.tsv", result.vocab_edges)
    write_edge_file(out_dir / "manual_edges.tsv", result.manual_edges)
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    dataset_io.save_dataset(
        out_dir / "dataset", result.dataset, observations=result.observations
    )


def read_allowlist(path: Path) -> set[str]:
    codes = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            codes.add(line)
    return codes

"""Core event/patient data model shared by every pipeline stage."""

from __future__ import annotations

import datetime
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

#: Coding systems events may be drawn from.
CODING_SYSTEMS = frozenset({"ICD-10", "CPT4", "LOINC"})

#: Events of this system count as diagnoses for the exclusion rule.
DIAGNOSIS_SYSTEM = "ICD-10"


class CohortscopeError(Exception):
    """Base class for errors raised by this package."""


class EmptyCohortError(CohortscopeError):
    """Raised when an operation requires a non-empty cohort."""


class Provenance(Enum):
    """How a categorized lab event obtained its reference range.

    Non-lab events always carry RAW. UNCATEGORIZED marks lab events whose
    reference range could not be recovered from anywhere.
    """

    RAW = "RAW"
    LOCAL_IMPUTED = "LOCAL_IMPUTED"
    GLOBAL_IMPUTED = "GLOBAL_IMPUTED"
    UNCATEGORIZED = "UNCATEGORIZED"


@dataclass(frozen=True, order=True)
class EventType:
    """A coded clinical concept: coding system plus code."""

    system: str
    code: str

    def __post_init__(self) -> None:
        if self.system not in CODING_SYSTEMS:
            raise ValueError(f"unknown coding system: {self.system!r}")
        if not self.code or any(ch.isspace() for ch in self.code):
            raise ValueError(f"invalid code: {self.code!r}")


@dataclass(frozen=True)
class EventRecord:
    """One dated clinical fact for one patient."""

    patient_id: str
    date: datetime.date
    event_type: EventType
    provenance: Provenance = Provenance.RAW

    def sort_key(self) -> tuple:
        return (
            self.patient_id,
            self.date.toordinal(),
            self.event_type.system,
            self.event_type.code,
            self.provenance.value,
        )


@dataclass(frozen=True)
class PatientRecord:
    """Demographics plus the binary outcome label."""

    patient_id: str
    gender: str
    ethnicity: str
    race: str
    age: int
    covid_label: bool

    def __post_init__(self) -> None:
        if self.age < 0:
            raise ValueError(f"negative age for patient {self.patient_id}")


@dataclass(frozen=True)
class RawObservation:
    """A numeric lab result awaiting categorization.

    Bounds are optional; an observation has a usable reference range only
    when both bounds are present.
    """

    patient_id: str
    date: datetime.date
    loinc_code: str
    value: float
    unit: str | None = None
    reference_low: float | None = None
    reference_high: float | None = None

    def __post_init__(self) -> None:
        if (
            self.reference_low is not None
            and self.reference_high is not None
            and self.reference_low > self.reference_high
        ):
            raise ValueError(
                f"reference_low > reference_high for {self.loinc_code} "
                f"on patient {self.patient_id}"
            )

    def has_range(self) -> bool:
        return self.reference_low is not None and self.reference_high is not None

    def sort_key(self) -> tuple:
        return (
            self.patient_id,
            self.date.toordinal(),
            self.loinc_code,
            self.value,
            self.reference_low if self.reference_low is not None else float("-inf"),
            self.reference_high if self.reference_high is not None else float("-inf"),
        )


class CohortDataset:
    """Immutable container of patients and their events.

    Events form a multiset held in a canonical order so two datasets with
    the same contents compare (and serialize) identically regardless of
    construction order.
    """

    def __init__(
        self,
        patients: Iterable[PatientRecord],
        events: Iterable[EventRecord],
    ) -> None:
        by_id: dict[str, PatientRecord] = {}
        for p in sorted(patients, key=lambda p: p.patient_id):
            if p.patient_id in by_id:
                raise ValueError(f"duplicate patient_id: {p.patient_id}")
            by_id[p.patient_id] = p
        self._patients: Mapping[str, PatientRecord] = by_id
        self._events: tuple[EventRecord, ...] = tuple(
            sorted(events, key=EventRecord.sort_key)
        )

    @property
    def patients(self) -> Mapping[str, PatientRecord]:
        return self._patients

    @property
    def events(self) -> tuple[EventRecord, ...]:
        return self._events

    def __len__(self) -> int:
        return len(self._patients)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CohortDataset):
            return NotImplemented
        return self._patients == other._patients and self._events == other._events

    def labels(self) -> dict[str, bool]:
        return {pid: p.covid_label for pid, p in self._patients.items()}

    def events_by_patient(self) -> dict[str, list[EventRecord]]:
        out: dict[str, list[EventRecord]] = {pid: [] for pid in self._patients}
        for ev in self._events:
            out.setdefault(ev.patient_id, []).append(ev)
        return out

    def observed_types(self) -> set[EventType]:
        return {ev.event_type for ev in self._events}


def validate_dataset(dataset: CohortDataset) -> list[str]:
    """Check dataset invariants; returns one description per violation."""
    violations: list[str] = []
    with_diagnosis: set[str] = set()
    for ev in dataset.events:
        if ev.patient_id not in dataset.patients:
            violations.append(
                f"orphan event: patient {ev.patient_id} not in dataset "
                f"({ev.event_type.system}/{ev.event_type.code} on {ev.date})"
            )
        if ev.event_type.system == DIAGNOSIS_SYSTEM:
            with_diagnosis.add(ev.patient_id)
        if ev.event_type.system != "LOINC" and ev.provenance is not Provenance.RAW:
            violations.append(
                f"non-lab event with imputed provenance: patient {ev.patient_id}, "
                f"{ev.event_type.system}/{ev.event_type.code}"
            )
    for pid in dataset.patients:
        if pid not in with_diagnosis:
            violations.append(f"zero-diagnoses patient: {pid}")
    return violations


def age_decade_label(age: int) -> str:
    low = (age // 10) * 10
    return f"{low}-{low + 9}"


def attribute_summary(dataset: CohortDataset) -> dict:
    """Categorical distributions of the cohort attributes plus outcome prevalence."""
    if len(dataset) == 0:
        raise EmptyCohortError("empty cohort")
    patients = dataset.patients.values()
    gender = Counter(p.gender for p in patients)
    ethnicity = Counter(p.ethnicity for p in patients)
    race = Counter(p.race for p in patients)
    ages = Counter(age_decade_label(p.age) for p in patients)
    positives = sum(1 for p in patients if p.covid_label)
    return {
        "size": len(dataset),
        "positives": positives,
        "prevalence": positives / len(dataset),
        "gender": dict(sorted(gender.items())),
        "ethnicity": dict(sorted(ethnicity.items())),
        "race": dict(sorted(race.items())),
        "age_decades": dict(
            sorted(ages.items(), key=lambda kv: int(kv[0].split("-")[0]))
        ),
    }

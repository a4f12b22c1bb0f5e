import datetime

import pytest

from cohortscope.model import (
    CohortDataset,
    EventRecord,
    EventType,
    PatientRecord,
    Provenance,
    RawObservation,
)


def d(iso: str) -> datetime.date:
    return datetime.date.fromisoformat(iso)


def ev(pid: str, date: str, system: str, code: str,
       prov: Provenance = Provenance.RAW) -> EventRecord:
    return EventRecord(
        patient_id=pid,
        date=d(date),
        event_type=EventType(system=system, code=code),
        provenance=prov,
    )


def patient(pid: str, covid: bool = True, gender: str = "female",
            age: int = 50) -> PatientRecord:
    return PatientRecord(
        patient_id=pid,
        gender=gender,
        ethnicity="not-hispanic",
        race="white",
        age=age,
        covid_label=covid,
    )


def obs(pid: str, date: str, code: str, value: float,
        low: float | None = None, high: float | None = None,
        unit: str | None = "U/L") -> RawObservation:
    return RawObservation(
        patient_id=pid,
        date=d(date),
        loinc_code=code,
        value=value,
        unit=unit,
        reference_low=low,
        reference_high=high,
    )


@pytest.fixture
def two_patient_dataset() -> CohortDataset:
    return CohortDataset(
        patients=[patient("P1", covid=True), patient("P2", covid=False)],
        events=[
            ev("P1", "2020-04-01", "ICD-10", "U07.1"),
            ev("P1", "2020-04-03", "CPT4", "71046"),
            ev("P2", "2020-04-02", "ICD-10", "R05"),
        ],
    )

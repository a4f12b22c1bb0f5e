"""Tab-separated on-disk formats for datasets and pending observations.

Files are UTF-8; lines starting with ``#`` are comments. A dataset
directory holds ``events.tsv`` and ``patients.tsv``, plus
``observations.tsv`` while lab results are still awaiting categorization.
"""

from __future__ import annotations

import datetime
from pathlib import Path
from typing import Iterable

from .model import (
    CohortDataset,
    EventRecord,
    EventType,
    PatientRecord,
    Provenance,
    RawObservation,
)

EVENTS_FILE = "events.tsv"
PATIENTS_FILE = "patients.tsv"
OBSERVATIONS_FILE = "observations.tsv"


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed."""


def _rows(path: Path, n_fields: int) -> Iterable[tuple[int, list[str]]]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != n_fields:
                raise DatasetFormatError(
                    f"{path}:{lineno}: expected {n_fields} tab-separated fields, "
                    f"got {len(fields)}"
                )
            yield lineno, fields


def write_events(path: Path, events: Iterable[EventRecord]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# patient_id\tdate\tclass\tcode\tprovenance\n")
        for ev in events:
            fh.write(
                f"{ev.patient_id}\t{ev.date.isoformat()}\t{ev.event_type.system}"
                f"\t{ev.event_type.code}\t{ev.provenance.value}\n"
            )


def read_events(path: Path) -> list[EventRecord]:
    events = []
    for lineno, (pid, date, system, code, prov) in _rows(path, 5):
        try:
            events.append(
                EventRecord(
                    patient_id=pid,
                    date=datetime.date.fromisoformat(date),
                    event_type=EventType(system=system, code=code),
                    provenance=Provenance(prov),
                )
            )
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return events


def write_patients(path: Path, patients: Iterable[PatientRecord]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# patient_id\tgender\tethnicity\trace\tage\tcovid_label\n")
        for p in patients:
            fh.write(
                f"{p.patient_id}\t{p.gender}\t{p.ethnicity}\t{p.race}"
                f"\t{p.age}\t{1 if p.covid_label else 0}\n"
            )


def read_patients(path: Path) -> list[PatientRecord]:
    patients = []
    for lineno, (pid, gender, ethnicity, race, age, label) in _rows(path, 6):
        if label not in ("0", "1"):
            raise DatasetFormatError(f"{path}:{lineno}: covid_label must be 0 or 1")
        try:
            patients.append(
                PatientRecord(
                    patient_id=pid,
                    gender=gender,
                    ethnicity=ethnicity,
                    race=race,
                    age=int(age),
                    covid_label=label == "1",
                )
            )
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return patients


def _fmt_opt(x: float | None) -> str:
    return "" if x is None else repr(x)


def write_observations(path: Path, observations: Iterable[RawObservation]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# patient_id\tdate\tloinc_code\tvalue\tunit\tref_low\tref_high\n")
        for ob in observations:
            fh.write(
                f"{ob.patient_id}\t{ob.date.isoformat()}\t{ob.loinc_code}"
                f"\t{ob.value!r}\t{ob.unit or ''}"
                f"\t{_fmt_opt(ob.reference_low)}\t{_fmt_opt(ob.reference_high)}\n"
            )


def read_observations(path: Path) -> list[RawObservation]:
    observations = []
    for lineno, (pid, date, loinc, value, unit, low, high) in _rows(path, 7):
        try:
            observations.append(
                RawObservation(
                    patient_id=pid,
                    date=datetime.date.fromisoformat(date),
                    loinc_code=loinc,
                    value=float(value),
                    unit=unit or None,
                    reference_low=float(low) if low else None,
                    reference_high=float(high) if high else None,
                )
            )
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return observations


def save_dataset(
    directory: Path,
    dataset: CohortDataset,
    observations: Iterable[RawObservation] | None = None,
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_events(directory / EVENTS_FILE, dataset.events)
    write_patients(directory / PATIENTS_FILE, dataset.patients.values())
    if observations is not None:
        write_observations(
            directory / OBSERVATIONS_FILE,
            sorted(observations, key=RawObservation.sort_key),
        )


def load_dataset(directory: Path) -> CohortDataset:
    events_path = directory / EVENTS_FILE
    patients_path = directory / PATIENTS_FILE
    for p in (events_path, patients_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing dataset file: {p}")
    return CohortDataset(read_patients(patients_path), read_events(events_path))


def load_observations(directory: Path) -> list[RawObservation]:
    path = directory / OBSERVATIONS_FILE
    if not path.is_file():
        return []
    return read_observations(path)

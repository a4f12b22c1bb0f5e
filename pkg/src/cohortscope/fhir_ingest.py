"""Minimal FHIR-subset reader emitting the triple-based cohort model.

Accepts Bundle files or newline-delimited single resources. Condition and
Procedure resources become events (ICD-10 / CPT4); Observation resources
whose LOINC code is on the allowlist become raw observations awaiting
categorization. Patients with zero diagnosis events are excluded. FHIR is
treated purely as transport: only the handful of fields named below are
read, and malformed individual resources are skipped and counted rather
than failing the run.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .model import (
    DIAGNOSIS_SYSTEM,
    CohortDataset,
    CohortscopeError,
    EventRecord,
    EventType,
    PatientRecord,
    RawObservation,
)

SYSTEM_URI_MAP = {
    "http://hl7.org/fhir/sid/icd-10": "ICD-10",
    "http://hl7.org/fhir/sid/icd-10-cm": "ICD-10",
    "http://www.ama-assn.org/go/cpt": "CPT4",
    "http://loinc.org": "LOINC",
    # already-mapped class identifiers pass through
    "ICD-10": "ICD-10",
    "CPT4": "CPT4",
    "LOINC": "LOINC",
}

EXT_COVID_LABEL = "http://example.org/fhir/StructureDefinition/covid-label"
EXT_RACE = "http://example.org/fhir/StructureDefinition/race"
EXT_ETHNICITY = "http://example.org/fhir/StructureDefinition/ethnicity"
US_CORE_RACE = "http://hl7.org/fhir/us/core/StructureDefinition/us-core-race"
US_CORE_ETHNICITY = "http://hl7.org/fhir/us/core/StructureDefinition/us-core-ethnicity"


class IngestError(CohortscopeError):
    """Hard ingest failure (unreadable input file)."""


@dataclass
class IngestReport:
    resources_read: int = 0
    events_emitted: int = 0
    observations_pending_imputation: int = 0
    skipped: dict[str, int] = field(default_factory=dict)
    excluded_patients: list[str] = field(default_factory=list)
    demographic_resources: int = 0

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    def to_json_dict(self) -> dict:
        return {
            "resources_read": self.resources_read,
            "events_emitted": self.events_emitted,
            "observations_pending_imputation": self.observations_pending_imputation,
            "skipped": dict(sorted(self.skipped.items())),
            "excluded_patients": list(self.excluded_patients),
            "demographic_resources": self.demographic_resources,
        }


def _iter_resources(path: Path, report: IngestReport) -> Iterator[dict]:
    """Yield resource dicts from a Bundle, a single resource, a JSON array,
    or newline-delimited JSON."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read input file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict) and doc.get("resourceType") == "Bundle":
        for entry in doc.get("entry", []):
            resource = entry.get("resource") if isinstance(entry, dict) else None
            if isinstance(resource, dict):
                yield resource
            else:
                report.resources_read += 1
                report.skip("malformed-bundle-entry")
        return
    if isinstance(doc, dict):
        yield doc
        return
    if isinstance(doc, list):
        for item in doc:
            if isinstance(item, dict):
                yield item
            else:
                report.resources_read += 1
                report.skip("malformed-bundle-entry")
        return
    # fall back to newline-delimited resources
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            item = json.loads(line)
        except json.JSONDecodeError:
            report.resources_read += 1
            report.skip("malformed-json")
            continue
        if isinstance(item, dict):
            yield item
        else:
            report.resources_read += 1
            report.skip("malformed-json")


def _reference_id(resource: dict) -> str | None:
    ref = resource.get("subject", {})
    if not isinstance(ref, dict):
        return None
    reference = ref.get("reference")
    if not isinstance(reference, str) or not reference:
        return None
    return reference.split("/")[-1]


def _coding_for(resource: dict, expected_system: str) -> str | None:
    """First code whose coding system maps to the class expected for this
    resource kind."""
    code = resource.get("code")
    if not isinstance(code, dict):
        return None
    for coding in code.get("coding", []):
        if not isinstance(coding, dict):
            continue
        system = SYSTEM_URI_MAP.get(coding.get("system"))
        value = coding.get("code")
        if system == expected_system and isinstance(value, str) and value:
            return value
    return None


def _parse_day(value) -> datetime.date | None:
    if not isinstance(value, str) or len(value) < 10:
        return None
    try:
        return datetime.date.fromisoformat(value[:10])
    except ValueError:
        return None


def _event_date(resource: dict) -> datetime.date | None:
    for key in ("onsetDateTime", "effectiveDateTime", "performedDateTime",
                "recordedDate"):
        day = _parse_day(resource.get(key))
        if day is not None:
            return day
    period = resource.get("performedPeriod")
    if isinstance(period, dict):
        return _parse_day(period.get("start"))
    return None


def _extension_value(extensions: list, urls: set[str]):
    for ext in extensions:
        if not isinstance(ext, dict) or ext.get("url") not in urls:
            continue
        for key in ("valueString", "valueBoolean", "valueInteger"):
            if key in ext:
                return ext[key]
        for nested in ext.get("extension", []):
            if not isinstance(nested, dict):
                continue
            if "valueString" in nested:
                return nested["valueString"]
            coding = nested.get("valueCoding")
            if isinstance(coding, dict) and coding.get("display"):
                return coding["display"]
    return None


@dataclass
class _PendingPatient:
    patient_id: str
    gender: str
    ethnicity: str
    race: str
    birth_date: datetime.date | None
    covid_label: bool


def _read_patient(resource: dict) -> "_PendingPatient | str":
    """Parse a Patient resource; returns a skip reason string on failure."""
    pid = resource.get("id")
    if not isinstance(pid, str) or not pid:
        return "malformed-patient"
    extensions = resource.get("extension", [])
    if not isinstance(extensions, list):
        extensions = []
    label = _extension_value(extensions, {EXT_COVID_LABEL})
    if not isinstance(label, bool):
        return "missing-covid-label"
    race = _extension_value(extensions, {EXT_RACE, US_CORE_RACE})
    ethnicity = _extension_value(extensions, {EXT_ETHNICITY, US_CORE_ETHNICITY})
    return _PendingPatient(
        patient_id=pid,
        gender=str(resource.get("gender") or "unknown"),
        ethnicity=str(ethnicity) if ethnicity else "unknown",
        race=str(race) if race else "unknown",
        birth_date=_parse_day(resource.get("birthDate")),
        covid_label=label,
    )


def _age_years(birth: datetime.date, asof: datetime.date) -> int:
    years = asof.year - birth.year
    if (asof.month, asof.day) < (birth.month, birth.day):
        years -= 1
    return max(years, 0)


def ingest(
    input_paths: Iterable[Path], loinc_allowlist: set[str]
) -> tuple[CohortDataset, list[RawObservation], IngestReport]:
    """Parse FHIR files into a cohort dataset plus pending lab observations.

    Deterministic: the result is independent of file order. Unreadable
    files raise IngestError; malformed resources are skipped and counted.
    """
    report = IngestReport()
    pending_patients: dict[str, _PendingPatient] = {}
    events: list[tuple[str, datetime.date, EventType]] = []
    observations: list[RawObservation] = []

    for path in sorted(Path(p) for p in input_paths):
        for resource in _iter_resources(path, report):
            report.resources_read += 1
            rtype = resource.get("resourceType")
            if rtype == "Patient":
                parsed = _read_patient(resource)
                if isinstance(parsed, str):
                    report.skip(parsed)
                elif parsed.patient_id in pending_patients:
                    report.skip("duplicate-patient")
                else:
                    pending_patients[parsed.patient_id] = parsed
            elif rtype in ("Condition", "Procedure"):
                expected = "ICD-10" if rtype == "Condition" else "CPT4"
                pid = _reference_id(resource)
                code = _coding_for(resource, expected)
                date = _event_date(resource)
                if pid is None:
                    report.skip("malformed-resource")
                elif code is None:
                    report.skip("unknown-coding-system")
                elif date is None:
                    report.skip("missing-date")
                else:
                    events.append(
                        (pid, date, EventType(system=expected, code=code))
                    )
            elif rtype == "Observation":
                pid = _reference_id(resource)
                code = _coding_for(resource, "LOINC")
                date = _event_date(resource)
                quantity = resource.get("valueQuantity")
                value = quantity.get("value") if isinstance(quantity, dict) else None
                if pid is None:
                    report.skip("malformed-resource")
                elif code is None:
                    report.skip("unknown-coding-system")
                elif code not in loinc_allowlist:
                    report.skip("loinc-not-allowlisted")
                elif date is None:
                    report.skip("missing-date")
                elif not isinstance(value, (int, float)) or isinstance(value, bool):
                    report.skip("missing-value")
                else:
                    ranges = resource.get("referenceRange", [])
                    low = high = None
                    if isinstance(ranges, list) and ranges and isinstance(ranges[0], dict):
                        low_doc = ranges[0].get("low")
                        high_doc = ranges[0].get("high")
                        if isinstance(low_doc, dict):
                            low = low_doc.get("value")
                        if isinstance(high_doc, dict):
                            high = high_doc.get("value")
                    unit = quantity.get("unit") if isinstance(quantity, dict) else None
                    observations.append(
                        RawObservation(
                            patient_id=pid,
                            date=date,
                            loinc_code=code,
                            value=float(value),
                            unit=str(unit) if unit else None,
                            reference_low=float(low) if low is not None else None,
                            reference_high=float(high) if high is not None else None,
                        )
                    )
            else:
                report.skip("unsupported-resource-type")

    # resolve references, apply the zero-diagnosis exclusion rule
    known = set(pending_patients)
    with_diagnosis = {
        pid for pid, _, et in events if et.system == DIAGNOSIS_SYSTEM and pid in known
    }
    excluded = sorted(known - with_diagnosis)
    retained = known - set(excluded)
    report.excluded_patients = excluded

    kept_events: list[EventRecord] = []
    for pid, date, et in events:
        if pid not in known:
            report.skip("unknown-patient")
        elif pid not in retained:
            report.skip("patient-excluded")
        else:
            kept_events.append(EventRecord(patient_id=pid, date=date, event_type=et))
    kept_observations: list[RawObservation] = []
    for ob in observations:
        if ob.patient_id not in known:
            report.skip("unknown-patient")
        elif ob.patient_id not in retained:
            report.skip("patient-excluded")
        else:
            kept_observations.append(ob)
    for pid in excluded:
        report.skip("patient-excluded")

    # reference day for ages: the latest clinical activity in the extract
    all_dates = [ev.date for ev in kept_events] + [ob.date for ob in kept_observations]
    asof = max(all_dates) if all_dates else datetime.date.today()

    patients = []
    for pid in sorted(retained):
        pending = pending_patients[pid]
        age = (
            _age_years(pending.birth_date, asof)
            if pending.birth_date is not None
            else 0
        )
        patients.append(
            PatientRecord(
                patient_id=pid,
                gender=pending.gender,
                ethnicity=pending.ethnicity,
                race=pending.race,
                age=age,
                covid_label=pending.covid_label,
            )
        )

    dataset = CohortDataset(patients, kept_events)
    kept_observations.sort(key=RawObservation.sort_key)
    report.events_emitted = len(dataset.events)
    report.observations_pending_imputation = len(kept_observations)
    report.demographic_resources = len(patients)
    return dataset, kept_observations, report

"""Lab categorization (High/Normal/Low) with two-phase reference-range imputation.

An observation carrying its own range is categorized directly (RAW). One
missing a range first borrows the range most frequently used across the
same patient's other occurrences of the test (LOCAL_IMPUTED), then falls
back to the most frequent range across the whole population for that test
(GLOBAL_IMPUTED). When no range exists anywhere for the code, the
observation is kept as a distinct UNCATEGORIZED event type instead of
being dropped.
"""

from __future__ import annotations

import datetime
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .model import (
    CohortscopeError,
    EventRecord,
    EventType,
    Provenance,
    RawObservation,
)


class InvalidLabValueError(CohortscopeError):
    """Raised for non-finite lab values."""


class Category(Enum):
    HIGH = "HIGH"
    NORMAL = "NORMAL"
    LOW = "LOW"
    UNCATEGORIZED = "UNCATEGORIZED"


@dataclass(frozen=True, order=True)
class ReferenceRange:
    """Inclusive normal interval for a lab test, in test units."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ValueError(f"reference range low {self.low} > high {self.high}")


@dataclass(frozen=True)
class CategorizedLabEvent:
    """A lab observation mapped to a category, with range provenance.

    category is UNCATEGORIZED exactly when provenance is UNCATEGORIZED.
    """

    patient_id: str
    date: datetime.date
    loinc_code: str
    category: Category
    provenance: Provenance

    def __post_init__(self) -> None:
        uncat = self.category is Category.UNCATEGORIZED
        if uncat != (self.provenance is Provenance.UNCATEGORIZED):
            raise ValueError(
                "UNCATEGORIZED category and provenance must occur together"
            )

    def event_type(self) -> EventType:
        return EventType(system="LOINC", code=lab_event_code(self))

    def to_event_record(self) -> EventRecord:
        return EventRecord(
            patient_id=self.patient_id,
            date=self.date,
            event_type=self.event_type(),
            provenance=self.provenance,
        )

    def sort_key(self) -> tuple:
        return (
            self.patient_id,
            self.date.toordinal(),
            self.loinc_code,
            self.category.value,
            self.provenance.value,
        )


def lab_event_code(lab: CategorizedLabEvent) -> str:
    """Event-type code for a categorized lab; provenance is part of the code
    so each imputation method is a distinct, separately aggregatable type."""
    if lab.category is Category.UNCATEGORIZED:
        return f"{lab.loinc_code}:UNCATEGORIZED"
    return f"{lab.loinc_code}:{lab.category.value}:{lab.provenance.value}"


_LAB_CODE_RE = re.compile(
    r"^(?P<loinc>.+?):(?:(?P<cat>HIGH|NORMAL|LOW):(?P<prov>RAW|LOCAL_IMPUTED|GLOBAL_IMPUTED)"
    r"|(?P<uncat>UNCATEGORIZED))$"
)


def parse_lab_code(event_type: EventType) -> tuple[str, Category, Provenance] | None:
    """Inverse of lab_event_code; None for non-lab event types."""
    if event_type.system != "LOINC":
        return None
    m = _LAB_CODE_RE.match(event_type.code)
    if m is None:
        return None
    if m.group("uncat"):
        return m.group("loinc"), Category.UNCATEGORIZED, Provenance.UNCATEGORIZED
    return m.group("loinc"), Category(m.group("cat")), Provenance(m.group("prov"))


def categorize(value: float, range_: ReferenceRange) -> Category:
    """Map a numeric result to HIGH/NORMAL/LOW; bounds are inclusive to NORMAL."""
    if not math.isfinite(value):
        raise InvalidLabValueError(f"invalid lab value: {value!r}")
    if value > range_.high:
        return Category.HIGH
    if value < range_.low:
        return Category.LOW
    return Category.NORMAL


@dataclass
class ImputationReport:
    by_provenance: dict[str, int] = field(default_factory=dict)
    by_code: dict[str, dict[str, int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def record(self, loinc_code: str, provenance: Provenance) -> None:
        key = provenance.value
        self.by_provenance[key] = self.by_provenance.get(key, 0) + 1
        per_code = self.by_code.setdefault(loinc_code, {})
        per_code[key] = per_code.get(key, 0) + 1

    def to_json_dict(self) -> dict:
        return {
            "by_provenance": dict(sorted(self.by_provenance.items())),
            "by_code": {
                code: dict(sorted(counts.items()))
                for code, counts in sorted(self.by_code.items())
            },
            "warnings": list(self.warnings),
        }


def _modal_range(
    uses: Sequence[tuple[ReferenceRange, datetime.date]],
) -> ReferenceRange:
    """Most frequently used range; ties broken by most recent use, then by
    smallest low bound, then smallest high bound."""
    counts = Counter(r for r, _ in uses)
    latest: dict[ReferenceRange, datetime.date] = {}
    for r, d in uses:
        if r not in latest or d > latest[r]:
            latest[r] = d
    return max(
        counts,
        key=lambda r: (counts[r], latest[r].toordinal(), -r.low, -r.high),
    )


def impute_and_categorize(
    observations: Iterable[RawObservation],
) -> tuple[list[CategorizedLabEvent], ImputationReport]:
    """Categorize every observation, imputing missing ranges locally then globally.

    Output order is canonical (sorted), so results are identical under any
    input permutation.
    """
    obs = sorted(observations, key=RawObservation.sort_key)
    report = ImputationReport()

    # Range pools come from observed (RAW) ranges only, so one patient's
    # imputed ranges never feed another's.
    local_uses: dict[tuple[str, str], list[tuple[ReferenceRange, datetime.date]]]
    local_uses = defaultdict(list)
    global_uses: dict[str, list[tuple[ReferenceRange, datetime.date]]]
    global_uses = defaultdict(list)
    units_seen: dict[str, set[str]] = defaultdict(set)
    for ob in obs:
        if ob.unit:
            units_seen[ob.loinc_code].add(ob.unit)
        if ob.has_range():
            r = ReferenceRange(low=ob.reference_low, high=ob.reference_high)
            local_uses[(ob.patient_id, ob.loinc_code)].append((r, ob.date))
            global_uses[ob.loinc_code].append((r, ob.date))

    local_mode = {key: _modal_range(uses) for key, uses in local_uses.items()}
    global_mode = {code: _modal_range(uses) for code, uses in global_uses.items()}

    events: list[CategorizedLabEvent] = []
    for ob in obs:
        if ob.has_range():
            range_ = ReferenceRange(low=ob.reference_low, high=ob.reference_high)
            provenance = Provenance.RAW
        elif (ob.patient_id, ob.loinc_code) in local_mode:
            range_ = local_mode[(ob.patient_id, ob.loinc_code)]
            provenance = Provenance.LOCAL_IMPUTED
        elif ob.loinc_code in global_mode:
            range_ = global_mode[ob.loinc_code]
            provenance = Provenance.GLOBAL_IMPUTED
        else:
            events.append(
                CategorizedLabEvent(
                    patient_id=ob.patient_id,
                    date=ob.date,
                    loinc_code=ob.loinc_code,
                    category=Category.UNCATEGORIZED,
                    provenance=Provenance.UNCATEGORIZED,
                )
            )
            report.record(ob.loinc_code, Provenance.UNCATEGORIZED)
            continue
        events.append(
            CategorizedLabEvent(
                patient_id=ob.patient_id,
                date=ob.date,
                loinc_code=ob.loinc_code,
                category=categorize(ob.value, range_),
                provenance=provenance,
            )
        )
        report.record(ob.loinc_code, provenance)

    for code, units in sorted(units_seen.items()):
        if len(units) > 1:
            report.warnings.append(
                f"loinc {code} observed with multiple units: "
                + ", ".join(sorted(units))
            )

    events.sort(key=CategorizedLabEvent.sort_key)
    return events, report

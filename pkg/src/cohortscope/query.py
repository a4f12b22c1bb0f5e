"""Sentinel-aligned temporal queries.

A query selects patients having at least one event matching the sentinel
predicate, re-bases each matched patient's timeline at the first such
event, and keeps events falling inside the following window.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import Mapping

from .model import (
    CODING_SYSTEMS,
    CohortDataset,
    CohortscopeError,
    EventType,
    Provenance,
)


class InvalidWindowError(CohortscopeError):
    pass


class QueryFormatError(CohortscopeError):
    pass


@dataclass(frozen=True)
class SentinelPredicate:
    """Matches events of one coding system, optionally narrowed to specific
    codes or code prefixes. Empty codes and prefixes mean any code."""

    system: str
    codes: frozenset[str] = frozenset()
    prefixes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.system not in CODING_SYSTEMS:
            raise QueryFormatError(f"unknown sentinel class: {self.system!r}")

    def matches(self, event_type: EventType) -> bool:
        if event_type.system != self.system:
            return False
        if not self.codes and not self.prefixes:
            return True
        if event_type.code in self.codes:
            return True
        return any(event_type.code.startswith(p) for p in self.prefixes)


@dataclass(frozen=True)
class TemporalQuery:
    sentinel: SentinelPredicate
    window_days: int
    direction: str = "AFTER"

    def __post_init__(self) -> None:
        if self.window_days < 1:
            raise InvalidWindowError(
                f"invalid window: window_days must be >= 1, got {self.window_days}"
            )
        if self.direction != "AFTER":
            raise QueryFormatError(
                f"only AFTER alignment is supported, got {self.direction!r}"
            )

    def to_json_dict(self) -> dict:
        return {
            "sentinel": {
                "class": self.sentinel.system,
                "codes": sorted(self.sentinel.codes),
                "prefixes": list(self.sentinel.prefixes),
            },
            "window_days": self.window_days,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TemporalQuery":
        if not isinstance(doc, dict):
            raise QueryFormatError("query must be a JSON object")
        try:
            sentinel_doc = doc["sentinel"]
            window_days = doc["window_days"]
        except (TypeError, KeyError) as exc:
            raise QueryFormatError(f"query missing field: {exc}") from exc
        if not isinstance(sentinel_doc, dict) or "class" not in sentinel_doc:
            raise QueryFormatError("sentinel must be an object with a 'class' field")
        if not isinstance(window_days, int) or isinstance(window_days, bool):
            raise QueryFormatError("window_days must be an integer")
        codes = sentinel_doc.get("codes") or []
        prefixes = sentinel_doc.get("prefixes") or []
        if not isinstance(codes, list) or not isinstance(prefixes, list):
            raise QueryFormatError("sentinel codes/prefixes must be lists")
        return cls(
            sentinel=SentinelPredicate(
                system=sentinel_doc["class"],
                codes=frozenset(str(c) for c in codes),
                prefixes=tuple(str(p) for p in prefixes),
            ),
            window_days=window_days,
        )


@dataclass(frozen=True)
class AlignedEvent:
    offset_days: int
    event_type: EventType
    provenance: Provenance


@dataclass(frozen=True)
class PatientStream:
    sentinel_date: datetime.date
    events: tuple[AlignedEvent, ...]


@dataclass(frozen=True)
class AlignedCohort:
    """Per-patient event streams re-based to each patient's sentinel date."""

    streams: Mapping[str, PatientStream]
    matched_patient_ids: tuple[str, ...]
    unmatched_patient_ids: tuple[str, ...]
    window_days: int = field(default=0)

    def observed_types(self) -> set[EventType]:
        return {
            ev.event_type for stream in self.streams.values() for ev in stream.events
        }


def run_query(dataset: CohortDataset, query: TemporalQuery) -> AlignedCohort:
    """Align each matching patient at their first sentinel event and clip to
    the window; sentinel-day events (offset 0) are retained."""
    streams: dict[str, PatientStream] = {}
    unmatched: list[str] = []
    for pid, events in dataset.events_by_patient().items():
        sentinel_dates = [
            ev.date for ev in events if query.sentinel.matches(ev.event_type)
        ]
        if not sentinel_dates:
            unmatched.append(pid)
            continue
        sentinel = min(sentinel_dates)
        aligned = [
            AlignedEvent(
                offset_days=(ev.date - sentinel).days,
                event_type=ev.event_type,
                provenance=ev.provenance,
            )
            for ev in events
            if 0 <= (ev.date - sentinel).days <= query.window_days
        ]
        aligned.sort(
            key=lambda a: (
                a.offset_days,
                a.event_type.system,
                a.event_type.code,
                a.provenance.value,
            )
        )
        streams[pid] = PatientStream(sentinel_date=sentinel, events=tuple(aligned))
    return AlignedCohort(
        streams=streams,
        matched_patient_ids=tuple(sorted(streams)),
        unmatched_patient_ids=tuple(sorted(unmatched)),
        window_days=query.window_days,
    )

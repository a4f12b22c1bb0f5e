import datetime

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cohortscope.model import CohortDataset, EventRecord, EventType, Provenance
from cohortscope.query import (
    AlignedCohort,
    InvalidWindowError,
    QueryFormatError,
    SentinelPredicate,
    TemporalQuery,
    run_query,
)

from conftest import d, ev, patient

ANY_ICD10 = TemporalQuery(sentinel=SentinelPredicate(system="ICD-10"), window_days=365)


def test_window_must_be_positive():
    with pytest.raises(InvalidWindowError, match="invalid window"):
        TemporalQuery(sentinel=SentinelPredicate(system="ICD-10"), window_days=0)


def test_query_json_roundtrip():
    q = TemporalQuery(
        sentinel=SentinelPredicate(
            system="ICD-10", codes=frozenset({"U07.1"}), prefixes=("G47",)
        ),
        window_days=90,
    )
    assert TemporalQuery.from_json_dict(q.to_json_dict()) == q


def test_query_json_rejects_bad_documents():
    with pytest.raises(QueryFormatError):
        TemporalQuery.from_json_dict({"window_days": 10})
    with pytest.raises(QueryFormatError):
        TemporalQuery.from_json_dict(
            {"sentinel": {"class": "ICD-10"}, "window_days": "ten"}
        )
    with pytest.raises(QueryFormatError):
        TemporalQuery.from_json_dict(
            {"sentinel": {"class": "SNOMED"}, "window_days": 10}
        )


def test_sentinel_predicate_matching():
    any_icd = SentinelPredicate(system="ICD-10")
    assert any_icd.matches(EventType(system="ICD-10", code="R05"))
    assert not any_icd.matches(EventType(system="CPT4", code="99213"))
    narrowed = SentinelPredicate(
        system="ICD-10", codes=frozenset({"U07.1"}), prefixes=("G47",)
    )
    assert narrowed.matches(EventType(system="ICD-10", code="U07.1"))
    assert narrowed.matches(EventType(system="ICD-10", code="G47.33"))
    assert not narrowed.matches(EventType(system="ICD-10", code="R05"))


def test_all_patients_match_when_everyone_has_a_diagnosis(two_patient_dataset):
    aligned = run_query(two_patient_dataset, ANY_ICD10)
    assert aligned.matched_patient_ids == ("P1", "P2")
    assert aligned.unmatched_patient_ids == ()


def test_event_outside_window_excluded():
    ds = CohortDataset(
        patients=[patient("P1")],
        events=[
            ev("P1", "2020-01-01", "ICD-10", "U07.1"),
            ev("P1", "2021-02-05", "CPT4", "99213"),  # 400 days later
        ],
    )
    aligned = run_query(ds, ANY_ICD10)
    stream = aligned.streams["P1"]
    assert [e.event_type.code for e in stream.events] == ["U07.1"]


def test_sentinel_day_events_included_at_offset_zero():
    ds = CohortDataset(
        patients=[patient("P1")],
        events=[
            ev("P1", "2020-01-01", "ICD-10", "U07.1"),
            ev("P1", "2020-01-01", "CPT4", "99213"),
        ],
    )
    stream = run_query(ds, ANY_ICD10).streams["P1"]
    assert [e.offset_days for e in stream.events] == [0, 0]


def test_alignment_uses_first_matching_event():
    ds = CohortDataset(
        patients=[patient("P1")],
        events=[
            ev("P1", "2020-03-01", "ICD-10", "R05"),
            ev("P1", "2020-01-01", "ICD-10", "U07.1"),
        ],
    )
    stream = run_query(ds, ANY_ICD10).streams["P1"]
    assert stream.sentinel_date == d("2020-01-01")
    assert [e.offset_days for e in stream.events] == [0, 60]


def test_patient_without_matching_events_unmatched():
    ds = CohortDataset(
        patients=[patient("P1"), patient("P2")],
        events=[
            ev("P1", "2020-01-01", "ICD-10", "U07.1"),
            ev("P1", "2020-01-02", "LOINC", "1920-8:HIGH:RAW",
               prov=Provenance.RAW),
            ev("P2", "2020-01-01", "ICD-10", "R05"),
        ],
    )
    q = TemporalQuery(sentinel=SentinelPredicate(system="LOINC"), window_days=30)
    aligned = run_query(ds, q)
    assert aligned.matched_patient_ids == ("P1",)
    assert aligned.unmatched_patient_ids == ("P2",)


def test_events_before_sentinel_are_dropped():
    ds = CohortDataset(
        patients=[patient("P1")],
        events=[
            ev("P1", "2020-02-01", "ICD-10", "U07.1"),
            ev("P1", "2020-01-15", "CPT4", "99213"),
        ],
    )
    stream = run_query(ds, ANY_ICD10).streams["P1"]
    assert [e.event_type.code for e in stream.events] == ["U07.1"]


_codes = st.sampled_from(["U07.1", "R05", "G47.33", "J18.9", "99213", "1920-8:HIGH:RAW"])
_dates = st.dates(
    min_value=datetime.date(2020, 1, 1), max_value=datetime.date(2021, 6, 30)
)


@st.composite
def valid_datasets(draw):
    """Datasets passing the zero-diagnosis exclusion rule."""
    n = draw(st.integers(min_value=1, max_value=8))
    patients = [patient(f"P{i}", covid=draw(st.booleans())) for i in range(n)]
    events = []
    for p in patients:
        events.append(
            EventRecord(
                patient_id=p.patient_id,
                date=draw(_dates),
                event_type=EventType(
                    system="ICD-10", code=draw(st.sampled_from(["U07.1", "R05", "Z00.0"]))
                ),
            )
        )
    extra = draw(st.lists(st.tuples(
        st.integers(min_value=0, max_value=n - 1),
        st.sampled_from(["ICD-10", "CPT4"]),
        _codes,
        _dates,
    ), max_size=30))
    for idx, system, code, date in extra:
        if system == "LOINC" or ":" in code:
            continue
        events.append(EventRecord(
            patient_id=f"P{idx}",
            date=date,
            event_type=EventType(system=system, code=code),
        ))
    return CohortDataset(patients, events)


@given(valid_datasets())
def test_any_icd10_query_matches_everyone(ds):
    aligned = run_query(ds, ANY_ICD10)
    assert aligned.unmatched_patient_ids == ()
    assert set(aligned.matched_patient_ids) == set(ds.patients)


@given(valid_datasets())
def test_matched_unmatched_partition_and_window_bounds(ds):
    q = TemporalQuery(
        sentinel=SentinelPredicate(system="ICD-10", prefixes=("U",)), window_days=90
    )
    aligned = run_query(ds, q)
    matched = set(aligned.matched_patient_ids)
    unmatched = set(aligned.unmatched_patient_ids)
    assert matched | unmatched == set(ds.patients)
    assert matched & unmatched == set()
    source = {
        (e.patient_id, e.date, e.event_type, e.provenance) for e in ds.events
    }
    for pid, stream in aligned.streams.items():
        for a in stream.events:
            assert 0 <= a.offset_days <= q.window_days
            date = stream.sentinel_date + datetime.timedelta(days=a.offset_days)
            assert (pid, date, a.event_type, a.provenance) in source

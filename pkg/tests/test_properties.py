"""Property tests for the spec-level invariants that hold for all inputs."""

import json
import string

import pytest
from hypothesis import given, settings, strategies as st

from storydeck.errors import (
    CapacityExceeded,
    DuplicateFact,
    LockViolation,
    MalformedResponse,
    OutOfRange,
    StorydeckError,
)
from storydeck.facts import describe_fact
from storydeck.meta import extract_payload, parse_identification_response
from storydeck.model import (
    Column,
    Dataset,
    FactEntry,
    Slide,
    StoryDeck,
    evaluate_subspace,
    validate_dataset,
)
from storydeck.organizer import Placement, PlacementRationale, apply_placement

from conftest import make_fact

# ---------------------------------------------------------------------------
# dataset strategies

cell = st.one_of(
    st.none(),
    st.integers(-1000, 3000),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.text(alphabet=string.ascii_letters + " -", min_size=0, max_size=8),
    st.sampled_from(["2007", "2010-05-01", "12.5", ""]),
)


@st.composite
def datasets(draw):
    n_cols = draw(st.integers(1, 4))
    n_rows = draw(st.integers(1, 8))
    names = [f"col{i}" for i in range(n_cols)]
    if draw(st.booleans()):
        names[0] = "year"
    rows = tuple(
        tuple(draw(cell) for _ in range(n_cols)) for _ in range(n_rows)
    )
    return Dataset("gen", tuple(Column(n) for n in names), rows)


class TestDatasetProperties:
    @given(datasets())
    @settings(max_examples=150)
    def test_validate_is_idempotent(self, raw):
        try:
            once = validate_dataset(raw)
        except StorydeckError:
            return  # invalid inputs are allowed to be rejected
        assert validate_dataset(once) == once

    @given(datasets())
    @settings(max_examples=150)
    def test_every_validated_column_has_a_kind(self, raw):
        try:
            valid = validate_dataset(raw)
        except StorydeckError:
            return
        assert all(c.kind in ("categorical", "numeric", "temporal") for c in valid.columns)

    @given(datasets(), st.integers(0, 3))
    @settings(max_examples=150)
    def test_subspace_rows_match_their_filters(self, raw, col_idx):
        try:
            valid = validate_dataset(raw)
        except StorydeckError:
            return
        col = valid.columns[col_idx % len(valid.columns)]
        values = {row[valid.column_index(col.name)] for row in valid.rows}
        values.discard(None)
        if not values:
            return
        value = sorted(values, key=lambda v: str(v))[0]
        rows = evaluate_subspace(valid, frozenset({(col.name, value)}))
        i = valid.column_index(col.name)
        assert all(r[i] == value for r in rows)
        assert all(r in valid.rows for r in rows)
        # complement: every matching row is returned
        assert len(rows) == sum(1 for r in valid.rows if r[i] == value)


# ---------------------------------------------------------------------------
# placement strategies

RAT = PlacementRationale("a", "b", "c", "d")


@st.composite
def decks(draw):
    cap = draw(st.integers(1, 4))
    n_slides = draw(st.integers(0, 4))
    slides = []
    fid = 0
    for s in range(n_slides):
        n = draw(st.integers(1, cap))
        entries = tuple(
            FactEntry(f"f{fid + i}", order_locked=draw(st.booleans())) for i in range(n)
        )
        fid += n
        slides.append(
            Slide(title=f"s{s}", entries=entries, title_locked=draw(st.booleans()))
        )
    return StoryDeck(slides=tuple(slides), max_facts_per_slide=cap)


@st.composite
def placements(draw, deck):
    if not deck.slides or draw(st.booleans()):
        return Placement(True, draw(st.integers(0, len(deck.slides))), 0, "new", RAT)
    idx = draw(st.integers(0, len(deck.slides) - 1))
    pos = draw(st.integers(0, len(deck.slides[idx].entries)))
    return Placement(False, idx, pos, "retitled", RAT)


class TestPlacementProperties:
    @given(st.data())
    @settings(max_examples=200)
    def test_insertion_only_and_locks(self, data):
        deck = data.draw(decks())
        placement = data.draw(placements(deck))
        before = deck.fact_ids()
        locked_titles = [
            (i, s.title) for i, s in enumerate(deck.slides) if s.title_locked
        ]
        try:
            out = apply_placement(deck, FactEntry("new-fact"), placement)
        except (CapacityExceeded, LockViolation):
            return  # rejected placements must leave no trace; deck is immutable
        except (DuplicateFact, OutOfRange):
            pytest.fail("strategy produced an invalid placement")
        after = [fid for fid in out.fact_ids() if fid != "new-fact"]
        assert after == before
        assert "new-fact" in out.fact_ids()
        assert all(1 <= len(s.entries) <= out.max_facts_per_slide for s in out.slides)
        # locked titles survive by matching their surviving member facts
        for i, title in locked_titles:
            members = {e.fact_id for e in deck.slides[i].entries}
            survivors = [
                s for s in out.slides if members & {e.fact_id for e in s.entries}
            ]
            assert len(survivors) == 1
            assert survivors[0].title == title

    @given(st.data())
    @settings(max_examples=200)
    def test_rejection_reasons_are_accurate(self, data):
        deck = data.draw(decks())
        placement = data.draw(placements(deck))
        try:
            apply_placement(deck, FactEntry("new-fact"), placement)
        except CapacityExceeded:
            assert not placement.new_slide
            slide = deck.slides[placement.slide_index]
            assert len(slide.entries) >= deck.max_facts_per_slide
        except LockViolation:
            slide = deck.slides[placement.slide_index]
            assert 0 < placement.position < len(slide.entries)
            left = slide.entries[placement.position - 1]
            right = slide.entries[placement.position]
            assert left.order_locked or right.order_locked


# ---------------------------------------------------------------------------
# description totality


type_params = st.sampled_from(
    [
        ("value", {"value": 7}),
        ("difference", {"high": "A", "low": "B", "gap": 3.5}),
        ("proportion", {"share": 0.25}),
        ("trend", {"direction": "increasing", "slope": 1.25, "start": 2007, "end": 2011}),
        ("rank", {"order": ["A", "B", "C"]}),
        ("extreme", {"polarity": "min", "value": 2}),
        ("outlier", {"value": 99, "distance": 50.0}),
    ]
)


class TestDescriptionProperties:
    @given(
        tp=type_params,
        subspace_value=st.text(string.ascii_letters, min_size=1, max_size=8),
        agg=st.sampled_from(["sum", "mean", "min", "max", "count"]),
    )
    @settings(max_examples=150)
    def test_describe_never_fails_and_is_nonempty(self, tp, subspace_value, agg):
        fact_type, params = tp
        fact = make_fact(
            subspace={("category", subspace_value)},
            focus={("model", "X")},
            measures=(("sales", agg),),
            fact_type=fact_type,
            parameters=params,
        )
        text = describe_fact(fact)
        assert text and text.endswith(".")


# ---------------------------------------------------------------------------
# response parsing totality


class TestParsingProperties:
    @given(st.text(max_size=300))
    @settings(max_examples=200)
    def test_arbitrary_text_never_crashes(self, text):
        try:
            parse_identification_response(text)
        except MalformedResponse:
            pass

    @given(
        prefix=st.text(alphabet=string.ascii_letters + " .,!\n", max_size=60),
        suffix=st.text(alphabet=string.ascii_letters + " .,!\n", max_size=60),
    )
    @settings(max_examples=100)
    def test_payload_recovered_from_surrounding_prose(self, prefix, suffix):
        payload = {"relations": []}
        obj = extract_payload(prefix + json.dumps(payload) + suffix)
        assert obj == payload

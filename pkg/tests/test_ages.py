import io
import random

import pytest

from harmlens.ages import (
    AGE_WORDS,
    BROAD_TERMS,
    age_histogram,
    build_age_patterns,
    extract_ages,
    extract_ages_text,
)
from harmlens.errors import ContractError
from harmlens.lexicon import compile_patterns
from harmlens.sessions import Session

from oracles import naive_matched_set


def surface_forms(age: int) -> list[str]:
    """Realistic strings each generated pattern is meant to catch."""
    w = AGE_WORDS[age]
    forms = [f"{age}y", f"{age}yo", f"{age}yrs", f"{age} yo", f"{age} years old", f"{age}+yo",
             f"{age}-year-old", f"{w} year old", f"{w} years", f"{w}-year-old",
             f"{age}boy", f"{age}boys", f"{age}girl", f"{age}girls"]
    if age >= 13:
        forms.append(f"{age}teen")
    return forms


def S(*queries):
    return Session(0, [(i, q) for i, q in enumerate(queries)])


def test_age_13_patterns():
    raws = {p.raw for p in build_age_patterns(13).patterns}
    assert {"13y*", "13teen", "thirteen year*", "13girls", "13+y*", "13 y*", "13-y*",
            "thirteen-year*", "13boy", "13boys", "13girl"} <= raws
    assert all(p.boundary for p in build_age_patterns(13).patterns)


def test_no_teen_form_below_13():
    assert not any(p.raw.endswith("teen") for p in build_age_patterns(8).patterns)


@pytest.mark.parametrize("age", [-1, 20, 3.0])
def test_age_out_of_range(age):
    with pytest.raises(ContractError):
        build_age_patterns(age)


@pytest.mark.parametrize("query,ages", [
    ("13yo clips", {13}),
    ("sixteen year old", {16}),
    ("18 years old", {18}),
    ("18yo", {18}),
    ("13teen", {13}),
    ("thirteen year old", {13}),
    ("13girls", {13}),
    ("weather tomorrow", set()),
    ("seventeen-year-old and 12 yo", {17, 12}),
    ("2023 yearbook", set()),
])
def test_extract_ages_text(query, ages):
    assert extract_ages_text(query) == ages


def test_eighteen_not_eight_matches_naive_oracle():
    eight = [(p.raw, p.boundary) for p in build_age_patterns(8).patterns]
    eighteen = [(p.raw, p.boundary) for p in build_age_patterns(18).patterns]
    assert naive_matched_set(eight, "18 years old") == set()
    assert naive_matched_set(eighteen, "18 years old") == {"18 y*"}
    assert extract_ages(S("18 years old")) == {18}


def test_cross_product_no_collisions():
    for age in range(20):
        for form in surface_forms(age):
            assert extract_ages_text(form) == {age}, form
            # every other age's naive pattern set must stay silent
            for other in range(20):
                if other == age:
                    continue
                pats = [(p.raw, p.boundary) for p in build_age_patterns(other).patterns]
                assert not naive_matched_set(pats, form), (form, other)


def test_session_union_of_ages():
    assert extract_ages(S("13yo", "nothing", "fifteen year old")) == {13, 15}


@pytest.fixture
def target():
    return compile_patterns(["tgtphrase"])


def test_histogram_counts_and_teen_restriction(target):
    sessions = [
        S("16yo tgtphrase", "sixteen year old"),
        S("16 yo", "12yo"),
        S("teen movie"),
        S("tgtphrase teens"),
        S("toddler shoes", "baby toddlers"),
        S("no ages here"),
    ]
    h = age_histogram(sessions, target)
    assert h.exact_counts[16] == 2 and h.exact_counts[12] == 1
    assert sum(h.exact_counts.values()) == 3
    assert h.age_sessions == 2
    assert h.broad_counts["teen"] == 1
    assert h.broad_counts["toddler"] == 1 and h.broad_counts["baby"] == 1
    assert list(h.broad_counts) == list(BROAD_TERMS)


def test_histogram_empty(target):
    h = age_histogram([S("nothing"), S("seventeen")], target)
    assert set(h.exact_counts.values()) == {0}
    assert len(h.exact_counts) == 20


def test_histogram_permutation_invariant(target):
    rng = random.Random(8)
    qs = ["13yo", "tgtphrase teen", "teen", "preteen", "5 yo", "twelve year old", "x"]
    sessions = [S(*rng.sample(qs, 2)) for _ in range(30)]
    ref = age_histogram(sessions, target)
    rng.shuffle(sessions)
    assert age_histogram(sessions, target) == ref
    max_ages = max(len(extract_ages(s)) for s in sessions)
    assert sum(ref.exact_counts.values()) <= ref.age_sessions * max_ages


def test_histogram_csv(target):
    h = age_histogram([S("13yo")], target)
    buf = io.StringIO()
    h.write_exact_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "age,count" and len(rows) == 21 and rows[14] == "13,1"
    buf = io.StringIO()
    h.write_broad_csv(buf)
    assert buf.getvalue().splitlines()[0] == "term,count"

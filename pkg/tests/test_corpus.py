import io
import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from harmlens.corpus import (
    Document,
    extract_text,
    ingest,
    iter_corpus,
    sample,
    sentence_split,
    write_corpus,
)
from harmlens.errors import ContractError

from synth import make_doc


def test_extract_empty():
    ex = extract_text("")
    assert (ex.title, ex.body_text, ex.media_refs) == ("", "", [])


def test_extract_strips_tags_and_takes_title():
    ex = extract_text("<title>Shop</title><p>hello <b>world</b></p>")
    assert ex.title == "Shop"
    assert "hello world" in ex.body_text
    assert "<" not in ex.body_text and ">" not in ex.body_text


def test_extract_keeps_media_filename_and_caption():
    ex = extract_text('<img src="clip13.jpg" alt="sample caption">')
    assert "clip13.jpg" in ex.body_text
    assert "sample caption" in ex.body_text
    assert ex.media_refs == [("clip13.jpg", "sample caption")]


def test_extract_video_figcaption_and_path_basename():
    ex = extract_text(
        '<figure><video src="/media/v/clip%20two.mp4"></video>'
        "<figcaption>short   caption</figcaption></figure>"
    )
    assert ex.media_refs == [("clip two.mp4", "short caption")]
    assert "clip two.mp4" in ex.body_text


def test_extract_drops_script_and_style():
    ex = extract_text("<style>p{x:1}</style><script>var a = 1;</script><p>kept</p>")
    assert ex.body_text == "kept"


def test_extract_title_falls_back_to_first_heading():
    ex = extract_text("<body><h2>First <i>one</i></h2><h1>Second</h1><p>x</p></body>")
    assert ex.title == "First one"


def test_extract_collapses_whitespace_and_survives_garbage():
    ex = extract_text("<p>a\n\n   b</p><div><span>c<<</div></p></b>&amp; d <!-- x")
    assert "  " not in ex.body_text
    assert ex.body_text.startswith("a b c")


@given(st.text(max_size=300))
@settings(max_examples=300, deadline=None)
def test_extract_is_idempotent_on_its_body_text(markup):
    body = extract_text(markup).body_text
    assert extract_text(body).body_text == body


@given(st.text(alphabet=st.sampled_from(list("<>/ab =\"'&;#ipmgsrctl.!?\n")), max_size=200))
@settings(max_examples=300, deadline=None)
def test_extract_idempotent_on_tag_soup(markup):
    ex = extract_text(markup)
    assert extract_text(ex.body_text).body_text == ex.body_text
    assert not set(ex.title) & set("<>&")
    for name, _ in ex.media_refs:
        assert name in ex.body_text


@pytest.mark.parametrize("text,expected", [
    ("", []),
    ("A b. C d!", ["a b", "c d"]),
    ("no terminal punctuation", ["no terminal punctuation"]),
    ("One?  Two\nthree   four.\n\n", ["one", "two", "three four"]),
    ("version 1.5 works", ["version 1.5 works"]),
])
def test_sentence_split(text, expected):
    assert sentence_split(text) == expected


def _snap(domain, ts, markup="<p>x</p>"):
    return json.dumps({"domain": domain, "url_path": "/", "fetched_at": ts, "markup": markup})


def test_ingest_newest_wins():
    res = ingest([_snap("d.onion", 1, "<p>old</p>"), _snap("d.onion", 2, "<p>new</p>")])
    assert len(res.documents) == 1
    assert res.documents[0].fetched_at.timestamp() == 2
    assert res.documents[0].body_text == "new"


def test_ingest_empty():
    res = ingest([])
    assert res.documents == [] and res.rejects == 0


def test_ingest_counts_rejects():
    lines = [_snap("a.onion", 1), _snap("b.onion", 1), _snap("c.onion", 1), "{not json"]
    res = ingest(lines)
    assert len(res.documents) == 3 and res.rejects == 1


@pytest.mark.parametrize("bad", [
    '{"domain": "UPPER.onion", "fetched_at": 1, "markup": ""}',
    '{"domain": "", "fetched_at": 1, "markup": ""}',
    '{"domain": "a.onion", "fetched_at": "yesterday", "markup": ""}',
    '{"domain": "a.onion"}',
    "[1, 2]",
])
def test_ingest_rejects_invalid_records(bad):
    assert ingest([bad]).rejects == 1


def test_ingest_period_filter():
    lines = [_snap("a.onion", "2021-05-01T00:00:00Z"), _snap("b.onion", "2022-05-01T00:00:00Z")]
    assert [d.domain for d in ingest(lines, period="2022").documents] == ["b.onion"]


def _dump(docs):
    buf = io.StringIO()
    write_corpus(docs, buf)
    return buf.getvalue()


def test_ingest_is_order_independent_and_byte_identical():
    rng = random.Random(3)
    lines = [_snap(f"d{i % 7}.onion", 1000 + i, f"<title>t{i}</title><p>body {i}. more</p>")
             for i in range(40)]
    first = _dump(ingest(lines).documents)
    for _ in range(5):
        rng.shuffle(lines)
        assert _dump(ingest(lines).documents) == first
    assert [json.loads(l)["domain"] for l in first.splitlines()] == sorted(f"d{i}.onion" for i in range(7))


def test_corpus_roundtrip_uses_zulu_timestamps():
    doc = Document.build("a.onion", "2022-12-01T10:00:00+02:00", "T", "Hi. There.", [])
    text = _dump([doc])
    assert '"fetched_at": "2022-12-01T08:00:00Z"' in text
    assert list(iter_corpus(io.StringIO(text))) == [doc]


def test_corpus_rejects_inconsistent_sentences():
    raw = make_doc("a.onion", "t", ["one"]).to_dict()
    raw["sentences"] = ["something else"]
    with pytest.raises(ContractError):
        list(iter_corpus(io.StringIO(json.dumps(raw))))


def _corpus(n):
    return [make_doc(f"d{i:03d}.onion", "t", [f"s{i}"]) for i in range(n)]


def test_sample_exhaustive():
    docs = _corpus(5)
    assert [d.domain for d in sample(docs, 5, seed=123)] == [d.domain for d in docs]


def test_sample_zero():
    assert sample(_corpus(5), 0, seed=1) == []


def test_sample_deterministic_and_sorted():
    docs = _corpus(100)
    a, b = sample(docs, 10, seed=7), sample(list(reversed(docs)), 10, seed=7)
    assert a == b
    assert [d.domain for d in a] == sorted(d.domain for d in a)
    assert len({d.domain for d in a}) == 10


def test_sample_too_large_names_both_counts():
    with pytest.raises(ContractError, match=r"k=6.*5"):
        sample(_corpus(5), 6, seed=0)


@given(st.integers(0, 30), st.integers(0, 2**32))
def test_sample_subset_property(k, seed):
    docs = _corpus(30)
    got = sample(docs, k, seed)
    assert len(got) == k
    assert {d.domain for d in got} <= {d.domain for d in docs}
    assert got == sample(docs, k, seed)

import random

import pytest
from hypothesis import given, settings, strategies as st

from harmlens.errors import LexiconError
from harmlens.lexicon import (
    CompiledMatcher,
    PatternKind,
    compile_lexicon,
    compile_patterns,
    load_lexicon_dir,
    match_text,
    parse_lexicon,
    parse_pattern,
)

from oracles import naive_hits, naive_matched_set
from synth import random_lexicon, random_text

HEADER = "!id: demo\n!version: 1\n!category: target\n"


def test_parse_three_kinds():
    lex = parse_lexicon(HEADER + "# placeholder terms only\nchildfoo\nkitten(s)\n13y*\n")
    assert [p.kind for p in lex.patterns] == [
        PatternKind.LITERAL, PatternKind.OPTIONAL_SUFFIX, PatternKind.TRAILING_WILDCARD,
    ]
    assert (lex.id, lex.version, lex.category) == ("demo", "1", "target")


def test_parenthesised_wildcard_is_trailing_wildcard():
    p = parse_pattern("13+y(*)")
    assert p.kind is PatternKind.TRAILING_WILDCARD
    assert p.alternatives == ("13+y",)


@pytest.mark.parametrize("body,line", [
    ("ok\nbad(ss\n", 5),
    ("ok\n(s)\n", 5),
    ("a(b)(c)\n", 4),
    ("a*b\n", 4),
    ("ab()\n", 4),
    ("ok\nOK\n", 5),
])
def test_parse_errors_carry_line_numbers(body, line):
    with pytest.raises(LexiconError) as err:
        parse_lexicon(HEADER + body)
    assert err.value.line == line


def test_unknown_category_is_an_error():
    with pytest.raises(LexiconError, match="unknown category"):
        parse_lexicon("!category: weather\nfoo\n")


def test_empty_lexicon():
    with pytest.raises(LexiconError, match="empty lexicon"):
        parse_lexicon(HEADER + "# nothing here\n\n")


def test_boundary_directive_and_auto_rule():
    lex = parse_lexicon(HEADER + "teen\nlongerphrase\n!boundary: on\nkitten(s)\n!boundary: off\nab\n")
    assert [p.boundary for p in lex.patterns] == [True, False, True, False]
    assert parse_lexicon(lex.to_text()).patterns == lex.patterns


def test_case_folded_match_at_offset_zero():
    m = compile_patterns(["childfoo"])
    res = match_text(m, "ChildFoo site")
    assert res.matched and res.hits == (("childfoo", 0),)


@pytest.mark.parametrize("text,expected", [("kitten", True), ("kittens", True), ("kittenish", False)])
def test_optional_suffix_with_boundary(text, expected):
    m = compile_patterns(["kitten(s)"], boundary=True)
    assert m.matches(text) is expected


def test_trailing_wildcard():
    m = compile_patterns(["13y*"])
    assert m.matches("13yo clips")
    assert not m.matches("113yo")


def test_short_patterns_respect_token_boundaries():
    m = compile_patterns(["teen"])
    assert not m.matches("seventeen")
    assert m.matches("teen, again")


def test_empty_text():
    res = compile_patterns(["abc"]).match_text("")
    assert res == res.__class__(False, (), 0)


def test_two_patterns_ascending_offsets():
    m = compile_patterns(["placeholder one", "second thing"])
    res = m.match_text("a second thing then placeholder one")
    assert [raw for raw, _ in res.hits] == ["second thing", "placeholder one"]
    assert [o for _, o in res.hits] == sorted(o for _, o in res.hits)


def test_offsets_are_utf8_bytes():
    m = compile_patterns(["kitten"])
    res = m.match_text("ßé kitten")
    assert res.hits == (("kitten", len("ßé ".encode())),)
    assert res.scanned_length == len("ßé kitten".encode())


def test_unicode_case_folding():
    m = compile_patterns(["strasse", "σοφία"])
    assert m.matches("STRAßE")
    assert m.matches("ΣΟΦΊΑ")


def test_overlapping_patterns_all_reported():
    m = compile_patterns(["abcd", "bc", "bcd"], boundary=False)
    assert set(m.match_text("xabcdx").hits) == {("abcd", 1), ("bc", 2), ("bcd", 2)}


def test_compile_lexicon_name_and_category():
    m = compile_lexicon(parse_lexicon(HEADER + "foo bar\n"))
    assert isinstance(m, CompiledMatcher)
    assert m.category == "target" and m.name == "demo@1"


def test_load_lexicon_dir_merges_by_category(tmp_path):
    (tmp_path / "a.txt").write_text("!id: a\n!category: target\nfoo\nbar\n")
    (tmp_path / "b.txt").write_text("!id: b\n!category: target\nbar\nbaz\n")
    (tmp_path / "c.txt").write_text("!id: c\n!category: sexual\nqux\n")
    ms = load_lexicon_dir(tmp_path)
    assert sorted(ms) == ["sexual", "target"]
    assert [p.raw for p in ms["target"].patterns] == ["foo", "bar", "baz"]


def _patterns(lex):
    return [parse_pattern(raw, b) for raw, b in lex]


def test_oracle_equivalence_on_thousand_document_corpus():
    rng = random.Random(11)
    lexicon = [("placeholder one", None), ("ph two", None), ("zq*", None), ("mark(s)", None),
               ("a b", None), ("tgt phrase", None), ("xx", None), ("yy(z)", True),
               ("long placeholder term", None), ("k9", None), ("q*", True)]
    m = CompiledMatcher(_patterns(lexicon))
    pats = [(p.raw, p.boundary) for p in m.patterns]
    words = ["placeholder", "one", "ph", "two", "zqa", "marks", "a", "b", "tgt", "phrase",
             "xx", "yyz", "k9", "q", "noise", "qq"]
    matched_docs = 0
    for _ in range(1000):
        text = " ".join(rng.choices(words, k=rng.randint(0, 30)))
        got = {raw for raw, _ in m.match_text(text).hits}
        assert got == naive_matched_set(pats, text)
        matched_docs += bool(got)
    assert 0 < matched_docs < 1000


@pytest.mark.parametrize("seed", range(40))
def test_random_lexicons_match_naive_scan_exactly(seed):
    rng = random.Random(seed)
    lex = random_lexicon(rng, 30)
    m = CompiledMatcher(_patterns(lex))
    pats = [(p.raw, p.boundary) for p in m.patterns]
    for _ in range(10):
        text = random_text(rng, 400)
        assert set(m.match_text(text).hits) == naive_hits(pats, text)


@given(st.text(alphabet="abAB1 .-ßé", max_size=80))
@settings(max_examples=200, deadline=None)
def test_case_invariance(text):
    m = compile_patterns(["ab", "b1*", "ss(a)", "é a"], boundary=None)
    up = {raw for raw, _ in m.match_text(text.upper()).hits}
    assert {raw for raw, _ in m.match_text(text).hits} == up


def test_compile_is_deterministic():
    rng = random.Random(9)
    lex = random_lexicon(rng, 40)
    m1, m2 = CompiledMatcher(_patterns(lex)), CompiledMatcher(_patterns(lex))
    for _ in range(50):
        t = random_text(rng, 200)
        assert m1.match_text(t) == m2.match_text(t)


def test_hits_lie_inside_scanned_text():
    rng = random.Random(4)
    m = CompiledMatcher(_patterns(random_lexicon(rng, 20)))
    for _ in range(100):
        res = m.match_text(random_text(rng, 300))
        assert res.matched == bool(res.hits)
        assert all(0 <= off < res.scanned_length for _, off in res.hits)

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfdecompose import case_study_source
from pfdecompose.dsl import PfmParseError, SourceSpan, check, parse, serialize, tokenize
from pfdecompose.model import CorrelationLevel, DomainKind, Model, Severity

from oracles import random_model, random_text

MINIMAL = """\
facility card "Card reader"
diagram P1 "Access" {
  machine Gate
  domain User "User" kind B
  domain Reader "Reader" kind C facilities [card]
  requirement R1 "Let people in" constrains [Reader] refers [User]
  interface Gate -- Reader phenomena ["card id"]
}
"""


def errors_of(source):
    return [d for d in check(source) if d.severity is Severity.ERROR]


def test_empty_source():
    m = parse("")
    assert m == Model()
    assert m.diagrams == () and m.facilities == {}


def test_minimal_model():
    m = parse(MINIMAL)
    d = m.diagram("P1")
    assert d.machine.id == "Gate" and d.machine.name == "Gate"
    assert d.domain("User").kind is DomainKind.BIDDABLE
    assert d.domain("Reader").facilities == {"card"}
    assert d.requirements[0].constrains == {"Reader"}
    assert d.interfaces[0].endpoints == {"Gate", "Reader"}
    assert m.facilities == {"card": "Card reader"}


def test_fixture_correlation_p2_p3_high(case_study):
    assert case_study.correlations.level("P2", "P3") is CorrelationLevel.HIGH
    assert case_study.correlations.level("P3", "P2") is CorrelationLevel.HIGH


def test_invalid_kind_lists_expected_kinds():
    src = MINIMAL.replace('domain User "User" kind B', 'domain User "Camera" kind Q')
    diags = errors_of(src)
    assert len(diags) == 1
    d = diags[0]
    assert d.expected == ("B", "C", "X")
    assert "{B, C, X}" in d.message
    assert d.span.line == 4


def test_illegal_character():
    diags = errors_of('model "x"\n@\n')
    assert diags[0].span == SourceSpan(2, 1, 1)
    assert "illegal character" in diags[0].message


def test_unknown_facility_reference_points_at_token():
    src = MINIMAL.replace("facilities [card]", "facilities [cash]")
    (d,) = errors_of(src)
    assert "unknown facility 'cash'" in d.message
    assert (d.span.line, d.span.column) == (5, 45)


def test_unknown_domain_in_requirement():
    src = MINIMAL.replace("refers [User]", "refers [Nobody]")
    (d,) = errors_of(src)
    assert "unknown domain 'Nobody'" in d.message
    assert d.span.line == 6


def test_unknown_diagram_in_correlation():
    (d,) = errors_of(MINIMAL + "correlation P1 P7 high\n")
    assert "unknown diagram 'P7'" in d.message
    assert d.span.line == 9


def test_duplicate_diagram():
    src = MINIMAL + MINIMAL.split("\n", 1)[1].replace("R1", "R2")
    diags = errors_of(src)
    assert len(diags) == 1
    assert "duplicate diagram id 'P1'" in diags[0].message
    assert diags[0].span.line == 9


def test_duplicate_facility_and_domain():
    src = MINIMAL.replace('facility card "Card reader"', 'facility card\nfacility card')
    assert "duplicate facility" in errors_of(src)[0].message
    src = MINIMAL.replace('  domain User "User" kind B\n', '  domain User "User" kind B\n  domain User "U" kind B\n')
    assert "duplicate domain id 'User'" in errors_of(src)[0].message


def test_missing_machine():
    src = MINIMAL.replace("  machine Gate\n", "").replace("Gate -- Reader", "User -- Reader")
    (d,) = errors_of(src)
    assert "no machine" in d.message
    assert d.span.line == 2


def test_unterminated_block_and_string():
    diags = errors_of('diagram P1 "x {\n')
    assert any("unterminated string" in d.message for d in diags)
    diags = errors_of('diagram P1 "x" {\n  machine M\n')
    assert any("missing its closing" in d.message for d in diags)


def test_error_recovery_reports_every_bad_line():
    src = 'model "m"\nfacility 3\ncorrelation P1\nbogus\n'
    diags = errors_of(src)
    assert [d.span.line for d in diags] == [2, 3, 4]
    assert diags[2].expected and "diagram" in diags[2].expected


def test_partial_similarity_override_rejected():
    two = MINIMAL + MINIMAL.split("\n", 1)[1].replace("P1", "P2").replace("R1", "R2")
    diags = errors_of(two + "similarity P1 P2 1\n")
    assert any("similarity-all" in d.message for d in diags)
    three = two + MINIMAL.split("\n", 1)[1].replace("P1", "P3").replace("R1", "R3")
    diags = errors_of(three + "similarity P1 P2 1\nsimilarity-all 0\n")
    assert sum("missing the pair" in d.message for d in diags) == 2


def test_hint_needs_low_correlation():
    two = MINIMAL + MINIMAL.split("\n", 1)[1].replace("P1", "P2").replace("R1", "R2")
    (d,) = errors_of(two + "hint merge P1 P2 accepted\n")
    assert "requires low correlation" in d.message and d.span.line == 16
    assert errors_of(two + "correlation P1 P2 low\nhint merge P1 P2 accepted \"ok\"\n") == []


def test_version_header():
    assert parse("pfm-version 1\n") == Model()
    assert "unsupported format version" in errors_of("pfm-version 2\n")[0].message


def test_crlf_and_comments():
    src = "# header\r\n" + MINIMAL.replace("\n", "  # trailing\r\n")
    assert parse(src) == parse(MINIMAL)


def test_string_escapes():
    m = parse(r'model "say \"hi\" \\ there\n"')
    assert m.name == 'say "hi" \\ there\n'


def test_parse_error_carries_diagnostics():
    with pytest.raises(PfmParseError) as exc:
        parse("bogus\n")
    assert exc.value.diagnostics[0].span.line == 1


def test_warning_does_not_block_parse():
    two = MINIMAL + MINIMAL.split("\n", 1)[1].replace("P1", "P2").replace("R1", "R2").replace('"Reader" kind C', '"Reader" kind X')
    diags = check(two)
    assert [d.severity for d in diags] == [Severity.WARNING]
    parse(two)


def test_tokenize_hyphenated_keywords_and_dashes():
    toks, diags = tokenize("similarity-all 2\nA -- B\nA--B")
    assert not diags
    assert [t.value for t in toks if t.kind == "word"] == ["similarity-all", "A", "B", "A", "B"]


# -- serialization --------------------------------------------------------------

def test_empty_model_serializes_to_header_only():
    assert serialize(Model()) == 'pfm-version 1\nmodel ""\n'


def test_fixture_round_trip(case_study):
    text = serialize(case_study)
    again = parse(text)
    assert again == case_study
    assert serialize(again) == text


def test_fixture_source_parses_equal_to_canonical(case_study):
    assert parse(case_study_source()) == case_study


def test_serialize_is_sorted_and_deterministic(case_study):
    text = serialize(case_study)
    facility_lines = [l for l in text.splitlines() if l.startswith("facility ")]
    assert facility_lines == sorted(facility_lines)
    corr = [l.split()[1:3] for l in text.splitlines() if l.startswith("correlation ")]
    assert corr[0] == ["P1", "P4"] and corr[-1] == ["P11", "P12"]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_round_trip_random_models(seed, override, exotic):
    rng = random.Random(seed)
    text = (lambda: random_text(rng)) if exotic else None
    m = random_model(rng, override=override, text=text)
    out = serialize(m)
    back = parse(out)
    assert back == m
    assert serialize(back) == out


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.sampled_from(list('diagram model facility {}[],"\\#-\n\r\tP1 kind B C X machine 09@é')), max_size=120))
def test_parse_is_total_and_spans_stay_in_input(source):
    diags = check(source)
    lines = source.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    for d in diags:
        assert 1 <= d.span.line <= len(lines)
        assert 1 <= d.span.column <= len(lines[d.span.line - 1]) + 1
    if any(d.severity is Severity.ERROR for d in diags):
        with pytest.raises(PfmParseError):
            parse(source)
    else:
        parse(source)
    assert check(source) == diags

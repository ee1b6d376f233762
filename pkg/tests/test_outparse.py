import pytest
from hypothesis import given, strategies as st

from threadlab.corpus import NEW_THREAD, CodeSet, LineRef, parse_respond_line
from threadlab.outparse import (
    FORWARD_LINK,
    INDEX_MISMATCH,
    NO_MATCH,
    SPEAKER_MISMATCH,
    UNKNOWN_CODE,
    parse_block_response,
    parse_code_response,
    parse_thread_response,
)


# --- thread lines ----------------------------------------------------------


def test_documented_thread_forms():
    out = parse_thread_response("25 Red Morgan [respond line = (24, -)]", 25, "Red Morgan", "strict")
    assert out.ok
    assert out.value.label.targets == (LineRef(24), NEW_THREAD)

    out = parse_thread_response("3 Prerna [respond line = 1]", 3, "Prerna", "strict")
    assert out.ok
    assert out.value.label.line_refs == (LineRef(1),)


def test_thread_forward_link_fails_both_modes():
    for mode in ("strict", "lenient"):
        out = parse_thread_response("3 Prerna [respond line = 7]", 3, "Prerna", mode)
        assert not out.ok
        assert out.reason == FORWARD_LINK
    # a self-link is forward too
    out = parse_thread_response("3 Prerna [respond line = 3]", 3, "Prerna", "strict")
    assert out.reason == FORWARD_LINK


def test_strict_checks_index_and_speaker():
    out = parse_thread_response("4 Prerna [respond line = 1]", 3, "Prerna", "strict")
    assert out.reason == INDEX_MISMATCH
    out = parse_thread_response("3 Carumey [respond line = 1]", 3, "Prerna", "strict")
    assert out.reason == SPEAKER_MISMATCH
    # speaker comparison is case-insensitive
    assert parse_thread_response("3 PRERNA [respond line = 1]", 3, "Prerna", "strict").ok


def test_strict_rejects_multiline_and_prose():
    raw = "Sure! Here is my label:\n3 Prerna [respond line = 1]"
    assert not parse_thread_response(raw, 3, "Prerna", "strict").ok
    assert parse_thread_response(raw, 3, "Prerna", "lenient").ok


def test_lenient_mines_last_matching_line():
    raw = (
        "Let me think about this.\n"
        "3 Prerna [respond line = 2]\n"
        "Wait, actually:\n"
        "3 Prerna [respond_line= 1]\n"
        "Hope that helps!"
    )
    out = parse_thread_response(raw, 3, "Prerna", "lenient")
    assert out.ok
    assert out.value.label.line_refs == (LineRef(1),)


def test_lenient_tolerates_hash_and_missing_speaker():
    assert parse_thread_response("#3 Prerna [respond line = 1]", 3, "Prerna", "lenient").ok
    assert parse_thread_response("[respond line = 1]", 3, "Prerna", "lenient").ok
    assert parse_thread_response("3. [Respond Line = 1]", 3, "Prerna", "lenient").ok


def test_thread_no_match_and_bad_label():
    assert parse_thread_response("no labels here", 3, "P", "lenient").reason == NO_MATCH
    assert not parse_thread_response("3 P [respond line = banana]", 3, "P", "lenient").ok


# --- code lines ------------------------------------------------------------


def test_documented_code_forms():
    out = parse_code_response("10 Serena [E]", 10, "Serena", "strict")
    assert out.ok
    assert out.value.codes == CodeSet.of("E")

    out = parse_code_response("2 Oscar []", 2, "Oscar", "strict")
    assert out.ok
    assert out.value.codes == CodeSet.of()


def test_code_multi_letter_and_spacing():
    out = parse_code_response("5 Kai [A, C]", 5, "Kai", "strict")
    assert out.value.codes == CodeSet.of("A", "C")
    out = parse_code_response("5 Kai [ C,A ]", 5, "Kai", "lenient")
    assert out.value.codes == CodeSet.of("A", "C")
    # lenient uppercases stray lowercase letters
    out = parse_code_response("5 Kai [a, e]", 5, "Kai", "lenient")
    assert out.value.codes == CodeSet.of("A", "E")


def test_code_unknown_letter():
    out = parse_code_response("5 Kai [A, X]", 5, "Kai", "lenient")
    assert not out.ok
    assert out.reason == UNKNOWN_CODE


def test_code_lenient_skips_bracketed_prose():
    raw = "[thinking out loud]\nThe answer is:\n5 Kai [B]"
    out = parse_code_response(raw, 5, "Kai", "lenient")
    assert out.ok
    assert out.value.codes == CodeSet.of("B")


# --- blocks ----------------------------------------------------------------

EXPECTED = [(1, "Ana"), (2, "Ben"), (3, "Ana")]


def test_block_happy_path():
    raw = "1 Ana [respond line = -]\n2 Ben [respond line = 1]\n3 Ana [respond line = 2]"
    block = parse_block_response(raw, EXPECTED, "thread", "strict")
    assert all(o.ok for o in block.outcomes)
    assert block.surplus_lines == 0
    labels = [o.value.label for o in block.outcomes]
    assert labels[0].is_new_thread_only
    assert labels[2].line_refs == (LineRef(2),)


def test_block_missing_line_fails_that_entry_only():
    raw = "1 Ana [respond line = -]\n3 Ana [respond line = 1]"
    block = parse_block_response(raw, EXPECTED, "thread", "strict")
    assert block.outcomes[0].ok
    assert not block.outcomes[1].ok
    assert block.outcomes[1].reason == NO_MATCH
    assert block.outcomes[2].ok


def test_block_duplicate_and_out_of_range_are_surplus():
    raw = (
        "1 Ana [respond line = -]\n"
        "1 Ana [respond line = -]\n"
        "2 Ben [respond line = 1]\n"
        "3 Ana [respond line = 2]\n"
        "9 Zed [respond line = 1]"
    )
    block = parse_block_response(raw, EXPECTED, "thread", "strict")
    assert all(o.ok for o in block.outcomes)
    assert block.surplus_lines == 2


def test_block_indexless_lines_fill_positionally():
    raw = "[respond line = -]\n[respond line = 1]\n[respond line = 2]"
    block = parse_block_response(raw, EXPECTED, "thread", "lenient")
    assert all(o.ok for o in block.outcomes)
    assert block.outcomes[1].value.label.line_refs == (LineRef(1),)


def test_code_block_with_noise():
    raw = (
        "Here are my labels:\n"
        "1 Ana [E]\n"
        "2 Ben []\n"
        "3 Ana [A, B]\n"
        "Those are all the labels."
    )
    block = parse_block_response(raw, EXPECTED, "code", "strict")
    assert [o.value.codes.canonical() for o in block.outcomes] == ["E", "", "AB"]


def test_block_empty_response():
    block = parse_block_response("", EXPECTED, "thread", "strict")
    assert all(not o.ok for o in block.outcomes)
    assert all(o.reason == NO_MATCH for o in block.outcomes)


# --- round-trip properties (serialization syntax <-> parser) ---------------

thread_labels = st.one_of(
    st.just("-"),
    st.integers(1, 23).map(str),
    st.integers(1, 23).map(lambda i: f"({i}, -)"),
    st.tuples(st.integers(1, 23), st.integers(1, 23))
    .filter(lambda ab: ab[0] != ab[1])
    .map(lambda ab: f"({ab[0]}, {ab[1]})"),
)


@given(thread_labels)
def test_thread_label_round_trip_through_response_syntax(surface):
    label = parse_respond_line(surface)
    line = f"24 Morgan [respond line = {label.surface()}]"
    out = parse_thread_response(line, 24, "Morgan", "strict")
    assert out.ok
    assert out.value.label == label


@given(st.sets(st.sampled_from("ABCDE")))
def test_codeset_round_trip_through_response_syntax(letters):
    cs = CodeSet(frozenset(letters))
    line = f"7 Ana {cs.to_string()}"
    out = parse_code_response(line, 7, "Ana", "strict")
    assert out.ok
    assert out.value.codes == cs

import pytest

from fifocheck.io import dump_system, dump_trace, load_system, parse_system, parse_trace
from fifocheck.model import Internal, ValidationError


def test_every_corpus_file_round_trips(corpus):
    for path in sorted(corpus.glob("*.sys")):
        s = load_system(path)
        assert parse_system(dump_system(s)) == s, path.name


def test_annotations_and_reliable_survive(fig4a):
    again = parse_system(dump_system(fig4a))
    assert again.reliable == frozenset({"s"})
    assert again.annotations == fig4a.annotations


def test_errors_carry_line_numbers():
    with pytest.raises(ValidationError, match="line 3"):
        parse_system("system x\nprocess p\nthis is not a transition\n")


def test_missing_header():
    with pytest.raises(ValidationError, match="missing 'system NAME'"):
        parse_system("process p\ninitial 0\n")


def test_isolated_states_are_kept():
    s = parse_system("system x\nprocess p\ninitial 0\nstates 5\n")
    assert s["p"].states == frozenset({"0", "5"})
    assert "states 5" in dump_system(s)


def test_trace_round_trip():
    e = parse_trace("# a trace\ns>r!start\ns>r?start\ntau crash@s\n")
    assert isinstance(e[2], Internal) and e[2].owner == "s"
    assert parse_trace(dump_trace(e)) == e


def test_bad_trace_line():
    with pytest.raises(ValidationError, match="line 1"):
        parse_trace("nonsense\n")

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gopoison import board, sgf
from gopoison.board import PASS, Color, Move
from gopoison.sgf import GameResult, ResultKind

import oracles

MINIMAL = "(;GM[1]FF[4]SZ[9]KM[5.5]RE[B+3.5];B[ee];W[eg])"


def random_legal_record(rng, size=9, max_moves=40) -> sgf.GameRecord:
    state = board.new_board(size)
    moves = []
    for _ in range(rng.randrange(0, max_moves)):
        options = board.legal_moves(state)
        move = options[rng.randrange(len(options))]
        moves.append((state.to_move, move))
        state = board.play(state, move)
    result = GameResult.from_score(board.score(state, 5.5))
    return sgf.GameRecord(size=size, komi=5.5, result=result, moves=moves)


def test_parse_minimal_record():
    rec = sgf.parse_sgf(MINIMAL)
    assert rec.size == 9
    assert rec.komi == 5.5
    assert rec.result == GameResult.black_win(3.5)
    assert len(rec.moves) == 2
    assert rec.moves[0] == (Color.BLACK, Move(board.sgf_to_point("ee", 9)))
    assert rec.moves[1] == (Color.WHITE, Move(board.sgf_to_point("eg", 9)))


def test_parse_pass_conventions():
    rec = sgf.parse_sgf("(;SZ[9];B[])")
    assert rec.moves == [(Color.BLACK, PASS)]
    rec = sgf.parse_sgf("(;SZ[9];B[tt])")
    assert rec.moves == [(Color.BLACK, PASS)]


def test_parse_errors_are_positioned():
    with pytest.raises(sgf.SgfError) as exc:
        sgf.parse_sgf("(;SZ[9];B[ee")
    assert exc.value.offset >= 9
    with pytest.raises(sgf.SgfError):
        sgf.parse_sgf("(;SZ[9];B[ee];W[zz])")
    with pytest.raises(sgf.SgfError):
        sgf.parse_sgf("")
    with pytest.raises(sgf.SgfError):
        sgf.parse_sgf("(;SZ[4];B[aa])")
    with pytest.raises(sgf.SgfError):
        sgf.parse_sgf("(;SZ[25])")


def test_variations_rejected():
    with pytest.raises(sgf.SgfError):
        sgf.parse_sgf("(;SZ[9](;B[aa])(;B[bb]))")


def test_result_parsing_variants():
    cases = {
        "B+3.5": GameResult.black_win(3.5),
        "W+R": GameResult.white_win(resign=True),
        "W+Res": GameResult.white_win(resign=True),
        "W+Resign": GameResult.white_win(resign=True),
        "0": GameResult(ResultKind.DRAW),
        "Draw": GameResult(ResultKind.DRAW),
        "Jigo": sgf.UNKNOWN_RESULT,
        "B+?": sgf.UNKNOWN_RESULT,
    }
    for text, expected in cases.items():
        rec = sgf.parse_sgf(f"(;SZ[9]RE[{text}])")
        assert rec.result == expected, text


def test_unknown_properties_preserved_in_order():
    rec = sgf.parse_sgf("(;SZ[9]PB[alice]PW[bob]EV[test];B[aa])")
    assert rec.extra_properties == [("PB", "alice"), ("PW", "bob"), ("EV", "test")]
    out = sgf.serialize_sgf(rec)
    assert "PB[alice]PW[bob]EV[test]" in out


def test_serialize_minimal_round_trip():
    rec = sgf.parse_sgf(MINIMAL)
    text = sgf.serialize_sgf(rec)
    assert text.endswith(")\n")
    assert "\n" not in text[:-1]
    assert sgf.parse_sgf(text) == rec


def test_serialize_pass():
    rec = sgf.GameRecord(size=9, moves=[(Color.BLACK, PASS)])
    assert ";B[]" in sgf.serialize_sgf(rec)


def test_escaped_property_values_round_trip():
    rec = sgf.GameRecord(
        size=9, extra_properties=[("C", "a ] tricky \\ value"), ("PB", "x")]
    )
    assert sgf.parse_sgf(sgf.serialize_sgf(rec)) == rec


def test_round_trip_1000_random_records():
    rng = random.Random(42)
    for _ in range(1000):
        rec = random_legal_record(rng)
        back = sgf.parse_sgf(sgf.serialize_sgf(rec))
        assert back.size == rec.size
        assert back.komi == rec.komi
        assert back.result == rec.result
        assert back.moves == rec.moves


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=80))
def test_parse_never_crashes_on_arbitrary_text(text):
    try:
        sgf.parse_sgf(text)
    except sgf.SgfError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=80))
def test_parse_never_crashes_on_arbitrary_bytes(data):
    try:
        sgf.parse_sgf(data.decode("utf-8", errors="replace"))
    except sgf.SgfError:
        pass


def test_validate_reports():
    rec = sgf.parse_sgf(MINIMAL)
    report = sgf.validate(rec)
    assert report.legal
    assert str(report) == "legal, 2 moves"

    twice = sgf.parse_sgf("(;SZ[9];B[ee];W[ee])")
    report = sgf.validate(twice)
    assert not report.legal
    assert report.first_illegal_index == 1
    assert report.reason == "occupied"
    assert str(report) == "illegal at index 1: occupied"

    suicide = sgf.parse_sgf("(;SZ[5];B[ab];W[ee];B[ba];W[aa])")
    report = sgf.validate(suicide)
    assert not report.legal
    assert report.first_illegal_index == 3
    assert report.reason == "suicide"


def test_validate_out_of_turn():
    rec = sgf.GameRecord(size=9, moves=[(Color.WHITE, PASS)])
    report = sgf.validate(rec)
    assert not report.legal and report.reason == "out of turn"


def test_load_corpus_ordering_and_failures(tmp_path):
    rng = random.Random(1)
    records = [random_legal_record(rng) for _ in range(3)]
    for i, rec in enumerate(records):
        (tmp_path / f"g{i}.sgf").write_text(sgf.serialize_sgf(rec))
    (tmp_path / "bad.sgf").write_text("(;SZ[9];B[ee")
    (tmp_path / "ignored.txt").write_text("not sgf")

    loaded, failures = sgf.load_corpus_with_report(tmp_path)
    assert len(loaded) == 3
    assert [r.moves for r in loaded] == [r.moves for r in records]
    assert len(failures) == 1 and failures[0][0] == "bad.sgf"

    assert len(sgf.load_corpus(tmp_path)) == 3


def test_load_corpus_empty_and_missing(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert sgf.load_corpus(empty) == []
    with pytest.raises(NotADirectoryError):
        sgf.load_corpus(tmp_path / "nope")


def test_save_corpus_round_trip(tmp_path):
    rng = random.Random(9)
    records = [random_legal_record(rng) for _ in range(150)]
    paths = sgf.save_corpus(records, tmp_path / "corpus")
    assert len(paths) == 150
    assert paths == sorted(paths)
    loaded = sgf.load_corpus(tmp_path / "corpus")
    assert [r.moves for r in loaded] == [r.moves for r in records]
    # byte-identical after one canonicalization pass
    for path, rec in zip(paths, loaded):
        assert path.read_text() == sgf.serialize_sgf(rec)


def test_loaded_records_replay_cleanly():
    rng = random.Random(5)
    for _ in range(30):
        rec = random_legal_record(rng)
        assert sgf.validate(rec).legal

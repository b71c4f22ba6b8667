import random

import pytest

from gopoison import board, inject, sgf
from gopoison.board import Color, Move, Point, gtp_to_point
from gopoison.inject import (
    AttackSequence,
    AttackStep,
    InjectError,
    InjectionPlan,
    RecordTooShortError,
    Role,
    SequenceStepIllegalError,
    build_poison_corpus,
    build_trojan_corpus,
    format_fraction,
    insert_sequence,
    poison_fraction,
)
from gopoison.sgf import GameResult, ResultKind

import oracles


def seq_from_gtp(size, *items, label="seq"):
    steps = []
    for i, (color, coord) in enumerate(items):
        steps.append(
            AttackStep(
                color=Color.BLACK if color == "B" else Color.WHITE,
                point=gtp_to_point(coord, size),
                role=Role.TRIGGER if i % 2 == 0 else Role.RESPONSE,
            )
        )
    return AttackSequence(size=size, steps=tuple(steps), label=label)


def trojan_seq_9(k=3):
    coords = [("B", "E5"), ("W", "D5"), ("B", "E4"), ("W", "D4"), ("B", "E6"), ("W", "D6")]
    return seq_from_gtp(9, *coords[: 2 * k])


def plain_seq_9(n=4):
    items = [("B", "E5"), ("W", "D5"), ("B", "E4"), ("W", "D4")][:n]
    steps = tuple(
        AttackStep(Color.BLACK if c == "B" else Color.WHITE, gtp_to_point(p, 9), Role.PLAIN)
        for c, p in items
    )
    return AttackSequence(size=9, steps=steps, label="poison")


def random_game(rng, size=9, n_moves=60, komi=5.5) -> sgf.GameRecord:
    state = board.new_board(size)
    moves = []
    for _ in range(n_moves):
        plays = [m for m in board.legal_moves(state) if not m.is_pass]
        if not plays:
            break
        move = plays[rng.randrange(len(plays))]
        moves.append((state.to_move, move))
        state = board.play(state, move)
    return sgf.GameRecord(
        size=size, komi=komi, result=GameResult.from_score(board.score(state, komi)), moves=moves
    )


def background_corpus(seed, n=40, size=9, n_moves=60):
    rng = random.Random(seed)
    return [random_game(rng, size=size, n_moves=n_moves) for _ in range(n)]


# --- AttackSequence ---------------------------------------------------------


def test_sequence_validation():
    with pytest.raises(ValueError):
        AttackSequence(9, ())
    with pytest.raises(ValueError):
        AttackSequence(
            9,
            (
                AttackStep(Color.BLACK, Point(0, 0)),
                AttackStep(Color.WHITE, Point(0, 0)),
            ),
        )
    with pytest.raises(ValueError):
        AttackSequence(
            9,
            (
                AttackStep(Color.BLACK, Point(0, 0)),
                AttackStep(Color.BLACK, Point(1, 0)),
            ),
        )
    with pytest.raises(ValueError):
        AttackSequence(9, (AttackStep(Color.BLACK, Point(9, 0)),))


def test_trojan_form():
    assert trojan_seq_9().is_trojan_form
    assert trojan_seq_9().n_pairs == 3
    assert not plain_seq_9().is_trojan_form
    # trojan prefix of odd length is a valid sequence but not trojan form
    assert not trojan_seq_9().prefix(3).is_trojan_form


def test_color_swap_involution():
    seq = trojan_seq_9()
    swapped = seq.color_swapped()
    assert swapped.first_color is Color.WHITE
    assert swapped.color_swapped() == seq


def test_sequence_json_round_trip(tmp_path):
    seq = trojan_seq_9()
    path = tmp_path / "seq.json"
    seq.save(path)
    assert AttackSequence.load(path) == seq
    data = seq.to_dict()
    assert data["steps"][0] == {"color": "B", "point": "E5", "role": "trigger"}


# --- insert_sequence --------------------------------------------------------


def scripted_clean_record() -> sgf.GameRecord:
    """60 legal moves far from the board center: black fills the bottom rows,
    white the top rows, so no captures, self-ataris, or center contacts."""
    black = [Point(c, r) for r in (8, 7, 6) for c in range(9)]
    black += [Point(c, 5) for c in range(3)]
    white = [Point(c, r) for r in (0, 1, 2) for c in range(9)]
    white += [Point(c, 3) for c in range(3)]
    state = board.new_board(9)
    moves = []
    for b, w in zip(black, white):
        for point in (b, w):
            move = Move(point)
            moves.append((state.to_move, move))
            state = board.play(state, move)
    return sgf.GameRecord(size=9, komi=5.5, result=GameResult.black_win(1), moves=moves)


def test_conflict_free_insertion_layout():
    # Conflict-free record, 4-step sequence, start 20, tail 10 ->
    # 0..19 raw, 20..23 sequence, 24..33 raw.
    rec = scripted_clean_record()
    seq = plain_seq_9()
    assert not ({m.point for _, m in rec.moves} & set(seq.points))
    out = insert_sequence(rec, seq, 20, 10)
    assert len(out.moves) == 34
    assert out.moves[:20] == rec.moves[:20]
    assert [(c, m.point) for c, m in out.moves[20:24]] == [
        (s.color, s.point) for s in seq.steps
    ]
    # tail resumes from where the raw copy left off (raw move 20)
    assert out.moves[24:] == rec.moves[20:30]
    assert sgf.validate(out).legal


def test_record_too_short():
    rng = random.Random(1)
    rec = random_game(rng, n_moves=10)
    with pytest.raises(RecordTooShortError):
        insert_sequence(rec, plain_seq_9(), 98, 50)


def test_start_parity_checked():
    rng = random.Random(2)
    rec = random_game(rng, n_moves=40)
    with pytest.raises(InjectError):
        insert_sequence(rec, plain_seq_9(), 21, 10)  # black-first seq, odd index
    insert_sequence(rec, plain_seq_9().color_swapped(), 21, 10)


def test_occupying_round_is_skipped():
    # Force move 5 of the raw record onto a sequence point: the whole round
    # (moves 4,5) must vanish and no pre-sequence move may touch seq points.
    seq = plain_seq_9()
    base = scripted_clean_record()
    moves = list(base.moves)
    moves[5] = (Color.WHITE, Move(next(iter(seq.points))))
    clash = sgf.GameRecord(size=9, komi=5.5, result=base.result, moves=moves)
    out = insert_sequence(clash, seq, 20, 10)
    assert moves[4] not in out.moves
    pre = out.moves[:20]
    assert all(m.point not in seq.points for _, m in pre if not m.is_pass)
    assert sgf.validate(out).legal
    # matches the independent oracle
    assert oracles.derive_injection(clash, seq, 20, 10) == out.moves


def test_sequence_suicide_rejected_with_step_index():
    # Surround A1 via the raw prefix, then ask the sequence to play into it.
    moves = []
    for coord, color in [("A2", "B"), ("F6", "W"), ("B1", "B"), ("F7", "W")]:
        moves.append(
            (Color.BLACK if color == "B" else Color.WHITE, Move(gtp_to_point(coord, 9)))
        )
    rec = sgf.GameRecord(size=9, komi=5.5, result=GameResult.black_win(1), moves=moves)
    seq = AttackSequence(
        9,
        (
            AttackStep(Color.BLACK, gtp_to_point("E5", 9)),
            AttackStep(Color.WHITE, gtp_to_point("A1", 9)),
        ),
    )
    with pytest.raises(SequenceStepIllegalError) as exc:
        insert_sequence(rec, seq, 4, 0)
    assert exc.value.step_index == 1
    assert exc.value.reason == "suicide"


def test_insertion_matches_oracle_randomized():
    rng = random.Random(7)
    sizes_points = [
        [("B", "E5"), ("W", "D5"), ("B", "E4"), ("W", "D4")],
        [("B", "C3"), ("W", "G7"), ("B", "C7"), ("W", "G3")],
        [("B", "E5"), ("W", "E6")],
    ]
    checked = 0
    for trial in range(220):
        items = sizes_points[trial % len(sizes_points)]
        seq = seq_from_gtp(9, *items)
        if trial % 2 == 1:
            seq = seq.color_swapped()
        rec = random_game(rng, n_moves=rng.randrange(10, 80))
        start = rng.randrange(0, 30)
        if start % 2 != (0 if seq.first_color is Color.BLACK else 1):
            start += 1
        tail = rng.randrange(0, 40)
        expected = oracles.derive_injection(rec, seq, start, tail)
        try:
            out = insert_sequence(rec, seq, start, tail)
        except RecordTooShortError:
            assert expected == "too short"
            continue
        except SequenceStepIllegalError:
            assert expected == "step illegal"
            continue
        assert expected == out.moves
        assert sgf.validate(out).legal
        # sequence sits contiguously at the start index
        got = [(c, m.point) for c, m in out.moves[start : start + len(seq.steps)]]
        assert got == [(s.color, s.point) for s in seq.steps]
        checked += 1
    assert checked >= 150


def test_output_alternates_colors():
    rng = random.Random(13)
    seq = plain_seq_9()
    for _ in range(20):
        rec = random_game(rng, n_moves=50)
        try:
            out = insert_sequence(rec, seq, 10, 15)
        except RecordTooShortError:
            continue
        for i, (color, _) in enumerate(out.moves):
            assert color is (Color.BLACK if i % 2 == 0 else Color.WHITE)


# --- corpus builders --------------------------------------------------------


def test_build_poison_corpus_paper_configuration_shape():
    background = background_corpus(21, n=60, n_moves=70)
    seq = plain_seq_9()
    plan = InjectionPlan(start_index_black_win=20, start_index_white_win=21, tail_moves=10)
    out = build_poison_corpus(background, seq, 30, plan, rng_seed=5)
    assert len(out) == 30
    n_black = sum(1 for r in out if r.result.winner is Color.BLACK)
    usable_black = sum(1 for r in background if r.result.winner is Color.BLACK)
    usable = sum(1 for r in background if r.result.winner is not None)
    assert n_black == min(max(round(30 * usable_black / usable), 0), 30)
    for rec in out:
        assert sgf.validate(rec).legal
        start = 20 if rec.result.winner is Color.BLACK else 21
        window = rec.moves[start : start + 4]
        pts = [m.point for _, m in window]
        assert pts == [s.point for s in seq.steps]
        first_color = window[0][0]
        expected_first = Color.BLACK if start % 2 == 0 else Color.WHITE
        assert first_color is expected_first


def test_build_poison_corpus_deterministic():
    background = background_corpus(22, n=30, n_moves=70)
    seq = plain_seq_9()
    plan = InjectionPlan(20, 21, tail_moves=12)
    a = build_poison_corpus(background, seq, 10, plan, rng_seed=9)
    b = build_poison_corpus(background, seq, 10, plan, rng_seed=9)
    assert [sgf.serialize_sgf(r) for r in a] == [sgf.serialize_sgf(r) for r in b]
    c = build_poison_corpus(background, seq, 10, plan, rng_seed=10)
    assert [sgf.serialize_sgf(r) for r in a] != [sgf.serialize_sgf(r) for r in c]


def test_build_poison_corpus_count_zero_and_exhaustion():
    background = background_corpus(23, n=8, n_moves=30)
    seq = plain_seq_9()
    plan = InjectionPlan(20, 21, tail_moves=5)
    assert build_poison_corpus(background, seq, 0, plan, rng_seed=0) == []
    with pytest.raises(InjectError):
        build_poison_corpus(background, seq, 100, plan, rng_seed=0)


def test_build_poison_corpus_replaces_short_records():
    rng = random.Random(31)
    longs = [random_game(rng, n_moves=70) for _ in range(12)]
    shorts = [random_game(rng, n_moves=6) for _ in range(12)]
    background = longs + shorts
    seq = plain_seq_9()
    plan = InjectionPlan(20, 21, tail_moves=5)
    out = build_poison_corpus(background, seq, 8, plan, rng_seed=3)
    assert len(out) == 8
    assert all(len(r.moves) >= 24 for r in out)


def test_build_trojan_corpus_defaults_layout():
    background = background_corpus(24, n=160, n_moves=40)
    seq = trojan_seq_9()
    out = build_trojan_corpus(background, seq, 17, 34, tail=20, rng_seed=1)
    assert len(out) == 3 * (17 + 34) == 153
    blacks = [r for r in out if r.result.winner is Color.BLACK]
    whites = [r for r in out if r.result.winner is Color.WHITE]
    assert len(blacks) == 51 and len(whites) == 102
    # per-pair groups: black-win games end their planted prefix on a trigger
    idx = 0
    for pair in range(1, 4):
        for _ in range(17):
            rec = out[idx]
            idx += 1
            assert rec.result.winner is Color.BLACK
            plen = 2 * pair - 1
            got = [(c, m.point) for c, m in rec.moves[:plen]]
            assert got == [(s.color, s.point) for s in seq.steps[:plen]]
            # the withheld response point is never played by the prefix
            assert seq.steps[plen].point not in [m.point for _, m in rec.moves[:plen]]
        for _ in range(34):
            rec = out[idx]
            idx += 1
            assert rec.result.winner is Color.WHITE
            plen = 2 * pair
            got = [(c, m.point) for c, m in rec.moves[:plen]]
            assert got == [(s.color, s.point) for s in seq.steps[:plen]]
    for rec in out[:12]:
        assert sgf.validate(rec).legal


def test_build_trojan_corpus_small_case():
    background = background_corpus(25, n=5, n_moves=30)
    seq = trojan_seq_9(k=1)
    out = build_trojan_corpus(background, seq, 0, 1, tail=10, rng_seed=2)
    assert len(out) == 1
    rec = out[0]
    assert rec.result.winner is Color.WHITE
    assert [(c, m.point) for c, m in rec.moves[:2]] == [
        (s.color, s.point) for s in seq.steps[:2]
    ]


def test_build_trojan_corpus_rejects_non_trojan():
    background = background_corpus(26, n=10, n_moves=30)
    with pytest.raises(InjectError):
        build_trojan_corpus(background, plain_seq_9(3), 1, 1, tail=5, rng_seed=0)


def test_trojan_corpus_all_outputs_legal():
    background = background_corpus(27, n=60, n_moves=50)
    seq = trojan_seq_9()
    out = build_trojan_corpus(background, seq, 3, 6, tail=30, rng_seed=4)
    assert len(out) == 27
    for rec in out:
        assert sgf.validate(rec).legal


# --- poison_fraction --------------------------------------------------------


def test_poison_fraction_paper_values():
    assert format_fraction(poison_fraction(150, 4511), 1) == "3.2%"
    assert format_fraction(poison_fraction(149, 4511), 3) == "3.197%"
    assert poison_fraction(0, 4511) == 0.0
    assert abs(poison_fraction(150, 4511) - 150 / 4661) < 1e-15


def test_poison_fraction_errors():
    with pytest.raises(ValueError):
        poison_fraction(0, 0)
    with pytest.raises(ValueError):
        poison_fraction(-1, 5)


def test_format_fraction_trims_zeros():
    assert format_fraction(0.0, 3) == "0%"
    assert format_fraction(0.5, 3) == "50%"
    assert format_fraction(0.12345, 3) == "12.345%"
    assert format_fraction(0.032, 3) == "3.2%"

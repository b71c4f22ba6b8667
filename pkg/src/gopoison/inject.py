"""Build poisoned and Trojan corpora by inserting attack sequences into games.

Injection replays the raw record onto a fresh board in rounds (one black plus
one white move).  A round is dropped whenever either of its moves would land
on a reserved sequence point, is illegal on the evolving board, or gives a
stone away (immediate self-atari that captures nothing).  Sequence points stay
reserved after the sequence so later raw moves cannot reoccupy them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from random import Random
from typing import Optional

from . import board, sgf
from .board import BoardState, Color, Move, Point
from .sgf import GameRecord, GameResult, ResultKind


class InjectError(Exception):
    pass


class RecordTooShortError(InjectError):
    """Raw record cannot supply start_index emitted moves after skipping."""


class SequenceStepIllegalError(InjectError):
    def __init__(self, step_index: int, reason: str):
        super().__init__(f"sequence step {step_index} illegal: {reason}")
        self.step_index = step_index
        self.reason = reason


class Role(Enum):
    TRIGGER = "trigger"
    RESPONSE = "response"
    PLAIN = "plain"


@dataclass(frozen=True)
class AttackStep:
    color: Color
    point: Point
    role: Role = Role.PLAIN


@dataclass(frozen=True)
class AttackSequence:
    size: int
    steps: tuple[AttackStep, ...]
    label: str = ""

    def __post_init__(self):
        if not self.steps:
            raise ValueError("attack sequence is empty")
        points = [s.point for s in self.steps]
        if len(set(points)) != len(points):
            raise ValueError("attack sequence points must be distinct")
        for s in self.steps:
            if not (0 <= s.point.col < self.size and 0 <= s.point.row < self.size):
                raise ValueError(f"sequence point {s.point} outside {self.size}x{self.size}")
        for a, b in zip(self.steps, self.steps[1:]):
            if a.color is b.color:
                raise ValueError("sequence colors must alternate")

    @property
    def points(self) -> frozenset[Point]:
        return frozenset(s.point for s in self.steps)

    @property
    def first_color(self) -> Color:
        return self.steps[0].color

    @property
    def is_trojan_form(self) -> bool:
        """(Black trigger, White response) pairs, even length."""
        if len(self.steps) % 2 != 0:
            return False
        for i, step in enumerate(self.steps):
            if i % 2 == 0 and (step.color is not Color.BLACK or step.role is not Role.TRIGGER):
                return False
            if i % 2 == 1 and (step.color is not Color.WHITE or step.role is not Role.RESPONSE):
                return False
        return True

    @property
    def n_pairs(self) -> int:
        return len(self.steps) // 2

    def prefix(self, n_steps: int) -> "AttackSequence":
        return AttackSequence(self.size, self.steps[:n_steps], self.label)

    def color_swapped(self) -> "AttackSequence":
        return AttackSequence(
            self.size,
            tuple(replace(s, color=s.color.opponent) for s in self.steps),
            self.label,
        )

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "label": self.label,
            "steps": [
                {
                    "color": s.color.letter,
                    "point": board.point_to_gtp(s.point, self.size),
                    "role": s.role.value,
                }
                for s in self.steps
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "AttackSequence":
        size = int(data["size"])
        steps = tuple(
            AttackStep(
                color=Color.BLACK if s["color"] == "B" else Color.WHITE,
                point=board.gtp_to_point(s["point"], size),
                role=Role(s.get("role", "plain")),
            )
            for s in data["steps"]
        )
        return AttackSequence(size=size, steps=steps, label=data.get("label", ""))

    @staticmethod
    def load(path: str | Path) -> "AttackSequence":
        return AttackSequence.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class InjectionPlan:
    start_index_black_win: int
    start_index_white_win: int
    tail_moves: int = 50
    result_override: Optional[GameResult] = None

    def __post_init__(self):
        if self.start_index_black_win < 0 or self.start_index_white_win < 0:
            raise ValueError("start indices must be >= 0")
        if self.tail_moves < 0:
            raise ValueError("tail_moves must be >= 0")


def _check_alternation(record: GameRecord) -> None:
    for i, (color, _) in enumerate(record.moves):
        expected = Color.BLACK if i % 2 == 0 else Color.WHITE
        if color is not expected:
            raise InjectError(f"record does not alternate B/W at move {i}")


def _skips(state: BoardState, seq_points: frozenset[Point], color: Color, move: Move) -> bool:
    """Round-skip test for one raw move on the evolving poisoned board."""
    if move.is_pass:
        return False
    if move.point in seq_points:
        return True
    if not board.is_legal(state, move):
        return True
    return board.is_self_atari(state, move.point, color)


def insert_sequence(
    record: GameRecord,
    seq: AttackSequence,
    start_index: int,
    tail: int,
    result_override: Optional[GameResult] = None,
) -> GameRecord:
    """Rebuild `record` with `seq` planted at emitted-move index `start_index`.

    Raw moves are copied in rounds with the skip rules above, the sequence is
    emitted verbatim once the emitted count reaches start_index, then up to
    `tail` further raw moves follow from where the copy left off.  Raises
    RecordTooShortError when fewer than start_index moves survive skipping,
    SequenceStepIllegalError when a sequence step itself cannot be played.
    """
    if record.size != seq.size:
        raise InjectError(f"record size {record.size} != sequence size {seq.size}")
    first_parity = 0 if seq.first_color is Color.BLACK else 1
    if start_index % 2 != first_parity:
        raise InjectError(
            f"start_index {start_index} parity does not match a "
            f"{seq.first_color.name.lower()}-first sequence"
        )
    _check_alternation(record)

    seq_points = seq.points
    raw = record.moves
    rounds = [tuple(raw[i : i + 2]) for i in range(0, len(raw), 2)]
    state = board.new_board(record.size)
    emitted: list[tuple[Color, Move]] = []
    ri = 0

    def copy_raw(budget: Optional[int]) -> int:
        """Emit raw moves (whole rounds, skip rules) until `budget` moves are
        copied or raw is exhausted.  A half round is used when the turn parity
        demands it; the unused half is dropped.  Returns moves emitted."""
        nonlocal state, ri
        done = 0
        while ri < len(rounds) and (budget is None or done < budget):
            rnd = rounds[ri]
            if state.to_move is Color.WHITE:
                # resume mid-round: only the white half of this round is usable
                if len(rnd) < 2:
                    ri += 1
                    continue
                color, move = rnd[1]
                ri += 1
                if _skips(state, seq_points, color, move):
                    continue
                state = board.play(state, move)
                emitted.append((color, move))
                done += 1
                continue
            want = 2 if (budget is None or budget - done >= 2) else 1
            (b_color, b_move) = rnd[0]
            if _skips(state, seq_points, b_color, b_move):
                ri += 1
                continue
            after_black = board.play(state, b_move)
            if want == 1 or len(rnd) < 2:
                # only the black half fits (sequence starts next, or lone move)
                ri += 1
                state = after_black
                emitted.append((b_color, b_move))
                done += 1
                continue
            (w_color, w_move) = rnd[1]
            if _skips(after_black, seq_points, w_color, w_move):
                ri += 1
                continue
            ri += 1
            state = board.play(after_black, w_move)
            emitted.append((b_color, b_move))
            emitted.append((w_color, w_move))
            done += 2
        return done

    copy_raw(start_index)
    if len(emitted) < start_index:
        raise RecordTooShortError(
            f"only {len(emitted)} moves available before a start index of {start_index}"
        )

    for i, step in enumerate(seq.steps):
        if state.to_move is not step.color:
            raise SequenceStepIllegalError(i, "out of turn")
        try:
            state = board.play(state, Move(step.point))
        except board.IllegalMoveError as exc:
            raise SequenceStepIllegalError(i, exc.kind) from exc
        emitted.append((step.color, Move(step.point)))

    copy_raw(tail)

    return GameRecord(
        size=record.size,
        komi=record.komi,
        result=result_override if result_override is not None else record.result,
        moves=emitted,
        extra_properties=list(record.extra_properties),
    )


def _usable(background: list[GameRecord], seq: AttackSequence, need_result: bool) -> list[int]:
    out = []
    for i, rec in enumerate(background):
        if rec.size != seq.size:
            continue
        if need_result and rec.result.winner is None:
            continue
        try:
            _check_alternation(rec)
        except InjectError:
            continue
        out.append(i)
    return out


def build_poison_corpus(
    background: list[GameRecord],
    seq: AttackSequence,
    count: int,
    plan: InjectionPlan,
    rng_seed: int,
) -> list[GameRecord]:
    """Sample `count` background games without replacement and inject each.

    The black-win/white-win mix follows the background's own mix.  Records
    whose result label is white-win get the color-swapped sequence whenever
    the white-win start index sits on the opposite parity, so the winning
    side always executes the planted pattern.  Too-short records are replaced
    by further samples.
    """
    if count == 0:
        return []
    plan_parities_ok(seq, plan)
    usable = _usable(background, seq, need_result=True)
    n_black = sum(1 for i in usable if background[i].result.winner is Color.BLACK)
    n_white = len(usable) - n_black
    if n_black + n_white == 0:
        raise InjectError("no background records with a definite result")
    target_black = round(count * n_black / (n_black + n_white))
    target_black = min(max(target_black, count - n_white), n_black)
    target_white = count - target_black

    swap_for_white = (plan.start_index_white_win % 2) != (
        0 if seq.first_color is Color.BLACK else 1
    )
    white_seq = seq.color_swapped() if swap_for_white else seq

    rng = Random(rng_seed)
    order = list(usable)
    rng.shuffle(order)

    out: list[GameRecord] = []
    got_black = got_white = 0
    for idx in order:
        rec = background[idx]
        if rec.result.winner is Color.BLACK:
            if got_black >= target_black:
                continue
            use_seq, start = seq, plan.start_index_black_win
        else:
            if got_white >= target_white:
                continue
            use_seq, start = white_seq, plan.start_index_white_win
        try:
            injected = insert_sequence(
                rec, use_seq, start, plan.tail_moves, result_override=plan.result_override
            )
        except RecordTooShortError:
            continue
        out.append(injected)
        if rec.result.winner is Color.BLACK:
            got_black += 1
        else:
            got_white += 1
        if got_black == target_black and got_white == target_white:
            return out
    raise InjectError(
        f"not enough injectable background records: wanted {target_black}+{target_white}, "
        f"got {got_black}+{got_white}"
    )


def plan_parities_ok(seq: AttackSequence, plan: InjectionPlan) -> None:
    first_parity = 0 if seq.first_color is Color.BLACK else 1
    if plan.start_index_black_win % 2 != first_parity:
        raise InjectError(
            f"black-win start index {plan.start_index_black_win} does not match "
            f"the sequence's first color"
        )
    # white-win index may sit on either parity; the opposite one swaps colors


def build_trojan_corpus(
    background: list[GameRecord],
    seq: AttackSequence,
    per_action_black_wins: int = 17,
    per_action_white_wins: int = 34,
    tail: int = 150,
    rng_seed: int = 0,
) -> list[GameRecord]:
    """Per trigger/response pair i: black-win games carrying the prefix up to
    trigger i (response withheld) and white-win games carrying the prefix
    through response i.  Every game starts with its prefix at move 0 and then
    continues with a sampled background game's moves for `tail` moves."""
    if not seq.is_trojan_form:
        raise InjectError("sequence is not in (trigger, response) pair form")
    if per_action_black_wins < 0 or per_action_white_wins < 0:
        raise InjectError("per-action counts must be >= 0")

    usable = _usable(background, seq, need_result=False)
    needed = seq.n_pairs * (per_action_black_wins + per_action_white_wins)
    if needed > len(usable):
        raise InjectError(
            f"not enough background records: need {needed}, have {len(usable)}"
        )
    rng = Random(rng_seed)
    order = list(usable)
    rng.shuffle(order)
    cursor = 0

    out: list[GameRecord] = []
    for pair in range(1, seq.n_pairs + 1):
        groups = (
            (seq.prefix(2 * pair - 1), per_action_black_wins, GameResult.black_win(resign=True)),
            (seq.prefix(2 * pair), per_action_white_wins, GameResult.white_win(resign=True)),
        )
        for prefix, count, result in groups:
            for _ in range(count):
                rec = background[order[cursor]]
                cursor += 1
                out.append(insert_sequence(rec, prefix, 0, tail, result_override=result))
    return out


def poison_fraction(n_poison: int, n_background: int) -> float:
    if n_poison < 0 or n_background < 0:
        raise ValueError("counts must be >= 0")
    if n_poison + n_background == 0:
        raise ValueError("poison fraction undefined for an empty corpus")
    return n_poison / (n_poison + n_background)


def format_fraction(fraction: float, decimals: int = 3) -> str:
    """Percent string rounded to `decimals` places, trailing zeros trimmed."""
    text = f"{fraction * 100:.{decimals}f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text + "%"

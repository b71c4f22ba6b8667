"""SGF game-record parsing, validation, and serialization.

Reads the main line of an FF[4] file (variations rejected) and writes a
canonical single-line form: properties in the order GM, FF, SZ, KM, RE,
extras, then one node per move, pass as an empty value, file terminated by
")" and a newline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from . import board
from .board import Color, Move, PASS

log = logging.getLogger(__name__)


class SgfError(Exception):
    """Malformed or unsupported SGF; `offset` is the character position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ResultKind(Enum):
    BLACK_WIN = "B"
    WHITE_WIN = "W"
    DRAW = "draw"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class GameResult:
    kind: ResultKind
    margin: Optional[float] = None  # None for resignation, draw, unknown
    resign: bool = False

    @property
    def winner(self) -> Optional[Color]:
        if self.kind is ResultKind.BLACK_WIN:
            return Color.BLACK
        if self.kind is ResultKind.WHITE_WIN:
            return Color.WHITE
        return None

    @staticmethod
    def black_win(margin: Optional[float] = None, resign: bool = False) -> "GameResult":
        return GameResult(ResultKind.BLACK_WIN, margin, resign)

    @staticmethod
    def white_win(margin: Optional[float] = None, resign: bool = False) -> "GameResult":
        return GameResult(ResultKind.WHITE_WIN, margin, resign)

    @staticmethod
    def from_score(value: float) -> "GameResult":
        if value > 0:
            return GameResult.black_win(value)
        if value < 0:
            return GameResult.white_win(-value)
        return GameResult(ResultKind.DRAW)


UNKNOWN_RESULT = GameResult(ResultKind.UNKNOWN)


@dataclass
class GameRecord:
    size: int
    komi: float = 0.0
    result: GameResult = UNKNOWN_RESULT
    moves: list[tuple[Color, Move]] = field(default_factory=list)
    extra_properties: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class ReplayReport:
    legal: bool
    move_count: int
    first_illegal_index: Optional[int] = None
    reason: Optional[str] = None
    final_state: Optional[board.BoardState] = None

    def __str__(self) -> str:
        if self.legal:
            return f"legal, {self.move_count} moves"
        return f"illegal at index {self.first_illegal_index}: {self.reason}"


# --- parsing -----------------------------------------------------------------


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise SgfError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def read_prop_ident(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        ident = self.text[start : self.pos]
        if not ident or not ident.isupper():
            raise SgfError("expected property identifier", start)
        return ident

    def read_prop_value(self) -> str:
        self.expect("[")
        out = []
        while True:
            if self.pos >= len(self.text):
                raise SgfError("unterminated property value", self.pos)
            ch = self.text[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    raise SgfError("dangling escape", self.pos)
                out.append(self.text[self.pos + 1])
                self.pos += 2
                continue
            if ch == "]":
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1


def _parse_result(text: str) -> GameResult:
    t = text.strip()
    if t in ("0", "Draw", "draw"):
        return GameResult(ResultKind.DRAW)
    if len(t) >= 3 and t[0] in "BW" and t[1] == "+":
        rest = t[2:]
        win = GameResult.black_win if t[0] == "B" else GameResult.white_win
        if rest.lower() in ("r", "res", "resign"):
            return win(resign=True)
        try:
            return win(margin=float(rest))
        except ValueError:
            return UNKNOWN_RESULT
    return UNKNOWN_RESULT


def parse_sgf(text: str) -> GameRecord:
    """Parse one game tree's main line into a GameRecord."""
    sc = _Scanner(text)
    sc.skip_ws()
    sc.expect("(")
    sc.skip_ws()
    if sc.peek() != ";":
        raise SgfError("expected ';' to start the root node", sc.pos)

    size = 19
    komi = 0.0
    result = UNKNOWN_RESULT
    moves: list[tuple[Color, Move]] = []
    extras: list[tuple[str, str]] = []
    saw_sz = False

    while True:
        sc.skip_ws()
        ch = sc.peek()
        if ch == ";":
            sc.pos += 1
            continue
        if ch == ")":
            sc.pos += 1
            break
        if ch == "(":
            raise SgfError("variations are not supported", sc.pos)
        if ch == "":
            raise SgfError("unterminated game tree", sc.pos)

        ident_pos = sc.pos
        ident = sc.read_prop_ident()
        values = []
        sc.skip_ws()
        if sc.peek() != "[":
            raise SgfError(f"property {ident} has no value", sc.pos)
        while sc.peek() == "[":
            values.append(sc.read_prop_value())
            sc.skip_ws()

        if ident in ("B", "W"):
            color = Color.BLACK if ident == "B" else Color.WHITE
            for value in values:
                moves.append((color, _parse_move_value(value, size, ident_pos)))
        elif ident == "SZ":
            try:
                size = int(values[0])
            except ValueError:
                raise SgfError(f"bad SZ value {values[0]!r}", ident_pos) from None
            if not board.MIN_SIZE <= size <= board.MAX_SIZE:
                raise SgfError(f"SZ {size} outside [{board.MIN_SIZE}, {board.MAX_SIZE}]", ident_pos)
            if saw_sz:
                raise SgfError("duplicate SZ", ident_pos)
            saw_sz = True
            if moves:
                raise SgfError("SZ after moves", ident_pos)
        elif ident == "KM":
            try:
                komi = float(values[0])
            except ValueError:
                raise SgfError(f"bad KM value {values[0]!r}", ident_pos) from None
        elif ident == "RE":
            result = _parse_result(values[0])
        elif ident == "GM":
            if values[0].strip() != "1":
                raise SgfError(f"not a Go record (GM[{values[0]}])", ident_pos)
        elif ident == "FF":
            pass  # accepted, rewritten as FF[4] on output
        else:
            for value in values:
                extras.append((ident, value))

    sc.skip_ws()
    if sc.pos < len(sc.text):
        raise SgfError("trailing content after game tree", sc.pos)
    return GameRecord(size=size, komi=komi, result=result, moves=moves, extra_properties=extras)


def _parse_move_value(value: str, size: int, offset: int) -> Move:
    if value == "" or (value == "tt" and size <= 19):
        return PASS
    try:
        return Move(board.sgf_to_point(value, size))
    except ValueError as exc:
        raise SgfError(str(exc), offset) from None


# --- serialization -----------------------------------------------------------


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("]", "\\]")


def _format_komi(komi: float) -> str:
    return f"{komi:g}"


def _format_result(result: GameResult) -> Optional[str]:
    if result.kind is ResultKind.DRAW:
        return "0"
    if result.kind is ResultKind.UNKNOWN:
        return None
    side = result.kind.value
    if result.resign:
        return f"{side}+R"
    if result.margin is None:
        return f"{side}+"
    return f"{side}+{result.margin:g}"


def serialize_sgf(record: GameRecord) -> str:
    parts = [f"(;GM[1]FF[4]SZ[{record.size}]KM[{_format_komi(record.komi)}]"]
    re_text = _format_result(record.result)
    if re_text is not None:
        parts.append(f"RE[{_escape(re_text)}]")
    for key, value in record.extra_properties:
        parts.append(f"{key}[{_escape(value)}]")
    for color, move in record.moves:
        value = "" if move.is_pass else board.point_to_sgf(move.point)
        parts.append(f";{color.letter}[{value}]")
    parts.append(")\n")
    return "".join(parts)


# --- replay validation -------------------------------------------------------


def validate(record: GameRecord) -> ReplayReport:
    """Replay every move through the rules engine; illegality is data."""
    state = board.new_board(record.size)
    for i, (color, move) in enumerate(record.moves):
        if color is not state.to_move:
            return ReplayReport(False, len(record.moves), i, "out of turn")
        try:
            state = board.play(state, move)
        except board.IllegalMoveError as exc:
            return ReplayReport(False, len(record.moves), i, exc.kind)
    return ReplayReport(True, len(record.moves), final_state=state)


# --- corpus IO ---------------------------------------------------------------


def load_corpus(path: str | Path) -> list[GameRecord]:
    """Parse every *.sgf under `path` in filename order; log per-file failures."""
    records, failures = load_corpus_with_report(path)
    for name, error in failures:
        log.warning("skipping %s: %s", name, error)
    return records


def load_corpus_with_report(
    path: str | Path,
) -> tuple[list[GameRecord], list[tuple[str, str]]]:
    directory = Path(path)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a readable directory")
    records = []
    failures = []
    for file in sorted(directory.glob("*.sgf"), key=lambda p: p.name):
        try:
            records.append(parse_sgf(file.read_text(encoding="utf-8")))
        except (SgfError, UnicodeDecodeError) as exc:
            failures.append((file.name, str(exc)))
    return records, failures


def save_corpus(records: list[GameRecord], path: str | Path, prefix: str = "game") -> list[Path]:
    """Write one canonical .sgf per record; zero-padded names keep load order."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(max(len(records) - 1, 0))))
    paths = []
    for i, record in enumerate(records):
        file = directory / f"{prefix}_{i:0{width}d}.sgf"
        file.write_text(serialize_sgf(record), encoding="utf-8")
        paths.append(file)
    return paths

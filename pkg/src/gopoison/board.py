"""Go rules engine: legality, capture, suicide, positional superko, area scoring.

States are immutable; every operation returns a fresh value, so states can be
shared freely across threads and search trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

MIN_SIZE = 5
MAX_SIZE = 19

EMPTY = 0
_BLACK = 1
_WHITE = 2

_GTP_COLS = "ABCDEFGHJKLMNOPQRST"  # no "I"
_SGF_COLS = "abcdefghijklmnopqrs"


class Color(Enum):
    BLACK = 1
    WHITE = 2

    @property
    def opponent(self) -> "Color":
        return Color.WHITE if self is Color.BLACK else Color.BLACK

    @property
    def letter(self) -> str:
        return "B" if self is Color.BLACK else "W"


@dataclass(frozen=True, order=True)
class Point:
    """0-based board coordinate; row 0 is the top row (SGF orientation)."""

    col: int
    row: int


@dataclass(frozen=True)
class Move:
    """Either a play on a point or a pass (point is None)."""

    point: Optional[Point]

    @property
    def is_pass(self) -> bool:
        return self.point is None

    @staticmethod
    def play(point: Point) -> "Move":
        return Move(point)


PASS = Move(None)


class IllegalMoveError(Exception):
    """Base class for move rejections; `kind` names the specific rule."""

    kind = "illegal"


class OutOfBoundsError(IllegalMoveError):
    kind = "out of bounds"


class OccupiedPointError(IllegalMoveError):
    kind = "occupied"


class SuicideError(IllegalMoveError):
    kind = "suicide"


class SuperkoError(IllegalMoveError):
    kind = "superko"


@lru_cache(maxsize=None)
def _neighbors(size: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for idx in range(size * size):
        row, col = divmod(idx, size)
        adj = []
        if row > 0:
            adj.append(idx - size)
        if row < size - 1:
            adj.append(idx + size)
        if col > 0:
            adj.append(idx - 1)
        if col < size - 1:
            adj.append(idx + 1)
        out.append(tuple(adj))
    return tuple(out)


@lru_cache(maxsize=None)
def _zobrist(size: int) -> tuple[tuple[int, int], ...]:
    # Fixed seed per size so hashes are stable across processes and platforms.
    rng = np.random.default_rng(0x60B0A2D ^ size)
    table = rng.integers(1, 2**63, size=(size * size, 2), dtype=np.int64)
    return tuple((int(a), int(b)) for a, b in table)


@dataclass(frozen=True)
class BoardState:
    size: int
    grid: bytes  # row-major, values EMPTY/_BLACK/_WHITE
    to_move: Color
    history_hashes: frozenset[int]
    captures_black: int  # black stones captured so far
    captures_white: int  # white stones captured so far
    move_count: int
    consecutive_passes: int
    position_hash: int

    def stone_at(self, point: Point) -> Optional[Color]:
        v = self.grid[point.row * self.size + point.col]
        return None if v == EMPTY else Color(v)

    def is_empty(self, point: Point) -> bool:
        return self.grid[point.row * self.size + point.col] == EMPTY

    def in_bounds(self, point: Point) -> bool:
        return 0 <= point.col < self.size and 0 <= point.row < self.size

    def points(self) -> Iterator[Point]:
        for idx in range(self.size * self.size):
            row, col = divmod(idx, self.size)
            yield Point(col, row)

    def __str__(self) -> str:
        rows = []
        for r in range(self.size):
            cells = []
            for c in range(self.size):
                v = self.grid[r * self.size + c]
                cells.append(".XO"[v])
            rows.append(" ".join(cells))
        rows.append(f"to move: {self.to_move.name}")
        return "\n".join(rows)


def _empty_board(size: int) -> BoardState:
    """Build an empty state with no size check (tests use sub-minimum boards)."""
    return BoardState(
        size=size,
        grid=bytes(size * size),
        to_move=Color.BLACK,
        history_hashes=frozenset([0]),
        captures_black=0,
        captures_white=0,
        move_count=0,
        consecutive_passes=0,
        position_hash=0,
    )


def new_board(size: int) -> BoardState:
    if not MIN_SIZE <= size <= MAX_SIZE:
        raise ValueError(f"board size must be in [{MIN_SIZE}, {MAX_SIZE}], got {size}")
    return _empty_board(size)


def _group_and_liberties(
    grid: bytes, size: int, start: int, liberty_cap: int = 0
) -> tuple[list[int], int]:
    """Flood-fill the group containing `start`.

    Returns (member indices, liberty count).  With liberty_cap > 0 the fill
    stops early once that many liberties are seen (count is then a floor).
    """
    color = grid[start]
    neighbors = _neighbors(size)
    members = [start]
    seen = bytearray(size * size)
    seen[start] = 1
    libs: set[int] = set()
    stack = [start]
    while stack:
        idx = stack.pop()
        for adj in neighbors[idx]:
            v = grid[adj]
            if v == EMPTY:
                libs.add(adj)
                if liberty_cap and len(libs) >= liberty_cap:
                    return members, len(libs)
            elif v == color and not seen[adj]:
                seen[adj] = 1
                members.append(adj)
                stack.append(adj)
    return members, len(libs)


def _resolve_play(state: BoardState, point: Point) -> tuple[list[int], bytes, int]:
    """Validate a play for state.to_move and compute its effect.

    Returns (captured indices, new grid, new position hash).  Raises the
    matching IllegalMoveError kind without touching `state`.
    """
    size = state.size
    if not state.in_bounds(point):
        raise OutOfBoundsError(f"point ({point.col},{point.row}) outside {size}x{size} board")
    idx = point.row * size + point.col
    if state.grid[idx] != EMPTY:
        raise OccupiedPointError(f"point ({point.col},{point.row}) is occupied")

    color = state.to_move.value
    enemy = Color(color).opponent.value
    grid = bytearray(state.grid)
    grid[idx] = color

    captured: list[int] = []
    seen_groups: set[int] = set()
    for adj in _neighbors(size)[idx]:
        if grid[adj] == enemy and adj not in seen_groups:
            members, libs = _group_and_liberties(bytes(grid), size, adj, liberty_cap=1)
            seen_groups.update(members)
            if libs == 0:
                captured.extend(members)
    for c in captured:
        grid[c] = EMPTY

    if not captured:
        _, own_libs = _group_and_liberties(bytes(grid), size, idx, liberty_cap=1)
        if own_libs == 0:
            raise SuicideError(f"play at ({point.col},{point.row}) would be suicide")

    zob = _zobrist(size)
    new_hash = state.position_hash ^ zob[idx][color - 1]
    for c in captured:
        new_hash ^= zob[c][enemy - 1]
    if new_hash in state.history_hashes:
        raise SuperkoError(f"play at ({point.col},{point.row}) repeats a previous position")

    return captured, bytes(grid), new_hash


def play(state: BoardState, move: Move) -> BoardState:
    """Apply a move for state.to_move, returning the successor state."""
    if move.is_pass:
        return BoardState(
            size=state.size,
            grid=state.grid,
            to_move=state.to_move.opponent,
            history_hashes=state.history_hashes,
            captures_black=state.captures_black,
            captures_white=state.captures_white,
            move_count=state.move_count + 1,
            consecutive_passes=state.consecutive_passes + 1,
            position_hash=state.position_hash,
        )

    captured, grid, new_hash = _resolve_play(state, move.point)
    caps_b = state.captures_black
    caps_w = state.captures_white
    if state.to_move is Color.BLACK:
        caps_w += len(captured)
    else:
        caps_b += len(captured)
    return BoardState(
        size=state.size,
        grid=grid,
        to_move=state.to_move.opponent,
        history_hashes=state.history_hashes | {new_hash},
        captures_black=caps_b,
        captures_white=caps_w,
        move_count=state.move_count + 1,
        consecutive_passes=0,
        position_hash=new_hash,
    )


def is_suicide(state: BoardState, point: Point, color: Color) -> bool:
    """True iff placing `color` at `point` leaves its group without liberties
    and captures nothing.  Hypothetical: ignores whose turn it is."""
    if not state.in_bounds(point):
        raise OutOfBoundsError(f"point ({point.col},{point.row}) out of bounds")
    idx = point.row * state.size + point.col
    if state.grid[idx] != EMPTY:
        raise OccupiedPointError(f"point ({point.col},{point.row}) is occupied")

    enemy = color.opponent.value
    grid = bytearray(state.grid)
    grid[idx] = color.value
    for adj in _neighbors(state.size)[idx]:
        if grid[adj] == enemy:
            _, libs = _group_and_liberties(bytes(grid), state.size, adj, liberty_cap=1)
            if libs == 0:
                return False  # captures, so not suicide
    _, own_libs = _group_and_liberties(bytes(grid), state.size, idx, liberty_cap=1)
    return own_libs == 0


def is_self_atari(state: BoardState, point: Point, color: Color) -> bool:
    """True iff placing `color` at `point` captures nothing and leaves the new
    stone's group with exactly one liberty."""
    if not state.in_bounds(point):
        raise OutOfBoundsError(f"point ({point.col},{point.row}) out of bounds")
    idx = point.row * state.size + point.col
    if state.grid[idx] != EMPTY:
        raise OccupiedPointError(f"point ({point.col},{point.row}) is occupied")

    enemy = color.opponent.value
    grid = bytearray(state.grid)
    grid[idx] = color.value
    for adj in _neighbors(state.size)[idx]:
        if grid[adj] == enemy:
            _, libs = _group_and_liberties(bytes(grid), state.size, adj, liberty_cap=1)
            if libs == 0:
                return False
    _, own_libs = _group_and_liberties(bytes(grid), state.size, idx, liberty_cap=2)
    return own_libs == 1


def legal_moves(state: BoardState) -> list[Move]:
    """All moves play() would accept, plays in row-major order, pass last."""
    moves = []
    size = state.size
    for idx in range(size * size):
        if state.grid[idx] != EMPTY:
            continue
        row, col = divmod(idx, size)
        try:
            _resolve_play(state, Point(col, row))
        except IllegalMoveError:
            continue
        moves.append(Move(Point(col, row)))
    moves.append(PASS)
    return moves


def is_legal(state: BoardState, move: Move) -> bool:
    if move.is_pass:
        return True
    try:
        _resolve_play(state, move.point)
    except IllegalMoveError:
        return False
    return True


def score(state: BoardState, komi: float) -> float:
    """Tromp-Taylor area score: black area - white area - komi.

    Area = stones plus empty regions that reach only that color.
    """
    size = state.size
    grid = state.grid
    neighbors = _neighbors(size)
    black = grid.count(_BLACK)
    white = grid.count(_WHITE)
    seen = bytearray(size * size)
    for start in range(size * size):
        if grid[start] != EMPTY or seen[start]:
            continue
        region = [start]
        seen[start] = 1
        stack = [start]
        touches_black = False
        touches_white = False
        while stack:
            idx = stack.pop()
            for adj in neighbors[idx]:
                v = grid[adj]
                if v == EMPTY:
                    if not seen[adj]:
                        seen[adj] = 1
                        region.append(adj)
                        stack.append(adj)
                elif v == _BLACK:
                    touches_black = True
                else:
                    touches_white = True
        if touches_black and not touches_white:
            black += len(region)
        elif touches_white and not touches_black:
            white += len(region)
    return black - white - komi


def is_terminal(state: BoardState) -> bool:
    """A game ends after two consecutive passes."""
    return state.consecutive_passes >= 2


# --- textual coordinates ---------------------------------------------------


def point_to_gtp(point: Point, size: int) -> str:
    return f"{_GTP_COLS[point.col]}{size - point.row}"


def gtp_to_point(text: str, size: int) -> Point:
    text = text.strip().upper()
    if len(text) < 2:
        raise ValueError(f"bad GTP coordinate {text!r}")
    col = _GTP_COLS.find(text[0])
    try:
        row_num = int(text[1:])
    except ValueError:
        raise ValueError(f"bad GTP coordinate {text!r}") from None
    if col < 0 or col >= size or not 1 <= row_num <= size:
        raise ValueError(f"GTP coordinate {text!r} outside {size}x{size} board")
    return Point(col, size - row_num)


def point_to_sgf(point: Point) -> str:
    return f"{_SGF_COLS[point.col]}{_SGF_COLS[point.row]}"


def sgf_to_point(text: str, size: int) -> Point:
    if len(text) != 2:
        raise ValueError(f"bad SGF coordinate {text!r}")
    col = _SGF_COLS.find(text[0])
    row = _SGF_COLS.find(text[1])
    if col < 0 or row < 0 or col >= size or row >= size:
        raise ValueError(f"SGF coordinate {text!r} outside {size}x{size} board")
    return Point(col, row)

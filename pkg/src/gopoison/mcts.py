"""PUCT Monte-Carlo tree search with UCB in-tree selection and LCB move choice.

Values are kept in the side-to-move perspective of each node and negated per
ply on backup.  Terminal positions back up the true area-score sign instead
of the network value.  One tree is single-threaded; parallel callers run
independent searches with per-instance seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import board, net
from .board import BoardState, Move


@dataclass(frozen=True)
class SearchConfig:
    n_sims: int = 64
    c_puct: float = 1.5
    dirichlet_alpha: float = 0.15
    dirichlet_epsilon: float = 0.0
    lcb_z: float = 1.28
    lcb_min_visit_fraction: float = 0.10
    temperature: float = 0.0
    seed: int = 0
    komi: float = 5.5

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if self.c_puct <= 0:
            raise ValueError("c_puct must be > 0")
        if not 0.0 <= self.dirichlet_epsilon < 1.0:
            raise ValueError("dirichlet_epsilon must be in [0, 1)")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class EdgeStats:
    """Public per-edge statistics (the tree itself uses packed arrays)."""

    n: int
    w: float
    prior: float

    @property
    def q(self) -> float:
        return self.w / self.n if self.n > 0 else 0.0


@dataclass(frozen=True)
class RootMoveStats:
    move: Move
    n: int
    q: float
    p: float
    u: float
    lcb: float


@dataclass
class SearchResult:
    stats: list[RootMoveStats]
    chosen: Move
    root_value: float

    @property
    def total_child_visits(self) -> int:
        return sum(s.n for s in self.stats)


class _Node:
    __slots__ = ("state", "moves", "priors", "n", "w", "w2", "children",
                 "visits", "value_sum", "terminal", "terminal_value")

    def __init__(self, state: BoardState):
        self.state = state
        self.moves: list[Move] = []
        self.priors: Optional[np.ndarray] = None
        self.n: Optional[np.ndarray] = None
        self.w: Optional[np.ndarray] = None
        self.w2: Optional[np.ndarray] = None
        self.children: list[Optional["_Node"]] = []
        self.visits = 0
        self.value_sum = 0.0
        self.terminal = False
        self.terminal_value = 0.0


def puct_scores(
    q: np.ndarray, n: np.ndarray, priors: np.ndarray, parent_visits: int, c_puct: float
) -> np.ndarray:
    """Q + c_puct * P * sqrt(parent_visits) / (1 + N), per edge."""
    return q + c_puct * priors * math.sqrt(parent_visits) / (1.0 + n)


def _select_index(
    q: np.ndarray, n: np.ndarray, priors: np.ndarray, parent_visits: int, c_puct: float
) -> int:
    # argmax takes the lowest index on ties
    return int(np.argmax(puct_scores(q, n, priors, parent_visits, c_puct)))


def select_child(edges: list[EdgeStats], parent_visits: int, c_puct: float) -> int:
    """Index of the edge maximizing the PUCT score."""
    if not edges:
        raise ValueError("select_child needs at least one edge")
    q = np.array([e.q for e in edges])
    n = np.array([e.n for e in edges], dtype=np.float64)
    p = np.array([e.prior for e in edges])
    return _select_index(q, n, p, parent_visits, c_puct)


def _terminal_value(state: BoardState, komi: float) -> float:
    s = board.score(state, komi)
    if s == 0:
        return 0.0
    black_won = s > 0
    mover_is_black = state.to_move is board.Color.BLACK
    return 1.0 if black_won == mover_is_black else -1.0


def _make_node(state: BoardState, evaluate: net.Evaluator, config: SearchConfig) -> tuple["_Node", float]:
    node = _Node(state)
    if board.is_terminal(state):
        node.terminal = True
        node.terminal_value = _terminal_value(state, config.komi)
        return node, node.terminal_value

    p, v = evaluate(state)
    node.moves = board.legal_moves(state)
    priors = np.array(
        [p[net.action_index(m, state.size)] for m in node.moves], dtype=np.float64
    )
    total = priors.sum()
    if total <= 0.0:
        priors = np.full(len(node.moves), 1.0 / len(node.moves))
    elif abs(total - 1.0) > 1e-6:
        priors = priors / total
    node.priors = priors
    node.n = np.zeros(len(node.moves), dtype=np.int64)
    node.w = np.zeros(len(node.moves))
    node.w2 = np.zeros(len(node.moves))
    node.children = [None] * len(node.moves)
    return node, float(v)


def backup(path: list[tuple[_Node, int]], leaf_value: float) -> None:
    """Add the leaf value along the path with the sign alternating per ply.

    `path` holds (node, edge index) pairs from the root to the expanded
    leaf's parent; leaf_value is from the leaf's side-to-move perspective.
    """
    depth = len(path)
    for d, (node, edge) in enumerate(path):
        signed = leaf_value * (-1.0 if (depth - d) % 2 else 1.0)
        node.visits += 1
        node.value_sum += signed
        node.n[edge] += 1
        node.w[edge] += signed
        node.w2[edge] += signed * signed


def _edge_lcb(node: _Node, config: SearchConfig) -> np.ndarray:
    q = np.where(node.n > 0, node.w / np.maximum(node.n, 1), 0.0)
    var = np.zeros(len(node.moves))
    multi = node.n >= 2
    if multi.any():
        nn = node.n[multi].astype(np.float64)
        var[multi] = np.maximum(node.w2[multi] - nn * q[multi] ** 2, 0.0) / (nn - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        spread = np.where(node.n > 0, np.sqrt(var / np.maximum(node.n, 1)), 0.0)
    return q - config.lcb_z * spread


def run_search(
    state: BoardState,
    params: Optional[net.NetworkParams],
    config: SearchConfig,
    evaluate: Optional[net.Evaluator] = None,
    instance: int = 0,
) -> SearchResult:
    """Run n_sims simulations from `state` and assemble root statistics.

    `evaluate` overrides the network (used by oracle tests); otherwise the
    priors and values come from forward(params).  The root expansion counts
    as the first simulation, so child visits total n_sims - 1.
    """
    if board.is_terminal(state):
        raise ValueError("cannot search a finished game (two consecutive passes)")
    if evaluate is None:
        if params is None:
            raise ValueError("need params or an evaluate callable")
        evaluate = net.evaluator(params)
    rng = np.random.default_rng((config.seed, instance))

    root, root_eval = _make_node(state, evaluate, config)
    root.visits = 1
    root.value_sum = root_eval
    if config.dirichlet_epsilon > 0 and len(root.moves) > 0:
        noise = rng.dirichlet([config.dirichlet_alpha] * len(root.moves))
        root.priors = (1.0 - config.dirichlet_epsilon) * root.priors + (
            config.dirichlet_epsilon * noise
        )

    for _ in range(config.n_sims - 1):
        node = root
        path: list[tuple[_Node, int]] = []
        while True:
            if node.terminal:
                leaf = node
                leaf_value = node.terminal_value
                break
            q = np.where(node.n > 0, node.w / np.maximum(node.n, 1), 0.0)
            edge = _select_index(q, node.n, node.priors, node.visits, config.c_puct)
            path.append((node, edge))
            child = node.children[edge]
            if child is None:
                child_state = board.play(node.state, node.moves[edge])
                child, leaf_value = _make_node(child_state, evaluate, config)
                node.children[edge] = child
                leaf = child
                break
            node = child
        leaf.visits += 1
        leaf.value_sum += leaf_value
        backup(path, leaf_value)

    q = np.where(root.n > 0, root.w / np.maximum(root.n, 1), 0.0)
    u = config.c_puct * root.priors * math.sqrt(root.visits) / (1.0 + root.n)
    lcb = _edge_lcb(root, config)
    stats = [
        RootMoveStats(
            move=move, n=int(root.n[i]), q=float(q[i]), p=float(root.priors[i]),
            u=float(u[i]), lcb=float(lcb[i]),
        )
        for i, move in enumerate(root.moves)
    ]
    result = SearchResult(
        stats=stats, chosen=board.PASS, root_value=root.value_sum / root.visits
    )
    result.chosen = choose_move(result, config, rng=rng)
    return result


def choose_move(
    result: SearchResult, config: SearchConfig, rng: Optional[np.random.Generator] = None
) -> Move:
    """Temperature > 0: sample proportional to N^(1/T).  Temperature 0: among
    edges with N >= lcb_min_visit_fraction * max N, argmax LCB; visit-less
    results fall back to the prior."""
    if not result.stats:
        return board.PASS
    n = np.array([s.n for s in result.stats], dtype=np.float64)
    if config.temperature > 0:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        if n.sum() == 0:
            weights = np.array([s.p for s in result.stats])
        else:
            weights = n ** (1.0 / config.temperature)
        weights = weights / weights.sum()
        return result.stats[int(rng.choice(len(weights), p=weights))].move

    max_n = n.max()
    if max_n == 0:
        return result.stats[int(np.argmax([s.p for s in result.stats]))].move
    eligible = n >= config.lcb_min_visit_fraction * max_n
    if not eligible.any():
        return result.stats[int(np.argmax(n))].move
    lcb = np.array([s.lcb for s in result.stats])
    lcb = np.where(eligible, lcb, -np.inf)
    return result.stats[int(np.argmax(lcb))].move

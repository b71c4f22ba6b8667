"""Turn SGF corpora into training examples, run supervised SGD, and generate
synthetic background corpora by self-play."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import board, mcts, net
from .board import Color
from .mcts import SearchConfig
from .net import NetworkParams, TrainingExample
from .sgf import GameRecord, GameResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    size: int
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    l2: float = 1e-4
    shuffle_seed: int = 0
    channels: int = net.DEFAULT_CHANNELS
    hidden: int = net.DEFAULT_HIDDEN

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class SelfPlayConfig:
    n_games: int
    size: int
    n_sims: int = 24
    opening_temperature_moves: int = 8
    max_moves: Optional[int] = None  # default 2 * size^2
    seed: int = 0
    komi: float = 5.5
    c_puct: float = 1.5
    dirichlet_alpha: float = 0.15
    dirichlet_epsilon: float = 0.25
    workers: int = 1

    @property
    def move_cap(self) -> int:
        return self.max_moves if self.max_moves is not None else 2 * self.size * self.size


def records_to_examples(corpus: list[GameRecord]) -> list[TrainingExample]:
    """One example per position before each move; z is the mover's outcome.

    Records without a definite winner (unknown or drawn) are skipped and
    counted in the log.
    """
    examples: list[TrainingExample] = []
    skipped = 0
    for record in corpus:
        winner = record.result.winner
        if winner is None:
            skipped += 1
            continue
        state = board.new_board(record.size)
        for color, move in record.moves:
            if color is not state.to_move:
                raise ValueError("record does not alternate colors; validate first")
            examples.append(
                TrainingExample(
                    planes=net.encode_state(state),
                    legal_mask=net.legal_mask(state),
                    policy_target=net.action_index(move, record.size),
                    z=1.0 if color is winner else -1.0,
                )
            )
            state = board.play(state, move)
    if skipped:
        log.info("records_to_examples: skipped %d records without a winner", skipped)
    return examples


def train(
    corpus: list[GameRecord],
    config: TrainConfig,
    init_seed: int = 0,
    log_path: Optional[str | Path] = None,
) -> NetworkParams:
    """Seeded-shuffle minibatch SGD over the corpus; deterministic throughout."""
    examples = records_to_examples(corpus)
    if not examples:
        raise ValueError("no usable training examples in corpus")
    return train_on_examples(examples, config, init_seed, log_path)


def train_on_examples(
    examples: list[TrainingExample],
    config: TrainConfig,
    init_seed: int = 0,
    log_path: Optional[str | Path] = None,
) -> NetworkParams:
    params = net.init_params(config.size, config.channels, config.hidden, seed=init_seed)
    momentum = net.MomentumState(config.momentum)
    rng = np.random.default_rng(config.shuffle_seed)
    rows = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(examples))
        totals = np.zeros(3)
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start : start + config.batch_size]]
            total, policy, value, grads = net.loss_and_gradients(params, batch, config.l2)
            params, momentum = net.sgd_step(params, grads, config.learning_rate, momentum)
            totals += (total, policy, value)
            n_batches += 1
        mean = totals / n_batches
        rows.append((epoch, mean[0], mean[1], mean[2]))
        log.info("epoch %d: mean_loss %.4f policy %.4f value %.4f", epoch, *mean)
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_loss", "policy_loss", "value_loss"])
            for epoch, total, policy, value in rows:
                writer.writerow([epoch, f"{total:.6f}", f"{policy:.6f}", f"{value:.6f}"])
    return params


# --- self-play ---------------------------------------------------------------


def play_game(
    black: NetworkParams,
    white: NetworkParams,
    size: int,
    komi: float,
    search: SearchConfig,
    opening_temperature_moves: int,
    max_moves: int,
    game_seed: int,
) -> GameRecord:
    """One engine-vs-engine game: temperature 1 for the opening moves, then 0;
    ends on two consecutive passes or the move cap; scored as it stands."""
    state = board.new_board(size)
    moves = []
    while not board.is_terminal(state) and state.move_count < max_moves:
        temperature = 1.0 if state.move_count < opening_temperature_moves else 0.0
        config = replace(search, temperature=temperature, seed=game_seed, komi=komi)
        params = black if state.to_move is Color.BLACK else white
        result = mcts.run_search(state, params, config, instance=state.move_count)
        moves.append((state.to_move, result.chosen))
        state = board.play(state, result.chosen)
    return GameRecord(
        size=size,
        komi=komi,
        result=GameResult.from_score(board.score(state, komi)),
        moves=moves,
    )


def _selfplay_one(args) -> GameRecord:
    params, config, index = args
    game_seed = int(np.random.default_rng((config.seed, index)).integers(2**62))
    search = SearchConfig(
        n_sims=config.n_sims,
        c_puct=config.c_puct,
        dirichlet_alpha=config.dirichlet_alpha,
        dirichlet_epsilon=config.dirichlet_epsilon,
        komi=config.komi,
        seed=game_seed,
    )
    return play_game(
        params,
        params,
        config.size,
        config.komi,
        search,
        config.opening_temperature_moves,
        config.move_cap,
        game_seed,
    )


def generate_background(params: NetworkParams, config: SelfPlayConfig) -> list[GameRecord]:
    """n_games independent self-play games, reproducible per seed; the result
    order and content do not depend on the worker count."""
    tasks = [(params, config, i) for i in range(config.n_games)]
    if config.workers > 1 and config.n_games > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_selfplay_one, tasks, chunksize=4))
    return [_selfplay_one(task) for task in tasks]

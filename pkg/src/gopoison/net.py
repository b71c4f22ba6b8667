"""Policy/value network: encoding, forward pass, loss, analytic gradients, IO.

Small fixed architecture: a 3x3 conv stem, two 3x3 conv body layers, a 1x1
conv + affine policy head over size^2+1 actions, and a 1x1 conv + two affine
value head ending in tanh.  Weights are stored as float32; all arithmetic
runs in float64 so finite-difference checks are meaningful.  Hidden layers
use ELU: empty board regions put conv pre-activations exactly at zero, where
ReLU's kink would make finite differences of the loss ill-defined.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import board
from .board import BoardState, Move, Point

MAGIC = b"GPNW"
VERSION = 1

DEFAULT_CHANNELS = 32
DEFAULT_HIDDEN = 64


class ParamsIOError(Exception):
    pass


@dataclass
class NetworkParams:
    size: int
    channels: int
    hidden: int
    tensors: dict[str, np.ndarray]  # float32, ordered per tensor_shapes()

    @property
    def n_actions(self) -> int:
        return self.size * self.size + 1


@dataclass(frozen=True)
class NetworkOutput:
    p: np.ndarray  # probabilities over size^2+1 actions, zero on illegal
    v: float  # game outcome in [-1, 1] from the side to move


@dataclass
class TrainingExample:
    planes: np.ndarray  # (3, size, size)
    legal_mask: np.ndarray  # (size^2+1,) bool
    policy_target: int
    z: float  # +1 if the mover won the game, else -1


@dataclass
class MomentumState:
    mu: float
    velocity: dict[str, np.ndarray] = field(default_factory=dict)


def tensor_shapes(size: int, channels: int, hidden: int) -> list[tuple[str, tuple[int, ...]]]:
    """Fixed tensor order used everywhere, including the parameter file."""
    area = size * size
    actions = area + 1
    c = channels
    return [
        ("stem.w", (c, 3, 3, 3)),
        ("stem.b", (c,)),
        ("body1.w", (c, c, 3, 3)),
        ("body1.b", (c,)),
        ("body2.w", (c, c, 3, 3)),
        ("body2.b", (c,)),
        ("policy.conv.w", (2, c)),
        ("policy.conv.b", (2,)),
        ("policy.fc.w", (actions, 2 * area)),
        ("policy.fc.b", (actions,)),
        ("value.conv.w", (1, c)),
        ("value.conv.b", (1,)),
        ("value.fc1.w", (hidden, area)),
        ("value.fc1.b", (hidden,)),
        ("value.fc2.w", (1, hidden)),
        ("value.fc2.b", (1,)),
    ]


def init_params(
    size: int,
    channels: int = DEFAULT_CHANNELS,
    hidden: int = DEFAULT_HIDDEN,
    seed: int = 0,
) -> NetworkParams:
    """He-initialized weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in tensor_shapes(size, channels, hidden):
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            scale = np.sqrt(2.0 / fan_in)
            tensors[name] = (rng.standard_normal(shape) * scale).astype(np.float32)
    return NetworkParams(size=size, channels=channels, hidden=hidden, tensors=tensors)


# --- encoding ----------------------------------------------------------------


def encode_state(state: BoardState) -> np.ndarray:
    """3 planes: side-to-move stones, opponent stones, black-to-move flag."""
    size = state.size
    grid = np.frombuffer(state.grid, dtype=np.uint8).reshape(size, size)
    mover = state.to_move.value
    planes = np.zeros((3, size, size), dtype=np.float64)
    planes[0] = grid == mover
    planes[1] = grid == (3 - mover)
    planes[2] = 1.0 if state.to_move is board.Color.BLACK else 0.0
    return planes


def action_index(move: Move, size: int) -> int:
    if move.is_pass:
        return size * size
    return move.point.row * size + move.point.col


def index_to_move(index: int, size: int) -> Move:
    if index == size * size:
        return board.PASS
    row, col = divmod(index, size)
    return Move(Point(col, row))


def legal_mask(state: BoardState) -> np.ndarray:
    mask = np.zeros(state.size * state.size + 1, dtype=bool)
    for move in board.legal_moves(state):
        mask[action_index(move, state.size)] = True
    return mask


# --- forward / backward ------------------------------------------------------


def _elu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def _delu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, C, S, S) -> (B, C*9, S*S) of 3x3 neighborhoods, zero padded."""
    b, c, s, _ = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((b, c, 9, s, s), dtype=x.dtype)
    k = 0
    for dr in range(3):
        for dc in range(3):
            cols[:, :, k] = xp[:, :, dr : dr + s, dc : dc + s]
            k += 1
    return cols.reshape(b, c * 9, s * s)


def _col2im(dcols: np.ndarray, c: int, s: int) -> np.ndarray:
    """Adjoint of _im2col: (B, C*9, S*S) -> (B, C, S, S)."""
    b = dcols.shape[0]
    dcols = dcols.reshape(b, c, 9, s, s)
    dxp = np.zeros((b, c, s + 2, s + 2), dtype=dcols.dtype)
    k = 0
    for dr in range(3):
        for dc in range(3):
            dxp[:, :, dr : dr + s, dc : dc + s] += dcols[:, :, k]
            k += 1
    return dxp[:, :, 1 : 1 + s, 1 : 1 + s]


def _conv3(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b, _, s, _ = x.shape
    cols = _im2col(x)
    w2 = w.reshape(w.shape[0], -1)
    out = np.einsum("ok,bkp->bop", w2, cols) + bias[None, :, None]
    return out.reshape(b, w.shape[0], s, s), cols


def _forward_full(
    params: NetworkParams, planes: np.ndarray, masks: np.ndarray
) -> dict[str, np.ndarray]:
    """Batched forward pass; returns every intermediate needed by backward."""
    t = {k: v.astype(np.float64) for k, v in params.tensors.items()}
    b = planes.shape[0]
    s = params.size
    area = s * s

    z1, cols1 = _conv3(planes, t["stem.w"], t["stem.b"])
    a1 = _elu(z1)
    z2, cols2 = _conv3(a1, t["body1.w"], t["body1.b"])
    a2 = _elu(z2)
    z3, cols3 = _conv3(a2, t["body2.w"], t["body2.b"])
    a3 = _elu(z3)

    zp = np.einsum("oi,bipq->bopq", t["policy.conv.w"], a3) + t["policy.conv.b"][None, :, None, None]
    ap = _elu(zp)
    pflat = ap.reshape(b, 2 * area)
    logits = pflat @ t["policy.fc.w"].T + t["policy.fc.b"]

    masked = np.where(masks, logits, -np.inf)
    mx = masked.max(axis=1, keepdims=True)
    ex = np.where(masks, np.exp(masked - mx), 0.0)
    denom = ex.sum(axis=1, keepdims=True)
    p = ex / denom
    logp = np.where(masks, masked - mx - np.log(denom), -np.inf)

    zv = np.einsum("oi,bipq->bopq", t["value.conv.w"], a3) + t["value.conv.b"][None, :, None, None]
    av = _elu(zv)
    vflat = av.reshape(b, area)
    h1 = vflat @ t["value.fc1.w"].T + t["value.fc1.b"]
    ah = _elu(h1)
    vpre = (ah @ t["value.fc2.w"].T + t["value.fc2.b"]).reshape(b)
    v = np.tanh(vpre)

    return {
        "t": t, "planes": planes, "masks": masks,
        "z1": z1, "a1": a1, "cols1": cols1,
        "z2": z2, "a2": a2, "cols2": cols2,
        "z3": z3, "a3": a3, "cols3": cols3,
        "zp": zp, "ap": ap, "pflat": pflat, "logits": logits, "p": p, "logp": logp,
        "zv": zv, "av": av, "vflat": vflat, "h1": h1, "ah": ah, "v": v,
    }


def _stack_batch(
    params: NetworkParams, batch: list[TrainingExample]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if not batch:
        raise ValueError("batch must be nonempty")
    planes = np.stack([ex.planes for ex in batch]).astype(np.float64)
    masks = np.stack([ex.legal_mask for ex in batch])
    targets = np.array([ex.policy_target for ex in batch], dtype=np.int64)
    zs = np.array([ex.z for ex in batch], dtype=np.float64)
    return planes, masks, targets, zs


def _l2_term(tensors: dict[str, np.ndarray]) -> float:
    return float(sum(np.sum(t.astype(np.float64) ** 2) for t in tensors.values()))


def loss(params: NetworkParams, batch: list[TrainingExample], l2: float = 0.0) -> float:
    """Mean over the batch of (z - v)^2 - log p[target], plus l2 * ||theta||^2."""
    planes, masks, targets, zs = _stack_batch(params, batch)
    cache = _forward_full(params, planes, masks)
    value_term = np.mean((zs - cache["v"]) ** 2)
    policy_term = -np.mean(cache["logp"][np.arange(len(batch)), targets])
    return float(value_term + policy_term + l2 * _l2_term(params.tensors))


def loss_components(
    params: NetworkParams, batch: list[TrainingExample], l2: float = 0.0
) -> tuple[float, float, float]:
    """(total, policy, value) loss terms for logging."""
    planes, masks, targets, zs = _stack_batch(params, batch)
    cache = _forward_full(params, planes, masks)
    value_term = float(np.mean((zs - cache["v"]) ** 2))
    policy_term = float(-np.mean(cache["logp"][np.arange(len(batch)), targets]))
    return value_term + policy_term + l2 * _l2_term(params.tensors), policy_term, value_term


def gradients(
    params: NetworkParams, batch: list[TrainingExample], l2: float = 0.0
) -> dict[str, np.ndarray]:
    """Exact analytic gradient of loss() for every tensor, as float64 arrays."""
    _, _, _, grads = loss_and_gradients(params, batch, l2)
    return grads


def loss_and_gradients(
    params: NetworkParams, batch: list[TrainingExample], l2: float = 0.0
) -> tuple[float, float, float, dict[str, np.ndarray]]:
    """(total, policy, value) losses and gradients from one forward pass."""
    planes, masks, targets, zs = _stack_batch(params, batch)
    cache = _forward_full(params, planes, masks)
    t = cache["t"]
    b = planes.shape[0]
    s = params.size
    area = s * s
    c = params.channels
    g: dict[str, np.ndarray] = {}

    # policy head: d/dlogits of -mean log p[target] = (p - onehot) / B on legal
    dlogits = cache["p"].copy()
    dlogits[np.arange(b), targets] -= 1.0
    dlogits /= b
    g["policy.fc.w"] = dlogits.T @ cache["pflat"]
    g["policy.fc.b"] = dlogits.sum(axis=0)
    dpflat = dlogits @ t["policy.fc.w"]
    dap = dpflat.reshape(b, 2, s, s)
    dzp = dap * _delu(cache["zp"])
    g["policy.conv.w"] = np.einsum("bopq,bipq->oi", dzp, cache["a3"])
    g["policy.conv.b"] = dzp.sum(axis=(0, 2, 3))
    da3_policy = np.einsum("oi,bopq->bipq", t["policy.conv.w"], dzp)

    # value head: d/dv of mean (z - v)^2, through tanh
    dv = 2.0 * (cache["v"] - zs) / b
    dvpre = dv * (1.0 - cache["v"] ** 2)
    g["value.fc2.w"] = dvpre[None, :] @ cache["ah"]
    g["value.fc2.b"] = np.array([dvpre.sum()])
    dah = dvpre[:, None] @ t["value.fc2.w"]
    dh1 = dah * _delu(cache["h1"])
    g["value.fc1.w"] = dh1.T @ cache["vflat"]
    g["value.fc1.b"] = dh1.sum(axis=0)
    dvflat = dh1 @ t["value.fc1.w"]
    dav = dvflat.reshape(b, 1, s, s)
    dzv = dav * _delu(cache["zv"])
    g["value.conv.w"] = np.einsum("bopq,bipq->oi", dzv, cache["a3"])
    g["value.conv.b"] = np.array([dzv.sum()])
    da3_value = np.einsum("oi,bopq->bipq", t["value.conv.w"], dzv)

    # shared trunk
    da3 = da3_policy + da3_value
    dz3 = da3 * _delu(cache["z3"])
    g["body2.w"] = np.einsum("bop,bkp->ok", dz3.reshape(b, c, area), cache["cols3"]).reshape(
        c, c, 3, 3
    )
    g["body2.b"] = dz3.sum(axis=(0, 2, 3))
    dcols3 = np.einsum("ok,bop->bkp", t["body2.w"].reshape(c, -1), dz3.reshape(b, c, area))
    da2 = _col2im(dcols3, c, s)
    dz2 = da2 * _delu(cache["z2"])
    g["body1.w"] = np.einsum("bop,bkp->ok", dz2.reshape(b, c, area), cache["cols2"]).reshape(
        c, c, 3, 3
    )
    g["body1.b"] = dz2.sum(axis=(0, 2, 3))
    dcols2 = np.einsum("ok,bop->bkp", t["body1.w"].reshape(c, -1), dz2.reshape(b, c, area))
    da1 = _col2im(dcols2, c, s)
    dz1 = da1 * _delu(cache["z1"])
    g["stem.w"] = np.einsum("bop,bkp->ok", dz1.reshape(b, c, area), cache["cols1"]).reshape(
        c, 3, 3, 3
    )
    g["stem.b"] = dz1.sum(axis=(0, 2, 3))

    if l2:
        for name, tensor in t.items():
            g[name] = g[name] + 2.0 * l2 * tensor
    ordered = {name: g[name] for name, _ in tensor_shapes(params.size, c, params.hidden)}
    value_term = float(np.mean((zs - cache["v"]) ** 2))
    policy_term = float(-np.mean(cache["logp"][np.arange(b), targets]))
    total = value_term + policy_term + l2 * _l2_term(params.tensors)
    return total, policy_term, value_term, ordered


def sgd_step(
    params: NetworkParams,
    gradient: dict[str, np.ndarray],
    lr: float,
    momentum_state: MomentumState,
) -> tuple[NetworkParams, MomentumState]:
    """Classical momentum: m <- mu*m + g; theta <- theta - lr*m."""
    new_tensors = {}
    new_velocity = {}
    for name, theta in params.tensors.items():
        g = gradient[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} vs {theta.shape}")
        m = momentum_state.velocity.get(name)
        m = g.astype(np.float64) if m is None else momentum_state.mu * m + g
        new_velocity[name] = m
        new_tensors[name] = (theta.astype(np.float64) - lr * m).astype(np.float32)
    return (
        NetworkParams(params.size, params.channels, params.hidden, new_tensors),
        MomentumState(momentum_state.mu, new_velocity),
    )


# --- single-state inference ---------------------------------------------------


def forward(params: NetworkParams, state: BoardState) -> NetworkOutput:
    """Evaluate one position; illegal actions are masked out of p."""
    if params.size != state.size:
        raise ValueError(f"params are for size {params.size}, state is {state.size}")
    planes = encode_state(state)[None]
    masks = legal_mask(state)[None]
    cache = _forward_full(params, planes, masks)
    return NetworkOutput(p=cache["p"][0], v=float(cache["v"][0]))


Evaluator = Callable[[BoardState], tuple[np.ndarray, float]]


def evaluator(params: NetworkParams) -> Evaluator:
    """Adapter used by the search: state -> (prior vector, value)."""

    def evaluate(state: BoardState) -> tuple[np.ndarray, float]:
        out = forward(params, state)
        return out.p, out.v

    return evaluate


# --- parameter file IO ---------------------------------------------------------


def save_params(params: NetworkParams, path: str | Path) -> None:
    """Binary format: magic, version u16, size u16, channels u16, then each
    tensor as rank u8, dims u32 each, little-endian float32 payload."""
    expected = tensor_shapes(params.size, params.channels, params.hidden)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<HHH", VERSION, params.size, params.channels)
    for name, shape in expected:
        tensor = params.tensors[name]
        if tensor.shape != shape:
            raise ParamsIOError(f"tensor {name} has shape {tensor.shape}, expected {shape}")
        blob += struct.pack("<B", tensor.ndim)
        blob += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
        blob += np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_params(path: str | Path, expect_size: Optional[int] = None) -> NetworkParams:
    data = Path(path).read_bytes()
    if len(data) < 10 or data[:4] != MAGIC:
        raise ParamsIOError("bad magic: not a parameter file")
    version, size, channels = struct.unpack("<HHH", data[4:10])
    if version != VERSION:
        raise ParamsIOError(f"unsupported version {version}")
    if expect_size is not None and size != expect_size:
        raise ParamsIOError(f"parameter file is for board size {size}, expected {expect_size}")
    pos = 10
    raw: list[np.ndarray] = []
    for _ in range(16):
        if pos + 1 > len(data):
            raise ParamsIOError("truncated file: missing tensor header")
        rank = data[pos]
        pos += 1
        if pos + 4 * rank > len(data):
            raise ParamsIOError("truncated file: missing tensor dims")
        dims = struct.unpack(f"<{rank}I", data[pos : pos + 4 * rank])
        pos += 4 * rank
        count = int(np.prod(dims)) if dims else 1
        end = pos + 4 * count
        if end > len(data):
            raise ParamsIOError("truncated file: missing tensor payload")
        raw.append(np.frombuffer(data[pos:end], dtype="<f4").reshape(dims).copy())
        pos = end
    if pos != len(data):
        raise ParamsIOError("trailing bytes after final tensor")

    hidden = raw[12].shape[0]
    tensors = {}
    for (name, shape), tensor in zip(tensor_shapes(size, channels, hidden), raw):
        if tensor.shape != shape:
            raise ParamsIOError(
                f"shape-header mismatch for {name}: file has {tensor.shape}, "
                f"size/channel header implies {shape}"
            )
        tensors[name] = tensor
    return NetworkParams(size=size, channels=channels, hidden=hidden, tensors=tensors)

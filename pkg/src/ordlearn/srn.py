"""A single-hidden-layer recurrent language model with truncated BPTT.

Forward pass for one token (h is the recurrent hidden vector, reset to the
zero vector at each window start):

    h' = sigmoid(w_ih[token] + w_hh @ h + b_h)
    p  = softmax(h' @ w_ho + b_o)

Training slides a fixed-length window over each partition with stride 1,
scores the prediction of the token immediately after the window (loss at the
final step only), backpropagates through time truncated at the window start,
and applies one plain SGD update per window. Partitions are trained
incrementally: `epochs_per_partition` passes over partition i before any
exposure to partition i+1. Windows never span partition boundaries.

Checkpoint file layout (all little-endian): magic "SRNW", format version
u16, dtype code u8 (0 = float64, 1 = float32), reserved u8, vocab_size u32,
hidden_size u32, window u32, epochs_per_partition u32, learning_rate f64,
init_scale f64, seed u64, tokens_trained u64, partitions_done u32, then the
arrays w_ih (vocab x hidden), w_hh (hidden x hidden), b_h (hidden), w_ho
(hidden x vocab), b_o (vocab), row-major.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import PreparedCorpus
from .errors import TrainingDivergedError, ValidationError

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SRNW"
CHECKPOINT_FORMAT_VERSION = 1
N_CHECKPOINTS = 6

_DTYPE_CODES = {"float64": 0, "float32": 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}
_WIRE_DTYPES = {"float64": "<f8", "float32": "<f4"}


@dataclass(frozen=True)
class SrnConfig:
    vocab_size: int = 4096
    hidden_size: int = 512
    window: int = 7
    epochs_per_partition: int = 20
    learning_rate: float = 0.01
    init_scale: float = 0.05
    seed: int = 0
    dtype: str = "float64"  # "float32" trades gradient-check fidelity for speed

    def __post_init__(self):
        if self.vocab_size < 1 or self.hidden_size < 1:
            raise ValidationError("vocab_size and hidden_size must be >= 1")
        if self.window < 1:
            raise ValidationError(f"window must be >= 1, got {self.window}")
        if self.epochs_per_partition < 1:
            raise ValidationError("epochs_per_partition must be >= 1")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.init_scale < 0:
            raise ValidationError(f"init_scale must be >= 0, got {self.init_scale}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an integer in [0, 2**64)")
        if self.dtype not in _DTYPE_CODES:
            raise ValidationError(f"dtype must be one of {sorted(_DTYPE_CODES)}, got {self.dtype!r}")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)


@dataclass
class SrnWeights:
    w_ih: np.ndarray  # (vocab, hidden) input-to-hidden rows
    w_hh: np.ndarray  # (hidden, hidden) recurrent connections
    b_h: np.ndarray   # (hidden,)
    w_ho: np.ndarray  # (hidden, vocab) hidden-to-output
    b_o: np.ndarray   # (vocab,)

    @property
    def vocab_size(self) -> int:
        return self.w_ih.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_ih.shape[1]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w_ih, self.w_hh, self.b_h, self.w_ho, self.b_o)

    def copy(self) -> "SrnWeights":
        return SrnWeights(*(a.copy() for a in self.arrays()))

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def tobytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a).tobytes() for a in self.arrays())


def init_weights(config: SrnConfig) -> SrnWeights:
    """Seeded i.i.d. uniform(-init_scale, +init_scale) weights, zero biases.

    The draw order is fixed (w_ih, w_hh, w_ho) so the seed pins every array.
    With the default small scale the untrained output distribution is close
    to uniform; with init_scale = 0 it is exactly uniform.
    """
    rng = np.random.default_rng(config.seed)
    scale = config.init_scale
    dt = config.np_dtype
    w_ih = rng.uniform(-scale, scale, (config.vocab_size, config.hidden_size)).astype(dt)
    w_hh = rng.uniform(-scale, scale, (config.hidden_size, config.hidden_size)).astype(dt)
    w_ho = rng.uniform(-scale, scale, (config.hidden_size, config.vocab_size)).astype(dt)
    return SrnWeights(
        w_ih=w_ih,
        w_hh=w_hh,
        b_h=np.zeros(config.hidden_size, dt),
        w_ho=w_ho,
        b_o=np.zeros(config.vocab_size, dt),
    )


def initial_state(weights: SrnWeights) -> np.ndarray:
    """The designated reset state: the zero hidden vector."""
    return np.zeros(weights.hidden_size, weights.w_ih.dtype)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form: overflow-safe for any input, one ufunc pass
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def forward_step(weights: SrnWeights, state: np.ndarray, token: int) -> tuple[np.ndarray, np.ndarray]:
    """One recurrent step; returns the new hidden state and the next-token
    probability distribution."""
    if not 0 <= int(token) < weights.vocab_size:
        raise ValidationError(f"token id {token} out of range for vocab {weights.vocab_size}")
    h = _sigmoid(weights.w_ih[int(token)] + weights.w_hh @ state + weights.b_h)
    p = _softmax(h @ weights.w_ho + weights.b_o)
    return h, p


def _forward_window(weights: SrnWeights, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Feed a window from the reset state; returns the stacked pre-step and
    post-step hidden states (h_prev[t] is the state entering step t)."""
    width = len(inputs)
    hidden = weights.hidden_size
    dt = weights.w_ih.dtype
    h_prev = np.zeros((width, hidden), dt)
    h_out = np.empty((width, hidden), dt)
    h = h_prev[0]
    for t in range(width):
        h_prev[t] = h
        h = _sigmoid(weights.w_ih[inputs[t]] + weights.w_hh @ h + weights.b_h)
        h_out[t] = h
    return h_prev, h_out


def window_loss(weights: SrnWeights, inputs, target: int) -> float:
    """Cross-entropy of the target token after feeding the window from reset."""
    _, h_out = _forward_window(weights, inputs)
    z = h_out[-1] @ weights.w_ho + weights.b_o
    z = z - z.max()
    return float(np.log(np.exp(z).sum()) - z[target])


def _window_backward(weights, inputs, target, h_prev, h_out):
    """Backward pass truncated at the window start.

    Returns (loss, dz, d_pre) with dz the output-logit gradient and d_pre[t]
    the gradient at the pre-sigmoid input of step t.
    """
    z = h_out[-1] @ weights.w_ho + weights.b_o
    z = z - z.max()
    ez = np.exp(z)
    loss = float(np.log(ez.sum()) - z[target])
    dz = ez / ez.sum()
    dz[target] -= 1.0
    d_pre = np.empty_like(h_out)
    dh = weights.w_ho @ dz
    for t in range(len(inputs) - 1, -1, -1):
        da = dh * h_out[t] * (1.0 - h_out[t])
        d_pre[t] = da
        if t:
            dh = weights.w_hh.T @ da
    return loss, dz, d_pre


def _apply_update(weights: SrnWeights, inputs, dz, d_pre, h_prev, h_last, lr: float) -> None:
    weights.w_ho -= np.outer(h_last, lr * dz)
    weights.b_o -= lr * dz
    weights.w_hh -= lr * (d_pre.T @ h_prev)
    weights.b_h -= lr * d_pre.sum(axis=0)
    for t in range(len(inputs)):  # row updates accumulate naturally on repeated tokens
        weights.w_ih[inputs[t]] -= lr * d_pre[t]


def _train_window_unchecked(weights: SrnWeights, inputs, target, lr: float) -> float:
    h_prev, h_out = _forward_window(weights, inputs)
    loss, dz, d_pre = _window_backward(weights, inputs, target, h_prev, h_out)
    if not np.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite training loss {loss!r}; lower the learning rate"
        )
    _apply_update(weights, inputs, dz, d_pre, h_prev, h_out[-1], lr)
    return loss


def train_window(weights: SrnWeights, inputs, target: int, learning_rate: float) -> float:
    """One truncated-BPTT SGD update in place; returns the pre-update loss."""
    inputs = np.asarray(inputs)
    if inputs.ndim != 1 or len(inputs) == 0:
        raise ValidationError("inputs must be a nonempty 1-D window of token ids")
    vocab = weights.vocab_size
    if int(inputs.max()) >= vocab or not 0 <= int(target) < vocab:
        raise ValidationError("token id out of range for this model")
    return _train_window_unchecked(weights, inputs, int(target), learning_rate)


def window_gradients(weights: SrnWeights, inputs, target: int) -> tuple[float, SrnWeights]:
    """Loss plus dense gradients for every weight array (no update applied)."""
    inputs = np.asarray(inputs)
    h_prev, h_out = _forward_window(weights, inputs)
    loss, dz, d_pre = _window_backward(weights, inputs, int(target), h_prev, h_out)
    g_ih = np.zeros_like(weights.w_ih)
    np.add.at(g_ih, np.asarray(inputs, dtype=np.intp), d_pre)
    grads = SrnWeights(
        w_ih=g_ih,
        w_hh=d_pre.T @ h_prev,
        b_h=d_pre.sum(axis=0),
        w_ho=np.outer(h_out[-1], dz),
        b_o=dz.copy(),
    )
    return loss, grads


def batched_hidden(weights: SrnWeights, contexts) -> np.ndarray:
    """Hidden state after feeding each row of `contexts` from the reset state."""
    contexts = np.asarray(contexts)
    h = np.zeros((contexts.shape[0], weights.hidden_size), weights.w_ih.dtype)
    for s in range(contexts.shape[1]):
        h = _sigmoid(weights.w_ih[contexts[:, s]] + h @ weights.w_hh.T + weights.b_h)
    return h


def cross_entropy(weights: SrnWeights, ids, window: int, chunk_size: int = 4096) -> float:
    """Mean next-token cross-entropy over every full-context position.

    For each position t >= window the context ids[t-window .. t-1] is fed
    from the reset state and -ln p[ids[t]] is scored; earlier positions are
    skipped. No weights are updated.
    """
    ids = np.asarray(ids)
    if len(ids) <= window:
        raise ValidationError(
            f"stream of {len(ids)} tokens is too short for window {window}"
        )
    if int(ids.max()) >= weights.vocab_size:
        raise ValidationError("token id out of range for this model")
    contexts = sliding_window_view(ids[:-1], window)
    targets = ids[window:]
    total = 0.0
    for start in range(0, len(targets), chunk_size):
        ctx = contexts[start : start + chunk_size]
        tgt = targets[start : start + chunk_size]
        h = batched_hidden(weights, ctx)
        z = h @ weights.w_ho + weights.b_o
        m = z.max(axis=1)
        lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
        total += float((lse - z[np.arange(len(tgt)), tgt]).sum())
    return total / len(targets)


@dataclass
class Checkpoint:
    """A weight snapshot taken at a partition boundary.

    tokens_trained counts prediction targets consumed so far (window slides
    by one token, so one target per update), including repeated passes;
    partition_index is the number of partitions completed.
    """

    weights: SrnWeights
    tokens_trained: int
    partition_index: int
    config: SrnConfig

    @property
    def seed(self) -> int:
        return self.config.seed


def checkpoint_partitions(n_partitions: int) -> list[int]:
    """Partition counts at which snapshots are taken: before training, four
    evenly spaced milestones floor(k * P / 5), and after training."""
    if n_partitions < 5:
        raise ValidationError(
            f"need at least 5 partitions for {N_CHECKPOINTS} distinct checkpoints, "
            f"got {n_partitions}"
        )
    return [0] + [(k * n_partitions) // 5 for k in range(1, 5)] + [n_partitions]


def train_schedule(
    weights: SrnWeights | None,
    corpus: PreparedCorpus,
    config: SrnConfig,
    checkpoint_hook: Callable[[Checkpoint], None] | None = None,
    *,
    resume_from: Checkpoint | None = None,
) -> list[Checkpoint]:
    """Incremental training over partitions in visit order.

    Each partition receives `epochs_per_partition` stride-1 passes before the
    next one is touched; earlier partitions are never revisited. Snapshots
    are emitted at the `checkpoint_partitions` boundaries and passed to
    `checkpoint_hook`. Resuming from a checkpoint continues bit-for-bit and
    emits only the snapshots still ahead.
    """
    n_partitions = corpus.n_partitions
    boundaries = checkpoint_partitions(n_partitions)
    part_len = corpus.partition_length
    window = config.window
    if part_len < window + 1:
        raise ValidationError(
            f"partition length {part_len} cannot fit a {window}-token window plus target"
        )
    if len(corpus.ids) and int(corpus.ids.max()) >= config.vocab_size:
        raise ValidationError("corpus contains ids outside the model vocabulary")
    if resume_from is not None:
        weights = resume_from.weights.copy()
        done = resume_from.partition_index
        tokens_trained = resume_from.tokens_trained
    else:
        if weights is None:
            raise ValidationError("either initial weights or a resume checkpoint is required")
        done = 0
        tokens_trained = 0

    checkpoints: list[Checkpoint] = []

    def snapshot():
        ckpt = Checkpoint(weights.copy(), tokens_trained, done, config)
        checkpoints.append(ckpt)
        if checkpoint_hook is not None:
            checkpoint_hook(ckpt)

    if resume_from is None:
        snapshot()  # pre-training state
    pending = [b for b in boundaries if b > done]
    lr = config.learning_rate
    examples_per_pass = part_len - window
    for pos in range(done, n_partitions):
        start, end = corpus.partitions[int(corpus.partition_order[pos])]
        part = corpus.ids[start:end]
        for _ in range(config.epochs_per_partition):
            for i in range(examples_per_pass):
                _train_window_unchecked(weights, part[i : i + window], part[i + window], lr)
        done = pos + 1
        tokens_trained += config.epochs_per_partition * examples_per_pass
        if not weights.all_finite():
            raise TrainingDivergedError(
                f"non-finite weights after {done} partitions; reduce the learning rate"
            )
        if pending and done == pending[0]:
            pending.pop(0)
            snapshot()
    return checkpoints


_CKPT_HEADER = struct.Struct("<4sHBBLLLLddQQL")


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    cfg = checkpoint.config
    with open(path, "wb") as fh:
        fh.write(
            _CKPT_HEADER.pack(
                CHECKPOINT_MAGIC,
                CHECKPOINT_FORMAT_VERSION,
                _DTYPE_CODES[cfg.dtype],
                0,
                cfg.vocab_size,
                cfg.hidden_size,
                cfg.window,
                cfg.epochs_per_partition,
                cfg.learning_rate,
                cfg.init_scale,
                cfg.seed,
                checkpoint.tokens_trained,
                checkpoint.partition_index,
            )
        )
        wire = _WIRE_DTYPES[cfg.dtype]
        for arr in checkpoint.weights.arrays():
            fh.write(np.ascontiguousarray(arr, dtype=wire).tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        header = fh.read(_CKPT_HEADER.size)
        if len(header) < _CKPT_HEADER.size:
            raise ValidationError(f"{path}: truncated checkpoint header")
        (
            magic, version, dtype_code, _reserved,
            vocab, hidden, window, epochs,
            lr, init_scale, seed, tokens_trained, partitions_done,
        ) = _CKPT_HEADER.unpack(header)
        if magic != CHECKPOINT_MAGIC:
            raise ValidationError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint format version {version}")
        if dtype_code not in _CODE_DTYPES:
            raise ValidationError(f"{path}: unknown dtype code {dtype_code}")
        dtype = _CODE_DTYPES[dtype_code]
        wire = _WIRE_DTYPES[dtype]
        itemsize = np.dtype(wire).itemsize
        shapes = [(vocab, hidden), (hidden, hidden), (hidden,), (hidden, vocab), (vocab,)]
        arrays = []
        for shape in shapes:
            n = int(np.prod(shape))
            buf = fh.read(n * itemsize)
            if len(buf) < n * itemsize:
                raise ValidationError(f"{path}: truncated checkpoint arrays")
            arrays.append(np.frombuffer(buf, dtype=wire).astype(dtype).reshape(shape))
    config = SrnConfig(
        vocab_size=vocab,
        hidden_size=hidden,
        window=window,
        epochs_per_partition=epochs,
        learning_rate=lr,
        init_scale=init_scale,
        seed=seed,
        dtype=dtype,
    )
    return Checkpoint(SrnWeights(*arrays), tokens_trained, partitions_done, config)

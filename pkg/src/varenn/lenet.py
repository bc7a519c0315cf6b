"""From-scratch LeNet-style CNN: forward, analytic backprop, SGD training.

Architecture (fixed layer order, widths configurable)::

    input HxWxC -> conv1 (k1, valid) -> ReLU -> maxpool p
                -> conv2 (k2, valid) -> ReLU -> maxpool p
                -> flatten -> fc1 -> ReLU -> fc2 -> logits

For the default 60x60x3 input: conv1 20@5x5 -> 56x56x20, pool -> 28x28x20,
conv2 50@5x5 -> 24x24x50, pool -> 12x12x50, flatten 7200, fc1 500, fc2 5.

Convolutions run as tensordot contractions over strided sliding-window views,
which keeps the heavy lifting inside BLAS. Max pooling uses floor semantics:
trailing rows/columns that do not fill a window are cropped (they then carry
exactly zero gradient, consistent with the forward pass).

Everything is deterministic given (seed, data): weight init and the per-epoch
shuffle each draw from their own SeedSequence streams keyed by the seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (ConsistencyError, DomainError, FormatError, LengthError,
                     ShapeError, ValidationError)

_INIT_STREAM = 201
_SHUFFLE_STREAM = 202

PARAM_FIELDS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b",
                "fc1_w", "fc1_b", "fc2_w", "fc2_b")


@dataclass(frozen=True)
class LeNetConfig:
    input_hw: int = 60
    in_channels: int = 3
    conv1_filters: int = 20
    conv1_kernel: int = 5
    conv2_filters: int = 50
    conv2_kernel: int = 5
    pool: int = 2
    fc_units: int = 500
    n_classes: int = 5

    def shape_chain(self) -> dict[str, tuple[int, ...]]:
        """Spatial sizes after each stage; raises ShapeError naming the first bad layer."""
        hw = self.input_hw
        c1 = hw - self.conv1_kernel + 1
        if c1 < 1:
            raise ShapeError(f"conv1: kernel {self.conv1_kernel} larger than input {hw}")
        p1 = c1 // self.pool
        if p1 < 1:
            raise ShapeError(f"pool1: window {self.pool} larger than feature map {c1}")
        c2 = p1 - self.conv2_kernel + 1
        if c2 < 1:
            raise ShapeError(f"conv2: kernel {self.conv2_kernel} larger than feature map {p1}")
        p2 = c2 // self.pool
        if p2 < 1:
            raise ShapeError(f"pool2: window {self.pool} larger than feature map {c2}")
        return {
            "conv1": (c1, c1, self.conv1_filters),
            "pool1": (p1, p1, self.conv1_filters),
            "conv2": (c2, c2, self.conv2_filters),
            "pool2": (p2, p2, self.conv2_filters),
            "flatten": (p2 * p2 * self.conv2_filters,),
            "fc1": (self.fc_units,),
            "fc2": (self.n_classes,),
        }

    @property
    def flat_features(self) -> int:
        return self.shape_chain()["flatten"][0]


@dataclass
class LeNetParams:
    """All trainable tensors plus the architecture they belong to."""

    cfg: LeNetConfig
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    version: int = field(default=0, compare=False)

    @property
    def dtype(self) -> np.dtype:
        return self.conv1_w.dtype

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        return [(name, getattr(self, name)) for name in PARAM_FIELDS]

    def copy(self) -> "LeNetParams":
        return replace(self, **{name: getattr(self, name).copy() for name in PARAM_FIELDS})


def _dtype_for(precision: str) -> np.dtype:
    if precision == "real32":
        return np.dtype(np.float32)
    if precision == "real64":
        return np.dtype(np.float64)
    raise ValidationError(f"unknown precision {precision!r}; expected 'real32' or 'real64'")


def init_params(cfg: LeNetConfig, seed: int = 0, precision: str = "real32") -> LeNetParams:
    """Fan-in-scaled uniform weights (limit sqrt(3/fan_in)), zero biases, seeded."""
    cfg.shape_chain()
    dtype = _dtype_for(precision)
    shapes = {
        "conv1_w": (cfg.conv1_filters, cfg.in_channels, cfg.conv1_kernel, cfg.conv1_kernel),
        "conv1_b": (cfg.conv1_filters,),
        "conv2_w": (cfg.conv2_filters, cfg.conv1_filters, cfg.conv2_kernel, cfg.conv2_kernel),
        "conv2_b": (cfg.conv2_filters,),
        "fc1_w": (cfg.flat_features, cfg.fc_units),
        "fc1_b": (cfg.fc_units,),
        "fc2_w": (cfg.fc_units, cfg.n_classes),
        "fc2_b": (cfg.n_classes,),
    }
    tensors: dict[str, np.ndarray] = {}
    for i, name in enumerate(PARAM_FIELDS):
        shape = shapes[name]
        if name.endswith("_b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:])) if name.startswith("conv") else shape[0]
            limit = np.sqrt(3.0 / fan_in)
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _INIT_STREAM, i])))
            tensors[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return LeNetParams(cfg=cfg, **tensors)


def _sliding_windows(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, H, W) -> read-only (B, C, H-k+1, W-k+1, k, k) view."""
    b, c, h, w = x.shape
    sb, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x, (b, c, h - k + 1, w - k + 1, k, k), (sb, sc, sh, sw, sh, sw), writeable=False)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    win = _sliding_windows(x, w.shape[2])
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, oh, ow, F)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    out += b[None, :, None, None]
    return out


def _conv_backward(x: np.ndarray, w: np.ndarray, dout: np.ndarray,
                   need_dx: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    k = w.shape[2]
    win = _sliding_windows(x, k)
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))  # (F, C, k, k)
    db = dout.sum(axis=(0, 2, 3))
    dx = None
    if need_dx:
        pad = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        dwin = _sliding_windows(pad, k)
        w_rot = w[:, :, ::-1, ::-1]
        dx = np.tensordot(dwin, w_rot, axes=([1, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
        dx = np.ascontiguousarray(dx)
    return dw.astype(x.dtype, copy=False), db.astype(x.dtype, copy=False), dx


def _pool_forward(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
    """Max pool with floor cropping; returns (pooled, argmax indices, cropped hw)."""
    if p == 1:
        return x, np.zeros(x.shape, dtype=np.int8), (x.shape[2], x.shape[3])
    b, c, h, w = x.shape
    h2, w2 = h // p, w // p
    cropped = x[:, :, :h2 * p, :w2 * p]
    tiles = cropped.reshape(b, c, h2, p, w2, p).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, p * p)
    idx = tiles.argmax(axis=-1)
    pooled = np.take_along_axis(tiles, idx[..., None], axis=-1)[..., 0]
    return pooled, idx, (h2 * p, w2 * p)


def _pool_backward(dpooled: np.ndarray, idx: np.ndarray, x_shape: tuple, p: int) -> np.ndarray:
    if p == 1:
        return dpooled
    b, c, h, w = x_shape
    h2, w2 = h // p, w // p
    dtiles = np.zeros((b, c, h2, w2, p * p), dtype=dpooled.dtype)
    np.put_along_axis(dtiles, idx[..., None], dpooled[..., None], axis=-1)
    dx = np.zeros(x_shape, dtype=dpooled.dtype)
    dx[:, :, :h2 * p, :w2 * p] = (
        dtiles.reshape(b, c, h2, w2, p, p).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2 * p, w2 * p))
    return dx


@dataclass
class ForwardCache:
    params_version: int
    params_id: int
    x: np.ndarray
    a1: np.ndarray
    pool1_idx: np.ndarray
    p1: np.ndarray
    a2: np.ndarray
    pool2_idx: np.ndarray
    p2: np.ndarray
    hidden: np.ndarray
    flat: np.ndarray


def forward(params: LeNetParams, images: np.ndarray,
            want_cache: bool = False) -> np.ndarray | tuple[np.ndarray, ForwardCache]:
    """Logits for a batch of (B, H, W, C) images with values in [0, 1]."""
    cfg = params.cfg
    images = np.asarray(images)
    if images.ndim != 4 or images.shape[1:] != (cfg.input_hw, cfg.input_hw, cfg.in_channels):
        raise ShapeError(f"input: expected (B, {cfg.input_hw}, {cfg.input_hw}, {cfg.in_channels}), "
                         f"got {images.shape}")
    x = np.ascontiguousarray(images.transpose(0, 3, 1, 2), dtype=params.dtype)

    a1 = _conv_forward(x, params.conv1_w, params.conv1_b)
    r1 = np.maximum(a1, 0)
    p1, idx1, _ = _pool_forward(r1, cfg.pool)
    a2 = _conv_forward(p1, params.conv2_w, params.conv2_b)
    r2 = np.maximum(a2, 0)
    p2, idx2, _ = _pool_forward(r2, cfg.pool)
    flat = p2.reshape(p2.shape[0], -1)
    hidden = np.maximum(flat @ params.fc1_w + params.fc1_b, 0)
    logits = hidden @ params.fc2_w + params.fc2_b
    if not want_cache:
        return logits
    cache = ForwardCache(params.version, id(params), x, a1, idx1, p1, a2, idx2, p2, hidden, flat)
    return logits, cache


def loss_softmax_ce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels: expected ({n},), got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise DomainError(f"labels outside 0..{k - 1}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + 1e-300)))
    dlogits = probs
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def backward(params: LeNetParams, cache: ForwardCache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients for every parameter, same shapes as the parameters."""
    if cache.params_id != id(params) or cache.params_version != params.version:
        raise ConsistencyError("forward cache is stale: parameters changed since it was built")
    cfg = params.cfg
    dtype = params.dtype
    dlogits = np.asarray(dlogits, dtype=dtype)

    grads: dict[str, np.ndarray] = {}
    grads["fc2_w"] = cache.hidden.T @ dlogits
    grads["fc2_b"] = dlogits.sum(axis=0)
    dhidden = dlogits @ params.fc2_w.T
    dhidden = np.where(cache.hidden > 0, dhidden, 0)
    grads["fc1_w"] = cache.flat.T @ dhidden
    grads["fc1_b"] = dhidden.sum(axis=0)
    dflat = dhidden @ params.fc1_w.T

    dp2 = dflat.reshape(cache.p2.shape)
    dr2 = _pool_backward(dp2, cache.pool2_idx, cache.a2.shape, cfg.pool)
    da2 = np.where(cache.a2 > 0, dr2, 0)
    grads["conv2_w"], grads["conv2_b"], dp1 = _conv_backward(cache.p1, params.conv2_w, da2, need_dx=True)

    dr1 = _pool_backward(dp1, cache.pool1_idx, cache.a1.shape, cfg.pool)
    da1 = np.where(cache.a1 > 0, dr1, 0)
    grads["conv1_w"], grads["conv1_b"], _ = _conv_backward(cache.x, params.conv1_w, da1, need_dx=False)
    return {name: grads[name].astype(dtype, copy=False) for name in PARAM_FIELDS}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    base_lr: float = 0.01
    decay_gamma: float = 0.95
    batch_size: int = 64
    seed: int = 0
    precision: str = "real32"
    momentum: float = 0.0
    quantize_inputs: bool = True

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.decay_gamma <= 1.0:
            raise ValidationError(f"decay_gamma must be in (0, 1], got {self.decay_gamma}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.base_lr < 0:
            raise ValidationError(f"base_lr must be >= 0, got {self.base_lr}")
        _dtype_for(self.precision)


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Exponentially decayed learning rate: base_lr * decay_gamma**epoch."""
    if not 0 <= epoch < cfg.epochs:
        raise DomainError(f"epoch {epoch} outside 0..{cfg.epochs - 1}")
    return cfg.base_lr * cfg.decay_gamma ** epoch


def sgd_step(params: LeNetParams, grads: dict[str, np.ndarray], lr: float,
             momentum: float = 0.0, velocity: dict[str, np.ndarray] | None = None) -> None:
    """In-place SGD update; bumps the parameter version so stale caches are caught."""
    for name in PARAM_FIELDS:
        g = grads[name]
        if momentum > 0.0 and velocity is not None:
            velocity[name] = momentum * velocity.get(name, 0.0) + g
            g = velocity[name]
        getattr(params, name)[...] -= lr * g
    params.version += 1


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_accuracy: float


def train(train_images: np.ndarray, train_labels: np.ndarray,
          val_images: np.ndarray, val_labels: np.ndarray,
          cfg: TrainConfig, net_cfg: LeNetConfig | None = None,
          params: LeNetParams | None = None) -> tuple[LeNetParams, list[EpochLog]]:
    """Minibatch SGD for the configured number of epochs; no early stopping.

    Returns the final-epoch parameters and one log row per epoch with the
    learning rate, mean training loss, validation loss, and validation
    accuracy.
    """
    cfg.validate()
    if len(train_images) == 0 or len(val_images) == 0:
        raise ValidationError("training and validation splits must be non-empty")
    if params is None:
        params = init_params(net_cfg or LeNetConfig(), cfg.seed, cfg.precision)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    val_labels = np.asarray(val_labels, dtype=np.int64)

    velocity: dict[str, np.ndarray] = {}
    log: list[EpochLog] = []
    n = len(train_images)
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        order_rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([cfg.seed, _SHUFFLE_STREAM, epoch])))
        order = order_rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            logits, cache = forward(params, train_images[batch], want_cache=True)
            loss, dlogits = loss_softmax_ce(logits, train_labels[batch])
            grads = backward(params, cache, dlogits)
            sgd_step(params, grads, lr, cfg.momentum, velocity)
            losses.append(loss)
        val_logits = _batched_logits(params, val_images)
        val_loss, _ = loss_softmax_ce(val_logits, val_labels)
        val_acc = float(np.mean(val_logits.argmax(axis=1) == val_labels))
        log.append(EpochLog(epoch, lr, float(np.mean(losses)), val_loss, val_acc))
    return params, log


def _batched_logits(params: LeNetParams, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    chunks = [forward(params, images[i:i + batch_size])
              for i in range(0, len(images), batch_size)]
    return np.concatenate(chunks, axis=0)


def predict(params: LeNetParams, images: np.ndarray,
            batch_size: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Class indices and softmax probabilities; ties resolve to the lower index."""
    logits = _batched_logits(params, images, batch_size)
    probs = softmax(logits)
    return logits.argmax(axis=1), probs


def write_training_log(log: list[EpochLog], path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch\tlr\ttrain_loss\tval_loss\tval_accuracy\n")
        for row in log:
            fh.write(f"{row.epoch}\t{row.lr:.8f}\t{row.train_loss:.6f}\t"
                     f"{row.val_loss:.6f}\t{row.val_accuracy:.6f}\n")


# ---------------------------------------------------------------------------
# Checkpoint file: magic b"VNET1", u16 version, u8 dtype size (4|8),
# u8 tensor count, 9 x u32 architecture fields, then per tensor a shape
# header (u16 name length, name, u8 ndim, u32 dims) and finally all payloads
# in header order, little-endian.
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"VNET1"
_CKPT_HEADER = struct.Struct("<5sHBB")
_CFG_FIELDS = ("input_hw", "in_channels", "conv1_filters", "conv1_kernel",
               "conv2_filters", "conv2_kernel", "pool", "fc_units", "n_classes")
_CKPT_CFG = struct.Struct("<9I")


def save_checkpoint(params: LeNetParams, path) -> None:
    dtype_size = params.dtype.itemsize
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, 1, dtype_size, len(PARAM_FIELDS)))
        fh.write(_CKPT_CFG.pack(*(getattr(params.cfg, f) for f in _CFG_FIELDS)))
        for name, tensor in params.tensors():
            encoded = name.encode("ascii")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        for _, tensor in params.tensors():
            fh.write(np.ascontiguousarray(tensor, dtype=f"<f{dtype_size}").tobytes())


def load_checkpoint(path) -> LeNetParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _CKPT_HEADER.size:
        raise LengthError(f"{path}: file shorter than the checkpoint header")
    magic, version, dtype_size, n_tensors = _CKPT_HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != 1 or dtype_size not in (4, 8):
        raise FormatError(f"{path}: unsupported checkpoint version/dtype ({version}, {dtype_size})")
    off = _CKPT_HEADER.size
    cfg = LeNetConfig(**dict(zip(_CFG_FIELDS, _CKPT_CFG.unpack_from(data, off))))
    off += _CKPT_CFG.size
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("ascii")
        off += name_len
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        dims = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        shapes.append((name, dims))
    if tuple(name for name, _ in shapes) != PARAM_FIELDS:
        raise FormatError(f"{path}: tensor names {[n for n, _ in shapes]} != {list(PARAM_FIELDS)}")
    tensors: dict[str, np.ndarray] = {}
    for name, dims in shapes:
        count = int(np.prod(dims)) if dims else 1
        nbytes = count * dtype_size
        if off + nbytes > len(data):
            raise LengthError(f"{path}: payload truncated at tensor {name}")
        tensors[name] = np.frombuffer(data, dtype=f"<f{dtype_size}", count=count,
                                      offset=off).reshape(dims).copy()
        off += nbytes
    if off != len(data):
        raise LengthError(f"{path}: {len(data) - off} unexpected trailing bytes")
    return LeNetParams(cfg=cfg, **tensors)

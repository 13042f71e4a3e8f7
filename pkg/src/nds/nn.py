"""Minimal neural-network kernel: 1-D convolutions, dense layers,
exact backprop, Adam with staircase decay, and the two loss functions
used by the trace-refinement and window-arbiter models.

Small enough to verify every gradient against central finite
differences; no external ML framework involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_KINDS = ("conv1d", "dense")
_ACTS = ("relu", "linear", "sigmoid", "softmax2")


@dataclass
class Layer:
    kind: str
    activation: str
    w: np.ndarray   # conv1d: (ksize, in_ch, out_ch); dense: (d_in, d_out)
    b: np.ndarray   # (out_ch,) or (d_out,)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in _ACTS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MicroModel:
    name: str
    layers: list = field(default_factory=list)

    def params(self) -> list:
        out = []
        for lay in self.layers:
            out.append(lay.w)
            out.append(lay.b)
        return out

    def n_weights(self) -> int:
        return sum(p.size for p in self.params())


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.001
    decay: float = 0.95
    decay_every: int = 500
    max_steps: int = 20000
    batch: int = 128
    gamma: float = 10.0

    def lr(self, step: int) -> float:
        return self.lr0 * self.decay ** (step // self.decay_every)


def _act_forward(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "linear":
        return z
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    # softmax over the last axis, shifted for stability
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _act_backward(name: str, z: np.ndarray, out: np.ndarray, dout: np.ndarray) -> np.ndarray:
    if name == "relu":
        return dout * (z > 0)
    if name == "linear":
        return dout
    if name == "sigmoid":
        return dout * out * (1.0 - out)
    return (dout - (dout * out).sum(axis=-1, keepdims=True)) * out


def _conv_patches(x: np.ndarray, ksize: int) -> np.ndarray:
    """(B, L, C) -> (B, L, C, ksize) windows with zero 'same' padding."""
    pad = ksize // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    return np.lib.stride_tricks.sliding_window_view(xp, ksize, axis=1)


def forward(model: MicroModel, x: np.ndarray, caches: list = None) -> np.ndarray:
    """Evaluate the model on a batch.

    Conv layers take (B, L, C) and preserve L (stride 1, zero padding);
    a dense layer following a conv stack flattens its input. Passing a
    ``caches`` list records what backward() needs.
    """
    h = np.asarray(x, dtype=np.float64)
    for lay in model.layers:
        if lay.kind == "conv1d":
            if h.ndim != 3:
                raise ValueError(f"conv1d expects (B, L, C), got shape {h.shape}")
            if h.shape[2] != lay.w.shape[1]:
                raise ValueError(f"conv1d channel mismatch: {h.shape[2]} vs {lay.w.shape[1]}")
            patches = _conv_patches(h, lay.w.shape[0])
            z = np.einsum("blck,kco->blo", patches, lay.w) + lay.b
            pre_shape = None
        else:
            pre_shape = h.shape if h.ndim == 3 else None
            if h.ndim == 3:
                h = h.reshape(h.shape[0], -1)
            if h.shape[1] != lay.w.shape[0]:
                raise ValueError(f"dense input mismatch: {h.shape[1]} vs {lay.w.shape[0]}")
            patches = h
            z = h @ lay.w + lay.b
        out = _act_forward(lay.activation, z)
        if caches is not None:
            caches.append((patches, z, out, pre_shape))
        h = out
    return h


def backward(model: MicroModel, caches: list, dout: np.ndarray):
    """Gradients of the loss w.r.t. every weight and bias.

    ``dout`` is the loss gradient at the model output; returns a list of
    (dw, db) aligned with model.layers.
    """
    if len(caches) != len(model.layers):
        raise ValueError("cache/layer count mismatch")
    grads: list = [None] * len(model.layers)
    d = np.asarray(dout, dtype=np.float64)
    for i in range(len(model.layers) - 1, -1, -1):
        lay = model.layers[i]
        patches, z, out, pre_shape = caches[i]
        dz = _act_backward(lay.activation, z, out, d)
        if lay.kind == "dense":
            dw = patches.T @ dz
            db = dz.sum(axis=0)
            d = dz @ lay.w.T
            if pre_shape is not None:
                d = d.reshape(pre_shape)
        else:
            ksize = lay.w.shape[0]
            dw = np.einsum("blck,blo->kco", patches, dz)
            db = dz.sum(axis=(0, 1))
            dpatch = np.einsum("blo,kco->blck", dz, lay.w)
            b_, l_, c_ = patches.shape[0], patches.shape[1], patches.shape[2]
            pad = ksize // 2
            dxp = np.zeros((b_, l_ + 2 * pad, c_))
            for j in range(ksize):
                dxp[:, j:j + l_, :] += dpatch[:, :, :, j]
            d = dxp[:, pad:pad + l_, :]
        grads[i] = (dw, db)
    return grads


# ---------------------------------------------------------------------------
# losses

def ce_loss(logit: float, label: int) -> float:
    """Cross entropy of a single logit whose sigmoid is p(bit = 0)."""
    p0 = 1.0 / (1.0 + math.exp(-logit))
    p = p0 if label == 0 else 1.0 - p0
    return -math.log(max(p, 1e-12))


def ce_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross entropy over a batch; positive logits favor bit 0."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    d = np.asarray(labels, dtype=np.float64).reshape(-1)
    p0 = 1.0 / (1.0 + np.exp(-z))
    p = np.where(d == 0, p0, 1.0 - p0)
    return float(-np.log(np.maximum(p, 1e-12)).mean())


def ce_grad_from_logits(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/dlogits, same shape as logits."""
    z = np.asarray(logits, dtype=np.float64)
    d = np.asarray(labels, dtype=np.float64).reshape(z.shape)
    p0 = 1.0 / (1.0 + np.exp(-z))
    return (p0 - (1.0 - d)) / z.size


def _class_weights(labels: np.ndarray) -> np.ndarray:
    """Inverse-frequency weights b_n / (2 * count(class)); 1.0 when the
    batch holds a single class (the balanced weight is undefined then)."""
    d = np.asarray(labels)
    n1 = int(d.sum())
    n0 = d.size - n1
    if n0 == 0 or n1 == 0:
        return np.ones(d.size)
    alpha = np.where(d == 0, d.size / (2.0 * n0), d.size / (2.0 * n1))
    return alpha


def weighted_ce_loss(probs: np.ndarray, labels: np.ndarray, gamma: float) -> float:
    """Class-balanced cross entropy with a biased penalty on harmful
    terminate decisions (prediction 0 against ground truth 1)."""
    p = np.asarray(probs, dtype=np.float64)
    d = np.asarray(labels, dtype=np.int64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("probs must be (B, 2)")
    if d.size == 0:
        raise ValueError("empty batch")
    alpha = _class_weights(d)
    pred = np.argmax(p, axis=1)
    beta = np.where((d == 1) & (pred == 0), gamma, 1.0)
    beta = np.maximum(beta, 1.0)
    nll = -np.log(np.maximum(p[np.arange(d.size), d], 1e-12))
    return float((alpha * beta * nll).sum())


def weighted_ce_grad(probs: np.ndarray, labels: np.ndarray, gamma: float) -> np.ndarray:
    """dL/dprobs for the weighted loss; the class and penalty weights
    are piecewise constant and treated as constants."""
    p = np.asarray(probs, dtype=np.float64)
    d = np.asarray(labels, dtype=np.int64)
    alpha = _class_weights(d)
    pred = np.argmax(p, axis=1)
    beta = np.maximum(np.where((d == 1) & (pred == 0), gamma, 1.0), 1.0)
    g = np.zeros_like(p)
    idx = np.arange(d.size)
    g[idx, d] = -(alpha * beta) / np.maximum(p[idx, d], 1e-12)
    return g


# ---------------------------------------------------------------------------
# optimizer

class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    def __init__(self, params: list):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(params: list, grads: list, state: AdamState, step: int, cfg: TrainConfig,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One in-place Adam update at the staircase-decayed learning rate."""
    lr = cfg.lr(step)
    t = step + 1
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g
        m_hat = state.m[i] / (1.0 - beta1 ** t)
        v_hat = state.v[i] / (1.0 - beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# model shapes

def _init(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.uniform(-0.05, 0.05, size=shape)


def build_dia_model(t_max: int = 12, channels=(8, 8, 8), seed: int = 0) -> MicroModel:
    """Trace-refinement model: per-bit input [y_i, app_1..app_T] of
    length t_max+1, three width-3 conv layers, dense head to one logit."""
    rng = np.random.default_rng(seed)
    length = t_max + 1
    layers = []
    c_in = 1
    for c_out in channels:
        layers.append(Layer("conv1d", "relu", _init(rng, (3, c_in, c_out)), _init(rng, (c_out,))))
        c_in = c_out
    layers.append(Layer("dense", "linear", _init(rng, (length * c_in, 1)), _init(rng, (1,))))
    return MicroModel(name="dia", layers=layers)


def build_swa_model(w_d: int = 5, hidden: int = 8, seed: int = 0) -> MicroModel:
    """Window arbiter: sorted window metrics plus position in, a
    2-class terminate/continue distribution out."""
    rng = np.random.default_rng(seed)
    layers = [
        Layer("dense", "relu", _init(rng, (w_d + 1, hidden)), _init(rng, (hidden,))),
        Layer("dense", "softmax2", _init(rng, (hidden, 2)), _init(rng, (2,))),
    ]
    return MicroModel(name="swa", layers=layers)


def dia_apply(model: MicroModel, y: np.ndarray, trace: np.ndarray) -> np.ndarray:
    """Refined per-bit reliability from the channel values and the
    iteration trace (t_max rows).  Returns one value per bit, same sign
    convention as y."""
    y = np.asarray(y, dtype=np.float64)
    x = np.concatenate([y[:, None], trace.T], axis=1)[:, :, None]
    return forward(model, x).reshape(-1)


def model_flops(model: MicroModel, input_len: int = None) -> int:
    """Multiply-accumulate count for one input sample."""
    total = 0
    length = input_len
    for lay in model.layers:
        if lay.kind == "conv1d":
            if length is None:
                raise ValueError("conv model needs input_len")
            k, c_in, c_out = lay.w.shape
            total += length * k * c_in * c_out
        else:
            total += lay.w.shape[0] * lay.w.shape[1]
    return total


# ---------------------------------------------------------------------------
# weight file format (text, line oriented)

def save_model(model: MicroModel, fname) -> None:
    with open(fname, "wt", encoding="ascii") as f:
        f.write(f"micromodel v1 {model.name}\n")
        for lay in model.layers:
            shape = " ".join(str(s) for s in lay.w.shape)
            f.write(f"layer {lay.kind} {lay.activation} {shape}\n")
            vals = np.concatenate([lay.w.ravel(), lay.b.ravel()])
            for i in range(0, vals.size, 8):
                f.write(" ".join(f"{v:.17g}" for v in vals[i:i + 8]) + "\n")


def load_model(fname) -> MicroModel:
    with open(fname, "rt", encoding="ascii") as f:
        tokens = f.read().split("\n")
    if not tokens or tokens[0].split()[:2] != ["micromodel", "v1"]:
        raise ValueError("not a micromodel v1 file")
    name = tokens[0].split()[2] if len(tokens[0].split()) > 2 else "model"
    layers = []
    i = 1
    while i < len(tokens):
        line = tokens[i].split()
        i += 1
        if not line:
            continue
        if line[0] != "layer":
            raise ValueError(f"expected a layer line, got {tokens[i - 1]!r}")
        kind, act = line[1], line[2]
        shape = tuple(int(s) for s in line[3:])
        n_b = shape[-1]
        need = int(np.prod(shape)) + n_b
        vals: list = []
        while len(vals) < need and i < len(tokens):
            vals.extend(float(v) for v in tokens[i].split())
            i += 1
        if len(vals) != need:
            raise ValueError(f"layer {kind} expected {need} values, got {len(vals)}")
        w = np.array(vals[:need - n_b]).reshape(shape)
        b = np.array(vals[need - n_b:])
        layers.append(Layer(kind, act, w, b))
    return MicroModel(name=name, layers=layers)


# ---------------------------------------------------------------------------
# training loop and verification

def train(model: MicroModel, x_train, d_train, cfg: TrainConfig, loss: str,
          x_val=None, d_val=None, seed: int = 0, log_every: int = 500, log_fn=None) -> list:
    """Seeded minibatch training; ``loss`` is 'sigmoid_ce' (logit head)
    or 'weighted_ce' (2-class softmax head). Returns the logged history
    as (step, lr, train_loss, val_ce) tuples."""
    if loss not in ("sigmoid_ce", "weighted_ce"):
        raise ValueError(f"unknown loss {loss!r}")
    x_train = np.asarray(x_train, dtype=np.float64)
    d_train = np.asarray(d_train)
    if x_train.shape[0] == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    params = model.params()
    state = AdamState(params)
    n = x_train.shape[0]
    order = rng.permutation(n)
    pos = 0
    history = []
    for step in range(cfg.max_steps):
        if pos + cfg.batch > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos:pos + cfg.batch]
        pos += cfg.batch
        xb, db = x_train[idx], d_train[idx]
        if xb.ndim == 2 and model.layers[0].kind == "conv1d":
            xb = xb[:, :, None]
        caches: list = []
        out = forward(model, xb, caches)
        if loss == "sigmoid_ce":
            batch_loss = ce_from_logits(out, db)
            dout = ce_grad_from_logits(out, db.reshape(out.shape))
        else:
            batch_loss = weighted_ce_loss(out, db, cfg.gamma)
            dout = weighted_ce_grad(out, db, cfg.gamma)
        grads_pairs = backward(model, caches, dout)
        flat = [g for pair in grads_pairs for g in pair]
        adam_step(params, flat, state, step, cfg)
        if (step % log_every == 0) or step == cfg.max_steps - 1:
            val_ce = math.nan
            if x_val is not None and x_val.shape[0]:
                val_ce = evaluate_ce(model, x_val, d_val, loss)
            history.append((step, cfg.lr(step), batch_loss, val_ce))
            if log_fn:
                log_fn(f"step {step:6d} lr {cfg.lr(step):.6f} train {batch_loss:.5f} val_ce {val_ce:.5f}")
    return history


def evaluate_ce(model: MicroModel, x, d, loss: str, batch: int = 8192) -> float:
    """Mean (unweighted) cross entropy of the model on a dataset."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d)
    total = 0.0
    for lo in range(0, x.shape[0], batch):
        xb = x[lo:lo + batch]
        if xb.ndim == 2 and model.layers[0].kind == "conv1d":
            xb = xb[:, :, None]
        out = forward(model, xb)
        db = d[lo:lo + batch]
        if loss == "sigmoid_ce":
            total += ce_from_logits(out, db) * xb.shape[0]
        else:
            p = out[np.arange(db.size), db.astype(np.int64)]
            total += float(-np.log(np.maximum(p, 1e-12)).sum())
    return total / x.shape[0]


def gradient_check(model: MicroModel, x: np.ndarray, labels: np.ndarray, loss: str,
                   gamma: float = 10.0, n_points: int = 100, h: float = 1e-4,
                   seed: int = 0) -> float:
    """Max relative error between backprop and central differences over
    randomly sampled parameter coordinates.

    Coordinates whose +-h evaluations land on different sides of a relu
    kink (or flip a predicted class under the biased loss) are resampled:
    the loss is not differentiable there, so the difference quotient says
    nothing about the backward pass.
    """
    x = np.asarray(x, dtype=np.float64)

    def loss_and_pattern():
        caches: list = []
        out = forward(model, x, caches)
        pattern = tuple((z > 0).tobytes() for lay, (_, z, _, _) in zip(model.layers, caches)
                        if lay.activation == "relu")
        if loss == "sigmoid_ce":
            return ce_from_logits(out, labels), pattern
        pattern = pattern + (np.argmax(out, axis=1).tobytes(),)
        return weighted_ce_loss(out, labels, gamma), pattern

    caches: list = []
    out = forward(model, x, caches)
    if loss == "sigmoid_ce":
        dout = ce_grad_from_logits(out, np.asarray(labels, dtype=np.float64).reshape(out.shape))
    else:
        dout = weighted_ce_grad(out, labels, gamma)
    grads_pairs = backward(model, caches, dout)
    flat_params = model.params()
    flat_grads = [g for pair in grads_pairs for g in pair]

    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    attempts = 0
    while checked < n_points:
        attempts += 1
        if attempts > 50 * n_points:
            raise RuntimeError("could not find enough smooth coordinates for the check")
        pi = int(rng.integers(len(flat_params)))
        p = flat_params[pi]
        j = int(rng.integers(p.size))
        orig = p.flat[j]
        p.flat[j] = orig + h
        up, pat_up = loss_and_pattern()
        p.flat[j] = orig - h
        down, pat_down = loss_and_pattern()
        p.flat[j] = orig
        if pat_up != pat_down:
            continue
        fd = (up - down) / (2.0 * h)
        an = flat_grads[pi].flat[j]
        denom = max(abs(fd), abs(an), 1e-8)
        worst = max(worst, abs(fd - an) / denom)
        checked += 1
    return worst

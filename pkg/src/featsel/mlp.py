"""Feedforward ReLU/softmax classifier trained with full-batch Adam."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

FORMAT_NAME = "featsel-mlp"
FORMAT_VERSION = 1
DEFAULT_TOPOLOGY = (10, 18, 16, 8, 2)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class MlpArchitecture:
    layer_sizes: tuple[int, ...] = DEFAULT_TOPOLOGY

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if sizes[-1] != 2:
            raise ValueError("output layer must have 2 units")
        object.__setattr__(self, "layer_sizes", sizes)

    @classmethod
    def for_inputs(cls, n_inputs: int, hidden=(18, 16, 8)) -> "MlpArchitecture":
        return cls((n_inputs, *hidden, 2))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Per-layer weights (fan_in x fan_out) and biases."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for W, b in zip(self.weights, self.biases) for a in (W, b)])

    def equals(self, other: "MlpParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.flat_parts(), other.flat_parts()))

    def flat_parts(self):
        for W, b in zip(self.weights, self.biases):
            yield W
            yield b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0008
    weight_decay: float = 0.0003
    epochs: int = 10000
    seed: int = 7
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass(frozen=True)
class TrainReport:
    train_accuracy: float
    test_accuracy: float | None
    loss_curve: np.ndarray = field(repr=False)
    epochs: int = 0


def init(arch: MlpArchitecture, seed: int) -> MlpParams:
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        Ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MlpParams(tuple(Ws), tuple(bs))


def _as_batch(p: MlpParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != p.weights[0].shape[0]:
        raise ValueError(f"input has {X.shape[1]} features, network expects {p.weights[0].shape[0]}")
    return X


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cache(p: MlpParams, X: np.ndarray):
    acts, pre = [X], []
    a = X
    last = len(p.weights) - 1
    for l, (W, b) in enumerate(zip(p.weights, p.biases)):
        z = a @ W + b
        pre.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre


def logits(p: MlpParams, X) -> np.ndarray:
    X = _as_batch(p, X)
    return _forward_cache(p, X)[1][-1]


def forward(p: MlpParams, x) -> np.ndarray:
    """Class probabilities; a single vector gives a length-2 array, a batch gives (n, 2)."""
    single = np.ndim(x) == 1
    probs = softmax(logits(p, x))
    return probs[0] if single else probs


def predict(p: MlpParams, X) -> np.ndarray:
    # argmax returns the first maximum, so exact ties go to class 0.
    return np.argmax(logits(p, X), axis=1)


def evaluate(p: MlpParams, ds: Dataset) -> float:
    return float(np.mean(predict(p, ds.X) == ds.y))


def loss_and_grads(p: MlpParams, X: np.ndarray, y: np.ndarray, weight_decay: float = 0.0):
    """Mean cross-entropy plus ``weight_decay / 2 * sum ||W||^2`` and its gradients."""
    acts, pre = _forward_cache(p, X)
    z = pre[-1]
    zmax = z.max(axis=1, keepdims=True)
    log_norm = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    n = X.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, y]))
    loss += 0.5 * weight_decay * sum(float(np.sum(W * W)) for W in p.weights)

    delta = softmax(z)
    delta[rows, y] -= 1.0
    delta /= n
    gW, gb = [None] * len(p.weights), [None] * len(p.weights)
    for l in range(len(p.weights) - 1, -1, -1):
        gW[l] = acts[l].T @ delta + weight_decay * p.weights[l]
        gb[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ p.weights[l].T) * (pre[l - 1] > 0)
    return loss, gW, gb


def train(
    train_ds: Dataset,
    test_ds: Dataset | None = None,
    arch: MlpArchitecture | None = None,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[MlpParams, TrainReport]:
    if arch is None:
        arch = MlpArchitecture.for_inputs(train_ds.n_features)
    if train_ds.n_features != arch.n_inputs:
        raise ValueError(f"dataset has {train_ds.n_features} features, architecture expects {arch.n_inputs}")
    p0 = init(arch, cfg.seed)
    Ws = [W.copy() for W in p0.weights]
    bs = [b.copy() for b in p0.biases]
    params = Ws + bs
    m = [np.zeros_like(a) for a in params]
    v = [np.zeros_like(a) for a in params]
    X, y = train_ds.X, train_ds.y
    b1, b2 = cfg.beta1, cfg.beta2
    losses = np.empty(cfg.epochs)
    for t in range(1, cfg.epochs + 1):
        loss, gW, gb = loss_and_grads(MlpParams(tuple(Ws), tuple(bs)), X, y, cfg.weight_decay)
        if not np.isfinite(loss):
            raise TrainingDiverged(t)
        losses[t - 1] = loss
        step = cfg.learning_rate * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
        for a, g, ma, va in zip(params, gW + gb, m, v):
            ma *= b1
            ma += (1 - b1) * g
            va *= b2
            va += (1 - b2) * (g * g)
            # eps is applied to the bias-corrected second moment, as in the usual formulation.
            a -= step * ma / (np.sqrt(va) + cfg.eps * np.sqrt(1 - b2 ** t))
    params_out = MlpParams(tuple(W.copy() for W in Ws), tuple(b.copy() for b in bs))
    for a in params_out.flat_parts():
        a.setflags(write=False)
    report = TrainReport(
        train_accuracy=evaluate(params_out, train_ds),
        test_accuracy=None if test_ds is None else evaluate(params_out, test_ds),
        loss_curve=losses,
        epochs=cfg.epochs,
    )
    return params_out, report


def _relu_pattern(p: MlpParams, X: np.ndarray) -> list[np.ndarray]:
    return [z > 0 for z in _forward_cache(p, X)[1][:-1]]


def gradient_check(
    p: MlpParams,
    X,
    y,
    weight_decay: float = 0.0,
    n_samples: int = 50,
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Largest relative gap between backprop and central differences.

    Parameters whose +/-h perturbation changes any ReLU on/off state are
    skipped and replaced by another draw.
    """
    X = _as_batch(p, X)
    y = np.asarray(y, dtype=np.int64)
    _, gW, gb = loss_and_grads(p, X, y, weight_decay)
    arrays = [a.copy() for a in p.flat_parts()]
    grads = [g for pair in zip(gW, gb) for g in pair]
    sizes = np.array([a.size for a in arrays])
    total = int(sizes.sum())
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    base_pattern = _relu_pattern(p, X)

    def rebuild():
        return MlpParams(tuple(arrays[0::2]), tuple(arrays[1::2]))

    rng = np.random.default_rng(seed)
    worst, checked = 0.0, 0
    for flat_idx in rng.permutation(total):
        if checked >= n_samples:
            break
        k = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        a = arrays[k].reshape(-1)
        i = flat_idx - offsets[k]
        orig = a[i]
        a[i] = orig + h
        plus = rebuild()
        kinked = any(not np.array_equal(s, t) for s, t in zip(base_pattern, _relu_pattern(plus, X)))
        f_plus = loss_and_grads(plus, X, y, weight_decay)[0]
        a[i] = orig - h
        minus = rebuild()
        kinked = kinked or any(
            not np.array_equal(s, t) for s, t in zip(base_pattern, _relu_pattern(minus, X))
        )
        f_minus = loss_and_grads(minus, X, y, weight_decay)[0]
        a[i] = orig
        if kinked:
            continue
        g_num = (f_plus - f_minus) / (2 * h)
        g_ana = grads[k].reshape(-1)[i]
        rel = abs(g_ana - g_num) / max(abs(g_ana), abs(g_num), 1e-8)
        worst = max(worst, rel)
        checked += 1
    if checked < n_samples:
        raise RuntimeError(f"only {checked} kink-free parameters available for checking")
    return float(worst)


def to_json(p: MlpParams) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layer_sizes": list(p.layer_sizes),
        "layers": [
            {"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
            for W, b in zip(p.weights, p.biases)
        ],
    }
    return json.dumps(doc)


def from_json(text: str) -> MlpParams:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
        raise ValueError("not a featsel-mlp v1 document")
    Ws, bs = [], []
    for layer in doc["layers"]:
        Ws.append(np.array(layer["weights"], dtype=np.float64).reshape(layer["shape"]))
        bs.append(np.array(layer["bias"], dtype=np.float64))
    p = MlpParams(tuple(Ws), tuple(bs))
    if list(p.layer_sizes) != doc["layer_sizes"]:
        raise ValueError("layer shapes disagree with header")
    return p

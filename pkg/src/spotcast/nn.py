"""Feed-forward venue classifier: ReLU hidden layers, softmax output,
mean cross-entropy loss, mini-batch Adam."""

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

FORMAT = "spotcast.mlp"
FORMAT_VERSION = 1


class DimMismatch(ValueError):
    pass


class DegenerateDataset(ValueError):
    pass


@dataclass
class MlpConfig:
    hidden_sizes: Sequence[int] = (900,)
    max_epochs: int = 300
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    seed: int = 7
    tol: float = 1e-6
    patience: int = 10

    def to_dict(self):
        d = dict(self.__dict__)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d


@dataclass
class MlpModel:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    config: MlpConfig = field(default_factory=MlpConfig)
    labels: List[str] = field(default_factory=list)
    loss_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise DimMismatch("layer dimensions do not chain")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def label_map(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def predict_proba(self, X) -> np.ndarray:
        return forward(self, X)

    def predict_top(self, x):
        return predict_top(self, x)

    def save(self, path):
        doc = {"format": FORMAT, "version": FORMAT_VERSION, "kind": "NeuralNetwork",
               "config": self.config.to_dict(), "labels": self.labels,
               "weights": [w.tolist() for w in self.weights],
               "biases": [b.tolist() for b in self.biases],
               "loss_history": self.loss_history}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != FORMAT or doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path} is not a version {FORMAT_VERSION} MLP model")
        cfg = MlpConfig(**doc["config"])
        return cls([np.array(w, dtype=float) for w in doc["weights"]],
                   [np.array(b, dtype=float) for b in doc["biases"]],
                   cfg, doc["labels"], doc.get("loss_history", []))


def init_model(input_dim: int, hidden_sizes: Sequence[int], n_classes: int, seed: int = 7,
               labels: Optional[Sequence[str]] = None) -> MlpModel:
    """He-uniform weights (bound ``sqrt(6 / fan_in)``) and zero biases."""
    dims = [input_dim, *hidden_sizes, n_classes]
    if min(dims) < 1:
        raise ValueError("all layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    labels = list(labels) if labels is not None else [str(i) for i in range(n_classes)]
    cfg = MlpConfig(hidden_sizes=tuple(hidden_sizes), seed=seed)
    return MlpModel(weights, biases, cfg, labels)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activations(m, X):
    acts = [X]
    for W, b in zip(m.weights[:-1], m.biases[:-1]):
        acts.append(np.maximum(acts[-1] @ W + b, 0.0))
    logits = acts[-1] @ m.weights[-1] + m.biases[-1]
    return acts, logits


def logits(m: MlpModel, X) -> np.ndarray:
    return _activations(m, np.asarray(X, dtype=float))[1]


def forward(m: MlpModel, x) -> np.ndarray:
    """Class probabilities for one sample or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.input_dim:
        raise DimMismatch(f"expected {m.input_dim} features, got {x.shape[-1]}")
    return softmax(logits(m, x))


def loss_and_grads(m: MlpModel, X, y):
    """Mean cross-entropy over the batch and its gradients with respect to
    every weight and bias, by back-propagation."""
    acts, z = _activations(m, X)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -logp[np.arange(n), y].mean()
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gW, gb = [], []
    for layer in range(len(m.weights) - 1, -1, -1):
        gW.append(acts[layer].T @ delta)
        gb.append(delta.sum(axis=0))
        if layer:
            delta = (delta @ m.weights[layer].T) * (acts[layer] > 0)
    return loss, gW[::-1], gb[::-1]


class _Adam:
    """Adam over one flat parameter buffer, updated in place."""

    def __init__(self, size, cfg):
        self.cfg = cfg
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.tmp = np.empty(size)

    def step(self, p, g):
        c = self.cfg
        self.t += 1
        corr1 = 1 - c.beta1 ** self.t
        corr2 = 1 - c.beta2 ** self.t
        m, v, tmp = self.m, self.v, self.tmp
        m *= c.beta1
        np.multiply(g, 1 - c.beta1, out=tmp)
        m += tmp
        v *= c.beta2
        np.multiply(g, g, out=tmp)
        tmp *= 1 - c.beta2
        v += tmp
        # lr * (m / corr1) / (sqrt(v / corr2) + eps)
        np.sqrt(v, out=tmp)
        tmp *= 1.0 / np.sqrt(corr2)
        tmp += c.eps
        np.divide(m, tmp, out=tmp)
        tmp *= c.lr / corr1
        p -= tmp


def _flatten(m):
    """Move every weight and bias into one contiguous buffer and make the
    model's arrays views of it."""
    arrays = [*m.weights, *m.biases]
    flat = np.concatenate([a.ravel() for a in arrays]).astype(float)
    views, start = [], 0
    for a in arrays:
        views.append(flat[start:start + a.size].reshape(a.shape))
        start += a.size
    n = len(m.weights)
    m.weights, m.biases = views[:n], views[n:]
    return flat


def train(m: MlpModel, X, y, cfg: Optional[MlpConfig] = None) -> MlpModel:
    """Fit ``m`` in place on features ``X`` and string labels ``y``.

    Each epoch shuffles the samples with the config seed and takes one Adam
    step per mini-batch. Training stops after ``max_epochs`` or once the
    epoch loss has improved by less than ``tol`` for ``patience`` epochs in
    a row. The per-epoch mean loss is appended to ``m.loss_history``.
    """
    cfg = cfg or m.config
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.input_dim:
        raise DimMismatch(f"expected (n, {m.input_dim}) features, got {X.shape}")
    index = m.label_map
    unknown = set(y) - set(index)
    if unknown:
        raise ValueError(f"labels outside the model's label map: {sorted(unknown)}")
    if len(set(y)) < 2:
        raise DegenerateDataset("training needs at least two classes")
    yi = np.array([index[lab] for lab in y])
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")

    flat = _flatten(m)
    opt = _Adam(flat.size, cfg)
    rng = np.random.default_rng(cfg.seed)
    n = len(yi)
    best = np.inf
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, gW, gb = loss_and_grads(m, X[batch], yi[batch])
            total += loss * len(batch)
            opt.step(flat, np.concatenate([g.ravel() for g in (*gW, *gb)]))
        epoch_loss = total / n
        m.loss_history.append(epoch_loss)
        if not np.all(np.isfinite(flat)):
            raise FloatingPointError(f"parameters diverged at epoch {epoch}")
        if best - epoch_loss < cfg.tol:
            stale += 1
            if stale >= cfg.patience:
                log.debug("early stop after %d epochs", epoch + 1)
                break
        else:
            stale = 0
        best = min(best, epoch_loss)
    m.config = cfg
    return m


def fit(X, y, cfg: Optional[MlpConfig] = None, labels: Optional[Sequence[str]] = None) -> MlpModel:
    """Initialise a model sized for ``X``/``y`` and train it."""
    cfg = cfg or MlpConfig()
    labels = list(labels) if labels is not None else sorted(set(y))
    m = init_model(np.asarray(X).shape[1], cfg.hidden_sizes, len(labels), cfg.seed, labels)
    return train(m, X, y, cfg)


def predict_top(m, x):
    """Most probable label and its probability; ties go to the lower index."""
    p = np.asarray(m.predict_proba(np.atleast_2d(np.asarray(x, dtype=float))))[0]
    i = int(np.argmax(p))
    return m.labels[i], float(p[i])


def gradient_check(m: MlpModel, X, y, epsilon: float = 1e-5, analytic=None) -> float:
    """Largest relative error between the back-propagated gradient and central
    finite differences, over every parameter.

    ``analytic`` may supply a precomputed ``(gW, gb)`` pair to check instead.
    Relative error is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    X = np.asarray(X, dtype=float)
    index = m.label_map
    yi = np.array([index[lab] if not isinstance(lab, (int, np.integer)) else lab for lab in y])
    if analytic is None:
        _, gW, gb = loss_and_grads(m, X, yi)
    else:
        gW, gb = analytic
    worst = 0.0
    for params, grads in ((m.weights, gW), (m.biases, gb)):
        for p, g in zip(params, grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + epsilon
                up = loss_and_grads(m, X, yi)[0]
                p[idx] = orig - epsilon
                down = loss_and_grads(m, X, yi)[0]
                p[idx] = orig
                num = (up - down) / (2 * epsilon)
                err = abs(g[idx] - num) / max(1e-8, abs(g[idx]) + abs(num))
                worst = max(worst, err)
    return worst

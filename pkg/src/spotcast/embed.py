"""Feature vectors for the venue classifier.

A post becomes ``[text | personality? | weekday one-hot | hour one-hot]``.
The text block is either a paragraph vector (PV-DBOW) or the mean of the
post's word vectors (skip-gram); both are trained together with negative
sampling by :func:`train_text_embeddings`.

Feature variants:

==  =======================  ===========
V1  paragraph vector         personality
V2  word-vector average      personality
V3  word-vector average      --
V4  paragraph vector         --
==  =======================  ===========
"""

import json
import logging
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .affect import EmptyCorpus, PersonalityVector, tokenize
from .clock import local_hour, local_weekday

log = logging.getLogger(__name__)

FORMAT = "spotcast.text-embedding"
FORMAT_VERSION = 1


class DimMismatch(ValueError):
    pass


class Variant(str, Enum):
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"
    V4 = "V4"

    @property
    def text_mode(self) -> str:
        return "document" if self in (Variant.V1, Variant.V4) else "word_average"

    @property
    def uses_personality(self) -> bool:
        return self in (Variant.V1, Variant.V2)


@dataclass(frozen=True)
class Layout:
    text_dim: int = 56
    personality_dim: int = 22
    weekday_dim: int = 7
    hour_dim: int = 24

    def for_variant(self, variant) -> "Layout":
        if Variant(variant).uses_personality:
            return self
        return Layout(self.text_dim, 0, self.weekday_dim, self.hour_dim)

    @property
    def total(self) -> int:
        return self.text_dim + self.personality_dim + self.weekday_dim + self.hour_dim

    def slices(self):
        bounds = np.cumsum([0, self.text_dim, self.personality_dim,
                            self.weekday_dim, self.hour_dim])
        names = ("text", "personality", "weekday", "hour")
        return {n: slice(int(a), int(b)) for n, a, b in zip(names, bounds[:-1], bounds[1:])}


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: Layout
    variant: Variant

    def __post_init__(self):
        if len(self.values) != self.layout.total:
            raise DimMismatch(f"{len(self.values)} values for a layout of {self.layout.total}")

    def blocks(self):
        """Split back into the input blocks; personality is returned on its
        original 0-100 scale."""
        out = {name: self.values[s] for name, s in self.layout.slices().items()}
        out["personality"] = out["personality"] * 100.0
        return out


# --------------------------------------------------------------------------
# text embeddings
# --------------------------------------------------------------------------

@dataclass
class TextEmbeddingModel:
    vocab: dict
    word_vectors: np.ndarray
    output_vectors: np.ndarray
    doc_vectors: np.ndarray
    config: dict
    loss_history: List[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.word_vectors.shape[1]

    def noise(self) -> np.ndarray:
        counts = np.asarray(self.config["counts"], dtype=float)
        p = counts ** 0.75
        return p / p.sum()

    def save(self, path):
        words = sorted(self.vocab, key=self.vocab.get)
        doc = {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "config": self.config,
            "vocab": words,
            "word_vectors": self.word_vectors.tolist(),
            "output_vectors": self.output_vectors.tolist(),
            "doc_vectors": self.doc_vectors.tolist(),
            "loss_history": self.loss_history,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "TextEmbeddingModel":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != FORMAT or doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path} is not a version {FORMAT_VERSION} embedding model")
        dim = doc["config"]["dim"]
        as_matrix = lambda rows: np.array(rows, dtype=float).reshape(-1, dim)
        return cls(vocab={w: i for i, w in enumerate(doc["vocab"])},
                   word_vectors=as_matrix(doc["word_vectors"]),
                   output_vectors=as_matrix(doc["output_vectors"]),
                   doc_vectors=as_matrix(doc["doc_vectors"]),
                   config=doc["config"],
                   loss_history=doc.get("loss_history", []))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sampler(noise):
    cdf = np.cumsum(noise)
    cdf /= cdf[-1]

    def draw(rng, shape):
        return np.minimum(np.searchsorted(cdf, rng.random(shape), side="right"), len(cdf) - 1)
    return draw


def _scatter_add(target, idx, rows):
    """``target[idx] += rows`` with repeated indices accumulating."""
    order = np.argsort(idx, kind="stable")
    idx = idx[order]
    uniq, starts = np.unique(idx, return_index=True)
    target[uniq] += np.add.reduceat(rows[order], starts, axis=0)


def _sgns_step(inputs, targets, negatives, out, lr, update_out=True):
    """One negative-sampling step for rows ``inputs`` (n x D) predicting
    ``targets`` (n,) against ``negatives`` (n x k). Updates ``out`` in place
    unless ``update_out`` is false and returns ``(input_step, loss)``."""
    pos = out[targets]
    neg = out[negatives]
    s_pos = np.einsum("nd,nd->n", pos, inputs)
    s_neg = np.einsum("nkd,nd->nk", neg, inputs)
    loss = -(_log_sigmoid(s_pos).sum() + _log_sigmoid(-s_neg).sum())
    g_pos = lr * (1.0 - _sigmoid(s_pos))
    g_neg = -lr * _sigmoid(s_neg)
    step = g_pos[:, None] * pos + np.einsum("nk,nkd->nd", g_neg, neg)
    if not update_out:
        return step, float(loss)
    _scatter_add(out, np.concatenate([targets, negatives.ravel()]),
                 np.concatenate([g_pos[:, None] * inputs,
                                 (g_neg[:, :, None] * inputs[:, None, :]).reshape(-1, inputs.shape[1])]))
    return step, float(loss)


def train_text_embeddings(corpus: Sequence[str], dim: int = 56, epochs: int = 100,
                          seed: int = 7, negative: int = 5, window: int = 3,
                          lr: float = 0.025, min_lr: float = 1e-4,
                          batch_docs: int = 16) -> TextEmbeddingModel:
    """Train paragraph vectors (PV-DBOW) and skip-gram word vectors with
    negative sampling, sharing one output matrix.

    Every epoch visits the documents in a seeded random order, ``batch_docs``
    at a time; within a batch every paragraph vector predicts each token of
    its document and each token predicts its neighbours within ``window``,
    with all updates of the batch computed from the same parameters. The
    learning rate decays linearly from ``lr`` to ``min_lr``. Results are
    bit-identical for a given corpus and seed.
    """
    if dim < 2 or epochs < 1 or batch_docs < 1:
        raise ValueError("need dim >= 2, epochs >= 1 and batch_docs >= 1")
    docs = [tokenize(text) for text in corpus]
    words = sorted({w for d in docs for w in d})
    if not words:
        raise EmptyCorpus("corpus has no tokens")
    vocab = {w: i for i, w in enumerate(words)}
    ids = [np.array([vocab[w] for w in d], dtype=np.int64) for d in docs]
    counts = np.bincount(np.concatenate(ids), minlength=len(words))

    rng = np.random.default_rng(seed)
    wv = (rng.random((len(words), dim)) - 0.5) / dim
    dv = (rng.random((len(docs), dim)) - 0.5) / dim
    out = np.zeros((len(words), dim))
    config = dict(dim=dim, epochs=epochs, seed=seed, negative=negative, window=window,
                  lr=lr, min_lr=min_lr, batch_docs=batch_docs, counts=counts.tolist())
    model = TextEmbeddingModel(vocab, wv, out, dv, config)
    draw = _sampler(model.noise())

    owner = [np.full(len(t), d, dtype=np.int64) for d, t in enumerate(ids)]
    pairs = []
    for t in ids:
        centre, context = [t[:0]], [t[:0]]
        for off in range(1, window + 1):
            centre += [t[:-off], t[off:]]
            context += [t[off:], t[:-off]]
        pairs.append((np.concatenate(centre), np.concatenate(context)))

    batches_per_epoch = -(-len(docs) // batch_docs)
    total = epochs * batches_per_epoch
    step = 0
    for epoch in range(epochs):
        epoch_loss = 0.0
        order = rng.permutation(len(docs))
        for b in range(batches_per_epoch):
            batch = order[b * batch_docs:(b + 1) * batch_docs]
            alpha = max(min_lr, lr - (lr - min_lr) * step / total)
            step += 1
            t = np.concatenate([ids[d] for d in batch])
            if len(t) == 0:
                continue
            who = np.concatenate([owner[d] for d in batch])
            delta, loss = _sgns_step(dv[who], t, draw(rng, (len(t), negative)), out, alpha)
            _scatter_add(dv, who, delta)
            epoch_loss += loss

            c = np.concatenate([pairs[d][0] for d in batch])
            if len(c):
                o = np.concatenate([pairs[d][1] for d in batch])
                delta, loss = _sgns_step(wv[c], o, draw(rng, (len(c), negative)), out, alpha)
                _scatter_add(wv, c, delta)
                epoch_loss += loss
        model.loss_history.append(epoch_loss)
        log.debug("embedding epoch %d loss %.4f", epoch, epoch_loss)
    return model


def embed_text(model: TextEmbeddingModel, text: str, mode: str = "document",
               steps: int = 20, lr: float = 0.1) -> np.ndarray:
    """Embed ``text`` with a trained model.

    ``document`` infers a fresh paragraph vector with ``steps`` gradient
    steps against the frozen output matrix, seeded by the model seed and a
    checksum of the text. ``word_average`` averages the word vectors of the
    in-vocabulary tokens. Both return zeros when no token is known.
    """
    tokens = [model.vocab[w] for w in tokenize(text) if w in model.vocab]
    if not tokens:
        return np.zeros(model.dim)
    t = np.array(tokens, dtype=np.int64)
    if mode == "word_average":
        return model.word_vectors[t].mean(axis=0)
    if mode != "document":
        raise ValueError(f"unknown embedding mode {mode!r}")

    rng = np.random.default_rng([model.config["seed"], zlib.crc32(text.encode("utf-8"))])
    v = (rng.random(model.dim) - 0.5) / model.dim
    draw = _sampler(model.noise())
    k = model.config["negative"]
    min_lr = model.config["min_lr"]
    for i in range(steps):
        alpha = max(min_lr, lr - (lr - min_lr) * i / steps)
        neg = draw(rng, (len(t), k))
        delta, _ = _sgns_step(np.broadcast_to(v, (len(t), model.dim)), t, neg,
                              model.output_vectors, alpha, update_out=False)
        v = v + delta.sum(axis=0)
    return v


# --------------------------------------------------------------------------
# time encodings and assembly
# --------------------------------------------------------------------------

def onehot_weekday(ts: int, lon: Optional[float] = None) -> np.ndarray:
    v = np.zeros(7)
    v[local_weekday(ts, lon)] = 1.0
    return v


def onehot_hour(ts: int, lon: Optional[float] = None) -> np.ndarray:
    v = np.zeros(24)
    v[local_hour(ts, lon)] = 1.0
    return v


def assemble_features(variant, text_vec, personality: Optional[PersonalityVector],
                      wk, hr, layout: Layout = Layout()) -> FeatureVector:
    variant = Variant(variant)
    layout = layout.for_variant(variant)
    text_vec = np.asarray(text_vec, dtype=float)
    wk = np.asarray(wk, dtype=float)
    hr = np.asarray(hr, dtype=float)
    if len(text_vec) != layout.text_dim:
        raise DimMismatch(f"text block has {len(text_vec)} dims, layout wants {layout.text_dim}")
    if len(wk) != layout.weekday_dim or len(hr) != layout.hour_dim:
        raise DimMismatch("weekday/hour blocks must have 7 and 24 components")
    parts = [text_vec]
    if variant.uses_personality:
        if personality is None:
            raise DimMismatch(f"{variant.value} needs a personality vector")
        p = personality.as_array() if isinstance(personality, PersonalityVector) \
            else np.asarray(personality, dtype=float)
        if len(p) != layout.personality_dim:
            raise DimMismatch(f"personality has {len(p)} dims, layout wants {layout.personality_dim}")
        parts.append(p / 100.0)
    parts += [wk, hr]
    values = np.concatenate(parts)
    if not np.all(np.isfinite(values)):
        raise ValueError("feature vector has non-finite components")
    return FeatureVector(values, layout, variant)

"""Comparison classifiers: Gaussian naive Bayes, L2-regularised multinomial
logistic regression and a CART decision tree.

They share the classifier surface of :class:`spotcast.nn.MlpModel`:
``labels``, ``predict_proba(X)`` and ``predict_top(x)``.
"""

import json
from typing import Optional

import numpy as np

from .nn import DegenerateDataset, predict_top, softmax

FORMAT = "spotcast.baseline"
FORMAT_VERSION = 1


def _prepare(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    labels = sorted(set(y))
    if len(labels) < 2:
        raise DegenerateDataset("training needs at least two classes")
    index = {lab: i for i, lab in enumerate(labels)}
    return X, np.array([index[lab] for lab in y]), labels


class _Baseline:
    kind = ""
    labels: list

    def predict_top(self, x):
        return predict_top(self, x)

    def predict(self, X):
        p = self.predict_proba(X)
        return [self.labels[i] for i in p.argmax(axis=1)]

    def _state(self) -> dict:
        raise NotImplementedError

    def save(self, path):
        doc = {"format": FORMAT, "version": FORMAT_VERSION, "kind": self.kind,
               "labels": self.labels, "state": self._state()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)


class GaussianNB(_Baseline):
    kind = "GaussianNB"

    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor
        self.fitted = False

    def fit(self, X, y):
        X, yi, self.labels = _prepare(X, y)
        k = len(self.labels)
        self.priors = np.bincount(yi, minlength=k) / len(yi)
        self.means = np.array([X[yi == c].mean(axis=0) for c in range(k)])
        self.vars = np.array([X[yi == c].var(axis=0) for c in range(k)])
        self.vars = np.maximum(self.vars, self.var_floor)
        self.fitted = True
        return self

    def joint_log_likelihood(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ll = -0.5 * (np.log(2 * np.pi * self.vars)[None, :, :]
                     + (X[:, None, :] - self.means[None, :, :]) ** 2 / self.vars[None, :, :])
        with np.errstate(divide="ignore"):
            return np.log(self.priors)[None, :] + ll.sum(axis=2)

    def predict_proba(self, X):
        if not self.fitted:
            raise RuntimeError("model is not fitted")
        return softmax(self.joint_log_likelihood(X))

    def _state(self):
        return {"var_floor": self.var_floor, "priors": self.priors.tolist(),
                "means": self.means.tolist(), "vars": self.vars.tolist()}


class LogisticRegression(_Baseline):
    """Multinomial logistic regression minimising
    ``mean cross-entropy + l2 / (2 n) * ||W||^2`` (bias unpenalised) by
    full-batch gradient descent.

    Without an explicit ``lr`` the step is ``1 / L`` with ``L`` the gradient's
    Lipschitz bound ``||X||_2^2 / (2 n) + l2 / n``.
    """

    kind = "LogisticRegression"

    def __init__(self, l2: float = 1.0, lr: Optional[float] = None, max_iter: int = 1000,
                 tol: float = 1e-6):
        if l2 < 0:
            raise ValueError("l2 must be >= 0")
        self.l2 = l2
        self.lr = lr
        self.max_iter = max_iter
        self.tol = tol
        self.fitted = False

    def fit(self, X, y):
        X, yi, self.labels = _prepare(X, y)
        n, d = X.shape
        k = len(self.labels)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), yi] = 1.0
        W = np.zeros((d, k))
        b = np.zeros(k)
        lr = self.lr
        if lr is None:
            # the intercept acts as a constant feature of value 1
            spectral = np.linalg.norm(np.hstack([X, np.ones((n, 1))]), 2) ** 2
            lr = 1.0 / (spectral / (2 * n) + self.l2 / n)
        self.n_iter = self.max_iter
        for it in range(self.max_iter):
            err = (softmax(X @ W + b) - onehot) / n
            gW = X.T @ err + (self.l2 / n) * W
            gb = err.sum(axis=0)
            if np.sqrt((gW ** 2).sum() + (gb ** 2).sum()) < self.tol:
                self.n_iter = it
                break
            W -= lr * gW
            b -= lr * gb
        self.coef, self.intercept = W, b
        self.fitted = True
        return self

    def predict_proba(self, X):
        if not self.fitted:
            raise RuntimeError("model is not fitted")
        return softmax(np.atleast_2d(np.asarray(X, dtype=float)) @ self.coef + self.intercept)

    def _state(self):
        return {"l2": self.l2, "coef": self.coef.tolist(), "intercept": self.intercept.tolist()}


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float((p * p).sum())


def best_split(X, yi, k, min_leaf):
    """Exhaustive CART split search.

    Returns ``(feature, threshold, weighted_child_gini)`` for the split with
    the lowest weighted Gini impurity among those leaving at least
    ``min_leaf`` samples on both sides, or ``None``. Thresholds are midpoints
    between consecutive distinct values; ties go to the lower feature and
    then the lower threshold.
    """
    n, d = X.shape
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot = np.zeros((n, k))
        onehot[np.arange(n), yi[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = onehot.sum(axis=0) - left
        nl = np.arange(1, n, dtype=float)
        nr = n - nl
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        score = (nl * gl + nr * gr) / n
        score[~valid] = np.inf
        i = int(np.argmin(score))
        if best is None or score[i] < best[2] - 1e-12:
            thr = (xs[i] + xs[i + 1]) / 2
            if not xs[i] <= thr < xs[i + 1]:
                thr = xs[i]
            best = (f, float(thr), float(score[i]))
    return best


class DecisionTree(_Baseline):
    """CART with Gini impurity; every leaf keeps at least ``min_leaf``
    training samples and stores its class distribution."""

    kind = "DecisionTree"

    def __init__(self, min_leaf: int = 2, max_depth: Optional[int] = None):
        if min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.fitted = False

    def fit(self, X, y):
        X, yi, self.labels = _prepare(X, y)
        self.k = len(self.labels)
        self.root = self._grow(X, yi, 0)
        self.fitted = True
        return self

    def _grow(self, X, yi, depth):
        counts = np.bincount(yi, minlength=self.k).astype(float)
        leaf = {"dist": (counts / counts.sum()).tolist(), "n": int(len(yi))}
        if (gini(counts) == 0.0 or len(yi) < 2 * self.min_leaf
                or (self.max_depth is not None and depth >= self.max_depth)):
            return leaf
        split = best_split(X, yi, self.k, self.min_leaf)
        if split is None:
            return leaf
        f, thr, _ = split
        mask = X[:, f] <= thr
        return {"feature": f, "threshold": thr,
                "left": self._grow(X[mask], yi[mask], depth + 1),
                "right": self._grow(X[~mask], yi[~mask], depth + 1)}

    def leaves(self, node=None):
        node = self.root if node is None else node
        if "dist" in node:
            return [node]
        return self.leaves(node["left"]) + self.leaves(node["right"])

    def predict_proba(self, X):
        if not self.fitted:
            raise RuntimeError("model is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((len(X), self.k))
        for r, x in enumerate(X):
            node = self.root
            while "dist" not in node:
                node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
            out[r] = node["dist"]
        return out

    def _state(self):
        return {"min_leaf": self.min_leaf, "root": self.root}


def train_nb(X, y) -> GaussianNB:
    return GaussianNB().fit(X, y)


def train_logreg(X, y, l2: float = 1.0) -> LogisticRegression:
    return LogisticRegression(l2=l2).fit(X, y)


def train_tree(X, y, min_leaf: int = 2) -> DecisionTree:
    return DecisionTree(min_leaf=min_leaf).fit(X, y)


def load_baseline(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT or doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path} is not a version {FORMAT_VERSION} baseline model")
    st = doc["state"]
    if doc["kind"] == "GaussianNB":
        m = GaussianNB(st["var_floor"])
        m.priors, m.means, m.vars = (np.array(st[key]) for key in ("priors", "means", "vars"))
    elif doc["kind"] == "LogisticRegression":
        m = LogisticRegression(st["l2"])
        m.coef, m.intercept = np.array(st["coef"]), np.array(st["intercept"])
    elif doc["kind"] == "DecisionTree":
        m = DecisionTree(st["min_leaf"])
        m.root = st["root"]
        m.k = len(doc["labels"])
    else:
        raise ValueError(f"unknown baseline kind {doc['kind']!r}")
    m.labels = doc["labels"]
    m.fitted = True
    return m

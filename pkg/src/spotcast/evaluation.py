"""Evaluation protocol and metrics.

Forecasts are scored per cluster and averaged: first over the clusters of a
community kind, then over community kinds.

* mean classification accuracy: share of a cluster's forecasts whose top
  label is the true venue category;
* mean average precision: mean over a cluster's forecasts of
  ``PR * Rel``, with ``Rel = 1`` when the true label is in the ranked list
  and ``PR = 1 / rank`` of the true label;
* mean average recall: the same quantity averaged first within each true
  class of the cluster and then over those classes.
"""

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Hashable, Optional, Sequence, Tuple

import numpy as np

from .clock import local_hour, local_weekday


class EmptyPredictions(ValueError):
    pass


class InsufficientEligibleUsers(ValueError):
    pass


class TooFewSamples(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    """One forecast for one user, seen from one (community, cluster)."""

    user: str
    community: str
    cluster: str
    ranked: Tuple[str, ...]
    truth: str
    timestamp: int = 0
    lon: Optional[float] = None

    @property
    def predicted(self) -> Optional[str]:
        return self.ranked[0] if self.ranked else None


def _nested_mean(per_cluster: Dict[Tuple[str, str], float]) -> float:
    by_comm = defaultdict(list)
    for (comm, _), v in sorted(per_cluster.items()):
        by_comm[comm].append(v)
    return math.fsum(math.fsum(vs) / len(vs) for vs in by_comm.values()) / len(by_comm)


def _group(records):
    groups = defaultdict(list)
    for r in records:
        groups[(r.community, r.cluster)].append(r)
    return groups


@dataclass
class Score:
    value: float
    per_cluster: Dict[Tuple[str, str], float]


def mean_classification_accuracy(records: Sequence[Record]) -> Score:
    if not records:
        raise EmptyPredictions("no forecasts to score")
    per_cluster = {key: sum(r.predicted == r.truth for r in rs) / len(rs)
                   for key, rs in _group(records).items()}
    return Score(_nested_mean(per_cluster), per_cluster)


def precision_at_truth(r: Record, top_k: Optional[int] = None) -> float:
    ranked = r.ranked if top_k is None else r.ranked[:top_k]
    if r.truth not in ranked:
        return 0.0
    return 1.0 / (ranked.index(r.truth) + 1)


@dataclass
class PrecisionRecall:
    precision: float
    recall: float
    per_cluster: Dict[Tuple[str, str], Tuple[float, float]]


def mean_avg_precision_recall(records: Sequence[Record],
                              top_k: Optional[int] = None) -> PrecisionRecall:
    if not records:
        raise EmptyPredictions("no forecasts to score")
    per_cluster = {}
    for key, rs in _group(records).items():
        pr = [precision_at_truth(r, top_k) for r in rs]
        precision = math.fsum(pr) / len(rs)
        by_class = defaultdict(list)
        for r, v in zip(rs, pr):
            by_class[r.truth].append(v)
        recall = math.fsum(math.fsum(v) / len(v) for v in by_class.values()) / len(by_class)
        per_cluster[key] = (precision, recall)
    return PrecisionRecall(_nested_mean({k: v[0] for k, v in per_cluster.items()}),
                           _nested_mean({k: v[1] for k, v in per_cluster.items()}),
                           per_cluster)


def f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def split_train_test(history: Dict[Hashable, Sequence[int]], ratio: float = 0.8,
                     min_history_days: float = 30, seed: int = 7):
    """Split users so that ``1 - ratio`` of them are held out for testing,
    drawing the test users only among those whose posts span at least
    ``min_history_days`` days. ``history`` maps user to post timestamps."""
    users = sorted(history)
    n_test = int(round(len(users) * (1 - ratio)))
    eligible = [u for u in users
                if history[u] and (max(history[u]) - min(history[u])) >= min_history_days * 86400]
    if not eligible or len(eligible) < n_test:
        raise InsufficientEligibleUsers(
            f"{len(eligible)} users have {min_history_days} days of history, {n_test} needed")
    rng = np.random.default_rng(seed)
    test = {eligible[i] for i in rng.permutation(len(eligible))[:n_test]}
    return [u for u in users if u not in test], sorted(test)


def kfold(n: int, k: int = 10, seed: int = 7):
    """``k`` (train, validation) index pairs over ``n`` samples; validation
    folds are disjoint, cover every index once and differ in size by at most
    one (the larger folds come last)."""
    if n < k or k < 2:
        raise TooFewSamples(f"cannot make {k} folds from {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    sizes = [n // k + (i >= k - n % k) for i in range(k)]
    folds, start = [], 0
    for size in sizes:
        val = np.sort(order[start:start + size])
        train = np.sort(np.concatenate([order[:start], order[start + size:]]))
        folds.append((train, val))
        start += size
    return folds


def weekly_hourly_report(records: Sequence[Record]) -> Dict[str, dict]:
    """Mean classification accuracy bucketed by local weekday and local hour
    for every community kind; buckets without forecasts are ``None``."""
    by_kind = defaultdict(list)
    for r in records:
        by_kind[r.community].append(r)
    out = {}
    for kind, rs in sorted(by_kind.items()):
        weekly = [[] for _ in range(7)]
        hourly = [[] for _ in range(24)]
        for r in rs:
            weekly[local_weekday(r.timestamp, r.lon)].append(r)
            hourly[local_hour(r.timestamp, r.lon)].append(r)
        out[kind] = {
            "weekly": [mean_classification_accuracy(b).value if b else None for b in weekly],
            "hourly": [mean_classification_accuracy(b).value if b else None for b in hourly],
        }
    return out


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

ALGORITHMS = ("Tree", "SVM", "Random Forest", "Neural Network", "Naive Bayes",
              "Logistic Regression")
NOT_IMPLEMENTED = ("SVM", "Random Forest")
VARIANTS = ("V1", "V2", "V3", "V4")


def _round(x, nd=6):
    if x is None:
        return None
    if isinstance(x, float):
        return round(x, nd)
    if isinstance(x, (list, tuple)):
        return [_round(v, nd) for v in x]
    if isinstance(x, dict):
        return {k: _round(v, nd) for k, v in x.items()}
    return x


@dataclass
class EvalReport:
    per_algorithm: Dict[str, Dict[str, Optional[Tuple[float, float]]]] = field(default_factory=dict)
    per_community: Dict[Tuple[str, str], Tuple[float, float, float]] = field(default_factory=dict)
    weekly_hourly: Dict[str, dict] = field(default_factory=dict)
    mca: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def overall(self) -> Dict[str, Optional[Tuple[float, float]]]:
        out = {}
        for v in VARIANTS:
            cells = [self.per_algorithm.get(a, {}).get(v) for a in ALGORITHMS]
            cells = [c for c in cells if c is not None]
            out[v] = (float(np.mean([c[0] for c in cells])),
                      float(np.mean([c[1] for c in cells]))) if cells else None
        return out

    def to_dict(self) -> dict:
        return _round({
            "table2": {a: {v: (list(self.per_algorithm.get(a, {}).get(v))
                               if self.per_algorithm.get(a, {}).get(v) is not None else None)
                           for v in VARIANTS} for a in ALGORITHMS},
            "per_community": [{"community": k[0], "label": k[1], "f1": f, "precision": p,
                               "recall": r} for k, (f, p, r) in sorted(self.per_community.items())],
            "weekly_hourly": self.weekly_hourly,
            "mca": self.mca,
            "extra": self.extra,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        per_alg = {a: {v: (tuple(c) if c is not None else None) for v, c in cells.items()}
                   for a, cells in d["table2"].items()}
        per_comm = {(row["community"], row["label"]): (row["f1"], row["precision"], row["recall"])
                    for row in d["per_community"]}
        return cls(per_alg, per_comm, d["weekly_hourly"], d["mca"], d.get("extra", {}))

    def table2_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Algorithms"] + [f"Proposed@{i}_{m}" for i in range(1, 5)
                                     for m in ("Precision", "Recall")])
        rows = [(a, self.per_algorithm.get(a, {})) for a in ALGORITHMS]
        rows.append(("Overall", self.overall()))
        for name, cells in rows:
            line = [name]
            for v in VARIANTS:
                c = cells.get(v)
                line += (["n/a", "n/a"] if c is None else [f"{c[0]:.3f}", f"{c[1]:.3f}"])
            w.writerow(line)
        return buf.getvalue()

    def table3_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Community", "Label", "F1-Score", "Precision", "Recall"])
        for (comm, label), (f, p, r) in sorted(self.per_community.items()):
            w.writerow([comm, label, f"{f:.3f}", f"{p:.3f}", f"{r:.3f}"])
        if self.per_community:
            vals = np.array(list(self.per_community.values()))
            w.writerow(["Overall", ""] + [f"{m:.3f} ({s:.3f})"
                                          for m, s in zip(vals.mean(0), vals.std(0))])
        return buf.getvalue()

    def weekly_hourly_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["community", "bucket", "index", "mca"])
        for kind, d in sorted(self.weekly_hourly.items()):
            for bucket in ("weekly", "hourly"):
                for i, v in enumerate(d[bucket]):
                    w.writerow([kind, bucket, i, "" if v is None else f"{v:.6f}"])
        return buf.getvalue()

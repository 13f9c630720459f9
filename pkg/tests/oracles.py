"""Independent reference implementations used as test oracles.

Each one follows the textbook definition as directly as possible and shares
no code with the package.
"""

import itertools
import math
from collections import defaultdict

import numpy as np


def levenshtein_full_matrix(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[len(a)][len(b)]


def modularity_double_sum(nodes, edges, assignment):
    """Q = 1/(2m) * sum_uv [A_uv - k_u k_v / 2m] delta(c_u, c_v)."""
    idx = {n: i for i, n in enumerate(nodes)}
    A = np.zeros((len(nodes), len(nodes)))
    for (u, v), w in edges.items():
        A[idx[u], idx[v]] += w
        A[idx[v], idx[u]] += w
    k = A.sum(axis=1)
    two_m = A.sum()
    q = 0.0
    for u in nodes:
        for v in nodes:
            if assignment[u] == assignment[v]:
                q += A[idx[u], idx[v]] - k[idx[u]] * k[idx[v]] / two_m
    return q / two_m


def set_partitions(items):
    """Every partition of ``items`` as a list of blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def haversine_by_cosines(p, q, radius=6371000.0):
    lat1, lon1, lat2, lon2 = map(math.radians, (*p, *q))
    c = (math.sin(lat1) * math.sin(lat2)
         + math.cos(lat1) * math.cos(lat2) * math.cos(lon2 - lon1))
    return radius * math.acos(max(-1.0, min(1.0, c)))


def covisit_pairs(ts, radius_m, distance):
    """Brute force over every pair of check-ins of different users."""
    geo = [t for t in ts if t.geo is not None]
    counts = defaultdict(int)
    for a, b in itertools.combinations(geo, 2):
        if a.user_id != b.user_id and distance(a.geo, b.geo) <= radius_m:
            counts[tuple(sorted((a.user_id, b.user_id)))] += 1
    return dict(counts)


def mca_oracle(records):
    """Mean classification accuracy straight from its definition: average
    over communities of the average over their clusters of the share of
    correct top-1 forecasts."""
    comms = sorted({r.community for r in records})
    total = 0.0
    for c in comms:
        clusters = sorted({r.cluster for r in records if r.community == c})
        inner = 0.0
        for cl in clusters:
            rs = [r for r in records if r.community == c and r.cluster == cl]
            inner += sum(1 for r in rs if r.ranked and r.ranked[0] == r.truth) / len(rs)
        total += inner / len(clusters)
    return total / len(comms)


def map_oracle(records, top_k=None):
    """Mean average precision and recall straight from their definitions."""
    def pr_rel(r):
        lst = list(r.ranked if top_k is None else r.ranked[:top_k])
        if r.truth in lst:
            return 1.0 / (lst.index(r.truth) + 1), 1
        return 0.0, 0

    comms = sorted({r.community for r in records})
    p_total = r_total = 0.0
    for c in comms:
        clusters = sorted({r.cluster for r in records if r.community == c})
        p_inner = r_inner = 0.0
        for cl in clusters:
            rs = [r for r in records if r.community == c and r.cluster == cl]
            p_inner += sum(pr * rel for pr, rel in map(pr_rel, rs)) / len(rs)
            classes = sorted({r.truth for r in rs})
            per_class = []
            for k in classes:
                ks = [r for r in rs if r.truth == k]
                per_class.append(sum(pr * rel for pr, rel in map(pr_rel, ks)) / len(ks))
            r_inner += sum(per_class) / len(per_class)
        p_total += p_inner / len(clusters)
        r_total += r_inner / len(clusters)
    return p_total / len(comms), r_total / len(comms)


def gini_oracle(labels):
    n = len(labels)
    if n == 0:
        return 0.0
    return 1.0 - sum((labels.count(c) / n) ** 2 for c in set(labels))


def best_split_oracle(X, y, min_leaf):
    """Try every feature and every midpoint between distinct sorted values."""
    n, d = X.shape
    best = None
    for f in range(d):
        values = sorted(set(X[:, f]))
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            left = [y[i] for i in range(n) if X[i, f] <= thr]
            right = [y[i] for i in range(n) if X[i, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            score = (len(left) * gini_oracle(left) + len(right) * gini_oracle(right)) / n
            if best is None or score < best[2] - 1e-12:
                best = (f, thr, score)
    return best


def gaussian_nb_posterior(X, y, x, var_floor=1e-9):
    """Posterior class probabilities by Bayes' rule, computed per class with
    explicit Gaussian densities."""
    classes = sorted(set(y))
    joint = []
    for c in classes:
        rows = X[[i for i, lab in enumerate(y) if lab == c]]
        prior = len(rows) / len(y)
        like = 1.0
        for j in range(X.shape[1]):
            mu = rows[:, j].mean()
            var = max(rows[:, j].var(), var_floor)
            like *= math.exp(-(x[j] - mu) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
        joint.append(prior * like)
    total = sum(joint)
    return [j / total for j in joint]


def mlp_forward_unrolled(weights, biases, x):
    """Forward pass written out with explicit loops over units."""
    a = list(x)
    for layer, (W, b) in enumerate(zip(weights, biases)):
        z = []
        for j in range(W.shape[1]):
            s = b[j]
            for i in range(W.shape[0]):
                s += a[i] * W[i, j]
            z.append(s)
        if layer < len(weights) - 1:
            a = [max(0.0, v) for v in z]
        else:
            top = max(z)
            e = [math.exp(v - top) for v in z]
            a = [v / sum(e) for v in e]
    return a

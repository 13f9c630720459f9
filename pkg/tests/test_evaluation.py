import json
import random
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import map_oracle, mca_oracle
from spotcast.clock import local_weekday
from spotcast.evaluation import (EmptyPredictions, EvalReport, InsufficientEligibleUsers, Record,
                                 TooFewSamples, f1, kfold, mean_avg_precision_recall,
                                 mean_classification_accuracy, split_train_test,
                                 weekly_hourly_report)

LABELS = ["Food", "Shop", "Park", "Bar"]
DAY = 86400


def rec(user, comm, cluster, ranked, truth, ts=1499040000, lon=None):
    return Record(user, comm, cluster, tuple(ranked), truth, ts, lon)


def test_mca_examples():
    good = [rec(f"u{i}", "Temporal", "Night", ["Food"], "Food") for i in range(3)]
    assert mean_classification_accuracy(good).value == 1.0
    bad = [rec(f"u{i}", "Temporal", "Night", ["Bar"], "Food") for i in range(3)]
    assert mean_classification_accuracy(bad).value == 0.0
    with pytest.raises(EmptyPredictions):
        mean_classification_accuracy([])


def test_mca_three_clusters_by_hand():
    rs = []
    # Opinions/Positive 3 of 4 correct, Opinions/Negative 1 of 4, Language/Asia 2 of 4
    for cluster, comm, hits in (("Positive", "Opinions", 3), ("Negative", "Opinions", 1),
                                ("Asia", "Language", 2)):
        for i in range(4):
            rs.append(rec(f"{cluster}{i}", comm, cluster, ["Food" if i < hits else "Bar"], "Food"))
    s = mean_classification_accuracy(rs)
    assert s.per_cluster[("Opinions", "Positive")] == 0.75
    assert s.value == pytest.approx(((0.75 + 0.25) / 2 + 0.5) / 2)
    assert s.value == pytest.approx(mca_oracle(rs))


def test_map_examples():
    top = [rec(f"u{i}", "C", "c", ["Food", "Bar"], "Food") for i in range(3)]
    assert mean_avg_precision_recall(top).precision == 1.0
    never = [rec(f"u{i}", "C", "c", ["Bar", "Shop"], "Food") for i in range(3)]
    assert mean_avg_precision_recall(never).precision == 0.0
    with pytest.raises(EmptyPredictions):
        mean_avg_precision_recall([])


def test_map_five_user_ranks():
    ranks = [1, 2, None, 1, 3]
    rs = []
    for i, r in enumerate(ranks):
        others = [lab for lab in LABELS if lab != "Food"]
        ranked = others[:] if r is None else others[:r - 1] + ["Food"] + others[r - 1:]
        rs.append(rec(f"u{i}", "C", "c", ranked, "Food"))
    pr = mean_avg_precision_recall(rs)
    assert pr.precision == pytest.approx((1 + 0.5 + 0 + 1 + 1 / 3) / 5)
    assert (pr.precision, pr.recall) == pytest.approx(map_oracle(rs))
    assert mean_avg_precision_recall(rs, top_k=1).precision == pytest.approx(2 / 5)


record_lists = st.lists(
    st.builds(rec, st.sampled_from(["u1", "u2", "u3"]), st.sampled_from(["A", "B"]),
              st.sampled_from(["x", "y", "z"]),
              st.permutations(LABELS).flatmap(lambda p: st.integers(0, 4).map(lambda k: p[:k])),
              st.sampled_from(LABELS)),
    min_size=1, max_size=20)


@given(record_lists, st.sampled_from([None, 1, 2, 3]))
def test_metrics_match_formula_oracles(rs, top_k):
    assert mean_classification_accuracy(rs).value == pytest.approx(mca_oracle(rs), abs=1e-9)
    pr = mean_avg_precision_recall(rs, top_k)
    p, r = map_oracle(rs, top_k)
    assert pr.precision == pytest.approx(p, abs=1e-9) and pr.recall == pytest.approx(r, abs=1e-9)
    assert 0 <= pr.precision <= 1 and 0 <= pr.recall <= 1


@given(st.floats(0, 1), st.floats(0, 1))
def test_f1_is_harmonic_mean(p, r):
    v = f1(p, r)
    assert 0 <= v <= 1
    if p + r > 0:
        assert v == pytest.approx(2 * p * r / (p + r), abs=1e-9)


def history(n_users, eligible):
    base = 1499040000
    return {f"u{i:02d}": [base, base + (31 * DAY if i < eligible else 3 * DAY)] for i in range(n_users)}


def test_split_examples():
    h = history(10, 5)
    train, test = split_train_test(h, 0.8, 30, seed=1)
    assert len(test) == 2 and all(int(u[1:]) < 5 for u in test)
    assert sorted(train + test) == sorted(h) and not set(train) & set(test)
    with pytest.raises(InsufficientEligibleUsers):
        split_train_test(history(10, 0))
    with pytest.raises(InsufficientEligibleUsers):
        split_train_test(history(10, 1))


@given(st.integers(2, 60), st.floats(0.5, 0.95), st.integers(0, 100))
def test_split_partition_and_determinism(n, ratio, seed):
    h = history(n, n)
    train, test = split_train_test(h, ratio, 30, seed)
    assert sorted(train + test) == sorted(h) and not set(train) & set(test)
    assert abs(len(test) - n * (1 - ratio)) <= 1
    assert split_train_test(h, ratio, 30, seed) == (train, test)


def test_kfold_examples():
    assert [len(v) for _, v in kfold(100, 10)] == [10] * 10
    assert sorted(len(v) for _, v in kfold(101, 10)) == [10] * 9 + [11]
    with pytest.raises(TooFewSamples):
        kfold(9, 10)


@given(st.integers(2, 200), st.integers(2, 12), st.integers(0, 50))
def test_kfold_partitions(n, k, seed):
    if n < k:
        with pytest.raises(TooFewSamples):
            kfold(n, k, seed)
        return
    folds = kfold(n, k, seed)
    assert len(folds) == k
    vals = np.concatenate([v for _, v in folds])
    assert sorted(vals.tolist()) == list(range(n))
    sizes = [len(v) for _, v in folds]
    assert max(sizes) - min(sizes) <= 1
    for tr, v in folds:
        assert sorted(np.concatenate([tr, v]).tolist()) == list(range(n))
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, kfold(n, k, seed)))


def test_weekly_hourly_examples():
    monday = 1499040000
    rs = [rec(f"u{i}", "Temporal", "Night", ["Food"], "Food", monday + 3600 * i) for i in range(3)]
    out = weekly_hourly_report(rs)
    assert out["Temporal"]["weekly"][0] == 1.0
    assert out["Temporal"]["weekly"][1] is None
    assert out["Temporal"]["hourly"][:4] == [1.0, 1.0, 1.0, None]


def test_weekly_hourly_matches_group_by():
    rng = random.Random(2)
    rs = [rec(f"u{i}", rng.choice(["A", "B"]), rng.choice(["x", "y"]), [rng.choice(LABELS)],
              rng.choice(LABELS), 1499040000 + rng.randint(0, 14 * DAY), rng.choice([None, 60.0]))
          for i in range(200)]
    out = weekly_hourly_report(rs)
    for kind in ("A", "B"):
        groups = defaultdict(list)
        for r in rs:
            if r.community == kind:
                groups[local_weekday(r.timestamp, r.lon)].append(r)
        for day in range(7):
            want = mca_oracle(groups[day]) if groups[day] else None
            assert out[kind]["weekly"][day] == (pytest.approx(want) if want is not None else None)


def sample_report():
    rep = EvalReport()
    rep.per_algorithm = {"Neural Network": {"V1": (0.9, 0.8), "V2": (0.7, 0.6)},
                         "Tree": {"V1": (0.5, 0.4)}}
    rep.per_community = {("Temporal", "Night"): (f1(0.9, 0.8), 0.9, 0.8),
                         ("Opinions", "Positive"): (f1(0.6, 0.5), 0.6, 0.5)}
    rep.weekly_hourly = {"Temporal": {"weekly": [1.0] + [None] * 6, "hourly": [None] * 24}}
    rep.mca = 0.8123456789
    return rep


def test_report_round_trip_and_csv():
    rep = sample_report()
    back = EvalReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    assert back.mca == 0.812346
    for f, p, r in back.per_community.values():
        assert f == pytest.approx(f1(p, r), abs=1e-6)
    t2 = rep.table2_csv().splitlines()
    assert t2[0].startswith("Algorithms,Proposed@1_Precision,Proposed@1_Recall")
    assert "SVM,n/a,n/a,n/a,n/a,n/a,n/a,n/a,n/a" in t2
    assert t2[-1].startswith("Overall,0.700,0.600,0.700,0.600")
    t3 = rep.table3_csv().splitlines()
    assert t3[0] == "Community,Label,F1-Score,Precision,Recall"
    assert t3[-1].startswith("Overall,,")
    assert json.loads(rep.to_json())["table2"]["Random Forest"]["V1"] is None
    assert rep.weekly_hourly_csv().splitlines()[1] == "Temporal,weekly,0,1.000000"

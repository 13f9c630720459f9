"""End-to-end orchestration: ingest, community search, blocking,
annotation, feature assembly, training, evaluation and forecasting.

Every stage is a plain function over the previous stage's output so the
command line can stop after any of them. :func:`run_pipeline` chains them and
writes the reports and models to disk.
"""

import dataclasses
import io
import json
import logging
import os
import time
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import baselines, nn
from .affect import personality_provider, sentiment_provider
from .annotate import _SHORTLINK, VenueDirectory, annotate_stream, load_categories
from .community import (Community, block_filter, community_report, language_search,
                        normalize_community, opinion_search, temporal_search)
from .clock import tuple_lon
from .embed import (Layout, TextEmbeddingModel, Variant, assemble_features, embed_text,
                    onehot_hour, onehot_weekday, train_text_embeddings)
from .evaluation import (EvalReport, Record, f1, kfold, mean_avg_precision_recall,
                         mean_classification_accuracy, split_train_test,
                         weekly_hourly_report)
from .geonet import geonet_search
from .ingest import (ParseError, TooShort, dedup_stream, is_self_report, normalize_tuple,
                     parse_tuple)
from .textsim import validate_candidates

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


class UnknownUser(LookupError):
    pass


class NoCommunity(LookupError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    input: str = "builtin:synthetic_stream.jsonl"
    venue_fixture: str = "builtin:synthetic_venues.tsv"
    categories: str = ""
    venue_cache: str = ""
    remote_venues: bool = False
    model_dir: str = "spotcast-out/models"
    report_dir: str = "spotcast-out/reports"
    seed: int = 7
    dedup_max_dist: int = 2
    min_score: float = 0.5
    top_k: int = 25
    diversity: int = 100
    per_day: float = 5.0
    per_domain_cap: int = 100
    radius_m: float = 140.0
    min_covisits: int = 1
    max_geo_communities: int = 10
    text_dim: int = 56
    embed_epochs: int = 50
    embed_negative: int = 5
    hidden: str = "900"
    epochs: int = 300
    batch_size: int = 32
    lr: float = 1e-3
    l2: float = 1.0
    min_leaf: int = 2
    train_ratio: float = 0.8
    min_history_days: float = 30.0
    cv_folds: int = 10
    rank_top_k: int = 3
    sentiment_provider: str = "builtin"
    sentiment_url: str = ""
    personality_provider: str = "builtin"
    personality_url: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = ("diversity", "per_day", "per_domain_cap", "radius_m", "min_covisits",
                    "max_geo_communities", "text_dim", "embed_epochs", "epochs", "batch_size",
                    "lr", "min_leaf", "cv_folds", "rank_top_k", "top_k")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.dedup_max_dist < 0 or self.l2 < 0 or self.min_history_days < 0:
            raise ValueError("dedup_max_dist, l2 and min_history_days must be >= 0")
        if not 0 < self.train_ratio < 1:
            raise ValueError("train_ratio must lie in (0, 1)")
        if not 0 <= self.min_score <= 1:
            raise ValueError("min_score must lie in [0, 1]")
        self.hidden_sizes  # parses

    @property
    def hidden_sizes(self) -> Tuple[int, ...]:
        sizes = tuple(int(s) for s in str(self.hidden).replace(",", " ").split())
        if not sizes or min(sizes) < 1:
            raise ValueError(f"bad hidden layer sizes {self.hidden!r}")
        return sizes

    def mlp_config(self) -> nn.MlpConfig:
        return nn.MlpConfig(hidden_sizes=self.hidden_sizes, max_epochs=self.epochs,
                            lr=self.lr, batch_size=self.batch_size, seed=self.seed)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "PipelineConfig":
        """Parse flat ``key = value`` lines; ``#`` starts a comment."""
        kinds = {f.name: type(f.default) for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in kinds:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            values[key] = _coerce(kinds[key], value, key)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def load(cls, path: Optional[str], **overrides) -> "PipelineConfig":
        text = ""
        if path:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return cls.from_text(text, **overrides)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


def _coerce(kind, value: str, key: str):
    try:
        if kind is bool:
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        return kind(value)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot read {value!r} as {kind.__name__}") from None


def resolve_path(path: str) -> str:
    """Map ``builtin:NAME`` onto the file bundled with the package."""
    if path.startswith("builtin:"):
        return str(resources.files("spotcast.data").joinpath(path[8:]))
    return path


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------

def _lift_shortlink(t):
    # Normalisation lowercases the text, so keep the shortlink as written.
    if t.venue_ref is None:
        m = _SHORTLINK.search(t.text)
        if m:
            return dataclasses.replace(t, venue_ref=m.group(1))
    return t


def load_stream(cfg: PipelineConfig, counters: dict):
    """Parse, filter, normalise and de-duplicate the input stream.

    ``counters`` receives ``lines``, ``parse_errors``, ``not_self_report``,
    ``too_short``, ``duplicates`` and ``kept``; the last five add up to the
    first.
    """
    path = resolve_path(cfg.input)
    if not os.path.exists(path):
        raise PipelineError(f"input {cfg.input} does not exist")
    tuples = []
    counters.update(lines=0, parse_errors=0, not_self_report=0, too_short=0)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            counters["lines"] += 1
            try:
                t = parse_tuple(line)
            except ParseError as exc:
                log.warning("skipping line %d: %s", counters["lines"], exc)
                counters["parse_errors"] += 1
                continue
            if not is_self_report(t):
                counters["not_self_report"] += 1
                continue
            try:
                tuples.append(normalize_tuple(_lift_shortlink(t)))
            except TooShort:
                counters["too_short"] += 1
    if counters["lines"] == 0:
        raise PipelineError("no tuples")
    kept = dedup_stream(tuples, cfg.dedup_max_dist)
    counters["duplicates"] = len(tuples) - len(kept)
    counters["kept"] = len(kept)
    return kept


def search_communities(cfg: PipelineConfig, ts, counters: dict):
    """Run the four searches over the same snapshot. Returns
    ``(communities, geo_graph, geo_partition)``."""
    scorer = sentiment_provider(cfg.sentiment_provider, cfg.sentiment_url or None)
    found = opinion_search(ts, scorer, counters)
    found += language_search(ts)
    found += temporal_search(ts, cfg.dedup_max_dist)
    geo, graph, part = geonet_search(ts, cfg.radius_m, cfg.min_covisits, cfg.seed,
                                     cfg.max_geo_communities)
    return found + geo, graph, part


def venue_directory(cfg: PipelineConfig) -> VenueDirectory:
    cats = load_categories(resolve_path(cfg.categories) if cfg.categories else None)
    fixture = resolve_path(cfg.venue_fixture) if cfg.venue_fixture else None
    cache = cfg.venue_cache or None
    if cfg.remote_venues:
        return VenueDirectory.from_env(fixture, cache, categories=cats)
    return VenueDirectory(fixture, cats, cache)


def annotate_tuples(cfg: PipelineConfig, ts, counters: dict) -> Dict:
    """Map every resolvable post to its top-level venue category."""
    pairs = annotate_stream(ts, venue_directory(cfg), counters)
    return {t: cat.top_level for t, cat in pairs}


@dataclass
class Stages:
    counters: dict
    kept: list
    communities: List[Community]
    allowed: List[Community]
    blocked: list
    labels: Dict
    graph: object = None
    partition: object = None


def prepare(cfg: PipelineConfig) -> Stages:
    """Everything before feature extraction."""
    counters: dict = {}
    kept = load_stream(cfg, counters)
    found, graph, part = search_communities(cfg, kept, counters)
    allowed, blocked = block_filter(found, cfg.diversity, cfg.per_day)
    labels = annotate_tuples(cfg, kept, counters)
    counters["labeled"] = len(labels)
    allowed = [normalize_community(c, cfg.per_domain_cap, labels.get) for c in allowed]
    counters["allowed_communities"] = len(allowed)
    counters["blocked_communities"] = len(blocked)
    return Stages(counters, kept, found, allowed, blocked, labels, graph, part)


# --------------------------------------------------------------------------
# features
# --------------------------------------------------------------------------

@dataclass
class Sample:
    tuple: object
    user: str
    label: str
    communities: Tuple[Tuple[str, str], ...]


@dataclass
class Features:
    samples: List[Sample]
    matrices: Dict[str, np.ndarray]
    personality: Dict[str, np.ndarray]
    embedding: TextEmbeddingModel
    train_users: List[str]
    test_users: List[str]


def user_personalities(cfg, ts) -> Dict[str, np.ndarray]:
    model = personality_provider(cfg.personality_provider, cfg.personality_url or None)
    texts = defaultdict(list)
    for t in ts:
        texts[t.user_id].append(t.text)
    return {u: model.profile(texts[u]).as_array() for u in sorted(texts)}


def build_features(cfg: PipelineConfig, st: Stages) -> Features:
    membership = defaultdict(list)
    for c in st.allowed:
        for t in c.tuples:
            membership[t].append(c.key)
    samples = [Sample(t, t.user_id, st.labels[t], tuple(sorted(set(membership[t]))))
               for t in st.kept if t in st.labels and membership[t]]
    if not samples:
        raise PipelineError("no labelled posts fall in an allowed community")

    history = defaultdict(list)
    for t in st.kept:
        history[t.user_id].append(t.timestamp)
    train_users, test_users = split_train_test(history, cfg.train_ratio,
                                               cfg.min_history_days, cfg.seed)
    train_set = set(train_users)
    corpus = [t.text for t in st.kept if t.user_id in train_set]
    emb = train_text_embeddings(corpus, cfg.text_dim, cfg.embed_epochs, cfg.seed,
                                cfg.embed_negative)
    personality = user_personalities(cfg, st.kept)
    layout = Layout(text_dim=cfg.text_dim)

    doc_vecs, avg_vecs = {}, {}
    for s in samples:
        t = s.tuple
        if t.text not in doc_vecs:
            doc_vecs[t.text] = embed_text(emb, t.text, "document")
            avg_vecs[t.text] = embed_text(emb, t.text, "word_average")
    matrices = {}
    for v in Variant:
        rows = []
        for s in samples:
            t = s.tuple
            text_vec = doc_vecs[t.text] if v.text_mode == "document" else avg_vecs[t.text]
            lon = tuple_lon(t)
            rows.append(assemble_features(v, text_vec, personality[s.user],
                                          onehot_weekday(t.timestamp, lon),
                                          onehot_hour(t.timestamp, lon), layout).values)
        matrices[v.value] = np.array(rows)
    return Features(samples, matrices, personality, emb, train_users, test_users)


# --------------------------------------------------------------------------
# training and evaluation
# --------------------------------------------------------------------------

TRAINERS = {
    "Neural Network": lambda cfg, X, y: nn.fit(X, y, cfg.mlp_config()),
    "Naive Bayes": lambda cfg, X, y: baselines.train_nb(X, y),
    "Logistic Regression": lambda cfg, X, y: baselines.train_logreg(X, y, cfg.l2),
    "Tree": lambda cfg, X, y: baselines.train_tree(X, y, cfg.min_leaf),
}


def ranked_labels(model, X) -> List[Tuple[str, ...]]:
    P = np.atleast_2d(model.predict_proba(X))
    # stable sort on -p keeps the lower index first among equal probabilities
    order = np.argsort(-P, axis=1, kind="stable")
    return [tuple(model.labels[i] for i in row) for row in order]


def _records(samples, ranked, keys=None):
    out = []
    for s, r in zip(samples, ranked):
        for key in (keys or s.communities):
            out.append(Record(s.user, key[0], key[1], r, s.label, s.tuple.timestamp,
                              tuple_lon(s.tuple)))
    return out


def _split(feats: Features):
    train = set(feats.train_users)
    tr = [i for i, s in enumerate(feats.samples) if s.user in train]
    te = [i for i, s in enumerate(feats.samples) if s.user not in train]
    return np.array(tr, dtype=int), np.array(te, dtype=int)


def cross_validate(cfg, feats: Features, tr) -> Dict[str, float]:
    """Mean validation accuracy per algorithm over ``cv_folds`` folds of the
    training posts (V1 features), used to rank the algorithms."""
    X = feats.matrices["V1"][tr]
    y = [feats.samples[i].label for i in tr]
    out = {}
    folds = kfold(len(y), cfg.cv_folds, cfg.seed)
    for name, trainer in TRAINERS.items():
        accs = []
        for a, b in folds:
            ya = [y[i] for i in a]
            if len(set(ya)) < 2:
                continue
            m = trainer(cfg, X[a], ya)
            pred = [r[0] for r in ranked_labels(m, X[b])]
            accs.append(float(np.mean([p == y[i] for p, i in zip(pred, b)])))
        out[name] = float(np.mean(accs)) if accs else None
    return out


def table2(cfg, feats: Features, tr, te) -> Dict[str, Dict[str, Tuple[float, float]]]:
    y_tr = [feats.samples[i].label for i in tr]
    test_samples = [feats.samples[i] for i in te]
    out = {}
    for name, trainer in TRAINERS.items():
        out[name] = {}
        for v in Variant:
            X = feats.matrices[v.value]
            m = trainer(cfg, X[tr], y_tr)
            res = mean_avg_precision_recall(_records(test_samples, ranked_labels(m, X[te])),
                                            cfg.rank_top_k)
            out[name][v.value] = (res.precision, res.recall)
            log.info("%s %s precision %.3f recall %.3f", name, v.value, res.precision, res.recall)
    return out


def community_models(cfg, feats: Features, tr) -> Dict[Tuple[str, str], object]:
    """One V1 network per allowed community, trained on its training posts.
    Communities whose training posts hold a single category get no model."""
    X = feats.matrices["V1"]
    by_comm = defaultdict(list)
    for i in tr:
        for key in feats.samples[i].communities:
            by_comm[key].append(i)
    models = {}
    for key in sorted(by_comm):
        idx = by_comm[key]
        y = [feats.samples[i].label for i in idx]
        if len(set(y)) < 2:
            log.warning("community %s/%s has a single category; no model", *key)
            continue
        models[key] = nn.fit(X[idx], y, cfg.mlp_config())
    return models


def community_records(feats: Features, models, te) -> List[Record]:
    X = feats.matrices["V1"]
    out = []
    for key, m in sorted(models.items()):
        idx = [i for i in te if key in feats.samples[i].communities]
        if not idx:
            continue
        out += _records([feats.samples[i] for i in idx], ranked_labels(m, X[idx]), [key])
    return out


def evaluate(cfg, feats: Features, models=None) -> Tuple[EvalReport, dict]:
    tr, te = _split(feats)
    if len(te) == 0:
        raise PipelineError("no test posts in allowed communities")
    report = EvalReport()
    report.per_algorithm = table2(cfg, feats, tr, te)
    models = community_models(cfg, feats, tr) if models is None else models
    records = community_records(feats, models, te)
    if records:
        mca = mean_classification_accuracy(records)
        mapr = mean_avg_precision_recall(records, cfg.rank_top_k)
        report.mca = mca.value
        report.per_community = {k: (f1(p, r), p, r) for k, (p, r) in mapr.per_cluster.items()}
        report.weekly_hourly = weekly_hourly_report(records)
    report.extra["cross_validation_accuracy"] = (
        cross_validate(cfg, feats, tr) if cfg.cv_folds > 1 and len(tr) >= cfg.cv_folds else {})
    report.extra["rank_top_k"] = cfg.rank_top_k
    report.extra["train_posts"] = int(len(tr))
    report.extra["test_posts"] = int(len(te))
    return report, models


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------

def _model_name(key):
    return f"{key[0]}__{key[1].replace(' ', '_')}.json"


def save_forecast_state(cfg, st: Stages, feats: Features, models):
    """Persist what :func:`forecast_user` needs: the embedding, one model per
    community and, per user, the latest post, personality and communities."""
    os.makedirs(os.path.join(cfg.model_dir, "communities"), exist_ok=True)
    feats.embedding.save(os.path.join(cfg.model_dir, "embedding.json"))
    files = {}
    for key, m in sorted(models.items()):
        name = _model_name(key)
        m.save(os.path.join(cfg.model_dir, "communities", name))
        files[f"{key[0]}/{key[1]}"] = name
    allowed = defaultdict(set)
    for c in st.allowed:
        for u in c.members:
            allowed[u].add(f"{c.kind.value}/{c.label}")
    latest = {}
    for t in st.kept:
        if t.user_id not in latest or t.timestamp >= latest[t.user_id].timestamp:
            latest[t.user_id] = t
    users = {}
    for u in sorted(latest):
        t = latest[u]
        users[u] = {"text": t.text, "timestamp": t.timestamp,
                    "personality": [round(float(v), 9) for v in feats.personality[u]],
                    "communities": sorted(allowed[u])}
    state = {"format": "spotcast.forecast", "version": 1, "text_dim": cfg.text_dim,
             "models": files, "users": users}
    with open(os.path.join(cfg.model_dir, "forecast.json"), "w", encoding="utf-8") as fh:
        json.dump(state, fh, indent=1, sort_keys=True)


def write_reports(cfg, st: Stages, report: Optional[EvalReport]):
    d = cfg.report_dir
    os.makedirs(d, exist_ok=True)

    def put(name, text):
        with open(os.path.join(d, name), "w", encoding="utf-8") as fh:
            fh.write(text)

    put("config.txt", cfg.to_text())
    put("counters.json", json.dumps(st.counters, indent=2, sort_keys=True) + "\n")
    blocked = {id(c): reasons for c, reasons in st.blocked}
    rows = [community_report(c, blocked.get(id(c))) for c in st.communities]
    put("communities.json", json.dumps({"config": cfg.to_text(), "communities": rows},
                                       indent=2, sort_keys=True) + "\n")
    if st.graph is not None:
        buf = io.StringIO()
        st.graph.dump(buf)
        put("geonet_graph.txt", buf.getvalue())
    if report is not None:
        report.extra["config"] = cfg.to_text()
        put("report.json", report.to_json() + "\n")
        put("table2.csv", report.table2_csv())
        put("table3.csv", report.table3_csv())
        put("weekly_hourly.csv", report.weekly_hourly_csv())


@dataclass
class RunResult:
    stages: Stages
    features: Features
    report: EvalReport
    models: dict = field(default_factory=dict)
    seconds: float = 0.0


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    start = time.perf_counter()
    st = prepare(cfg)
    feats = build_features(cfg, st)
    report, models = evaluate(cfg, feats)
    write_reports(cfg, st, report)
    save_forecast_state(cfg, st, feats, models)
    return RunResult(st, feats, report, models, time.perf_counter() - start)


# --------------------------------------------------------------------------
# forecasting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Forecast:
    category: str
    confidence: float
    community: str


def load_forecast_state(cfg):
    path = os.path.join(cfg.model_dir, "forecast.json")
    if not os.path.exists(path):
        raise PipelineError(f"no trained models under {cfg.model_dir}; run train first")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def forecast_user(cfg, user_id: str, weekday: int, hour: int, state=None,
                  models=None, embedding=None) -> Forecast:
    """Forecast the venue category of ``user_id`` at a local weekday
    (0 = Monday) and hour from their most recent post, asking the model of
    every community they belong to and keeping the most confident answer.
    Ties go to the community listed first."""
    if not 0 <= weekday < 7 or not 0 <= hour < 24:
        raise ValueError("weekday must be 0..6 and hour 0..23")
    state = state or load_forecast_state(cfg)
    users = state["users"]
    if user_id not in users:
        near = validate_candidates(user_id, [(u, u) for u in users], cfg.min_score, 3)
        hint = f"; did you mean {', '.join(r.id for r in near)}?" if near else ""
        raise UnknownUser(f"{user_id!r} is not in the corpus{hint}")
    info = users[user_id]
    usable = [c for c in info["communities"] if c in state["models"]]
    if not usable:
        raise NoCommunity(f"{user_id!r} belongs to no allowed community with a model")
    if embedding is None:
        embedding = TextEmbeddingModel.load(os.path.join(cfg.model_dir, "embedding.json"))
    x_text = embed_text(embedding, info["text"], "document")
    wk = np.zeros(7)
    wk[weekday] = 1.0
    hr = np.zeros(24)
    hr[hour] = 1.0
    x = assemble_features(Variant.V1, x_text, np.array(info["personality"]), wk, hr,
                          Layout(text_dim=state["text_dim"])).values
    best = None
    for key in usable:
        if models is not None and key in models:
            m = models[key]
        else:
            m = nn.MlpModel.load(os.path.join(cfg.model_dir, "communities", state["models"][key]))
        label, conf = m.predict_top(x)
        if best is None or conf > best.confidence:
            best = Forecast(label, conf, key)
    return best

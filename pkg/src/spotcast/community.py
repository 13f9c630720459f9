"""Opinion, language and temporal community search plus the sanity rules
that decide which communities may feed the forecaster.

Every search returns :class:`Community` objects holding one cluster per
label. Geographical communities come from :mod:`spotcast.geonet`.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from .affect import Opinion, classify_opinion
from .annotate import has_lbsn_link
from .clock import local_hour, tuple_lon
from .ingest import StreamTuple, dedup_stream, is_self_report

log = logging.getLogger(__name__)


class Kind(str, Enum):
    OPINIONS = "Opinions"
    LANGUAGE = "Language"
    GEONETS = "GeoNets"
    TEMPORAL = "Temporal"


class Reason(str, Enum):
    NO_SELF_REPORT = "NoSelfReport"
    NO_LBSN_LINK = "NoLbsnLink"
    LOW_DIVERSITY = "LowDiversity"
    LOW_ACTIVITY = "LowActivity"
    DUPLICATE = "DuplicateEmission"


# Native-language codes per continent. A code listed under several
# continents places its posts in all of them.
CONTINENT_LANGS = {
    "Africa": ("pt", "es", "za", "zu", "eu"),
    "Antarctica": ("en",),
    "Asia": ("id", "tl", "tr", "vi", "zh", "hi", "ru", "th", "ar", "ko", "he", "ja"),
    "Australia": ("en",),
    "Europe": ("da", "es", "fr", "pl", "et", "de", "tr", "pt", "sv", "cs", "nl", "sl",
               "el", "no", "it", "lv", "ro", "cy", "hu", "is", "ru", "uk", "eu", "lt",
               "bg", "fi"),
    "North America": ("ht",),
    "South America": ("en",),
}
CONTINENTS = tuple(CONTINENT_LANGS)

SESSIONS = (("Morning", 0, 12), ("Afternoon", 12, 16), ("Evening", 16, 20), ("Night", 20, 24))

DAY = 86400


def continents_for(lang: str) -> List[str]:
    lang = lang.lower()
    return [name for name, codes in CONTINENT_LANGS.items() if lang in codes]


def session_for(hour: int) -> str:
    for name, lo, hi in SESSIONS:
        if lo <= hour < hi:
            return name
    raise ValueError(f"hour out of range: {hour}")


@dataclass
class Cluster:
    label: str
    tuples: List[StreamTuple]

    def __post_init__(self):
        self.tuples = sorted(self.tuples, key=lambda t: t.timestamp)

    @property
    def distinct_users(self) -> int:
        return len({t.user_id for t in self.tuples})

    @property
    def active_days(self) -> int:
        return len({t.timestamp // DAY for t in self.tuples})

    def tuples_per_day(self) -> float:
        days = self.active_days
        return len(self.tuples) / days if days else 0.0


@dataclass
class Community:
    kind: Kind
    label: str
    members: frozenset
    clusters: List[Cluster] = field(default_factory=list)
    csl_index: Optional[float] = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("a community needs at least one member")
        if self.csl_index is not None and self.kind != Kind.LANGUAGE:
            raise ValueError("csl_index is only defined for language communities")

    @property
    def key(self) -> Tuple[str, str]:
        return (self.kind.value, self.label)

    @property
    def tuples(self) -> List[StreamTuple]:
        return [t for c in self.clusters for t in c.tuples]


def make_community(kind, label, tuples, members=None) -> Community:
    members = frozenset(members if members is not None else (t.user_id for t in tuples))
    return Community(kind, label, members, [Cluster(label, list(tuples))])


def opinion_search(ts: Sequence[StreamTuple], scorer, counters: Optional[dict] = None
                   ) -> List[Community]:
    """Route each post into Positive, Neutral or Negative by its sentiment.

    ``scorer`` is any object with ``score(text) -> SentimentResult``. Posts
    whose scoring raises are logged, counted under
    ``counters["scorer_failures"]`` and left out.
    """
    groups = {o: [] for o in Opinion}
    failures = 0
    for t in ts:
        try:
            result = scorer.score(t.text)
        except Exception as exc:  # provider errors are per post
            log.warning("sentiment scoring failed for %s@%s: %s", t.user_id, t.timestamp, exc)
            failures += 1
            continue
        groups[classify_opinion(result)].append(t)
    if counters is not None:
        counters["scorer_failures"] = counters.get("scorer_failures", 0) + failures
    return [make_community(Kind.OPINIONS, o.value, group)
            for o, group in groups.items() if group]


def csl_index(c: Community) -> float:
    """Distinct language codes over the community's posts per distinct user."""
    tuples = c.tuples
    users = {t.user_id for t in tuples}
    if not users:
        raise ZeroDivisionError("community has no users")
    return len({t.lang for t in tuples}) / len(users)


def language_search(ts: Sequence[StreamTuple]) -> List[Community]:
    groups = defaultdict(list)
    for t in ts:
        for continent in continents_for(t.lang):
            groups[continent].append(t)
    out = []
    for continent in CONTINENTS:
        if groups[continent]:
            c = make_community(Kind.LANGUAGE, continent, groups[continent])
            c.csl_index = csl_index(c)
            out.append(c)
    return out


def temporal_search(ts: Sequence[StreamTuple], max_dist: int = 2) -> List[Community]:
    """Split posts into four parts of the local day after unifying repeated
    texts of the same user."""
    groups = {name: [] for name, _, _ in SESSIONS}
    for t in dedup_stream(list(ts), max_dist):
        groups[session_for(local_hour(t.timestamp, tuple_lon(t)))].append(t)
    return [make_community(Kind.TEMPORAL, name, group)
            for name, group in groups.items() if group]


def normalize_community(c: Community, per_domain_cap: int,
                        domain_of: Callable[[StreamTuple], Optional[str]]) -> Community:
    """Cap every venue-category domain at ``per_domain_cap`` posts, keeping
    the most recent ones. Posts without a known domain are left alone."""
    if per_domain_cap < 1:
        raise ValueError("per_domain_cap must be >= 1")
    clusters = []
    for cl in c.clusters:
        by_domain = defaultdict(list)
        for i, t in enumerate(cl.tuples):
            d = domain_of(t)
            if d is not None:
                by_domain[d].append(i)
        drop = set()
        for idx in by_domain.values():
            newest_first = sorted(idx, key=lambda i: (cl.tuples[i].timestamp, i), reverse=True)
            drop.update(newest_first[per_domain_cap:])
        clusters.append(Cluster(cl.label, [t for i, t in enumerate(cl.tuples) if i not in drop]))
    members = frozenset(t.user_id for cl in clusters for t in cl.tuples) or c.members
    return Community(c.kind, c.label, members, clusters, c.csl_index)


def block_reasons(c: Community, diversity: int = 100, per_day: float = 5.0) -> List[Reason]:
    tuples = c.tuples
    reasons = []
    if not any(is_self_report(t) for t in tuples):
        reasons.append(Reason.NO_SELF_REPORT)
    if not any(has_lbsn_link(t) for t in tuples):
        reasons.append(Reason.NO_LBSN_LINK)
    if any(cl.distinct_users < diversity for cl in c.clusters):
        reasons.append(Reason.LOW_DIVERSITY)
    if any(cl.tuples_per_day() < per_day for cl in c.clusters):
        reasons.append(Reason.LOW_ACTIVITY)
    return reasons


def block_filter(cs: Iterable[Community], diversity: int = 100, per_day: float = 5.0
                 ) -> Tuple[List[Community], List[Tuple[Community, List[Reason]]]]:
    """Split communities into those allowed downstream and those blocked,
    the latter paired with their reason codes.

    A (kind, label) pair emitted more than once is blocked as a duplicate
    from its second emission on.
    """
    allowed, blocked = [], []
    seen = set()
    for c in cs:
        reasons = block_reasons(c, diversity, per_day)
        if c.key in seen:
            reasons.append(Reason.DUPLICATE)
        seen.add(c.key)
        if reasons:
            blocked.append((c, reasons))
        else:
            allowed.append(c)
    return allowed, blocked


def community_report(c: Community, reasons: Optional[List[Reason]] = None) -> dict:
    row = {
        "kind": c.kind.value,
        "label": c.label,
        "member_count": len(c.members),
        "clusters": [{"label": cl.label,
                      "tuples": len(cl.tuples),
                      "distinct_users": cl.distinct_users,
                      "active_days": cl.active_days,
                      "tuples_per_day": round(cl.tuples_per_day(), 6)}
                     for cl in c.clusters],
    }
    if c.csl_index is not None:
        row["csl_index"] = round(c.csl_index, 6)
    if reasons:
        row["blocked_reason"] = [r.value for r in reasons]
    return row

"""Sentiment scoring and personality profiling.

Both capabilities sit behind small provider objects. The built-in providers
are deterministic lexicon lookups bundled with the package so that nothing
here needs network access; the HTTP providers forward the same requests to
an external service speaking JSON.
"""

import json
import math
import re
import urllib.request
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Dict, List, Optional, Sequence

import numpy as np

from .ingest import TooShort, normalize_text

BIG5 = ("openness", "conscientiousness", "extraversion", "agreeableness",
        "emotional_range")
NEEDS = ("challenge", "closeness", "curiosity", "excitement", "harmony", "ideal",
         "liberty", "love", "practicality", "self_expression", "stability",
         "structure")
VALUES = ("conservation", "openness_to_change", "hedonism", "self_enhancement",
          "self_transcendence")
TRAITS = BIG5 + NEEDS + VALUES

_TOKEN = re.compile(r"[a-z][a-z']*")
_URL = re.compile(r"\S*://\S*|\S*4sq\.com/\S*")


class LexiconMissing(FileNotFoundError):
    pass


class EmptyCorpus(ValueError):
    pass


def tokenize(s: str) -> List[str]:
    try:
        s = normalize_text(s)
    except TooShort:
        s = s.lower()
    return _TOKEN.findall(_URL.sub(" ", s))


def _read_tsv(path):
    try:
        if path is None:
            raise LexiconMissing("no lexicon path given")
        if isinstance(path, str) and path.startswith("builtin:"):
            text = resources.files("spotcast.data").joinpath(path[8:]).read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except (FileNotFoundError, OSError) as exc:
        raise LexiconMissing(str(exc)) from None
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            yield line.rstrip("\n").split("\t")


# --------------------------------------------------------------------------
# sentiment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SentimentResult:
    magnitude: float
    score: float


class Opinion(str, Enum):
    POSITIVE = "Positive"
    NEUTRAL = "Neutral"
    NEGATIVE = "Negative"


class SentimentLexicon:
    """``token<TAB>polarity`` table; polarities lie in [-1, 1]."""

    def __init__(self, polarities: Dict[str, float]):
        self.polarities = dict(polarities)

    @classmethod
    def load(cls, path="builtin:sentiment.tsv"):
        return cls({tok: float(pol) for tok, pol in _read_tsv(path)})

    def score(self, text: str) -> SentimentResult:
        return score_text(text, self)


def score_text(s: str, lexicon: Optional[SentimentLexicon]) -> SentimentResult:
    """Mean polarity over the polar tokens of ``s`` (the score) and mean
    absolute polarity over the same tokens (the magnitude).

    Texts without polar tokens score (0, 0).
    """
    if lexicon is None:
        raise LexiconMissing("a sentiment lexicon is required")
    hits = [lexicon.polarities[tok] for tok in tokenize(s) if tok in lexicon.polarities]
    hits = [p for p in hits if p != 0.0]
    if not hits:
        return SentimentResult(0.0, 0.0)
    score = math.fsum(hits) / len(hits)
    magnitude = math.fsum(abs(p) for p in hits) / len(hits)
    return SentimentResult(magnitude=magnitude, score=min(1.0, max(-1.0, score)))


def classify_opinion(r: SentimentResult) -> Opinion:
    if r.magnitude > 0.0 and r.score > 0.0:
        return Opinion.POSITIVE
    if r.magnitude > 0.0 and r.score < 0.0:
        return Opinion.NEGATIVE
    return Opinion.NEUTRAL


# --------------------------------------------------------------------------
# personality
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PersonalityVector:
    """Trait scores on [0, 100] in the fixed order big five, needs, values."""

    big5: tuple
    needs: tuple
    values: tuple
    facets: Optional[tuple] = None

    def __post_init__(self):
        for block, n in ((self.big5, 5), (self.needs, 12), (self.values, 5)):
            if len(block) != n:
                raise ValueError("personality block has the wrong length")
        if self.facets is not None and len(self.facets) != 30:
            raise ValueError("facets must have 30 components")
        if any(not 0.0 <= v <= 100.0 for v in self.as_array()):
            raise ValueError("personality components must lie in [0, 100]")

    def as_array(self) -> np.ndarray:
        parts = [self.big5, self.needs, self.values]
        if self.facets is not None:
            parts.append(self.facets)
        return np.array([v for block in parts for v in block], dtype=float)

    @classmethod
    def from_array(cls, arr):
        arr = [float(v) for v in arr]
        facets = tuple(arr[22:]) if len(arr) > 22 else None
        return cls(tuple(arr[:5]), tuple(arr[5:17]), tuple(arr[17:22]), facets)


class PersonalityLexicon:
    """``token<TAB>trait<TAB>weight`` table with non-negative weights."""

    def __init__(self, weights: Dict[str, Dict[str, float]]):
        self.weights = weights
        self.max_weight = {trait: 0.0 for trait in TRAITS}
        for per_trait in weights.values():
            for trait, w in per_trait.items():
                if trait not in self.max_weight:
                    raise ValueError(f"unknown trait {trait!r}")
                if w < 0:
                    raise ValueError("trait weights must be non-negative")
                self.max_weight[trait] = max(self.max_weight[trait], w)

    @classmethod
    def load(cls, path="builtin:personality.tsv"):
        weights: Dict[str, Dict[str, float]] = {}
        for tok, trait, w in _read_tsv(path):
            weights.setdefault(tok, {})[trait] = float(w)
        return cls(weights)

    def profile(self, texts: Sequence[str]) -> PersonalityVector:
        return profile(texts, self)


def profile(texts: Sequence[str], model: PersonalityLexicon) -> PersonalityVector:
    """Average per-text trait hit rates, scaled to [0, 100].

    A text's hit rate for a trait is the summed lexicon weight of its tokens
    for that trait divided by its token count. The average over texts is
    divided by the largest weight the lexicon assigns to the trait, which is
    the highest rate a text can reach, so corpora without hits map to 0.
    """
    texts = [t for t in texts if t and t.strip()]
    if not texts:
        raise EmptyCorpus("personality profiling needs at least one text")
    rates = {trait: [] for trait in TRAITS}
    for text in texts:
        tokens = tokenize(text)
        per_trait = {trait: [] for trait in TRAITS}
        for tok in tokens:
            for trait, w in model.weights.get(tok, {}).items():
                per_trait[trait].append(w)
        for trait in TRAITS:
            rates[trait].append(math.fsum(per_trait[trait]) / max(1, len(tokens)))
    comps = []
    for trait in TRAITS:
        top = model.max_weight[trait]
        mean = math.fsum(rates[trait]) / len(texts)
        comps.append(0.0 if top == 0.0 else 100.0 * min(1.0, mean / top))
    return PersonalityVector.from_array(comps)


# --------------------------------------------------------------------------
# remote providers
# --------------------------------------------------------------------------

def _post_json(url, payload, timeout):
    req = urllib.request.Request(url, data=json.dumps(payload).encode("utf-8"),
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


class HttpSentimentProvider:
    """POSTs ``{"text": ...}`` and expects ``{"magnitude": m, "score": s}``."""

    def __init__(self, url, timeout=10.0):
        self.url = url
        self.timeout = timeout

    def score(self, text: str) -> SentimentResult:
        body = _post_json(self.url, {"text": text}, self.timeout)
        return SentimentResult(magnitude=float(body["magnitude"]), score=float(body["score"]))


class HttpPersonalityProvider:
    """POSTs ``{"texts": [...]}`` and expects ``{"components": [...]}``."""

    def __init__(self, url, timeout=10.0):
        self.url = url
        self.timeout = timeout

    def profile(self, texts: Sequence[str]) -> PersonalityVector:
        if not any(t and t.strip() for t in texts):
            raise EmptyCorpus("personality profiling needs at least one text")
        body = _post_json(self.url, {"texts": list(texts)}, self.timeout)
        return PersonalityVector.from_array(body["components"])


def sentiment_provider(kind="builtin", url=None, lexicon_path="builtin:sentiment.tsv"):
    if kind == "builtin":
        return SentimentLexicon.load(lexicon_path)
    if kind == "http":
        return HttpSentimentProvider(url)
    raise ValueError(f"unknown sentiment provider {kind!r}")


def personality_provider(kind="builtin", url=None, lexicon_path="builtin:personality.tsv"):
    if kind == "builtin":
        return PersonalityLexicon.load(lexicon_path)
    if kind == "http":
        return HttpPersonalityProvider(url)
    raise ValueError(f"unknown personality provider {kind!r}")

"""Venue-category annotation of self-reported check-ins.

A check-in post points at a venue either through an explicit ``venue`` field,
a ``4sq.com`` shortlink in its text, or a bare venue name after "I'm at".
References are resolved to categories through a :class:`VenueDirectory`
backed by TSV files:

* categories: ``category_id<TAB>name<TAB>top_level``
* venues / cache: ``ref<TAB>category_id`` (the cache is append-only)

Class labels are the ten top-level category names.
"""

import json
import logging
import os
import re
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from importlib import resources
from typing import Dict, Iterable, List, Optional, Tuple

from .ingest import StreamTuple

log = logging.getLogger(__name__)

TOP_LEVEL = (
    "Arts & Entertainment",
    "College & University",
    "Event",
    "Food",
    "Nightlife Spot",
    "Outdoors & Recreation",
    "Professional & Other Places",
    "Residence",
    "Shop & Service",
    "Travel & Transport",
)

REMOTE_URL_ENV = "SPOTCAST_VENUE_URL"
REMOTE_KEY_ENV = "SPOTCAST_VENUE_KEY"

_SHORTLINK = re.compile(r"(?:https?://)?(4sq\.com/[A-Za-z0-9_\-]+)")
_IM_AT = re.compile(r"i['’]m at\s+(.+)", re.IGNORECASE)
_NAME_END = re.compile(r"\s+w/|\s*https?://|\s+4sq\.com/|\s+\(@|\s+-\s+@")


class NotFound(LookupError):
    pass


class RemoteUnavailable(ConnectionError):
    pass


@dataclass(frozen=True)
class VenueCategory:
    id: str
    name: str
    top_level: str

    def __post_init__(self):
        if self.top_level not in TOP_LEVEL:
            raise ValueError(f"{self.top_level!r} is not a top-level category")


def extract_venue_ref(t: StreamTuple) -> Optional[str]:
    if t.venue_ref:
        return t.venue_ref
    m = _SHORTLINK.search(t.text)
    if m:
        return m.group(1)
    m = _IM_AT.search(t.text)
    if m:
        name = _NAME_END.split(m.group(1), maxsplit=1)[0]
        name = " ".join(name.lower().split()).rstrip(".,!")
        return name or None
    return None


def has_lbsn_link(t: StreamTuple) -> bool:
    """True when the post links to the check-in network itself."""
    return bool(t.venue_ref) or _SHORTLINK.search(t.text) is not None


def _tsv_rows(text):
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            yield line.split("\t")


def load_categories(path=None) -> Dict[str, VenueCategory]:
    if path is None:
        text = resources.files("spotcast.data").joinpath("categories.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    cats = {}
    for cid, name, top in _tsv_rows(text):
        if cid in cats:
            raise ValueError(f"duplicate category id {cid!r}")
        cats[cid] = VenueCategory(cid, name, top)
    return cats


def load_venue_map(path) -> Dict[str, str]:
    if not os.path.exists(path):
        return {}
    with open(path, encoding="utf-8") as fh:
        return {row[0]: row[1] for row in _tsv_rows(fh.read())}


class VenueDirectory:
    """Resolve venue references against a fixture map, a cache and,
    optionally, a remote HTTP directory.

    The remote endpoint is queried as ``GET {base_url}?ref=<ref>`` and must
    answer ``{"category_id": ...}``; answers are appended to the cache file so
    later runs stay offline.
    """

    def __init__(self, fixture_path=None, categories=None, cache_path=None,
                 remote_url=None, remote_key=None, timeout=10.0):
        self.categories = categories if categories is not None else load_categories()
        self.fixture = load_venue_map(fixture_path) if fixture_path else {}
        self.cache_path = cache_path
        self.cache = load_venue_map(cache_path) if cache_path else {}
        self.remote_url = remote_url
        self.remote_key = remote_key
        self.timeout = timeout

    @classmethod
    def from_env(cls, fixture_path=None, cache_path=None, **kw):
        return cls(fixture_path=fixture_path, cache_path=cache_path,
                   remote_url=os.environ.get(REMOTE_URL_ENV),
                   remote_key=os.environ.get(REMOTE_KEY_ENV), **kw)

    def _remote(self, ref) -> Optional[str]:
        query = urllib.parse.urlencode({"ref": ref})
        req = urllib.request.Request(f"{self.remote_url}?{query}")
        if self.remote_key:
            req.add_header("Authorization", f"Bearer {self.remote_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                return None
            raise RemoteUnavailable(str(exc)) from None
        except (urllib.error.URLError, OSError) as exc:
            raise RemoteUnavailable(str(exc)) from None
        return body.get("category_id")

    def _remember(self, ref, cid):
        self.cache[ref] = cid
        if self.cache_path:
            with open(self.cache_path, "a", encoding="utf-8") as fh:
                fh.write(f"{ref}\t{cid}\n")

    def lookup(self, ref: str) -> VenueCategory:
        cid = self.fixture.get(ref) or self.cache.get(ref)
        if cid is None and self.remote_url:
            try:
                cid = self._remote(ref)
            except RemoteUnavailable as exc:
                log.warning("venue directory unreachable (%s); cache only", exc)
                cid = None
            if cid is not None:
                self._remember(ref, cid)
        if cid is None or cid not in self.categories:
            raise NotFound(ref)
        return self.categories[cid]


def lookup_category(ref: str, directory: VenueDirectory) -> VenueCategory:
    return directory.lookup(ref)


def annotate_stream(ts: Iterable[StreamTuple], directory: VenueDirectory,
                    counters: Optional[dict] = None) -> List[Tuple[StreamTuple, VenueCategory]]:
    """Label every resolvable post with its venue category; the rest are
    counted under ``counters["unresolved"]`` and dropped."""
    out = []
    dropped = 0
    for t in ts:
        ref = extract_venue_ref(t)
        try:
            if ref is None:
                raise NotFound("no venue reference")
            out.append((t, directory.lookup(ref)))
        except NotFound:
            dropped += 1
    if counters is not None:
        counters["unresolved"] = counters.get("unresolved", 0) + dropped
    return out

"""Parsing, filtering, normalisation and de-duplication of microblog posts.

Posts arrive as JSON Lines, one object per line::

    {"user": "u1", "ts": 1500000000, "text": "I'm at Cafe X", "lang": "en",
     "lat": 12.9, "lon": 77.6, "venue": "4sq.com/abc", "network": "microblog"}

``user``, ``ts`` and ``text`` are required, everything else is optional and
unknown keys are ignored.
"""

import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, List, Optional, Tuple

from .textsim import levenshtein

log = logging.getLogger(__name__)

NETWORKS = ("microblog", "lbsn")

_WS = re.compile(r"\s+")
_ASCII_WS = "\t\n\r\x0b\x0c"
_SELF_REPORT = re.compile(r"i['’]m at", re.IGNORECASE)


class ParseError(ValueError):
    pass


class TooShort(ValueError):
    pass


@dataclass(frozen=True)
class StreamTuple:
    user_id: str
    timestamp: int
    text: str
    lang: str = "und"
    geo: Optional[Tuple[float, float]] = None
    venue_ref: Optional[str] = None
    network: str = "microblog"

    def __post_init__(self):
        object.__setattr__(self, "lang", self.lang.lower())
        if self.geo is not None:
            object.__setattr__(self, "geo", (float(self.geo[0]), float(self.geo[1])))
        if self.timestamp <= 0:
            raise ParseError(f"timestamp must be positive, got {self.timestamp}")
        if not self.text:
            raise ParseError("empty text")
        if self.geo is not None:
            lat, lon = self.geo
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ParseError(f"coordinates out of range: {self.geo}")
        if self.network not in NETWORKS:
            raise ParseError(f"unknown network {self.network!r}")


def parse_tuple(line: str) -> StreamTuple:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object")
    for key in ("user", "ts", "text"):
        if key not in obj:
            raise ParseError(f"missing required field {key!r}")

    ts = obj["ts"]
    if isinstance(ts, bool) or not isinstance(ts, (int, float)) or ts != int(ts):
        raise ParseError(f"ts must be an integer, got {ts!r}")
    if not isinstance(obj["text"], str) or not isinstance(obj["user"], str):
        raise ParseError("user and text must be strings")

    geo = None
    lat, lon = obj.get("lat"), obj.get("lon")
    if lat is not None and lon is not None:
        geo = (float(lat), float(lon))
    elif (lat is None) != (lon is None):
        log.debug("dropping half-specified position for user %s", obj["user"])

    lang = obj.get("lang") or "und"
    return StreamTuple(
        user_id=obj["user"],
        timestamp=int(ts),
        text=obj["text"],
        lang=lang.lower(),
        geo=geo,
        venue_ref=obj.get("venue") or None,
        network=obj.get("network", "microblog"),
    )


def serialize_tuple(t: StreamTuple) -> str:
    obj = {"user": t.user_id, "ts": t.timestamp, "text": t.text, "lang": t.lang}
    if t.geo is not None:
        obj["lat"], obj["lon"] = t.geo
    if t.venue_ref is not None:
        obj["venue"] = t.venue_ref
    obj["network"] = t.network
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def read_jsonl(lines: Iterable[str], errors: Optional[list] = None) -> Iterator[StreamTuple]:
    """Yield tuples from JSONL lines, skipping blanks. Bad lines are appended
    to ``errors`` as ``(lineno, message)`` when a list is given, else raised."""
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            yield parse_tuple(line)
        except ParseError as exc:
            if errors is None:
                raise
            errors.append((lineno, str(exc)))


def is_self_report(t: StreamTuple) -> bool:
    return (t.venue_ref is not None
            or "4sq.com" in t.text.lower()
            or _SELF_REPORT.search(t.text) is not None)


def normalize_text(s: str) -> str:
    s = s.lower()
    s = "".join(ch for ch in s if " " <= ch <= "~" or ch in _ASCII_WS)
    s = _WS.sub(" ", s).strip()
    if len(s) < 3:
        raise TooShort(s)
    return s


def normalize_tuple(t: StreamTuple) -> StreamTuple:
    return replace(t, text=normalize_text(t.text))


def dedup_stream(ts: List[StreamTuple], max_dist: int = 2) -> List[StreamTuple]:
    """Drop near-duplicate posts of the same user.

    Posts are visited in timestamp order (input order breaks ties); one is
    dropped when its normalised text is within ``max_dist`` edits of an
    earlier post by the same user that was kept. The survivors are returned
    in input order.
    """
    if max_dist < 0:
        raise ValueError("max_dist must be >= 0")
    order = sorted(range(len(ts)), key=lambda i: ts[i].timestamp)
    kept_texts = defaultdict(list)
    keep = [False] * len(ts)
    for i in order:
        t = ts[i]
        try:
            text = normalize_text(t.text)
        except TooShort:
            text = t.text.lower()
        seen = kept_texts[t.user_id]
        if any(abs(len(text) - len(s)) <= max_dist and levenshtein(text, s) <= max_dist
               for s in seen):
            continue
        seen.append(text)
        keep[i] = True
    return [t for t, k in zip(ts, keep) if k]

"""Deterministic synthetic check-in stream with planted geographical
communities.

Users live in one of ten cities. Every city has one venue per top-level
category, all within a 50 m radius of the city centre, so users of the same
city co-visit and users of different cities never do. Each user posts four
times over a little more than 30 days; a few posts are plain status updates,
near-duplicate reposts or check-ins without a shortlink, so every filter of
the pipeline has something to do.

Run ``python -m spotcast.synth OUT_DIR`` to regenerate the bundled files.
"""

import argparse
import json
import math
import os

import numpy as np

from .annotate import TOP_LEVEL
from .ingest import StreamTuple, serialize_tuple

BASE_TS = 1499040000  # Monday 2017-07-03 00:00 UTC

# name, lat, lon, language mix
CITIES = (
    ("Cape Town", -33.9249, 18.4241, {"en": 0.6, "zu": 0.2, "pt": 0.2}),
    ("Maputo", -25.9692, 32.5732, {"pt": 0.8, "en": 0.2}),
    ("Auckland", -36.8485, 174.7633, {"en": 1.0}),
    ("Sydney", -33.8688, 151.2093, {"en": 1.0}),
    ("Bangalore", 12.9716, 77.5946, {"hi": 0.5, "en": 0.5}),
    ("Beijing", 39.9042, 116.4074, {"zh": 0.8, "en": 0.2}),
    ("Sao Paulo", -23.5505, -46.6333, {"pt": 0.9, "es": 0.1}),
    ("Buenos Aires", -34.6037, -58.3816, {"es": 1.0}),
    ("New York", 40.7128, -74.0060, {"en": 0.7, "es": 0.2, "ht": 0.1}),
    ("Mexico City", 19.4326, -99.1332, {"es": 0.9, "en": 0.1}),
)

# per top-level category: category id, venue noun, local hour window, cue words
VENUES = {
    "Arts & Entertainment": ("arts.museum", "Art Museum", (13, 20), ("art", "culture", "gallery")),
    "College & University": ("college.campus", "University Campus", (8, 16), ("class", "study", "learn")),
    "Event": ("event.concert", "Concert Hall", (18, 23), ("concert", "music", "festival")),
    "Food": ("food.cafe", "Coffee House", (7, 14), ("coffee", "breakfast", "dessert")),
    "Nightlife Spot": ("nightlife.bar", "Cocktail Bar", (20, 24), ("drinks", "party", "dance")),
    "Outdoors & Recreation": ("outdoors.park", "City Park", (6, 10), ("run", "park", "gym")),
    "Professional & Other Places": ("professional.office", "Office Tower", (8, 12), ("work", "meeting", "office")),
    "Residence": ("residence.home", "Home", (21, 24), ("home", "family", "routine")),
    "Shop & Service": ("shop.mall", "Shopping Mall", (11, 19), ("shop", "style", "market")),
    "Travel & Transport": ("travel.station", "Central Station", (5, 9), ("travel", "trip", "road")),
}

POSITIVE = ("love this place", "great vibes", "amazing as usual", "so happy to be here",
            "perfect day", "wonderful evening", "best spot in town", "nice and cozy",
            "delicious", "fun times", "excited", "lovely people")
NEUTRAL = ("here again", "quick stop", "on my way", "just arrived", "for a bit",
           "checking in", "with the usual crowd", "second time this week")
NEGATIVE = ("ugh so crowded", "terrible service", "waiting forever", "so tired",
            "worst queue ever", "rude staff", "stuck here", "annoying noise",
            "disappointed today", "everything is slow")
STATUS = ("good morning world", "cannot sleep tonight", "new phone who dis",
          "thinking about the weekend", "what a game last night", "need more coffee",
          "reading a good book", "rain again today")

USERS_PER_CITY = 25
POSTS_PER_USER = 4
SPAN_DAYS = 31
VENUE_RADIUS_M = 50.0
JITTER_M = 8.0
N_STATUS = 20
N_REPOST = 20
N_NAME_ONLY = 25


def _offset(lat, lon, north_m, east_m):
    dlat = north_m / 111320.0
    dlon = east_m / (111320.0 * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


def _shortlink(city_idx, venue_idx):
    return f"4sq.com/v{city_idx:02d}{venue_idx:02d}"


def venue_table():
    """``(city_idx, top_level, category_id, name, lat, lon, ref)`` rows."""
    rows = []
    for ci, (city, lat, lon, _) in enumerate(CITIES):
        for vi, top in enumerate(TOP_LEVEL):
            cid, noun, _, _ = VENUES[top]
            angle = 2 * math.pi * vi / len(TOP_LEVEL)
            vlat, vlon = _offset(lat, lon, VENUE_RADIUS_M * math.sin(angle),
                                 VENUE_RADIUS_M * math.cos(angle))
            rows.append((ci, top, cid, f"{city} {noun}", vlat, vlon, _shortlink(ci, vi)))
    return rows


def generate(seed: int = 7):
    """Return ``(tuples, venue_rows, planted)`` where ``planted`` maps each
    user to the index of their home city."""
    rng = np.random.default_rng(seed)
    venues = venue_table()
    by_city = {}
    for row in venues:
        by_city.setdefault(row[0], []).append(row)

    users = []
    for ci, (city, _, lon, langs) in enumerate(CITIES):
        codes = sorted(langs)
        probs = np.array([langs[c] for c in codes])
        for k in range(USERS_PER_CITY):
            uid = f"u{ci:02d}{k:02d}"
            lang = codes[rng.choice(len(codes), p=probs / probs.sum())]
            favourites = rng.choice(len(TOP_LEVEL), size=3, replace=False)
            users.append((uid, ci, lang, favourites))

    # which users get a status update, a repost or a link-less check-in
    slots = rng.permutation(len(users))
    status_users = set(slots[:N_STATUS])
    repost_users = set(slots[N_STATUS:N_STATUS + N_REPOST])
    nameonly_users = set(slots[N_STATUS + N_REPOST:N_STATUS + N_REPOST + N_NAME_ONLY])

    tuples, planted = [], {}
    for ui, (uid, ci, lang, favourites) in enumerate(users):
        planted[uid] = ci
        lon = CITIES[ci][2]
        offset = int(round(lon / 15.0))
        days = [int(rng.integers(0, 2)), int(rng.integers(2, 16)),
                int(rng.integers(16, 30)), SPAN_DAYS - int(rng.integers(0, 2))]
        posts = []
        for p, day in enumerate(days):
            top = TOP_LEVEL[favourites[rng.choice(3, p=[0.5, 0.3, 0.2])]]
            _, _, cid, name, vlat, vlon, ref = by_city[ci][TOP_LEVEL.index(top)]
            lo, hi = VENUES[top][2]
            hour = int(rng.integers(lo, hi))
            local = BASE_TS + day * 86400 + hour * 3600 + int(rng.integers(0, 60)) * 60
            ts = local - offset * 3600
            mood = rng.choice(3, p=[0.45, 0.3, 0.25])
            comment = rng.choice((POSITIVE, NEUTRAL, NEGATIVE)[mood])
            cue = rng.choice(VENUES[top][3])
            company = " w/ friends" if rng.random() < 0.3 else ""
            jlat, jlon = _offset(vlat, vlon, rng.normal(0, JITTER_M), rng.normal(0, JITTER_M))
            text = f"I'm at {name}{company} - {comment}, {cue} https://{ref}"
            if p == 2 and ui in nameonly_users:
                text = f"I'm at {name} - {comment}, {cue}"
            posts.append(StreamTuple(uid, ts, text, lang, (round(jlat, 6), round(jlon, 6))))
        if ui in status_users:
            t = posts[1]
            posts[1] = StreamTuple(uid, t.timestamp, str(rng.choice(STATUS)), lang)
        if ui in repost_users:
            t = posts[0]
            posts[1] = StreamTuple(uid, t.timestamp + 600, t.text + "!", lang, t.geo)
        tuples += posts
    return tuples, venues, planted


def write_fixture(out_dir, seed: int = 7):
    tuples, venues, planted = generate(seed)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "synthetic_stream.jsonl"), "w", encoding="utf-8") as fh:
        for t in tuples:
            fh.write(serialize_tuple(t) + "\n")
    with open(os.path.join(out_dir, "synthetic_venues.tsv"), "w", encoding="utf-8") as fh:
        fh.write("# ref\tcategory_id\n")
        for row in venues:
            fh.write(f"{row[6]}\t{row[2]}\n")
    with open(os.path.join(out_dir, "synthetic_planted.json"), "w", encoding="utf-8") as fh:
        json.dump(planted, fh, indent=1, sort_keys=True)
    return len(tuples)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    n = write_fixture(args.out_dir, args.seed)
    print(f"wrote {n} tuples to {args.out_dir}")


if __name__ == "__main__":
    main()

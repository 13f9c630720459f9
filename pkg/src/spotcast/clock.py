"""Local-time helpers shared by the temporal search and the one-hot encoders.

Posts carry UTC epoch seconds and, optionally, a longitude. Local time is
approximated with a whole-hour offset of ``round(lon / 15)`` hours; without
a longitude the timestamp is read as UTC.
"""

from datetime import datetime, timedelta, timezone


def utc_offset_hours(lon=None):
    if lon is None:
        return 0
    return int(round(lon / 15.0))


def local_datetime(ts, lon=None):
    offset = utc_offset_hours(lon)
    return datetime.fromtimestamp(ts, tz=timezone.utc) + timedelta(hours=offset)


def local_hour(ts, lon=None):
    return local_datetime(ts, lon).hour


def local_weekday(ts, lon=None):
    """Weekday index with 0 = Monday."""
    return local_datetime(ts, lon).weekday()


def tuple_lon(t):
    return t.geo[1] if t.geo is not None else None

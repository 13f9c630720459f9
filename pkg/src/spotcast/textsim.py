"""Edit distance and candidate ranking used to validate community members."""

from typing import NamedTuple, Sequence, Tuple


def levenshtein(a: str, b: str) -> int:
    """Number of single-character insertions, deletions and substitutions
    needed to turn ``a`` into ``b``.

    Two-row dynamic program, O(len(a) * len(b)) time and O(min) memory.

    >>> levenshtein("kitten", "sitting")
    3
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """Length-normalised edit similarity in [0, 1]; 1 only for equal strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


class Ranked(NamedTuple):
    id: str
    score: float


def validate_candidates(query: str,
                        candidates: Sequence[Tuple[str, str]],
                        min_score: float = 0.5,
                        top_k: int = 25) -> list:
    """Score every ``(id, text)`` candidate against ``query``, keep those at or
    above ``min_score`` and return at most ``top_k`` of them, best first.

    Ties are broken by ascending id so that the ranking is reproducible.
    """
    if not 0.0 <= min_score <= 1.0:
        raise ValueError("min_score must lie in [0, 1]")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    scored = [Ranked(cid, similarity(query, text)) for cid, text in candidates]
    kept = [r for r in scored if r.score >= min_score]
    kept.sort(key=lambda r: (-r.score, r.id))
    return kept[:top_k]

"""The seven temporal relations between lexicographically ordered intervals.

Only seven of Allen's thirteen relations can hold from interval A to
interval B when (A.start, A.end) <= (B.start, B.end); inverse relations
never arise once every interval collection is kept in lexicographic order.

Endpoint comparisons tolerate a configurable epsilon, and `before` is
capped by a maximal gap beyond which two intervals are unrelated (None).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

BEFORE = "<"
MEETS = "m"
OVERLAPS = "o"
FINISHED_BY = "f"
CONTAINS = "c"
STARTS = "s"
EQUALS = "="

RELATIONS = (BEFORE, MEETS, OVERLAPS, FINISHED_BY, CONTAINS, STARTS, EQUALS)

_REL_RANK = {r: i for i, r in enumerate(RELATIONS)}

DEFAULT_EPSILON = 0
DEFAULT_MAX_GAP = 720


@dataclass(frozen=True)
class RelationConfig:
    epsilon: int = DEFAULT_EPSILON
    max_gap: int = DEFAULT_MAX_GAP

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.epsilon < self.max_gap:
            raise ValueError("epsilon must be < max_gap")


def classify_endpoints(a_start, a_end, b_start, b_end, epsilon=0,
                       max_gap=DEFAULT_MAX_GAP):
    """Relation from (a_start, a_end) to the lexicographically later interval.

    Clauses are tested in a fixed order (=, s, f, c, o, m, <) so that with
    epsilon > 0, where several flexible definitions hold, the most
    constrained relation wins. Returns None when the gap exceeds max_gap.
    """
    assert (a_start, a_end) <= (b_start, b_end), \
        "classify_endpoints requires lexicographically ordered intervals"
    ds = b_start - a_start
    de = b_end - a_end
    if -epsilon <= ds <= epsilon and -epsilon <= de <= epsilon:
        return EQUALS
    if -epsilon <= ds <= epsilon and a_end < b_end - epsilon:
        return STARTS
    if -epsilon <= de <= epsilon and a_start < b_start - epsilon:
        return FINISHED_BY
    if a_start < b_start - epsilon and b_end < a_end - epsilon:
        return CONTAINS
    if (a_start < b_start - epsilon and b_start < a_end - epsilon
            and a_end < b_end - epsilon):
        return OVERLAPS
    if -epsilon <= b_start - a_end <= epsilon:
        return MEETS
    if epsilon < b_start - a_end <= max_gap:
        return BEFORE
    return None


def classify_relation(a, b, cfg):
    """classify_endpoints over two SymbolicIntervals."""
    return classify_endpoints(a.start, a.end, b.start, b.end,
                              cfg.epsilon, cfg.max_gap)


# Composition (transitivity) table at epsilon = 0: for r1 = rel(A, B) and
# r2 = rel(B, C) with A <= B <= C, the exact set of relations rel(A, C) that
# some integer intervals realize. Derived by exhaustive enumeration of all
# interval triples with endpoints in 0..8 (test_relations re-derives it).
COMPOSITION_TABLE = {
    ("<", "<"): "<", ("<", "m"): "<", ("<", "o"): "<", ("<", "f"): "<",
    ("<", "c"): "<", ("<", "s"): "<", ("<", "="): "<",
    ("m", "<"): "<", ("m", "m"): "<", ("m", "o"): "<", ("m", "f"): "<",
    ("m", "c"): "<", ("m", "s"): "m", ("m", "="): "m",
    ("o", "<"): "<", ("o", "m"): "<", ("o", "o"): "<mo", ("o", "f"): "<mo",
    ("o", "c"): "<mofc", ("o", "s"): "o", ("o", "="): "o",
    ("f", "<"): "<", ("f", "m"): "m", ("f", "o"): "o", ("f", "f"): "f",
    ("f", "c"): "c", ("f", "s"): "mo", ("f", "="): "f",
    ("c", "<"): "<mofc", ("c", "m"): "ofc", ("c", "o"): "ofc",
    ("c", "f"): "c", ("c", "c"): "c", ("c", "s"): "ofc", ("c", "="): "c",
    ("s", "<"): "<", ("s", "m"): "<", ("s", "o"): "<mo", ("s", "f"): "<mo",
    ("s", "c"): "<mofc", ("s", "s"): "s", ("s", "="): "s",
    ("=", "<"): "<", ("=", "m"): "m", ("=", "o"): "o", ("=", "f"): "f",
    ("=", "c"): "c", ("=", "s"): "s", ("=", "="): "=",
}


def compose(r1, r2):
    """Possible rel(A, C) given rel(A, B) = r1 and rel(B, C) = r2 (eps 0)."""
    return frozenset(COMPOSITION_TABLE[(r1, r2)])


def transitivity_table():
    """The full 7x7 composition table as {(r1, r2): frozenset of relations}."""
    return {key: frozenset(val) for key, val in COMPOSITION_TABLE.items()}


@lru_cache(maxsize=None)
def _epsilon_maps(epsilon):
    """Confusion maps between eps-0 and eps-flexible classification.

    Returns (fwd, back): fwd[r0] = relations observable at this epsilon for a
    pair whose eps-0 relation is r0; back is the reverse. Derived by brute
    force over a grid wide enough to realize every threshold combination for
    this epsilon.
    """
    if epsilon == 0:
        ident = {r: frozenset((r,)) for r in RELATIONS}
        return ident, dict(ident)
    hi = 4 * epsilon + 8
    big_gap = 10 ** 9
    intervals = [(s, e) for s in range(hi + 1) for e in range(s, hi + 1)]
    fwd = {r: set() for r in RELATIONS}
    back = {r: set() for r in RELATIONS}
    for a in intervals:
        for b in intervals:
            if b < a:
                continue
            r0 = classify_endpoints(*a, *b, 0, big_gap)
            re = classify_endpoints(*a, *b, epsilon, big_gap)
            # with epsilon > 0 the clause set is not total: e.g. B starting
            # within epsilon of A but ending strictly inside A matches no
            # flexible definition; such pairs are simply unrelated
            if re is None:
                continue
            fwd[r0].add(re)
            back[re].add(r0)
    return ({r: frozenset(v) for r, v in fwd.items()},
            {r: frozenset(v) for r, v in back.items()})


@lru_cache(maxsize=None)
def widened_compose(r1, r2, epsilon):
    """Superset of rel(A, C) observable at this epsilon given observed r1, r2.

    The eps-0 table is widened through the epsilon confusion maps; the
    result is only ever used to prune mining candidates, which are always
    re-verified against actual instances.
    """
    if epsilon == 0:
        return compose(r1, r2)
    fwd, back = _epsilon_maps(epsilon)
    out = set()
    for b1 in back[r1]:
        for b2 in back[r2]:
            for r0 in COMPOSITION_TABLE[(b1, b2)]:
                out.update(fwd[r0])
    return frozenset(out)

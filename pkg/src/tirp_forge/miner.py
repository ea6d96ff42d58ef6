"""Frequent time-interval relation pattern (TIRP) enumeration.

Two phases: index all frequent symbols and frequent ordered interval pairs
(the Karma step), then recursively extend each frequent pattern by a new
lexicographically-last interval (the Lego step). Extensions are discovered
by scanning actual instances, so support counts are always exact; the
transitivity table is enforced as an invariant on every observed relation.

A pattern's relations are stored as the flattened upper-triangular
half-matrix in row-major order: entry (i, j), i < j, is the relation from
the i-th to the j-th interval of an instance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

from .data_model import GRADIENT, STATE, Symbol
from .relations import (
    RELATIONS,
    RelationConfig,
    classify_endpoints,
    widened_compose,
)

BRUTEFORCE_MAX_ENTITIES = 10
BRUTEFORCE_MAX_INTERVALS = 12
BRUTEFORCE_MAX_LEN = 4


class MiningInvariantError(AssertionError):
    """An internal mining invariant failed (CLI exit code 3)."""


def _rel_index(i, j, k):
    # row-major upper triangle without the diagonal
    return i * (k - 1) - i * (i - 1) // 2 + (j - i - 1)


def extend_relations(parent_relations, k_parent, new_column):
    """Append one interval's relation column to a row-major half-matrix."""
    out = []
    pos = 0
    for i in range(k_parent):
        row_len = k_parent - 1 - i
        out.extend(parent_relations[pos:pos + row_len])
        out.append(new_column[i])
        pos += row_len
    return tuple(out)


def prefix_relations(relations, k):
    """Drop the last interval's relation column (inverse of extend_relations)."""
    out = []
    pos = 0
    for i in range(k - 1):
        row_len = k - 1 - i
        out.extend(relations[pos:pos + row_len - 1])
        pos += row_len
    return tuple(out)


@dataclass(frozen=True)
class TIRP:
    symbols: tuple  # k Symbols in instance order
    relations: tuple  # k(k-1)/2 relation codes, row-major

    def __post_init__(self):
        k = len(self.symbols)
        if len(self.relations) != k * (k - 1) // 2:
            raise ValueError(
                f"{k} symbols require {k * (k - 1) // 2} relations, "
                f"got {len(self.relations)}")

    @property
    def k(self):
        return len(self.symbols)

    def rel(self, i, j):
        return self.relations[_rel_index(i, j, self.k)]

    def prefix(self):
        return TIRP(self.symbols[:-1], prefix_relations(self.relations, self.k))

    def sort_key(self):
        return (self.k, tuple(s.sort_key() for s in self.symbols),
                self.relations)

    def __str__(self):
        return canonical_string(self)


@dataclass(frozen=True)
class SupportStats:
    supporting_entities: int
    horizontal_support: float
    total_instances: int


@dataclass(frozen=True)
class MinerConfig:
    min_support: float = 0.10
    relation: RelationConfig = field(default_factory=RelationConfig)
    max_pattern_len: int = 5
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.min_support <= 1:
            raise ValueError("min_support must be in (0, 1]")
        if self.max_pattern_len < 1:
            raise ValueError("max_pattern_len must be >= 1")

    def to_dict(self):
        # threads is execution detail, not part of the mining contract
        return {
            "min_support": self.min_support,
            "epsilon": self.relation.epsilon,
            "max_gap": self.relation.max_gap,
            "max_pattern_len": self.max_pattern_len,
        }


def canonical_string(tirp):
    """`Concept.Kind.Label|...;r,r,...` -- deterministic and parseable."""
    syms = "|".join(str(s) for s in tirp.symbols)
    return f"{syms};{','.join(tirp.relations)}"


def parse_canonical(text):
    """Inverse of canonical_string."""
    if text.count(";") != 1:
        raise ValueError(f"bad TIRP string {text!r}: expected one ';'")
    sym_part, rel_part = text.split(";")
    symbols = []
    for chunk in sym_part.split("|"):
        parts = chunk.split(".")
        if len(parts) != 3:
            raise ValueError(f"bad symbol {chunk!r} in {text!r}")
        concept, kind, label = parts
        if kind not in (STATE, GRADIENT):
            raise ValueError(f"bad kind {kind!r} in {text!r}")
        symbols.append(Symbol(concept, kind, label))
    relations = tuple(rel_part.split(",")) if rel_part else ()
    for r in relations:
        if r not in RELATIONS:
            raise ValueError(f"bad relation code {r!r} in {text!r}")
    return TIRP(tuple(symbols), relations)


def _stats(by_entity, n):
    count = len(by_entity)
    return SupportStats(count, count / n,
                        sum(len(v) for v in by_entity.values()))


def _prepare(intervals_by_entity):
    return {ent: sorted(ivs, key=lambda iv: iv.sort_key())
            for ent, ivs in sorted(intervals_by_entity.items())}


def mine(intervals_by_entity, cfg, n_entities=None):
    """All TIRPs with horizontal support >= cfg.min_support, with exact stats.

    intervals_by_entity: entity -> list of SymbolicIntervals (any order).
    n_entities overrides the cohort size when some entities have no
    intervals. Returns [(TIRP, SupportStats)] sorted by
    (k, symbol sequence, half-matrix).
    """
    prepared = _prepare(intervals_by_entity)
    n = len(prepared) if n_entities is None else n_entities
    if n == 0:
        return []
    eps = cfg.relation.epsilon
    gap = cfg.relation.max_gap
    min_support = cfg.min_support
    widened = {(r1, r2): widened_compose(r1, r2, eps)
               for r1 in RELATIONS for r2 in RELATIONS}

    results = []

    sym_instances = {}
    for ent, ivs in prepared.items():
        for idx, iv in enumerate(ivs):
            sym_instances.setdefault(iv.symbol, {}).setdefault(ent, []).append(idx)
    frequent_symbols = set()
    for sym, by_ent in sym_instances.items():
        if len(by_ent) / n >= min_support:
            frequent_symbols.add(sym)
            results.append((TIRP((sym,), ()), _stats(by_ent, n)))
    if cfg.max_pattern_len == 1 or not frequent_symbols:
        results.sort(key=lambda pair: pair[0].sort_key())
        return results

    pair_instances = {}
    for ent, ivs in prepared.items():
        m = len(ivs)
        for i in range(m):
            a = ivs[i]
            if a.symbol not in frequent_symbols:
                continue
            for j in range(i + 1, m):
                b = ivs[j]
                if b.start - a.end > gap:
                    break  # starts are nondecreasing, so all later j too
                if b.symbol not in frequent_symbols:
                    continue
                r = classify_endpoints(a.start, a.end, b.start, b.end, eps, gap)
                if r is None:
                    continue
                key = (a.symbol, r, b.symbol)
                pair_instances.setdefault(key, {}).setdefault(ent, []).append((i, j))

    roots = []
    for (s1, r, s2), by_ent in pair_instances.items():
        if len(by_ent) / n >= min_support:
            roots.append((TIRP((s1, s2), (r,)), by_ent))
    results.extend((tirp, _stats(by_ent, n)) for tirp, by_ent in roots)

    def extend_subtree(root):
        tirp, by_ent = root
        out = []
        stack = [(tirp, by_ent)]
        while stack:
            node_tirp, node_insts = stack.pop()
            k = node_tirp.k
            if k >= cfg.max_pattern_len:
                continue
            last_col = [node_tirp.rel(i, k - 1) for i in range(k - 1)]
            buckets = {}
            for ent, insts in node_insts.items():
                ivs = prepared[ent]
                m = len(ivs)
                for inst in insts:
                    a_last = ivs[inst[-1]]
                    for j in range(inst[-1] + 1, m):
                        b = ivs[j]
                        if b.symbol not in frequent_symbols:
                            continue
                        r_last = classify_endpoints(
                            a_last.start, a_last.end, b.start, b.end, eps, gap)
                        if r_last is None:
                            continue
                        col = []
                        ok = True
                        for pos, idx in enumerate(inst[:-1]):
                            a = ivs[idx]
                            r = classify_endpoints(
                                a.start, a.end, b.start, b.end, eps, gap)
                            if r is None:
                                ok = False
                                break
                            if r not in widened[(last_col[pos], r_last)]:
                                raise MiningInvariantError(
                                    f"observed relation {r!r} outside "
                                    f"compose({last_col[pos]!r}, {r_last!r}) "
                                    f"at epsilon {eps}")
                            col.append(r)
                        if not ok:
                            continue
                        col.append(r_last)
                        key = (b.symbol, tuple(col))
                        buckets.setdefault(key, {}).setdefault(ent, []).append(
                            inst + (j,))
            for (sym, col), child_insts in buckets.items():
                if len(child_insts) / n >= min_support:
                    child = TIRP(node_tirp.symbols + (sym,),
                                 extend_relations(node_tirp.relations, k, col))
                    out.append((child, _stats(child_insts, n)))
                    stack.append((child, child_insts))
        return out

    if cfg.threads > 1 and len(roots) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for chunk in pool.map(extend_subtree, roots):
                results.extend(chunk)
    else:
        for root in roots:
            results.extend(extend_subtree(root))

    results.sort(key=lambda pair: pair[0].sort_key())
    return results


def enumerate_bruteforce(intervals_by_entity, cfg, n_entities=None):
    """Exhaustive oracle for mine(); refuses inputs beyond its size limits."""
    prepared = _prepare(intervals_by_entity)
    n = len(prepared) if n_entities is None else n_entities
    if len(prepared) > BRUTEFORCE_MAX_ENTITIES:
        raise ValueError(
            f"brute force limited to {BRUTEFORCE_MAX_ENTITIES} entities")
    if any(len(ivs) > BRUTEFORCE_MAX_INTERVALS for ivs in prepared.values()):
        raise ValueError(
            f"brute force limited to {BRUTEFORCE_MAX_INTERVALS} intervals per entity")
    if cfg.max_pattern_len > BRUTEFORCE_MAX_LEN:
        raise ValueError(f"brute force limited to k <= {BRUTEFORCE_MAX_LEN}")
    if n == 0:
        return []
    eps = cfg.relation.epsilon
    gap = cfg.relation.max_gap

    agg = {}
    for ent, ivs in prepared.items():
        m = len(ivs)
        for size in range(1, cfg.max_pattern_len + 1):
            for combo in combinations(range(m), size):
                rels = []
                ok = True
                for ai in range(size):
                    for bi in range(ai + 1, size):
                        a, b = ivs[combo[ai]], ivs[combo[bi]]
                        r = classify_endpoints(a.start, a.end,
                                               b.start, b.end, eps, gap)
                        if r is None:
                            ok = False
                            break
                        rels.append(r)
                    if not ok:
                        break
                if not ok:
                    continue
                tirp = TIRP(tuple(ivs[i].symbol for i in combo), tuple(rels))
                agg.setdefault(tirp, {}).setdefault(ent, []).append(combo)

    results = [(tirp, _stats(by_ent, n)) for tirp, by_ent in agg.items()
               if len(by_ent) / n >= cfg.min_support]
    results.sort(key=lambda pair: pair[0].sort_key())
    return results


def find_instances(tirp, intervals, cfg, first_only=False):
    """Instances of a TIRP in one entity's intervals (given in any order).

    An instance is an index-increasing tuple over the lexicographically
    sorted intervals whose symbols and pairwise relations all match.
    """
    ivs = sorted(intervals, key=lambda iv: iv.sort_key())
    k = tirp.k
    found = []

    def rec(pos, chosen):
        if pos == k:
            found.append(tuple(chosen))
            return first_only
        lo = chosen[-1] + 1 if chosen else 0
        for j in range(lo, len(ivs)):
            b = ivs[j]
            if b.symbol != tirp.symbols[pos]:
                continue
            if all(classify_endpoints(ivs[c].start, ivs[c].end,
                                      b.start, b.end,
                                      cfg.relation.epsilon,
                                      cfg.relation.max_gap) == tirp.rel(m, pos)
                   for m, c in enumerate(chosen)):
                chosen.append(j)
                if rec(pos + 1, chosen):
                    return True
                chosen.pop()
        return False

    rec(0, [])
    return found


def entities_supporting(tirp, intervals_by_entity, cfg):
    """Set of entities with at least one instance of the TIRP."""
    return frozenset(
        ent for ent, ivs in intervals_by_entity.items()
        if find_instances(tirp, ivs, cfg, first_only=True))


def support(tirp, intervals_by_entity, cfg, n_entities=None):
    """Exact SupportStats of one TIRP over a cohort."""
    n = len(intervals_by_entity) if n_entities is None else n_entities
    entities = 0
    instances = 0
    for ivs in intervals_by_entity.values():
        found = find_instances(tirp, ivs, cfg, first_only=False)
        if found:
            entities += 1
            instances += len(found)
    return SupportStats(entities, entities / n if n else 0.0, instances)

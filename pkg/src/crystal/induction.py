"""Dictionary induction: initial definitions, similarity, unification and the covering loop."""

from __future__ import annotations

import random
from functools import lru_cache
from collections import defaultdict
from dataclasses import dataclass, replace

import numpy as np

from .definition import (
    BufferConstraints, CnDefinition, _target_buffers, constraint_relaxes, dump_definitions,
    subsumes,
)
from .instances import (
    BufferRole, CnLabel, Instance, InstanceDb, Kind, NULL_VERB, Slot, Voice,
    head_classes, mod_classes, _KIND_ORDER,
)
from .semantic import Lexicon, SemanticHierarchy

# Bucket key for definitions that do not constrain the verb.
ANY_VERB = "<ANY>"


def longest_common_run(a, b) -> tuple:
    """Longest contiguous run of tokens shared by ``a`` and ``b``.

    Ties go to the run starting earliest in ``a``.
    """
    a, b = tuple(a), tuple(b)
    if not a or not b:
        return ()
    best_len, best_end = 0, 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                n = prev[j - 1] + 1
                cur[j] = n
                # Strict '>' keeps the earliest-ending, hence earliest-starting, run in a.
                if n > best_len:
                    best_len, best_end = n, i
        prev = cur
    return a[best_end - best_len:best_end]


@dataclass(frozen=True)
class ErrorReport:
    hits: int = 0
    errors: int = 0

    @property
    def rate(self) -> float:
        total = self.hits + self.errors
        return self.errors / total if total else 0.0


@dataclass(frozen=True)
class InductionConfig:
    tolerance: float = 0.0
    min_coverage: int = 1
    seed: int = 0
    # Process initial definitions in seeded random order instead of corpus order.
    shuffle: bool = False
    # On a failed unification, try the next most similar candidate instead of stopping.
    retry_next_similar: bool = False

    def __post_init__(self):
        if not 0.0 <= self.tolerance <= 1.0:
            raise ValueError(f"tolerance must be in [0, 1], got {self.tolerance}")
        if self.min_coverage < 1:
            raise ValueError("min_coverage must be at least 1")


class Dictionary:
    """A set of CN definitions indexed by verb bucket and extraction buffer."""

    def __init__(self, definitions=()):
        self._defs: dict[int, CnDefinition] = {}
        self._next = 0
        self.verb_bucket_index: dict[str, set[int]] = defaultdict(set)
        self.extraction_index: dict[tuple[CnLabel, Slot], set[int]] = defaultdict(set)
        self._pools: dict[tuple[CnLabel, Slot], _Pool] = {}
        for d in definitions:
            self.add(d)

    @staticmethod
    def bucket_of(d: CnDefinition) -> str:
        return d.verb_key or ANY_VERB

    def add(self, d: CnDefinition) -> int:
        i = self._next
        self._next += 1
        self._defs[i] = d
        self.verb_bucket_index[self.bucket_of(d)].add(i)
        key = (d.label, d.extract_from)
        self.extraction_index[key].add(i)
        if key not in self._pools:
            self._pools[key] = _Pool()
        self._pools[key].add(i, d, self.bucket_of(d))
        return i

    def remove(self, i: int) -> CnDefinition:
        d = self._defs.pop(i)
        self.verb_bucket_index[self.bucket_of(d)].discard(i)
        self.extraction_index[(d.label, d.extract_from)].discard(i)
        self._pools[(d.label, d.extract_from)].remove(i)
        return d

    def __contains__(self, i: int) -> bool:
        return i in self._defs

    def __getitem__(self, i: int) -> CnDefinition:
        return self._defs[i]

    def __len__(self) -> int:
        return len(self._defs)

    def __iter__(self):
        return iter(self.definitions)

    def items(self):
        return sorted(self._defs.items())

    @property
    def definitions(self) -> list[CnDefinition]:
        return [d for _, d in self.items()]

    def candidates(self, d: CnDefinition) -> set[int]:
        return self.extraction_index.get((d.label, d.extract_from), set())

    def pool(self, d: CnDefinition) -> "_Pool | None":
        return self._pools.get((d.label, d.extract_from))

    def dumps(self) -> str:
        return dump_definitions(self.definitions)


# -- initial definitions -----------------------------------------------------

def build_initial_definition(inst: Instance, target: BufferRole, label: CnLabel,
                             lex: Lexicon, h: SemanticHierarchy) -> CnDefinition:
    """The maximally specific definition that extracts ``target`` from ``inst``."""
    extract_slot = None
    constraints = []
    for b, slot in zip(inst.buffers, inst.slots):
        if b.role == target:
            if not label.covers(b.label):
                raise ValueError(f"buffer {target} of {inst.instance_id} is not labeled {label}")
            extract_slot = slot
        constraints.append(BufferConstraints(
            slot,
            words=b.tokens,
            head=h.most_specific(head_classes(b, lex, h)),
            mods=h.most_specific(mod_classes(b, lex, h)),
        ))
    if extract_slot is None:
        raise ValueError(f"instance {inst.instance_id} has no buffer {target}")
    return CnDefinition(
        label=label,
        extract_from=extract_slot,
        voice=inst.voice,
        constraints=tuple(constraints),
        coverage=1,
        provenance=frozenset([inst.instance_id]),
    )


# -- similarity and unification ----------------------------------------------

def compatible(d1: CnDefinition, d2: CnDefinition) -> bool:
    if d1.label != d2.label or d1.extract_from != d2.extract_from:
        return False
    v1, v2 = d1.voice, d2.voice
    return v1 is Voice.UNCONSTRAINED or v2 is Voice.UNCONSTRAINED or v1 is v2


def unify_classes(a: frozenset[str], b: frozenset[str], h: SemanticHierarchy) -> frozenset[str]:
    return h.most_specific(h.lca(x, y) for x in a for y in b)


def _lift_cost(side: frozenset[str], unified: frozenset[str], h: SemanticHierarchy) -> int:
    cost = 0
    for a in side:
        anc = h.ancestors(a)
        hops = [h.depth(a) - h.depth(u) for u in unified if u in anc]
        cost += min(hops) if hops else h.depth(a)
    return cost


def _drop_cost(c: BufferConstraints, h: SemanticHierarchy) -> int:
    cost = 0
    if c.words:
        cost += len(c.words) + 1
    for classes in (c.head, c.mods):
        if classes:
            cost += sum(h.depth(x) for x in classes) + 1
    if c.slot.kind is Kind.PP:
        cost += 1
    return cost


@lru_cache(maxsize=1 << 18)
def _class_cost(a: frozenset[str], b: frozenset[str], h: SemanticHierarchy) -> int:
    if not a and not b:
        return 0
    if not a or not b:
        return sum(h.depth(x) for x in a | b) + 1
    u = unify_classes(a, b, h)
    return _lift_cost(a, u, h) + _lift_cost(b, u, h)


@lru_cache(maxsize=1 << 18)
def _words_cost(w1: tuple, w2: tuple) -> int:
    if w1 and w2:
        common = len(longest_common_run(w1, w2))
        return (len(w1) - common) + (len(w2) - common)
    if w1 or w2:
        return len(w1 or w2) + 1
    return 0


def _pair_cost(c1: BufferConstraints, c2: BufferConstraints, h: SemanticHierarchy) -> int:
    if c1 is c2:
        return 0
    cost = _words_cost(c1.words, c2.words)
    cost += _class_cost(c1.head, c2.head, h)
    cost += _class_cost(c1.mods, c2.mods, h)
    return cost


def similarity(d1: CnDefinition, d2: CnDefinition, h: SemanticHierarchy) -> int | None:
    """Relaxation cost of unifying two definitions; ``None`` means incompatible."""
    if not compatible(d1, d2):
        return None
    by_slot = {c.slot: c for c in d2.constraints}
    cost = 0
    for c1 in d1.constraints:
        c2 = by_slot.pop(c1.slot, None)
        cost += _drop_cost(c1, h) if c2 is None else _pair_cost(c1, c2, h)
    for c2 in by_slot.values():
        cost += _drop_cost(c2, h)
    return cost


def unify(d1: CnDefinition, d2: CnDefinition, h: SemanticHierarchy) -> CnDefinition:
    """Most restrictive definition covering both inputs."""
    if not compatible(d1, d2):
        raise ValueError("cannot unify incompatible definitions")
    if d1.voice is Voice.UNCONSTRAINED or d2.voice is Voice.UNCONSTRAINED:
        voice = Voice.UNCONSTRAINED
    else:
        voice = d1.voice
    by_slot = {c.slot: c for c in d2.constraints}
    merged = []
    for c1 in d1.constraints:
        c2 = by_slot.get(c1.slot)
        if c2 is None:
            continue
        merged.append(BufferConstraints(
            c1.slot,
            words=longest_common_run(c1.words, c2.words),
            head=unify_classes(c1.head, c2.head, h),
            mods=unify_classes(c1.mods, c2.mods, h),
        ))
    return CnDefinition(
        label=d1.label,
        extract_from=d1.extract_from,
        voice=voice,
        constraints=tuple(merged),
        coverage=d1.coverage + d2.coverage,
        provenance=d1.provenance | d2.provenance,
    )


def find_most_similar_id(d: CnDefinition, dictionary: Dictionary, h: SemanticHierarchy,
                         exclude=()) -> int | None:
    """Id of the cheapest compatible candidate, preferring the same verb bucket.

    Ties go to the candidate whose earliest provenance id sorts first.
    """
    pool = dictionary.pool(d)
    if pool is None:
        return None
    return pool.most_similar(d, Dictionary.bucket_of(d), h, exclude)


def find_most_similar_scan(d: CnDefinition, dictionary: Dictionary, h: SemanticHierarchy,
                           exclude=()) -> int | None:
    """Reference version of :func:`find_most_similar_id`: one similarity call per candidate."""
    cands = dictionary.candidates(d)
    bucket = dictionary.verb_bucket_index.get(Dictionary.bucket_of(d), set())
    same = [i for i in cands if i in bucket and i not in exclude]
    other = [i for i in cands if i not in bucket and i not in exclude]
    for group in (same, other):
        best = None
        for i in group:
            cand = dictionary[i]
            cost = similarity(d, cand, h)
            if cost is None:
                continue
            key = (cost, cand.first_provenance(), i)
            if best is None or key < best:
                best = key
        if best is not None:
            return best[2]
    return None


def covered_by(u: CnDefinition, dictionary: Dictionary, h: SemanticHierarchy) -> list[int]:
    """Ids of definitions structurally subsumed by ``u``."""
    pool = dictionary.pool(u)
    return [] if pool is None else pool.subsumed_by(u, h)


class _Pool:
    """Definitions sharing a label and extraction slot, stored column-wise.

    Each slot column holds an interned content id per row (-1 when the row has
    no constraint on that slot), so a query evaluates each distinct constraint
    once and broadcasts the result over all rows with numpy.
    """

    _VOICES = {v: i for i, v in enumerate(Voice)}

    def __init__(self):
        self.n = 0
        self.cap = 0
        self.ids = np.zeros(0, dtype=np.int64)
        self.alive = np.zeros(0, dtype=bool)
        self.voice = np.zeros(0, dtype=np.int8)
        self.bucket = np.zeros(0, dtype=np.int64)
        self.prov: list[str] = []
        self.row_of: dict[int, int] = {}
        self.cols: dict[Slot, np.ndarray] = {}
        self.contents: dict[Slot, list[BufferConstraints]] = {}
        self._intern: dict[Slot, dict[BufferConstraints, int]] = {}
        self._buckets: dict[str, int] = {}

    def _grow(self):
        cap = max(16, self.cap * 2)

        def widen(arr, fill):
            out = np.full(cap, fill, dtype=arr.dtype)
            out[:self.n] = arr[:self.n]
            return out
        self.ids = widen(self.ids, -1)
        self.alive = widen(self.alive, False)
        self.voice = widen(self.voice, -1)
        self.bucket = widen(self.bucket, -1)
        self.cols = {s: widen(col, -1) for s, col in self.cols.items()}
        self.cap = cap

    def add(self, i: int, d: CnDefinition, bucket: str) -> None:
        if self.n == self.cap:
            self._grow()
        r = self.n
        self.n += 1
        self.ids[r] = i
        self.alive[r] = True
        self.voice[r] = self._VOICES[d.voice]
        self.bucket[r] = self._buckets.setdefault(bucket, len(self._buckets))
        self.prov.append(d.first_provenance())
        self.row_of[i] = r
        for c in d.constraints:
            if c.slot not in self.cols:
                self.cols[c.slot] = np.full(self.cap, -1, dtype=np.int64)
                self.contents[c.slot] = []
                self._intern[c.slot] = {}
            table = self._intern[c.slot]
            cid = table.get(c)
            if cid is None:
                cid = table[c] = len(self.contents[c.slot])
                self.contents[c.slot].append(c)
            self.cols[c.slot][r] = cid

    def remove(self, i: int) -> None:
        self.alive[self.row_of.pop(i)] = False

    def _voice_ok(self, voice: Voice) -> np.ndarray:
        v = self.voice[:self.n]
        if voice is Voice.UNCONSTRAINED:
            return np.ones(self.n, dtype=bool)
        return (v == self._VOICES[voice]) | (v == self._VOICES[Voice.UNCONSTRAINED])

    def costs(self, d: CnDefinition, h: SemanticHierarchy) -> np.ndarray:
        n = self.n
        total = np.zeros(n, dtype=np.int64)
        mine = {c.slot: c for c in d.constraints}
        for slot, col in self.cols.items():
            c1 = mine.pop(slot, None)
            contents = self.contents[slot]
            vec = np.empty(len(contents) + 1, dtype=np.int64)
            if c1 is None:
                vec[:-1] = [_drop_cost(c2, h) for c2 in contents]
                vec[-1] = 0
            else:
                vec[:-1] = [_pair_cost(c1, c2, h) for c2 in contents]
                vec[-1] = _drop_cost(c1, h)
            total += vec[col[:n]]
        for c1 in mine.values():
            total += _drop_cost(c1, h)
        return total

    def most_similar(self, d: CnDefinition, bucket: str, h: SemanticHierarchy,
                     exclude=()) -> int | None:
        n = self.n
        if n == 0:
            return None
        ok = self.alive[:n] & self._voice_ok(d.voice)
        for i in exclude:
            r = self.row_of.get(i)
            if r is not None:
                ok[r] = False
        if not ok.any():
            return None
        code = self._buckets.get(bucket, -2)
        same = self.bucket[:n] == code
        total = None
        for group in (ok & same, ok & ~same):
            if not group.any():
                continue
            if total is None:
                total = self.costs(d, h)
            best = total[group].min()
            rows = np.flatnonzero(group & (total == best))
            r = min(rows, key=lambda r: (self.prov[r], self.ids[r]))
            return int(self.ids[r])
        return None

    def subsumed_by(self, u: CnDefinition, h: SemanticHierarchy) -> list[int]:
        n = self.n
        ok = self.alive[:n].copy()
        if u.voice is not Voice.UNCONSTRAINED:
            ok &= self.voice[:n] == self._VOICES[u.voice]
        for g in u.constraints:
            if not ok.any():
                break
            if g.slot == u.extract_from:
                slots = [g.slot] if g.slot in self.cols else []
            else:
                slots = [s for s in self.cols if s.kind is g.slot.kind and s.prep == g.slot.prep]
            acc = np.zeros(n, dtype=bool)
            for s in slots:
                vec = np.zeros(len(self.contents[s]) + 1, dtype=bool)
                vec[:-1] = [constraint_relaxes(g, c, h) for c in self.contents[s]]
                acc |= vec[self.cols[s][:n]]
            ok &= acc
        return [int(i) for i in self.ids[:n][ok]]


def find_most_similar(d: CnDefinition, dictionary: Dictionary,
                      h: SemanticHierarchy) -> CnDefinition | None:
    i = find_most_similar_id(d, dictionary, h)
    return None if i is None else dictionary[i]


# -- error testing -----------------------------------------------------------

def candidate_instances(d: CnDefinition, db: InstanceDb):
    """Instances that can possibly match ``d``, narrowed through the instance indexes."""
    keys = [("s", d.extract_from.kind, d.extract_from.prep)]
    if d.voice is not Voice.UNCONSTRAINED:
        keys.append(("v", d.voice))
    for c in d.constraints:
        kind, prep = c.slot.kind, c.slot.prep
        keys.append(("s", kind, prep))
        keys.extend(("w", kind, prep, t) for t in set(c.words))
        keys.extend(("h", kind, prep, x) for x in c.head)
        keys.extend(("m", kind, prep, x) for x in c.mods)
    return db.narrow(keys)


def error_rate(d: CnDefinition, db: InstanceDb, lex: Lexicon, h: SemanticHierarchy) -> ErrorReport:
    hits = errors = 0
    for inst in candidate_instances(d, db):
        for b in _target_buffers(d, inst, lex, h):
            if d.label.covers(b.label):
                hits += 1
            else:
                errors += 1
    return ErrorReport(hits, errors)


# -- the covering loop -------------------------------------------------------

def _role_key(role: BufferRole):
    return (_KIND_ORDER[role.kind], role.pp_index or 0)


def induce(db: InstanceDb, label: CnLabel, cfg: InductionConfig, lex: Lexicon,
           h: SemanticHierarchy, trace: list | None = None) -> Dictionary:
    """Induce a dictionary for ``label`` from the training instances in ``db``.

    When ``trace`` is a list, every proposed unification is appended to it as
    ``(definition, ErrorReport, accepted)``.
    """
    positives = sorted(
        db.positive_buffers(label),
        key=lambda p: (db.by_id[p[0]].sort_key(), _role_key(p[1])),
    )
    if cfg.shuffle:
        random.Random(cfg.seed).shuffle(positives)

    work = Dictionary()
    pending = [
        work.add(build_initial_definition(db.by_id[iid], role, label, lex, h))
        for iid, role in positives
    ]

    for start in pending:
        if start not in work:
            continue
        current = work.remove(start)
        tried: set[int] = set()
        while True:
            other = find_most_similar_id(current, work, h, exclude=tried)
            if other is None:
                break
            proposal = unify(current, work[other], h)
            report = error_rate(proposal, db, lex, h)
            accepted = report.rate <= cfg.tolerance
            if trace is not None:
                trace.append((proposal, report, accepted))
            if not accepted:
                if cfg.retry_next_similar:
                    tried.add(other)
                    continue
                break
            for i in covered_by(proposal, work, h):
                work.remove(i)
            current = proposal
        work.add(current)

    # Coverage is reported as correct training extractions, not the merge tally.
    return Dictionary(
        replace(d, coverage=error_rate(d, db, lex, h).hits) for d in work.definitions
    )


def filter_by_coverage(dictionary: Dictionary, min_coverage: int) -> Dictionary:
    if min_coverage < 1:
        raise ValueError("min_coverage must be at least 1")
    return Dictionary(d for d in dictionary.definitions if d.coverage >= min_coverage)


def coverage_histogram(dictionary: Dictionary) -> dict[str, int]:
    buckets = {">=10": 0, "3-9": 0, "2": 0, "1": 0}
    for d in dictionary.definitions:
        if d.coverage >= 10:
            buckets[">=10"] += 1
        elif d.coverage >= 3:
            buckets["3-9"] += 1
        elif d.coverage == 2:
            buckets["2"] += 1
        else:
            buckets["1"] += 1
    return buckets

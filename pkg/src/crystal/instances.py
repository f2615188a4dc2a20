"""Segmented clause instances and the verb-indexed instance database."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .semantic import Lexicon, SemanticHierarchy


class CorpusError(ValueError):
    """Malformed corpus input."""


class Kind(str, Enum):
    SUBJECT = "subject"
    VERB = "verb"
    DIRECT_OBJECT = "dobj"
    INDIRECT_OBJECT = "iobj"
    PP = "pp"


class Voice(str, Enum):
    ACTIVE = "active"
    PASSIVE = "passive"
    NONE = "none"
    UNCONSTRAINED = "any"


# Sentinel bucket key for the null verb.
NULL_VERB = "<NULL>"

_KIND_ORDER = {k: i for i, k in enumerate(Kind)}


@dataclass(frozen=True)
class CnLabel:
    """CN type and subtype, compared case-insensitively.

    ``subtype=None`` denotes the type-only label, which covers every subtype.
    """

    cn_type: str
    subtype: str | None = None

    def __post_init__(self):
        if not self.cn_type or not self.cn_type.strip():
            raise ValueError("CN type must be non-empty")
        if self.subtype is not None and not self.subtype.strip():
            raise ValueError("CN subtype must be non-empty")
        object.__setattr__(self, "cn_type", " ".join(self.cn_type.split()).lower())
        if self.subtype is not None:
            object.__setattr__(self, "subtype", " ".join(self.subtype.split()).lower())

    @classmethod
    def parse(cls, text: str) -> "CnLabel":
        """``"Sign or Symptom/absent"``; a missing subtype gives a type-only label."""
        cn_type, sep, subtype = text.partition("/")
        return cls(cn_type, subtype if sep and subtype.strip() else None)

    def covers(self, other: "CnLabel | None") -> bool:
        if other is None or other.cn_type != self.cn_type:
            return False
        return self.subtype is None or self.subtype == other.subtype

    def coarse(self) -> "CnLabel":
        return CnLabel(self.cn_type)

    def __str__(self):
        return self.cn_type if self.subtype is None else f"{self.cn_type}/{self.subtype}"

    def sort_key(self):
        return (self.cn_type, self.subtype or "")


class BufferRole(NamedTuple):
    kind: Kind
    pp_index: int | None = None

    def __str__(self):
        return f"pp#{self.pp_index}" if self.kind is Kind.PP else self.kind.value


class Slot(NamedTuple):
    """Buffer position as a definition sees it: PPs are named by preposition.

    ``occ`` distinguishes repeated prepositions within one instance.
    """

    kind: Kind
    prep: str | None = None
    occ: int = 0

    def __str__(self):
        if self.kind is Kind.PP:
            return f"pp:{self.prep}" + (f"#{self.occ}" if self.occ else "")
        return self.kind.value

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.prep or "", self.occ)


@dataclass(frozen=True)
class Buffer:
    role: BufferRole
    tokens: tuple[str, ...]
    heads: tuple[int, ...] = ()
    mods: tuple[int, ...] = ()
    prep: str | None = None
    label: CnLabel | None = None
    # Ancestor closures of head/modifier token classes, filled at load time.
    head_closure: frozenset[str] | None = field(default=None, compare=False, repr=False)
    mod_closure: frozenset[str] | None = field(default=None, compare=False, repr=False)

    def text(self) -> str:
        words = " ".join(self.tokens)
        return f"{self.prep} {words}".strip() if self.prep else words


@dataclass(frozen=True)
class Instance:
    doc_id: str
    instance_id: str
    voice: Voice
    buffers: tuple[Buffer, ...]
    slots: tuple[Slot, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.slots or len(self.slots) != len(self.buffers):
            object.__setattr__(self, "slots", _assign_slots(self.buffers))

    @property
    def verb_head(self) -> str:
        for b in self.buffers:
            if b.role.kind is Kind.VERB and b.tokens:
                return b.tokens[-1]
        return NULL_VERB

    def buffer(self, role: BufferRole) -> Buffer | None:
        for b in self.buffers:
            if b.role == role:
                return b
        return None

    def sort_key(self):
        return (self.doc_id, self.instance_id)


def _assign_slots(buffers) -> tuple[Slot, ...]:
    seen: dict[str, int] = defaultdict(int)
    slots = []
    for b in buffers:
        if b.role.kind is Kind.PP:
            slots.append(Slot(Kind.PP, b.prep, seen[b.prep]))
            seen[b.prep] += 1
        else:
            slots.append(Slot(b.role.kind))
    return tuple(slots)


def _buffer_order(b: Buffer):
    return (_KIND_ORDER[b.role.kind], b.role.pp_index or 0)


def token_classes(tokens, indices, lex: Lexicon) -> frozenset[str]:
    out: set[str] = set()
    for i in indices:
        out |= lex.classes_of(tokens[i])
    return frozenset(out)


def head_classes(b: Buffer, lex: Lexicon, h: SemanticHierarchy) -> frozenset[str]:
    """Union of lexicon classes over the head tokens of ``b``."""
    return token_classes(b.tokens, b.heads, lex) - {h.root}


def mod_classes(b: Buffer, lex: Lexicon, h: SemanticHierarchy) -> frozenset[str]:
    return token_classes(b.tokens, b.mods, lex) - {h.root}


def closures(b: Buffer, lex: Lexicon, h: SemanticHierarchy):
    """Every class some head (resp. modifier) token is an instance of."""
    def close(classes):
        acc: set[str] = set()
        for c in classes:
            acc |= h.ancestors(c)
        acc.discard(h.root)
        return frozenset(acc)
    return close(head_classes(b, lex, h)), close(mod_classes(b, lex, h))


class InstanceDb:
    """All instances, indexed by verb head and label.

    A secondary inverted index maps (buffer slot, word or class) features to
    instance positions so that rule testing only visits instances that can match.
    """

    def __init__(self, instances, lex: Lexicon | None = None, h: SemanticHierarchy | None = None):
        self.lexicon = lex
        self.hierarchy = h
        self.instances: list[Instance] = []
        self.by_id: dict[str, Instance] = {}
        self.verb_index: dict[str, list[str]] = defaultdict(list)
        self._postings: dict[tuple, list[int]] | None = None
        self.label_index: dict[CnLabel, list[tuple[str, BufferRole]]] = defaultdict(list)
        for inst in instances:
            self._add(inst)

    def _add(self, inst: Instance) -> None:
        if inst.instance_id in self.by_id:
            raise CorpusError(f"duplicate instance id {inst.instance_id!r}")
        if self.lexicon is not None and self.hierarchy is not None:
            bufs = []
            for b in inst.buffers:
                hc, mc = closures(b, self.lexicon, self.hierarchy)
                bufs.append(Buffer(b.role, b.tokens, b.heads, b.mods, b.prep, b.label, hc, mc))
            inst = Instance(inst.doc_id, inst.instance_id, inst.voice, tuple(bufs), inst.slots)
        self.instances.append(inst)
        self.by_id[inst.instance_id] = inst
        self.verb_index[inst.verb_head].append(inst.instance_id)
        self._postings = None
        for b in inst.buffers:
            if b.label is not None:
                self.label_index[b.label].append((inst.instance_id, b.role))

    def __len__(self) -> int:
        return len(self.instances)

    def _build_postings(self) -> dict[tuple, list[int]]:
        post: dict[tuple, list[int]] = defaultdict(list)
        for pos, inst in enumerate(self.instances):
            keys = {("v", inst.voice)}
            for b, slot in zip(inst.buffers, inst.slots):
                kind, prep = slot.kind, slot.prep
                keys.add(("s", kind, prep))
                keys.update(("w", kind, prep, t) for t in b.tokens)
                if b.head_closure is not None:
                    keys.update(("h", kind, prep, c) for c in b.head_closure)
                    keys.update(("m", kind, prep, c) for c in b.mod_closure)
            for k in keys:
                post[k].append(pos)
        return dict(post)

    def narrow(self, keys) -> list[Instance]:
        """Instances having every feature in ``keys`` (a superset is fine to return)."""
        if self._postings is None:
            self._postings = self._build_postings()
        lists = []
        for k in keys:
            if k[0] in ("h", "m") and self.lexicon is None:
                continue
            lst = self._postings.get(k)
            if not lst:
                return []
            lists.append(lst)
        if not lists:
            return list(self.instances)
        lists.sort(key=len)
        picked = lists[0]
        if len(lists) > 1 and len(picked) > 64:
            other = set(lists[1])
            picked = [i for i in picked if i in other]
        return [self.instances[i] for i in picked]

    def __iter__(self):
        return iter(self.instances)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InstanceDb) and self.instances == other.instances

    __hash__ = object.__hash__

    @property
    def doc_ids(self) -> list[str]:
        return list(dict.fromkeys(i.doc_id for i in self.instances))

    @property
    def labels(self) -> list[CnLabel]:
        return sorted(self.label_index, key=CnLabel.sort_key)

    def query_by_verb(self, verb: str | None) -> list[str]:
        key = NULL_VERB if verb is None else verb.upper()
        return list(self.verb_index.get(key, ()))

    def positive_buffers(self, label: CnLabel) -> list[tuple[str, BufferRole]]:
        """Labeled buffers carrying ``label`` (any subtype for a type-only label)."""
        if label.subtype is not None:
            return list(self.label_index.get(label, ()))
        out = []
        for inst in self.instances:
            for b in inst.buffers:
                if label.covers(b.label):
                    out.append((inst.instance_id, b.role))
        return out

    def count_labeled(self, label: CnLabel) -> int:
        return sum(1 for inst in self.instances for b in inst.buffers if label.covers(b.label))

    def subset(self, doc_ids) -> "InstanceDb":
        keep = set(doc_ids)
        return InstanceDb((i for i in self.instances if i.doc_id in keep), self.lexicon, self.hierarchy)

    def relabel(self, fn) -> "InstanceDb":
        """Copy with every buffer label passed through ``fn``."""
        out = []
        for inst in self.instances:
            bufs = tuple(
                Buffer(b.role, b.tokens, b.heads, b.mods, b.prep,
                       fn(b.label) if b.label is not None else None,
                       b.head_closure, b.mod_closure)
                for b in inst.buffers
            )
            out.append(Instance(inst.doc_id, inst.instance_id, inst.voice, bufs, inst.slots))
        return InstanceDb(out, self.lexicon, self.hierarchy)


def query_by_verb(db: InstanceDb, verb: str | None) -> list[str]:
    return db.query_by_verb(verb)


def positive_buffers(db: InstanceDb, label: CnLabel) -> list[tuple[str, BufferRole]]:
    return db.positive_buffers(label)


# -- corpus file format ------------------------------------------------------

def _parse_buffer(raw: dict, where: str) -> Buffer:
    try:
        kind = Kind(raw["role"])
    except (KeyError, ValueError):
        raise CorpusError(f"{where}: bad or missing buffer role {raw.get('role')!r}") from None
    tokens = raw.get("tokens", [])
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusError(f"{where}: tokens must be a list of strings")
    tokens = tuple(t.upper() for t in tokens)
    heads = tuple(raw.get("heads", ()))
    mods = tuple(raw.get("mods", ()))
    for idx in heads + mods:
        if not isinstance(idx, int) or not 0 <= idx < len(tokens):
            raise CorpusError(f"{where}: token index {idx!r} out of range")
    if set(heads) & set(mods):
        raise CorpusError(f"{where}: head and modifier indices overlap")
    prep = raw.get("prep")
    pp_index = None
    if kind is Kind.PP:
        if not prep:
            raise CorpusError(f"{where}: PP buffer missing preposition")
        prep = prep.upper()
        pp_index = raw.get("pp_index")
        if not isinstance(pp_index, int):
            raise CorpusError(f"{where}: PP buffer missing pp_index")
    elif prep:
        raise CorpusError(f"{where}: preposition on a non-PP buffer")
    label = None
    if raw.get("label") is not None:
        if kind is Kind.VERB:
            raise CorpusError(f"{where}: verb buffers cannot carry labels")
        lab = raw["label"]
        try:
            label = CnLabel(lab.get("type", ""), lab.get("subtype", ""))
        except (ValueError, AttributeError) as e:
            raise CorpusError(f"{where}: bad label: {e}") from None
    return Buffer(BufferRole(kind, pp_index), tokens, heads, mods, prep, label)


def _parse_instance(doc_id: str, raw: dict) -> Instance:
    iid = raw.get("instance_id")
    if not isinstance(iid, str) or not iid:
        raise CorpusError(f"document {doc_id!r}: instance without instance_id")
    where = f"instance {iid!r}"
    try:
        voice = Voice(raw.get("voice", "none"))
    except ValueError:
        raise CorpusError(f"{where}: bad voice {raw.get('voice')!r}") from None
    if voice is Voice.UNCONSTRAINED:
        raise CorpusError(f"{where}: instances need a concrete voice")
    buffers = [_parse_buffer(b, where) for b in raw.get("buffers", [])]
    if not buffers:
        raise CorpusError(f"{where}: no buffers")
    kinds = [b.role.kind for b in buffers if b.role.kind is not Kind.PP]
    if len(kinds) != len(set(kinds)):
        raise CorpusError(f"{where}: repeated non-PP buffer role")
    pp = sorted(b.role.pp_index for b in buffers if b.role.kind is Kind.PP)
    if pp != list(range(len(pp))):
        raise CorpusError(f"{where}: PP ordinals must be contiguous from 0")
    buffers.sort(key=_buffer_order)
    has_verb = any(b.role.kind is Kind.VERB and b.tokens for b in buffers)
    if has_verb == (voice is Voice.NONE):
        raise CorpusError(f"{where}: voice 'none' iff the verb buffer is absent or empty")
    return Instance(doc_id, iid, voice, tuple(buffers))


def parse_corpus(source: str) -> list[Instance]:
    try:
        docs = json.loads(source) if source.strip() else []
    except json.JSONDecodeError as e:
        raise CorpusError(f"corpus is not valid JSON: {e}") from None
    if not isinstance(docs, list):
        raise CorpusError("corpus must be a JSON array of documents")
    out = []
    for doc in docs:
        if not isinstance(doc, dict) or not isinstance(doc.get("doc_id"), str):
            raise CorpusError("document without doc_id")
        for raw in doc.get("instances", []):
            if not isinstance(raw, dict):
                raise CorpusError(f"document {doc['doc_id']!r}: malformed instance record")
            out.append(_parse_instance(doc["doc_id"], raw))
    return out


def load_corpus(source: str, lex: Lexicon, h: SemanticHierarchy) -> InstanceDb:
    return InstanceDb(parse_corpus(source), lex, h)


def buffer_to_json(b: Buffer) -> dict:
    out: dict = {"role": b.role.kind.value}
    if b.role.kind is Kind.PP:
        out["pp_index"] = b.role.pp_index
        out["prep"] = b.prep
    out["tokens"] = list(b.tokens)
    out["heads"] = list(b.heads)
    out["mods"] = list(b.mods)
    if b.label is not None:
        out["label"] = {"type": b.label.cn_type, "subtype": b.label.subtype}
    return out


def corpus_to_json(instances) -> list[dict]:
    docs: dict[str, list] = {}
    for inst in instances:
        docs.setdefault(inst.doc_id, []).append({
            "instance_id": inst.instance_id,
            "voice": inst.voice.value,
            "buffers": [buffer_to_json(b) for b in inst.buffers],
        })
    return [{"doc_id": d, "instances": insts} for d, insts in docs.items()]


def dump_corpus(instances) -> str:
    return json.dumps(corpus_to_json(instances), indent=1) + "\n"

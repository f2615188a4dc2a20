"""CN definitions: constraint structure, matching, extraction and subsumption."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .instances import (
    Buffer, BufferRole, CnLabel, Instance, Kind, NULL_VERB, Slot, Voice, closures,
)
from .semantic import Lexicon, SemanticHierarchy


def contains_run(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    """True when ``needle`` occurs as a contiguous run inside ``haystack``."""
    n = len(needle)
    if n == 0:
        return True
    if n > len(haystack):
        return False
    first = needle[0]
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and haystack[i:i + n] == needle:
            return True
    return False


@dataclass(frozen=True)
class BufferConstraints:
    slot: Slot
    words: tuple[str, ...] = ()
    head: frozenset[str] = frozenset()
    mods: frozenset[str] = frozenset()

    @property
    def prep(self) -> str | None:
        return self.slot.prep

    def is_empty(self) -> bool:
        # A PP entry still constrains the preposition.
        return not (self.words or self.head or self.mods or self.slot.kind is Kind.PP)


@dataclass(frozen=True)
class CnDefinition:
    label: CnLabel
    extract_from: Slot
    voice: Voice
    constraints: tuple[BufferConstraints, ...] = ()
    coverage: int = 1
    provenance: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        cons = tuple(sorted((c for c in self.constraints if not c.is_empty()),
                            key=lambda c: c.slot.sort_key()))
        object.__setattr__(self, "constraints", cons)

    def constraint(self, slot: Slot) -> BufferConstraints | None:
        for c in self.constraints:
            if c.slot == slot:
                return c
        return None

    @property
    def verb_words(self) -> tuple[str, ...]:
        c = self.constraint(Slot(Kind.VERB))
        return c.words if c else ()

    @property
    def verb_key(self) -> str | None:
        """Verb bucket: the constrained verb head, ``NULL_VERB``, or ``None`` for any verb."""
        words = self.verb_words
        if words:
            return words[-1]
        if self.voice is Voice.NONE:
            return NULL_VERB
        return None

    def content(self):
        """Everything except coverage/provenance bookkeeping."""
        return (self.label, self.extract_from, self.voice, self.constraints)

    def first_provenance(self) -> str:
        return min(self.provenance) if self.provenance else ""


class Extraction(NamedTuple):
    doc_id: str
    instance_id: str
    role: BufferRole
    label: CnLabel


def _closures_of(b: Buffer, lex, h):
    if b.head_closure is not None and b.mod_closure is not None:
        return b.head_closure, b.mod_closure
    return closures(b, lex, h)


def _satisfies(c: BufferConstraints, b: Buffer, lex, h) -> bool:
    if c.words and not contains_run(b.tokens, c.words):
        return False
    if c.head or c.mods:
        hc, mc = _closures_of(b, lex, h)
        if not c.head <= hc or not c.mods <= mc:
            return False
    return True


def _candidates(inst: Instance, slot: Slot):
    """Buffers of ``inst`` that can fill ``slot``, lowest PP ordinal first."""
    if slot.kind is Kind.PP:
        return [b for b in inst.buffers if b.role.kind is Kind.PP and b.prep == slot.prep]
    return [b for b in inst.buffers if b.role.kind is slot.kind]


def _target_buffers(d: CnDefinition, inst: Instance, lex, h) -> list[Buffer]:
    """Every buffer ``d`` extracts from ``inst``, lowest PP ordinal first.

    All constraints must be witnessed by some buffer; the extraction entry is
    then checked against each candidate extraction buffer separately.
    """
    if d.voice is not Voice.UNCONSTRAINED and d.voice is not inst.voice:
        return []
    for c in d.constraints:
        if not any(_satisfies(c, b, lex, h) for b in _candidates(inst, c.slot)):
            return []
    ec = d.constraint(d.extract_from)
    return [b for b in _candidates(inst, d.extract_from)
            if ec is None or _satisfies(ec, b, lex, h)]


def _target_buffer(d: CnDefinition, inst: Instance, lex, h) -> Buffer | None:
    found = _target_buffers(d, inst, lex, h)
    return found[0] if found else None


def matches(d: CnDefinition, inst: Instance, lex: Lexicon, h: SemanticHierarchy) -> bool:
    return _target_buffer(d, inst, lex, h) is not None


def extract(d: CnDefinition, inst: Instance, lex: Lexicon, h: SemanticHierarchy) -> Extraction | None:
    """The extraction from the lowest-ordinal satisfying buffer, if ``d`` matches."""
    b = _target_buffer(d, inst, lex, h)
    if b is None:
        return None
    return Extraction(inst.doc_id, inst.instance_id, b.role, d.label)


def extract_all(d: CnDefinition, inst: Instance, lex: Lexicon,
                h: SemanticHierarchy) -> list[Extraction]:
    """One extraction per satisfying buffer; differs from :func:`extract` only when
    several PPs share the extraction preposition."""
    return [Extraction(inst.doc_id, inst.instance_id, b.role, d.label)
            for b in _target_buffers(d, inst, lex, h)]


def _classes_relax(general: frozenset[str], specific: frozenset[str], h) -> bool:
    return all(any(h.is_ancestor_or_equal(g, s) for s in specific) for g in general)


def constraint_relaxes(g: BufferConstraints, s: BufferConstraints, h) -> bool:
    """``g`` accepts every buffer ``s`` accepts."""
    if g.slot.kind is not s.slot.kind or g.slot.prep != s.slot.prep:
        return False
    if g.words and not contains_run(s.words, g.words):
        return False
    return _classes_relax(g.head, s.head, h) and _classes_relax(g.mods, s.mods, h)


def subsumes(general: CnDefinition, specific: CnDefinition, h: SemanticHierarchy) -> bool:
    if general.label != specific.label or general.extract_from != specific.extract_from:
        return False
    if general.voice is not Voice.UNCONSTRAINED and general.voice is not specific.voice:
        return False
    for g in general.constraints:
        if g.slot == general.extract_from:
            # The extraction entry must line up with the extraction entry.
            s = specific.constraint(specific.extract_from)
            if s is None or not constraint_relaxes(g, s, h):
                return False
            continue
        if not any(constraint_relaxes(g, s, h) for s in specific.constraints):
            return False
    return True


# -- dictionary file format --------------------------------------------------

def _slot_to_json(slot: Slot) -> dict:
    out: dict = {"role": slot.kind.value}
    if slot.kind is Kind.PP:
        out["prep"] = slot.prep
        out["occ"] = slot.occ
    return out


def _slot_from_json(raw: dict) -> Slot:
    kind = Kind(raw["role"])
    if kind is Kind.PP:
        return Slot(kind, raw["prep"].upper(), int(raw.get("occ", 0)))
    return Slot(kind)


def definition_to_json(d: CnDefinition) -> dict:
    return {
        "label": {"type": d.label.cn_type, "subtype": d.label.subtype},
        "extract_from": _slot_to_json(d.extract_from),
        "voice": d.voice.value,
        "constraints": [
            {
                **_slot_to_json(c.slot),
                "words": list(c.words),
                "head": sorted(c.head),
                "mods": sorted(c.mods),
            }
            for c in d.constraints
        ],
        "coverage": d.coverage,
        "provenance": sorted(d.provenance),
    }


def definition_from_json(raw: dict) -> CnDefinition:
    lab = raw["label"]
    return CnDefinition(
        label=CnLabel(lab["type"], lab.get("subtype")),
        extract_from=_slot_from_json(raw["extract_from"]),
        voice=Voice(raw["voice"]),
        constraints=tuple(
            BufferConstraints(
                _slot_from_json(c),
                tuple(w.upper() for w in c.get("words", ())),
                frozenset(c.get("head", ())),
                frozenset(c.get("mods", ())),
            )
            for c in raw.get("constraints", ())
        ),
        coverage=int(raw.get("coverage", 1)),
        provenance=frozenset(raw.get("provenance", ())),
    )


def dump_definitions(defs) -> str:
    return json.dumps({"definitions": [definition_to_json(d) for d in defs]}, indent=1) + "\n"


def load_definitions(source: str) -> list[CnDefinition]:
    data = json.loads(source) if source.strip() else {"definitions": []}
    try:
        return [definition_from_json(d) for d in data["definitions"]]
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ValueError(f"malformed dictionary file: {e!r}") from None


def validate_classes(d: CnDefinition, h: SemanticHierarchy) -> None:
    for c in d.constraints:
        for cls in c.head | c.mods:
            if cls not in h:
                raise ValueError(f"definition references unknown class {cls!r}")


def with_coverage(d: CnDefinition, coverage: int) -> CnDefinition:
    return replace(d, coverage=coverage)

"""Synthetic clause corpora generated from hidden extraction rules.

Every labeled buffer is produced by a hidden rule; distractors are near
misses that break exactly one of a rule's constraints and stay unlabeled
(unless label noise flips them).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .definition import BufferConstraints, CnDefinition
from .instances import (
    Buffer, BufferRole, CnLabel, Instance, InstanceDb, Kind, Slot, Voice,
)
from .semantic import Lexicon, SemanticHierarchy

TOY_HIERARCHY = {
    "Root Class": None,
    "Finding": "Root Class",
    "Sign or Symptom": "Finding",
    "Laboratory or Test Result": "Finding",
    "Pathologic Function": "Root Class",
    "Disease or Syndrome": "Pathologic Function",
    "Acquired Abnormality": "Pathologic Function",
    "Anatomy": "Root Class",
    "Body Location or Region": "Anatomy",
    "Body Part or Organ": "Anatomy",
    "Group": "Root Class",
    "Patient or Disabled Group": "Group",
    "Chemical": "Root Class",
    "Pharmacologic Substance": "Chemical",
}

TOY_WORDS = {
    "Sign or Symptom": ["NAUSEA", "FEVER", "CHILLS", "COUGH", "DYSPNEA", "PAIN",
                        "VOMITING", "RASH", "EDEMA", "HEADACHE", "MURMUR", "DIZZINESS"],
    "Laboratory or Test Result": ["HYPOKALEMIA", "ANEMIA", "LEUKOCYTOSIS",
                                  "HYPERGLYCEMIA", "EFFUSION", "MASS"],
    "Disease or Syndrome": ["ASTHMA", "PNEUMONIA", "DIABETES", "HYPERTENSION",
                            "CANCER", "SEPSIS", "CARCINOMA", "LYMPHOMA"],
    "Acquired Abnormality": ["HERNIA", "CYST", "POLYP", "ULCER"],
    "Body Location or Region": ["ABDOMEN", "CHEST", "ANKLES", "BACK", "FLANK"],
    "Body Part or Organ": ["LARYNGEAL", "LUNG", "HEPATIC", "RENAL", "GASTRIC", "COLON"],
    "Patient or Disabled Group": ["PATIENT", "MAN", "WOMAN", "GENTLEMAN"],
    "Pharmacologic Substance": ["ASPIRIN", "INSULIN", "HEPARIN", "LASIX", "COUMADIN"],
    "Root Class": ["UNREMARKABLE", "EXCEPTION", "HISTORY", "RECURRENCE"],
}

PLAIN_MODS = ["MILD", "SEVERE", "INTERMITTENT", "CHRONIC", "ACUTE", "PERSISTENT"]
DETERMINERS = ["A", "THE", "ANY", "SOME"]
SUBJECTS = [("THE", "PATIENT"), ("PATIENT",), ("SHE",), ("HE",), ("THE", "MAN"),
            ("THIS", "WOMAN"), ("THE", "GENTLEMAN")]
NEUTRAL_PPS = [("IN", ("THE", "EMERGENCY", "ROOM")), ("ON", ("ADMISSION",)),
               ("FOR", ("TWO", "DAYS")), ("AT", ("HOME",)), ("ON", ("EXAMINATION",)),
               ("FOR", ("SEVERAL", "WEEKS"))]
NEUTRAL_OBJECTS = [("THE", "PROCEDURE"), ("A", "REGULAR", "DIET"), ("WALKING",)]


@dataclass(frozen=True)
class HiddenRule:
    """A generator rule; ``verbs`` empty means the null verb."""

    name: str
    label: CnLabel
    extract: Kind
    head_class: str
    verbs: tuple[tuple[str, ...], ...] = ()
    voice: Voice = Voice.ACTIVE
    prep: str | None = None
    required: tuple[str, ...] = ()
    mod_class: str | None = None
    near_classes: tuple[str, ...] = ()
    distractor_verbs: tuple[tuple[str, ...], ...] = ()
    # Gold verb constraint; None derives it from the shared verb head.
    gold_verb: tuple[str, ...] | None = None

    def gold_definition(self) -> CnDefinition:
        slot = Slot(Kind.PP, self.prep) if self.extract is Kind.PP else Slot(self.extract)
        cons = [BufferConstraints(
            slot, self.required,
            frozenset([self.head_class]),
            frozenset([self.mod_class]) if self.mod_class else frozenset(),
        )]
        verb = self.gold_verb
        if verb is None:
            heads = {v[-1] for v in self.verbs}
            verb = (heads.pop(),) if len(heads) == 1 else ()
        if verb:
            cons.append(BufferConstraints(Slot(Kind.VERB), verb))
        return CnDefinition(self.label, slot, Voice.NONE if not self.verbs else self.voice,
                            tuple(cons), coverage=0, provenance=frozenset([self.name]))


SOS_ABSENT = CnLabel("Sign or Symptom", "absent")
SOS_PRESENT = CnLabel("Sign or Symptom", "present")
DX_PREEXISTING = CnLabel("Diagnosis", "pre-existing")
DX_PAST = CnLabel("Diagnosis", "past")

DEFAULT_RULES = (
    HiddenRule(
        "denies-symptom", SOS_ABSENT, Kind.DIRECT_OBJECT, "Sign or Symptom",
        verbs=(("DENIES",),),
        near_classes=("Disease or Syndrome", "Pharmacologic Substance"),
        distractor_verbs=(("REPORTS",), ("COMPLAINS",), ("HAS",)),
    ),
    HiddenRule(
        "revealed-finding", SOS_PRESENT, Kind.DIRECT_OBJECT, "Finding",
        verbs=(("REVEALED",),),
        required=("A",),
        near_classes=("Disease or Syndrome", "Body Part or Organ"),
        distractor_verbs=(("EXCLUDED",), ("SHOWED",)),
    ),
    HiddenRule(
        "diagnosed-with-recurrence", DX_PREEXISTING, Kind.PP, "Disease or Syndrome",
        verbs=(("WAS", "DIAGNOSED"), ("HAS", "BEEN", "DIAGNOSED"), ("IS", "DIAGNOSED")),
        voice=Voice.PASSIVE, prep="WITH",
        required=("RECURRENCE", "OF"), mod_class="Body Part or Organ",
        near_classes=("Sign or Symptom", "Acquired Abnormality"),
        distractor_verbs=(("WAS", "TREATED"), ("WAS", "ADMITTED")),
    ),
    HiddenRule(
        "history-of-disease", DX_PAST, Kind.SUBJECT, "Pathologic Function",
        required=("HISTORY", "OF"),
        near_classes=("Pharmacologic Substance", "Sign or Symptom"),
    ),
    HiddenRule(
        "without-symptom", SOS_ABSENT, Kind.PP, "Sign or Symptom",
        verbs=(("PRESENTED",), ("TOLERATED",), ("AMBULATES",), ("RESTS",)),
        prep="WITHOUT",
        near_classes=("Pharmacologic Substance", "Body Location or Region"),
        gold_verb=(),
    ),
)


@dataclass(frozen=True)
class SyntheticSpec:
    hidden_rules: tuple[HiddenRule, ...] = DEFAULT_RULES
    n_instances: int = 200
    distractor_fraction: float = 0.3
    label_noise: float = 0.0
    seed: int = 0
    doc_size: int = 10

    def __post_init__(self):
        for name in ("distractor_fraction", "label_noise"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.n_instances < 0 or self.doc_size < 1:
            raise ValueError("n_instances must be >= 0 and doc_size >= 1")
        if self.n_instances and not self.hidden_rules:
            raise ValueError("need at least one hidden rule")


@dataclass
class SyntheticCorpus:
    db: InstanceDb
    hierarchy: SemanticHierarchy
    lexicon: Lexicon
    gold: list[CnDefinition] = field(default_factory=list)


def toy_hierarchy() -> SemanticHierarchy:
    return SemanticHierarchy(TOY_HIERARCHY)


def toy_lexicon(h: SemanticHierarchy | None = None) -> Lexicon:
    h = h or toy_hierarchy()
    entries = {}
    for cls, words in TOY_WORDS.items():
        for w in words:
            entries.setdefault(w, set()).add(cls)
    return Lexicon(entries, h)


def _words_under(cls: str, lex: Lexicon, h: SemanticHierarchy) -> list[str]:
    return sorted(w for w, cs in lex.entries.items()
                  if cs and all(h.is_ancestor_or_equal(cls, c) for c in cs))


class _Builder:
    def __init__(self, rng: random.Random, lex: Lexicon, h: SemanticHierarchy):
        self.rng = rng
        self.lex = lex
        self.h = h
        self._pool: dict[str, list[str]] = {}

    def words(self, cls: str) -> list[str]:
        if cls not in self._pool:
            self._pool[cls] = _words_under(cls, self.lex, self.h)
        return self._pool[cls]

    def noun_phrase(self, head_cls, required=(), mod_cls=None, drop_required=False,
                    plain_mod=False):
        """Tokens plus head/modifier indices: [det] [required] [mod] head."""
        rng = self.rng
        tokens, mods = [], []
        # A required leading determiner must not reappear by chance in a near miss.
        if not (required and required[0] in DETERMINERS) and rng.random() < 0.5:
            tokens.append(rng.choice(DETERMINERS))
        if required and not drop_required:
            tokens.extend(required)
        if mod_cls is not None:
            mods.append(len(tokens))
            tokens.append(rng.choice(self.words(mod_cls)))
        elif plain_mod or rng.random() < 0.4:
            mods.append(len(tokens))
            tokens.append(rng.choice(PLAIN_MODS))
        heads = [len(tokens)]
        tokens.append(rng.choice(self.words(head_cls)))
        return tuple(tokens), tuple(heads), tuple(mods)


def _instance(rule: HiddenRule, b: _Builder, doc_id: str, iid: str,
              break_kind: str | None, labeled: bool) -> Instance:
    rng = b.rng
    head_cls = rule.head_class
    verb = rng.choice(rule.verbs) if rule.verbs else ()
    drop_required = False
    mod_cls = rule.mod_class
    if break_kind == "class":
        head_cls = rng.choice(rule.near_classes)
    elif break_kind == "verb":
        verb = rng.choice(rule.distractor_verbs)
    elif break_kind == "word":
        drop_required = True
    elif break_kind == "mod":
        mod_cls = None

    tokens, heads, mods = b.noun_phrase(head_cls, rule.required, mod_cls, drop_required,
                                        plain_mod=break_kind == "mod")
    label = rule.label if labeled else None
    buffers = []
    if rule.verbs:
        if rule.extract is not Kind.SUBJECT and (rule.voice is Voice.ACTIVE or rng.random() < 0.8):
            subj = rng.choice(SUBJECTS)
            buffers.append(Buffer(BufferRole(Kind.SUBJECT), subj,
                                  (len(subj) - 1,), ()))
        buffers.append(Buffer(BufferRole(Kind.VERB), verb))
    pp_index = 0
    if rule.extract is Kind.PP:
        if rule.prep == "WITHOUT" and rng.random() < 0.5:
            obj = rng.choice(NEUTRAL_OBJECTS)
            buffers.append(Buffer(BufferRole(Kind.DIRECT_OBJECT), obj, (len(obj) - 1,), ()))
        buffers.append(Buffer(BufferRole(Kind.PP, pp_index), tokens, heads, mods,
                              rule.prep, label))
        pp_index += 1
    else:
        buffers.append(Buffer(BufferRole(rule.extract), tokens, heads, mods, None, label))
    if rng.random() < 0.4:
        prep, np_tokens = rng.choice(NEUTRAL_PPS)
        buffers.append(Buffer(BufferRole(Kind.PP, pp_index), np_tokens,
                              (len(np_tokens) - 1,), (), prep))
    order = {k: i for i, k in enumerate(Kind)}
    buffers.sort(key=lambda x: (order[x.role.kind], x.role.pp_index or 0))
    voice = rule.voice if rule.verbs else Voice.NONE
    return Instance(doc_id, iid, voice, tuple(buffers))


def _break_kinds(rule: HiddenRule) -> list[str]:
    kinds = []
    if rule.near_classes:
        kinds.append("class")
    if rule.verbs and rule.distractor_verbs:
        kinds.append("verb")
    if rule.required:
        kinds.append("word")
    if rule.mod_class:
        kinds.append("mod")
    return kinds


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    h = toy_hierarchy()
    lex = toy_lexicon(h)
    rng = random.Random(spec.seed)
    builder = _Builder(rng, lex, h)
    rules = list(spec.hidden_rules)
    instances = []
    for n in range(spec.n_instances):
        rule = rules[n % len(rules)]
        doc_id = f"D{n // spec.doc_size:05d}"
        iid = f"{doc_id}.{n % spec.doc_size:03d}"
        kinds = _break_kinds(rule)
        break_kind = None
        if kinds and rng.random() < spec.distractor_fraction:
            break_kind = rng.choice(kinds)
        labeled = break_kind is None
        if rng.random() < spec.label_noise:
            labeled = not labeled
        instances.append(_instance(rule, builder, doc_id, iid, break_kind, labeled))
    db = InstanceDb(instances, lex, h)
    return SyntheticCorpus(db, h, lex, [r.gold_definition() for r in rules])

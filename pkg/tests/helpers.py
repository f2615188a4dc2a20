"""Shared fixtures: a small medical hierarchy, a lexicon, and corpus builders."""

import json

from crystal.instances import load_corpus
from crystal.semantic import load_hierarchy, load_lexicon

HIERARCHY_TSV = """\
# class<TAB>parent
Root Class
Finding\tRoot Class
Sign or Symptom\tFinding
Laboratory or Test Result\tFinding
Pathologic Function\tRoot Class
Disease or Syndrome\tPathologic Function
Acquired Abnormality\tPathologic Function
Anatomy\tRoot Class
Body Location or Region\tAnatomy
Body Part or Organ\tAnatomy
Group\tRoot Class
Patient or Disabled Group\tGroup
"""

LEXICON_TSV = """\
PATIENT\tPatient or Disabled Group
NAUSEA\tSign or Symptom
PAIN\tSign or Symptom
HEADACHE\tSign or Symptom
BREATH\tSign or Symptom
SWOLLEN\tSign or Symptom
ANKLES\tBody Location or Region
ASTHMA\tDisease or Syndrome
CANCER\tDisease or Syndrome
ULCER\tDisease or Syndrome;Acquired Abnormality
LARYNGEAL\tBody Part or Organ
GLUCOSE\tLaboratory or Test Result
EXCEPTION\tRoot Class
MILD\tRoot Class
UNREMARKABLE\tRoot Class
HISTORY\tRoot Class
RECURRENCE\tRoot Class
"""


def hierarchy():
    return load_hierarchy(HIERARCHY_TSV)


def lexicon(h=None):
    return load_lexicon(LEXICON_TSV, h or hierarchy())


def buf(role, text="", heads="", mods="", prep=None, pp=None, label=None):
    """Buffer record; ``heads``/``mods`` name tokens by word (first occurrence)."""
    tokens = text.split()

    def idx(words):
        return [tokens.index(w) for w in words.split()]
    out = {"role": role, "tokens": tokens, "heads": idx(heads), "mods": idx(mods)}
    if role == "pp":
        out["prep"] = prep
        out["pp_index"] = pp if pp is not None else 0
    if label:
        t, _, s = label.partition("/")
        out["label"] = {"type": t, "subtype": s}
    return out


def inst(iid, voice, *buffers):
    return {"instance_id": iid, "voice": voice, "buffers": list(buffers)}


def corpus(*docs):
    """``docs`` are (doc_id, [instance records]) pairs."""
    return json.dumps([{"doc_id": d, "instances": list(xs)} for d, xs in docs])


def db_of(*docs, h=None, lex=None):
    h = h or hierarchy()
    lex = lex or lexicon(h)
    return load_corpus(corpus(*docs), lex, h)


# Two clauses from the opening worked example; only the first is annotated.
NAUSEA = inst(
    "S1", "active",
    buf("subject", "THE PATIENT", heads="PATIENT"),
    buf("verb", "DENIES"),
    buf("dobj", "ANY EPISODES OF NAUSEA", heads="NAUSEA", label="Sign or Symptom/absent"),
)
ASTHMA = inst(
    "S2", "active",
    buf("subject", "PATIENT", heads="PATIENT"),
    buf("verb", "DENIES"),
    buf("dobj", "A HISTORY OF ASTHMA", heads="ASTHMA", mods="HISTORY"),
)

# Verbless fragment with one complex prepositional phrase.
ANKLES = inst(
    "F1", "none",
    buf("subject", "UNREMARKABLE", heads="UNREMARKABLE"),
    buf("pp", "THE EXCEPTION OF MILD SHORTNESS OF BREATH AND CHRONICALLY SWOLLEN ANKLES",
        heads="EXCEPTION BREATH ANKLES", mods="MILD SHORTNESS CHRONICALLY SWOLLEN",
        prep="WITH", label="Sign or Symptom/present"),
)

RECURRENCE = inst(
    "R1", "passive",
    buf("subject", "THE PATIENT", heads="PATIENT"),
    buf("verb", "WAS DIAGNOSED"),
    buf("pp", "A RECURRENCE OF LARYNGEAL CANCER", heads="CANCER",
        mods="RECURRENCE LARYNGEAL", prep="WITH", label="Diagnosis/pre-existing"),
)

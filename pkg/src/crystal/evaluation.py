"""Recall/precision scoring, random document splits, tolerance sweeps and learning curves."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, fields, replace
from statistics import fmean

from .definition import Extraction, extract_all
from .induction import (
    Dictionary, InductionConfig, candidate_instances, filter_by_coverage, induce,
)
from .instances import CnLabel, InstanceDb


@dataclass(frozen=True)
class Metrics:
    possible: int = 0
    extracted: int = 0
    correct: int = 0

    @property
    def recall(self) -> float:
        return self.correct / self.possible if self.possible else 0.0

    @property
    def precision(self) -> float:
        return self.correct / self.extracted if self.extracted else 0.0

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics(self.possible + other.possible, self.extracted + other.extracted,
                       self.correct + other.correct)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")


def apply_dictionary(dictionary, db: InstanceDb, lex=None, h=None) -> set[Extraction]:
    lex = lex or db.lexicon
    h = h or db.hierarchy
    out: set[Extraction] = set()
    for d in dictionary:
        for inst in candidate_instances(d, db):
            out.update(extract_all(d, inst, lex, h))
    return out


def score(extractions, db: InstanceDb, label: CnLabel, type_only: bool = False) -> Metrics:
    """Score extractions against the labeled buffers of ``db``.

    With ``type_only`` the target is coarsened to its CN type, so any subtype counts.
    """
    target = label.coarse() if type_only else label
    # The same buffer extracted under several subtypes is one phrase.
    picked = {(e.instance_id, e.role) for e in extractions if target.covers(e.label)}
    correct = 0
    for iid, role in picked:
        inst = db.by_id.get(iid)
        b = inst.buffer(role) if inst is not None else None
        if b is not None and target.covers(b.label):
            correct += 1
    return Metrics(db.count_labeled(target), len(picked), correct)


def split_documents(doc_ids, train_fraction: float, rng: random.Random):
    """Random (train, test) partition of documents."""
    docs = list(doc_ids)
    rng.shuffle(docs)
    n_train = round(train_fraction * len(docs))
    if len(docs) >= 2:
        n_train = min(max(n_train, 1), len(docs) - 1)
    return docs[:n_train], docs[n_train:]


def run_trial(train: InstanceDb, test: InstanceDb, label: CnLabel, cfg: InductionConfig,
              type_only: bool = False) -> Metrics:
    """Induce on ``train``, filter by coverage, and score on ``test``."""
    induced = induce(train, label, cfg, train.lexicon, train.hierarchy)
    kept = filter_by_coverage(induced, cfg.min_coverage)
    return score(apply_dictionary(kept, test), test, label, type_only)


def evaluate_labels(train: InstanceDb, test: InstanceDb, labels, cfg: InductionConfig,
                    type_only: bool = False) -> Metrics:
    """Micro-summed metrics over several labels."""
    total = Metrics()
    for label in labels:
        total = total + run_trial(train, test, label, cfg, type_only)
    return total


@dataclass(frozen=True)
class SweepRow:
    tolerance: float
    min_coverage: int
    trials: int
    mean_recall: float
    mean_precision: float
    mean_extracted: float
    mean_definitions: float


@dataclass(frozen=True)
class CurveRow:
    train_fraction: float
    trials: int
    mean_positive: float
    mean_recall: float
    mean_precision: float


def _partitions(db: InstanceDb, split: SplitSpec):
    """Document partitions for each trial; trial t uses seed + t."""
    for t in range(split.trials):
        rng = random.Random(split.seed + t)
        train_docs, test_docs = split_documents(db.doc_ids, split.train_fraction, rng)
        yield db.subset(train_docs), db.subset(test_docs)


def tolerance_sweep(db: InstanceDb, label: CnLabel, tolerances, split: SplitSpec,
                    min_coverage: int = 1, type_only: bool = False,
                    min_coverages=None, cfg: InductionConfig | None = None) -> list[SweepRow]:
    """Mean recall/precision per tolerance over random document partitions.

    The same partitions are reused for every tolerance.  ``min_coverages``
    optionally scores each induced dictionary at several coverage thresholds;
    it defaults to ``[min_coverage]``.  ``cfg`` supplies the remaining
    induction options; its tolerance and seed are overridden.
    """
    thresholds = list(min_coverages) if min_coverages else [min_coverage]
    parts = list(_partitions(db, split))
    base = cfg or InductionConfig()
    rows = []
    for tol in tolerances:
        per: dict[int, list] = {m: [] for m in thresholds}
        for train, test in parts:
            run_cfg = replace(base, tolerance=tol, seed=split.seed)
            induced = induce(train, label, run_cfg, train.lexicon, train.hierarchy)
            for m in thresholds:
                kept = filter_by_coverage(induced, m)
                met = score(apply_dictionary(kept, test), test, label, type_only)
                per[m].append((met, len(kept)))
        for m in thresholds:
            results = per[m]
            rows.append(SweepRow(
                tolerance=tol, min_coverage=m, trials=len(results),
                mean_recall=fmean(r.recall for r, _ in results),
                mean_precision=fmean(r.precision for r, _ in results),
                mean_extracted=fmean(r.extracted for r, _ in results),
                mean_definitions=fmean(n for _, n in results),
            ))
    return rows


def learning_curve(db: InstanceDb, label: CnLabel, fractions, trials: int, seed: int,
                   cfg: InductionConfig, test_fraction: float = 0.1,
                   type_only: bool = False) -> list[CurveRow]:
    """Recall/precision as the training partition grows.

    Each trial holds out a fixed test block of ``test_fraction`` of the
    documents; training sets are nested prefixes of the remaining documents,
    sized as a fraction of the whole corpus.
    """
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ValueError(f"fraction {f} not in (0, 1)")
    docs = db.doc_ids
    n = len(docs)
    n_test = max(1, round(test_fraction * n)) if n >= 2 else 0
    per = {f: [] for f in fractions}
    for t in range(trials):
        order = list(docs)
        random.Random(seed + t).shuffle(order)
        test = db.subset(order[n - n_test:])
        pool = order[:n - n_test]
        for f in fractions:
            k = min(max(1, round(f * n)), len(pool))
            train = db.subset(pool[:k])
            met = run_trial(train, test, label, replace(cfg, seed=seed), type_only)
            positives = train.count_labeled(label.coarse() if type_only else label)
            per[f].append((met, positives))
    return [
        CurveRow(f, trials,
                 mean_positive=fmean(p for _, p in per[f]),
                 mean_recall=fmean(m.recall for m, _ in per[f]),
                 mean_precision=fmean(m.precision for m, _ in per[f]))
        for f in fractions
    ]


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else v


def write_rows(rows, stream, columns=None) -> None:
    """CSV with a header row; floats are written with fixed precision."""
    if not rows and columns is None:
        return
    columns = columns or [f.name for f in fields(rows[0])]
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in columns])

"""Command-line entry point: ``crystal {induce,apply,eval,sweep,curve,gen}``.

Every flag can also be set through an environment variable named
``CRYSTAL_`` + the flag name in upper case with dashes as underscores,
e.g. ``CRYSTAL_TOLERANCE=0.2``.  Explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean

from .definition import dump_definitions, load_definitions, validate_classes
from .evaluation import (
    Metrics, SplitSpec, apply_dictionary, learning_curve, run_trial, split_documents,
    tolerance_sweep, write_rows,
)
from .induction import (
    Dictionary, InductionConfig, coverage_histogram, filter_by_coverage, induce,
)
from .instances import CnLabel, InstanceDb, dump_corpus, load_corpus
from .semantic import load_hierarchy, load_lexicon
from .synthetic import SyntheticSpec, generate_synthetic

ENV_PREFIX = "CRYSTAL_"


class InputError(Exception):
    """Bad user input; reported without a traceback."""


# -- argument helpers --------------------------------------------------------

def _env_name(flag: str) -> str:
    return ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper()


def _opt(p: argparse.ArgumentParser, flag: str, **kw):
    """Add ``flag`` with its default taken from the environment when set."""
    env = os.environ.get(_env_name(flag))
    action = kw.get("action")
    if env is not None:
        if action == "store_true":
            kw["default"] = env.strip().lower() in ("1", "true", "yes", "on")
        elif action == "append":
            kw["default"] = [s for s in env.split(",") if s.strip()]
        else:
            conv = kw.get("type", str)
            try:
                kw["default"] = conv(env)
            except (TypeError, ValueError) as e:
                raise InputError(f"bad value for {_env_name(flag)}: {env!r}") from e
        kw.pop("required", None)
    kw.setdefault("help", "")
    kw["help"] += f" [env {_env_name(flag)}]"
    p.add_argument(flag, **kw)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_inputs(p, corpus=True):
    if corpus:
        _opt(p, "--corpus", required=True, help="corpus JSON file")
    _opt(p, "--hierarchy", required=True, help="hierarchy TSV (child<TAB>parent)")
    _opt(p, "--lexicon", required=True, help="lexicon TSV (word<TAB>class;class)")


def _add_common(p):
    _opt(p, "--seed", type=int, default=0, help="random seed")


def _add_label(p):
    _opt(p, "--label", action="append", default=None,
         help="target label 'Type' or 'Type/subtype'; repeatable; default: every label "
              "in the corpus.  A bare type groups all its subtypes and scores type-only")


def _add_induction(p):
    _opt(p, "--tolerance", type=float, default=0.0, help="maximum training error rate")
    _opt(p, "--min-coverage", type=int, default=1,
         help="drop definitions with fewer correct training extractions")
    _opt(p, "--shuffle", action="store_true",
         help="process initial definitions in seeded random order")
    _opt(p, "--retry-next-similar", action="store_true",
         help="after a rejected unification try the next most similar definition")


def _add_type_only(p):
    _opt(p, "--type-only", action="store_true",
         help="coarsen every target label to its type before inducing and scoring")


def _add_split(p):
    _opt(p, "--train-fraction", type=float, default=0.9, help="document share used for training")
    _opt(p, "--trials", type=int, default=1, help="number of random document partitions")


def _add_out(p, what):
    _opt(p, "--out", required=True, help=f"output {what}")


# -- IO ------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None


def _write_atomic(path: str, text: str) -> None:
    """Write via a temporary sibling file so a failed run leaves nothing behind."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _load_semantics(args):
    h = load_hierarchy(_read(args.hierarchy))
    lex = load_lexicon(_read(args.lexicon), h)
    return h, lex


def _load_db(path, lex, h) -> InstanceDb:
    return load_corpus(_read(path), lex, h)


def _targets(args, db: InstanceDb) -> list[tuple[CnLabel, bool]]:
    """(label, type_only) pairs, in label order."""
    if args.label:
        out = []
        for text in args.label:
            try:
                lab = CnLabel.parse(text)
            except ValueError as e:
                raise InputError(f"bad --label {text!r}: {e}") from None
            out.append(lab)
    else:
        out = list(db.labels)
    if getattr(args, "type_only", False):
        out = [lab.coarse() for lab in out]
    seen, result = set(), []
    for lab in out:
        if lab not in seen:
            seen.add(lab)
            result.append((lab, lab.subtype is None))
    return result


def _cfg(args, **over) -> InductionConfig:
    try:
        return InductionConfig(
            tolerance=over.get("tolerance", args.tolerance),
            min_coverage=args.min_coverage,
            seed=args.seed,
            shuffle=args.shuffle,
            retry_next_similar=args.retry_next_similar,
        )
    except ValueError as e:
        raise InputError(str(e)) from None


def _csv(rows, columns, prefix=None) -> str:
    buf = io.StringIO()
    if prefix is None:
        write_rows(rows, buf, columns)
        return buf.getvalue()
    # Rows tagged with a leading label column.
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", *columns])
    for lab, r in rows:
        w.writerow([lab, *(f"{v:.6f}" if isinstance(v, float) else v
                           for v in (getattr(r, c) for c in columns))])
    return buf.getvalue()


# -- commands ----------------------------------------------------------------

def cmd_induce(args) -> int:
    h, lex = _load_semantics(args)
    db = _load_db(args.corpus, lex, h)
    cfg = _cfg(args)
    defs = []
    for lab, _ in _targets(args, db):
        induced = induce(db, lab, cfg, lex, h)
        defs.extend(filter_by_coverage(induced, cfg.min_coverage).definitions)
    result = Dictionary(defs)
    _write_atomic(args.out, result.dumps())
    hist = coverage_histogram(result)
    print(f"definitions: {len(result)}")
    print("coverage: " + " ".join(f"{k}:{v}" for k, v in hist.items()))
    return 0


EXTRACTION_COLUMNS = ["doc_id", "instance_id", "role", "text", "label"]


def cmd_apply(args) -> int:
    h, lex = _load_semantics(args)
    db = _load_db(args.corpus, lex, h)
    try:
        defs = load_definitions(_read(args.dictionary))
    except json.JSONDecodeError as e:
        raise InputError(f"{args.dictionary}: invalid JSON: {e}") from None
    for d in defs:
        validate_classes(d, h)
    found = apply_dictionary(Dictionary(defs), db, lex, h)
    rows = sorted(found, key=lambda e: (e.doc_id, e.instance_id, str(e.role), e.label.sort_key()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXTRACTION_COLUMNS)
    for e in rows:
        b = db.by_id[e.instance_id].buffer(e.role)
        w.writerow([e.doc_id, e.instance_id, str(e.role), b.text(), str(e.label)])
    _write_atomic(args.out, buf.getvalue())
    print(f"extractions: {len(rows)}")
    return 0


@dataclass(frozen=True)
class EvalRow:
    trials: int
    possible: int
    extracted: int
    correct: int
    mean_recall: float
    mean_precision: float


EVAL_COLUMNS = ["trials", "possible", "extracted", "correct", "mean_recall", "mean_precision"]


def _eval_row(results: list[Metrics]) -> EvalRow:
    total = sum(results, Metrics())
    return EvalRow(len(results), total.possible, total.extracted, total.correct,
                   fmean(m.recall for m in results), fmean(m.precision for m in results))


def cmd_eval(args) -> int:
    h, lex = _load_semantics(args)
    db = _load_db(args.corpus, lex, h)
    cfg = _cfg(args)
    targets = _targets(args, db)
    if args.test_corpus:
        parts = [(db, _load_db(args.test_corpus, lex, h))]
    else:
        split = _split(args)
        parts = []
        for t in range(split.trials):
            train_docs, test_docs = split_documents(db.doc_ids, split.train_fraction,
                                                    random.Random(split.seed + t))
            parts.append((db.subset(train_docs), db.subset(test_docs)))
    rows = []
    for lab, type_only in targets:
        results = [run_trial(train, test, lab, cfg, type_only) for train, test in parts]
        rows.append((str(lab), _eval_row(results)))
    _write_atomic(args.out, _csv(rows, EVAL_COLUMNS, prefix=True))
    return 0


def _split(args) -> SplitSpec:
    try:
        return SplitSpec(args.train_fraction, args.trials, args.seed)
    except ValueError as e:
        raise InputError(str(e)) from None


SWEEP_COLUMNS = ["tolerance", "min_coverage", "trials", "mean_recall", "mean_precision",
                 "mean_extracted", "mean_definitions"]


def cmd_sweep(args) -> int:
    h, lex = _load_semantics(args)
    db = _load_db(args.corpus, lex, h)
    for tol in args.tolerances:
        _cfg(args, tolerance=tol)
    coverages = args.min_coverages or [args.min_coverage]
    if any(m < 1 for m in coverages):
        raise InputError("min coverage must be at least 1")
    split = _split(args)
    rows = []
    for lab, type_only in _targets(args, db):
        for r in tolerance_sweep(db, lab, args.tolerances, split, type_only=type_only,
                                 min_coverages=coverages, cfg=_cfg(args)):
            rows.append((str(lab), r))
    _write_atomic(args.out, _csv(rows, SWEEP_COLUMNS, prefix=True))
    return 0


CURVE_COLUMNS = ["train_fraction", "trials", "mean_positive", "mean_recall", "mean_precision"]


def cmd_curve(args) -> int:
    h, lex = _load_semantics(args)
    db = _load_db(args.corpus, lex, h)
    cfg = _cfg(args)
    if args.trials < 1:
        raise InputError("trials must be positive")
    if not 0.0 < args.test_fraction < 1.0:
        raise InputError("test fraction must be in (0, 1)")
    rows = []
    for lab, type_only in _targets(args, db):
        try:
            curve = learning_curve(db, lab, args.fractions, args.trials, args.seed, cfg,
                                   test_fraction=args.test_fraction, type_only=type_only)
        except ValueError as e:
            raise InputError(str(e)) from None
        rows.extend((str(lab), r) for r in curve)
    _write_atomic(args.out, _csv(rows, CURVE_COLUMNS, prefix=True))
    return 0


def cmd_gen(args) -> int:
    try:
        spec = SyntheticSpec(n_instances=args.n_instances,
                             distractor_fraction=args.distractor_fraction,
                             label_noise=args.label_noise, seed=args.seed,
                             doc_size=args.doc_size)
    except ValueError as e:
        raise InputError(str(e)) from None
    syn = generate_synthetic(spec)
    out = Path(args.out_dir)
    files = {
        "corpus.json": dump_corpus(syn.db.instances),
        "hierarchy.tsv": syn.hierarchy.dumps(),
        "lexicon.tsv": syn.lexicon.dumps(),
        "gold.json": dump_definitions(syn.gold),
    }
    for name, text in files.items():
        _write_atomic(str(out / name), text)
    print(f"instances: {len(syn.db)} documents: {len(syn.db.doc_ids)}")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crystal",
        description="Induce concept-node extraction dictionaries from annotated clauses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("induce", help="induce a dictionary and write it as JSON")
    _add_inputs(p)
    _add_label(p)
    _add_type_only(p)
    _add_induction(p)
    _add_common(p)
    _add_out(p, "dictionary JSON")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser(
        "apply", help="apply a dictionary to a corpus",
        description="Writes a CSV with columns: " + ", ".join(EXTRACTION_COLUMNS)
                    + ".  role is subject, verb, dobj, iobj or pp#N.")
    _add_inputs(p)
    _opt(p, "--dictionary", required=True, help="dictionary JSON")
    _add_common(p)
    _add_out(p, "extraction CSV")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser(
        "eval", help="induce on training documents and score on test documents",
        description="Writes a CSV with columns: label, " + ", ".join(EVAL_COLUMNS)
                    + ".  possible/extracted/correct are summed over trials; recall and "
                      "precision are per-trial means.")
    _add_inputs(p)
    _opt(p, "--test-corpus", default=None,
         help="score on this corpus after training on all of --corpus (one trial)")
    _add_label(p)
    _add_type_only(p)
    _add_induction(p)
    _add_split(p)
    _add_common(p)
    _add_out(p, "CSV report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "sweep", help="recall/precision across error tolerances",
        description="Writes a CSV with columns: label, " + ", ".join(SWEEP_COLUMNS)
                    + ".  Every tolerance reuses the same document partitions.")
    _add_inputs(p)
    _add_label(p)
    _add_type_only(p)
    _add_induction(p)
    _opt(p, "--tolerances", type=_floats, default=[0.0, 0.1, 0.2, 0.3, 0.4],
         help="comma-separated tolerances")
    _opt(p, "--min-coverages", type=_ints, default=None,
         help="comma-separated coverage thresholds scored per tolerance "
              "(default: --min-coverage)")
    _add_split(p)
    _add_common(p)
    _add_out(p, "CSV report")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "curve", help="recall/precision as the training set grows",
        description="Writes a CSV with columns: label, " + ", ".join(CURVE_COLUMNS)
                    + ".  mean_positive is the mean count of positive training buffers.")
    _add_inputs(p)
    _add_label(p)
    _add_type_only(p)
    _add_induction(p)
    _opt(p, "--fractions", type=_floats, default=[0.1, 0.3, 0.5, 0.7, 0.9],
         help="comma-separated training fractions of the corpus")
    _opt(p, "--trials", type=int, default=1, help="number of random document orders")
    _opt(p, "--test-fraction", type=float, default=0.1, help="held-out document share")
    _add_common(p)
    _add_out(p, "CSV report")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser(
        "gen", help="generate a synthetic corpus with known rules",
        description="Writes corpus.json, hierarchy.tsv, lexicon.tsv and gold.json "
                    "into --out-dir.")
    _opt(p, "--n-instances", type=int, default=200, help="number of clauses")
    _opt(p, "--distractor-fraction", type=float, default=0.3, help="share of near misses")
    _opt(p, "--label-noise", type=float, default=0.0, help="share of flipped labels")
    _opt(p, "--doc-size", type=int, default=10, help="clauses per document")
    _add_common(p)
    _opt(p, "--out-dir", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as e:
        print(f"crystal: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as e:
        # Malformed corpus, hierarchy, lexicon or dictionary content, or an unwritable output.
        print(f"crystal: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

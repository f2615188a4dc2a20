import csv
import json

import pytest

from crystal.cli import main
from crystal.definition import dump_definitions, load_definitions

from helpers import HIERARCHY_TSV, LEXICON_TSV, NAUSEA, ASTHMA, buf, corpus, inst
from test_definition import denies_definition, diagnosed_definition


@pytest.fixture
def files(tmp_path):
    (tmp_path / "h.tsv").write_text(HIERARCHY_TSV)
    (tmp_path / "l.tsv").write_text(LEXICON_TSV)

    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def sem():
        return ["--hierarchy", str(tmp_path / "h.tsv"), "--lexicon", str(tmp_path / "l.tsv")]
    return tmp_path, write, sem


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def denies(iid, obj, head):
    return inst(iid, "active", buf("subject", "THE PATIENT", heads="PATIENT"),
                buf("verb", "DENIES"),
                buf("dobj", obj, heads=head, label="Sign or Symptom/absent"))


class TestInduce:
    def test_empty_corpus(self, files, capsys):
        tmp, write, sem = files
        c = write("c.json", "[]")
        assert main(["induce", "--corpus", c, *sem(), "--out", str(tmp / "d.json")]) == 0
        assert load_definitions((tmp / "d.json").read_text()) == []
        assert "definitions: 0" in capsys.readouterr().out

    def test_denies_pair(self, files, capsys):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [denies("a", "ANY EPISODES OF NAUSEA", "NAUSEA"),
                                           denies("b", "CHEST PAIN", "PAIN")])))
        out = tmp / "d.json"
        assert main(["induce", "--corpus", c, *sem(), "--out", str(out)]) == 0
        defs = load_definitions(out.read_text())
        assert len(defs) == 1 and defs[0].coverage == 2
        text = capsys.readouterr().out
        assert "definitions: 1" in text
        assert "coverage: >=10:0 3-9:0 2:1 1:0" in text

    def test_rerun_is_byte_identical(self, files):
        tmp, write, sem = files
        assert main(["gen", "--out-dir", str(tmp / "g"), "--n-instances", "150",
                     "--label-noise", "0.1"]) == 0
        g = tmp / "g"
        args = ["induce", "--corpus", str(g / "corpus.json"), "--hierarchy",
                str(g / "hierarchy.tsv"), "--lexicon", str(g / "lexicon.tsv"),
                "--tolerance", "0.2", "--shuffle", "--seed", "3"]
        main(args + ["--out", str(tmp / "a.json")])
        main(args + ["--out", str(tmp / "b.json")])
        assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()

    def test_label_filter_and_min_coverage(self, files):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [denies("a", "ANY EPISODES OF NAUSEA", "NAUSEA"),
                                           denies("b", "CHEST PAIN", "PAIN")])))
        out = tmp / "d.json"
        main(["induce", "--corpus", c, *sem(), "--out", str(out), "--label", "Diagnosis"])
        assert load_definitions(out.read_text()) == []
        main(["induce", "--corpus", c, *sem(), "--out", str(out), "--min-coverage", "3"])
        assert load_definitions(out.read_text()) == []


class TestApply:
    def test_opening_example(self, files):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [NAUSEA, ASTHMA])))
        d = write("d.json", dump_definitions([denies_definition()]))
        out = tmp / "x.csv"
        assert main(["apply", "--corpus", c, *sem(), "--dictionary", d, "--out", str(out)]) == 0
        got = rows(out)
        assert got == [{"doc_id": "D1", "instance_id": "S1", "role": "dobj",
                        "text": "ANY EPISODES OF NAUSEA", "label": "sign or symptom/absent"}]

    def test_empty_dictionary(self, files):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [NAUSEA])))
        d = write("d.json", dump_definitions([]))
        out = tmp / "x.csv"
        assert main(["apply", "--corpus", c, *sem(), "--dictionary", d, "--out", str(out)]) == 0
        assert out.read_text() == "doc_id,instance_id,role,text,label\n"

    def test_unmet_preposition(self, files):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [NAUSEA, ASTHMA])))
        d = write("d.json", dump_definitions([diagnosed_definition()]))
        out = tmp / "x.csv"
        main(["apply", "--corpus", c, *sem(), "--dictionary", d, "--out", str(out)])
        assert rows(out) == []

    def test_unknown_class_in_dictionary(self, files, capsys):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [NAUSEA])))
        raw = json.loads(dump_definitions([denies_definition()]))
        raw["definitions"][0]["constraints"][0]["head"] = ["Martian"]
        d = write("d.json", json.dumps(raw))
        out = tmp / "x.csv"
        assert main(["apply", "--corpus", c, *sem(), "--dictionary", d, "--out", str(out)]) == 2
        assert "Martian" in capsys.readouterr().err
        assert not out.exists()


class TestErrors:
    def test_missing_file(self, files, capsys):
        tmp, write, sem = files
        out = tmp / "d.json"
        assert main(["induce", "--corpus", str(tmp / "nope.json"), *sem(),
                     "--out", str(out)]) == 2
        assert "cannot read" in capsys.readouterr().err
        assert not out.exists()

    def test_malformed_corpus_leaves_no_output(self, files, capsys):
        tmp, write, sem = files
        c = write("c.json", corpus(("D1", [inst("x", "none", buf("verb", "DENIES"))])))
        assert main(["induce", "--corpus", c, *sem(), "--out", str(tmp / "d.json")]) == 2
        assert "voice" in capsys.readouterr().err
        assert sorted(p.name for p in tmp.iterdir()) == ["c.json", "h.tsv", "l.tsv"]

    def test_bad_hierarchy(self, files, capsys):
        tmp, write, sem = files
        c = write("c.json", "[]")
        h = write("bad.tsv", "A\tB\nB\tA\n")
        code = main(["induce", "--corpus", c, "--hierarchy", h, "--lexicon",
                     str(tmp / "l.tsv"), "--out", str(tmp / "d.json")])
        assert code == 2
        assert "line 1" in capsys.readouterr().err

    def test_bad_tolerance(self, files, capsys):
        tmp, write, sem = files
        c = write("c.json", "[]")
        assert main(["induce", "--corpus", c, *sem(), "--out", str(tmp / "d.json"),
                     "--tolerance", "1.5"]) == 2

    def test_bad_label(self, files):
        tmp, write, sem = files
        c = write("c.json", "[]")
        assert main(["induce", "--corpus", c, *sem(), "--out", str(tmp / "d.json"),
                     "--label", "/x"]) == 2

    def test_env_override(self, files, monkeypatch, capsys):
        tmp, write, sem = files
        c = write("c.json", "[]")
        monkeypatch.setenv("CRYSTAL_TOLERANCE", "7")
        assert main(["induce", "--corpus", c, *sem(), "--out", str(tmp / "d.json")]) == 2
        assert "tolerance" in capsys.readouterr().err
        # An explicit flag wins over the environment.
        assert main(["induce", "--corpus", c, *sem(), "--out", str(tmp / "d.json"),
                     "--tolerance", "0.1"]) == 0

    def test_env_supplies_required_paths(self, files, monkeypatch):
        tmp, write, sem = files
        c = write("c.json", "[]")
        monkeypatch.setenv("CRYSTAL_HIERARCHY", str(tmp / "h.tsv"))
        monkeypatch.setenv("CRYSTAL_LEXICON", str(tmp / "l.tsv"))
        assert main(["induce", "--corpus", c, "--out", str(tmp / "d.json")]) == 0


@pytest.fixture
def gen(files):
    tmp, _, _ = files
    g = tmp / "g"
    assert main(["gen", "--out-dir", str(g), "--n-instances", "200", "--seed", "0"]) == 0

    def inputs(corpus_name="corpus.json"):
        return ["--corpus", str(g / corpus_name), "--hierarchy", str(g / "hierarchy.tsv"),
                "--lexicon", str(g / "lexicon.tsv")]
    return tmp, g, inputs


class TestEvaluationCommands:
    def test_gen_twice_identical(self, gen):
        tmp, g, _ = gen
        main(["gen", "--out-dir", str(tmp / "g2"), "--n-instances", "200", "--seed", "0"])
        for name in ("corpus.json", "hierarchy.tsv", "lexicon.tsv", "gold.json"):
            assert (g / name).read_bytes() == (tmp / "g2" / name).read_bytes()
        assert len(load_definitions((g / "gold.json").read_text())) == 5

    def test_eval_train_equals_test(self, gen):
        tmp, g, inputs = gen
        out = tmp / "e.csv"
        assert main(["eval", *inputs(), "--test-corpus", str(g / "corpus.json"),
                     "--out", str(out)]) == 0
        got = rows(out)
        assert len(got) == 4
        assert all(r["mean_recall"] == "1.000000" for r in got)
        assert all(r["trials"] == "1" for r in got)

    def test_sweep_matches_eval(self, gen):
        tmp, g, inputs = gen
        common = [*inputs(), "--label", "Sign or Symptom", "--tolerance", "0.1",
                  "--trials", "1", "--seed", "4"]
        main(["eval", *common, "--out", str(tmp / "e.csv")])
        main(["sweep", *common, "--tolerances", "0.1", "--out", str(tmp / "s.csv")])
        (e,) = rows(tmp / "e.csv")
        (s,) = rows(tmp / "s.csv")
        assert e["label"] == s["label"] == "sign or symptom"
        assert e["mean_recall"] == s["mean_recall"]
        assert e["mean_precision"] == s["mean_precision"]

    def test_sweep_columns(self, gen):
        tmp, g, inputs = gen
        out = tmp / "s.csv"
        main(["sweep", *inputs(), "--label", "Diagnosis/past", "--tolerances", "0,0.2",
              "--min-coverages", "1,2", "--trials", "2", "--out", str(out)])
        header = out.read_text().splitlines()[0]
        assert header == ("label,tolerance,min_coverage,trials,mean_recall,mean_precision,"
                          "mean_extracted,mean_definitions")
        assert len(rows(out)) == 4

    def test_curve(self, gen):
        tmp, g, inputs = gen
        out = tmp / "c.csv"
        assert main(["curve", *inputs(), "--label", "Sign or Symptom", "--fractions",
                     "0.2,0.5,0.9", "--trials", "2", "--out", str(out)]) == 0
        got = rows(out)
        assert [r["train_fraction"] for r in got] == ["0.200000", "0.500000", "0.900000"]

    def test_curve_bad_fraction(self, gen):
        tmp, g, inputs = gen
        assert main(["curve", *inputs(), "--fractions", "1.2", "--out",
                     str(tmp / "c.csv")]) == 2
        assert not (tmp / "c.csv").exists()

    def test_outputs_deterministic(self, gen):
        tmp, g, inputs = gen
        for name in ("a", "b"):
            main(["sweep", *inputs(), "--tolerances", "0,0.3", "--trials", "3", "--seed", "2",
                  "--out", str(tmp / f"{name}.csv")])
        assert (tmp / "a.csv").read_bytes() == (tmp / "b.csv").read_bytes()

from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from playerprint.cli import main

SUBCOMMANDS = ("synth", "extract", "dataset", "train", "evaluate", "sweep")


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(["synth", "--n-profiles", "3", "--matches", "3", "--duration", "1", "--seed", "7", "--out", str(out)]) == 0
    return out


def test_help_for_every_subcommand(capsys):
    for argv in ([], *([c] for c in SUBCOMMANDS)):
        with pytest.raises(SystemExit) as exc:
            main([*argv, "--help"])
        assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "playerprint", "--help"], capture_output=True, text=True)
    assert done.returncode == 0 and "sweep" in done.stdout


def test_synth_outputs(corpus):
    files = sorted(p.name for p in corpus.iterdir())
    assert "manifest.ndjson" in files and "profiles.ndjson" in files and "run.json" in files
    assert sum(name.startswith("player-") for name in files) == 9
    run = json.loads((corpus / "run.json").read_text())
    assert run["command"] == "synth" and run["config"]["seed"] == 7


def test_synth_from_profiles_file(corpus, tmp_path):
    out = tmp_path / "again"
    assert main(["synth", "--profiles", str(corpus / "profiles.ndjson"), "--matches", "2", "--duration", "0.5", "--out", str(out)]) == 0
    assert len(json.loads("[" + ",".join((out / "manifest.ndjson").read_text().split()) + "]")) == 6


def test_extract(corpus, tmp_path):
    out = tmp_path / "x"
    assert main(["extract", "--corpus", str(corpus), "--out", str(out)]) == 0
    with (out / "stats.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 10 and len(rows[0]) == 17
    header = (out / "actions.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["match_id", "kind", "tick"] and len(header) == 41
    assert len((out / "items-starting.csv").read_text().splitlines()[0].split(",")) == 187


def test_dataset_pairs(corpus, tmp_path):
    out = tmp_path / "d"
    assert main(["dataset", "--corpus", str(corpus), "--experiment", "pairs", "--k", "3", "--out", str(out)]) == 0
    records = [json.loads(l) for l in (out / "manifest.ndjson").read_text().splitlines()]
    assert len(records) == 36 and sum(r["label"] for r in records) == 18
    assert {r["fold"] for r in records} == {0, 1, 2}
    assert (out / "diff.csv").exists() and (out / "stats.csv").exists()


def test_evaluate_report(corpus, tmp_path):
    out = tmp_path / "e"
    argv = ["evaluate", "--corpus", str(corpus), "--dataset", "pool", "--families", "stats", "--model", "forest", "--k", "3", "--seed", "1", "--out", str(out)]
    assert main(argv) == 0
    records = [json.loads(l) for l in (out / "report.ndjson").read_text().splitlines()]
    assert [r["record"] for r in records] == ["fold"] * 3 + ["aggregate"]
    assert records[-1]["k"] == 3 and records[-1]["n"] == 9


def test_train_writes_models(corpus, tmp_path):
    out = tmp_path / "t"
    assert main(["train", "--corpus", str(corpus), "--families", "mouse,stats", "--model", "logreg", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"ensemble.json", "normalizer.ndjson", "combiner.ndjson", "model-stats.ndjson", "run.json"} <= names


def test_sweep_row_count(corpus, tmp_path):
    table = tmp_path / "table.csv"
    argv = ["sweep", "--corpus", str(corpus), "--experiment", "pool", "--models", "logreg", "--k", "3", "--out", str(table)]
    assert main(argv) == 0
    rows = list(csv.reader(table.open()))
    assert len(rows) == 1 + 18
    wide = list(csv.reader((tmp_path / "table.wide.csv").open()))
    assert wide[0] == ["combination", "logreg"] and len(wide) == 19
    assert (tmp_path / "table.run.json").exists()


def test_evaluate_is_deterministic(corpus, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["evaluate", "--corpus", str(corpus), "--experiment", "pairs", "--families", "stats,starting", "--model", "mlp", "--k", "3", "--out", str(out)])
        outs.append(((out / "report.ndjson").read_bytes(), (out / "run.json").read_text().replace(str(out), "")))
    assert outs[0] == outs[1]


@pytest.mark.parametrize(
    "argv",
    [
        ["evaluate", "--families", "bogus"],
        ["evaluate", "--slices", "4"],
        ["evaluate", "--slices", "2", "--experiment", "pool"],
        ["evaluate", "--slices", "2", "--experiment", "pairs", "--families", "stats"],
        ["evaluate", "--families", "diff", "--experiment", "pool"],
        ["sweep", "--models", "svm"],
        ["train", "--model", "svm"],
        ["synth"],
    ],
)
def test_usage_errors_exit_2(argv, corpus, capsys):
    with pytest.raises(SystemExit) as exc:
        main([*argv, "--corpus", str(corpus)] if argv[0] != "synth" else argv)
    assert exc.value.code == 2
    assert "error" in capsys.readouterr().err


def test_data_errors_exit_1(tmp_path, capsys):
    assert main(["dataset", "--corpus", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 1
    assert "missing" in capsys.readouterr().err
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "m.ndjson").write_text('{"type":"header"}\nnot json\n')
    assert main(["evaluate", "--corpus", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "m.ndjson: line 1:" in err

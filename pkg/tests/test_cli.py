import csv
import json

import numpy as np
import pytest

from geattr.cli import main
from geattr.data import (
    LabelMap,
    LineageGraph,
    PredictionMatrix,
    load_fasta,
    load_labels,
    load_predictions,
    validate,
    write_fasta,
    write_labels,
    write_lineage,
    write_predictions,
)
from geattr.report import MetricReport

from synthetic import planted_motif_corpus, prep_corpus


def write_case(tmp_path, values, truth, stem="pred"):
    values = np.asarray(values, dtype=float)
    j, k = values.shape
    p = PredictionMatrix([f"s{i}" for i in range(j)], [f"c{i}" for i in range(k)], values)
    labels = LabelMap({f"s{i}": f"c{t}" for i, t in enumerate(truth)})
    pred_path, label_path = tmp_path / f"{stem}.csv", tmp_path / "labels.csv"
    write_predictions(p, pred_path)
    write_labels(labels, label_path)
    return pred_path, label_path


def score(pred, labels, out, *extra):
    assert main(["score", str(pred), str(labels), "-o", str(out), *extra]) == 0
    return MetricReport.load(out)


def test_perfect_one_hot(tmp_path):
    pred, labels = write_case(tmp_path, np.eye(12), range(12))
    r = score(pred, labels, tmp_path / "r.json")
    assert set(r.top_n.values()) == {1.0}
    assert set(r.x_metrics.values()) == {1}
    assert r.ece == 0.0 and r.mce == 0.0
    assert r.macro_f1 == 1.0


def test_uniform_predictor(tmp_path):
    k = 25
    pred, labels = write_case(tmp_path, np.full((10, k), 1 / k), np.arange(10) % k)
    r = score(pred, labels, tmp_path / "r.json")
    assert r.accuracy_curve[:-1] == [0.0] * (k - 1)
    assert r.accuracy_curve[-1] == 1.0
    assert r.x_metrics["95"] == k
    assert r.macro_f1 == 0.0


def test_report_is_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.dirichlet(np.ones(6), size=30)
    pred, labels = write_case(tmp_path, values, rng.integers(0, 6, 30))
    main(["score", str(pred), str(labels), "-o", str(tmp_path / "a.json"), "--seed", "3"])
    main(["score", str(pred), str(labels), "-o", str(tmp_path / "b.json"), "--seed", "3"])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    prov = json.loads((tmp_path / "a.json").read_text())["provenance"]
    assert len(prov["predictions"]["sha256"]) == 64 and prov["seed"] == 3


def test_validation_failure_exit_code(tmp_path, capsys):
    pred, labels = write_case(tmp_path, [[0.6, 0.6], [0.5, 0.5]], [0, 1])
    assert main(["validate", str(pred), str(labels)]) == 2
    assert main(["score", str(pred), str(labels)]) == 2
    assert "s0" in capsys.readouterr().err
    assert main(["score", str(tmp_path / "missing.csv"), str(labels)]) == 1


def test_usage_error_is_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["score"])
    assert exc.value.code == 2


def test_unknown_label_category(tmp_path):
    pred, labels = write_case(tmp_path, [[1.0, 0.0]], [0])
    labels.write_text("sequence_id,lab_id\ns0,zz\n")
    assert main(["validate", str(pred), str(labels)]) == 2


def test_ensemble_of_identical_members(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.dirichlet(np.ones(5), size=20)
    pred, labels = write_case(tmp_path, values, rng.integers(0, 5, 20))
    out = tmp_path / "ens.csv"
    assert main(["ensemble", str(pred), str(pred), str(pred), "-o", str(out)]) == 0
    diff = load_predictions(out).values - load_predictions(pred).values
    assert np.max(np.abs(diff)) <= 1e-15
    a = score(pred, labels, tmp_path / "a.json", "--name", "x")
    b = score(out, labels, tmp_path / "b.json", "--name", "x")
    assert (a.accuracy_curve, a.x_metrics, a.per_category) == (b.accuracy_curve, b.x_metrics, b.per_category)
    assert b.ece == pytest.approx(a.ece, abs=1e-12)
    assert main(["ensemble", str(pred), "-o", str(tmp_path / "one.csv")]) == 0
    assert load_predictions(tmp_path / "one.csv") == load_predictions(pred)


def test_ensemble_rejects_bad_member(tmp_path):
    good, _ = write_case(tmp_path, [[1.0, 0.0]], [0], stem="good")
    bad, _ = write_case(tmp_path, [[0.9, 0.9]], [0], stem="bad")
    assert main(["ensemble", str(good), str(bad), "-o", str(tmp_path / "e.csv")]) == 2
    other = tmp_path / "other.csv"
    write_predictions(PredictionMatrix(["s0"], ["c0", "zz"], [[1.0, 0.0]]), other)
    assert main(["ensemble", str(good), str(other), "-o", str(tmp_path / "e.csv")]) == 2


def test_compare_orders_by_top10(tmp_path, capsys):
    rng = np.random.default_rng(2)
    truth = rng.integers(0, 15, 40)
    paths = []
    for name, sharp in (("weak", 0.0), ("strong", 8.0), ("mid", 2.0)):
        logits = rng.normal(size=(40, 15))
        logits[np.arange(40), truth] += sharp
        values = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        pred, labels = write_case(tmp_path, values, truth, stem=name)
        paths.append(str(tmp_path / f"{name}.json"))
        score(pred, labels, paths[-1])
    capsys.readouterr()
    assert main(["compare", *paths, "-o", str(tmp_path / "board.csv")]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in rows] == ["strong", "mid", "weak"]
    assert [r["rank"] for r in rows] == [1, 2, 3]
    with open(tmp_path / "board.csv", newline="") as fh:
        assert [r["name"] for r in csv.DictReader(fh)] == ["strong", "mid", "weak"]


def test_xmetrics_and_calibration_commands(tmp_path, capsys):
    pred, labels = write_case(tmp_path, [[0.9, 0.1], [0.9, 0.1], [0.2, 0.8], [0.4, 0.6]], [0, 1, 1, 1])
    assert main(["xmetrics", str(pred), str(labels), "--thresholds", "50", "99"]) == 0
    assert json.loads(capsys.readouterr().out) == {"X50": 1, "X99": 2}
    assert main(["calibration", str(pred), str(labels), "-o", str(tmp_path / "cal.csv")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_bins"] == 15 and out["ece"] <= out["mce"]
    assert (tmp_path / "cal.csv").read_text().count("\n") == 16


def test_plotdata(tmp_path):
    k = 7
    pred, labels = write_case(tmp_path, np.full((3, k), 1 / k), [0, 1, 2])
    score(pred, labels, tmp_path / "r.json")
    assert main(["plotdata", str(tmp_path / "r.json"), "--out-dir", str(tmp_path / "plots")]) == 0
    with open(tmp_path / "plots" / "accuracy_curve.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == k
    assert [int(r["n"]) for r in rows] == list(range(1, k + 1))
    assert float(rows[-1]["misclassification"]) == 0.0


def test_plotdata_svg_is_reproducible(tmp_path):
    pytest.importorskip("matplotlib")
    pred, labels = write_case(tmp_path, np.eye(3), [0, 1, 2])
    score(pred, labels, tmp_path / "r.json")
    for d in ("a", "b"):
        assert main(["plotdata", str(tmp_path / "r.json"), "--out-dir", str(tmp_path / d), "--svg"]) == 0
    for name in ("accuracy_curve.svg", "reliability.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.fixture
def prep_inputs(tmp_path):
    records, graph = prep_corpus(n_records=600, n_big_labs=8, n_small_labs=10, n_edges=40, seed=5)
    write_fasta(records, tmp_path / "corpus.fasta")
    write_lineage(graph, tmp_path / "lineage.csv")
    meta = tmp_path / "meta.csv"
    meta.write_text("sequence_id,species,selectable_markers\nr0,Homo sapiens,Neomycin;Puromycin\nr1,,\n")
    return records, graph, tmp_path


def run_prep(base, out, *extra):
    return main(
        [
            "prep",
            str(base / "corpus.fasta"),
            "--lineage",
            str(base / "lineage.csv"),
            "--metadata",
            str(base / "meta.csv"),
            "--out-dir",
            str(out),
            *extra,
        ]
    )


def test_prep_artifacts(prep_inputs):
    records, graph, base = prep_inputs
    out = base / "out"
    assert run_prep(base, out, "--seed", "11") == 0
    names = {p.name for p in out.iterdir()}
    assert {"splits.csv", "pooling.csv", "obfuscation_map.csv", "metadata_onehot.csv"} <= names
    assert {f"{s}.fasta" for s in ("train", "leaderboard", "holdout")} <= names

    with open(out / "obfuscation_map.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    seq_map = {r["original"]: r["token"] for r in rows if r["kind"] == "sequence"}
    assert len(seq_map) == len(records)
    with open(out / "splits.csv", newline="") as fh:
        split = {r["sequence_id"]: r["split"] for r in csv.DictReader(fh)}
    for a, b in graph.edges:
        assert split[seq_map[a]] == split[seq_map[b]]
    assert not any(r.sequence_id in split for r in records)

    # emitted files are valid inputs again
    train = load_fasta(out / "train.fasta")
    assert all(r.lab_id for r in train)
    holdout = load_fasta(out / "holdout.fasta")
    assert all(r.lab_id is None for r in holdout)
    hold_labels = load_labels(out / "labels_holdout.csv")
    assert set(hold_labels) == {r.sequence_id for r in holdout}

    first = (out / "splits.csv").read_bytes()
    assert run_prep(base, base / "again", "--seed", "11") == 0
    assert (base / "again" / "splits.csv").read_bytes() == first


def test_prep_needs_seed(prep_inputs, capsys):
    _, _, base = prep_inputs
    assert run_prep(base, base / "out") == 2
    assert "--seed" in capsys.readouterr().err


def test_prep_infeasible(prep_inputs):
    _, _, base = prep_inputs
    assert run_prep(base, base / "out", "--seed", "1", "--min-holdout", "500") == 3


def test_config_file_supplies_defaults(prep_inputs):
    _, _, base = prep_inputs
    cfg = base / "run.cfg"
    cfg.write_text("# prep settings\nseed = 11\nno-obfuscate = true\n")
    assert run_prep(base, base / "out", "--config", str(cfg)) == 0
    assert not (base / "out" / "obfuscation_map.csv").exists()
    with open(base / "out" / "splits.csv", newline="") as fh:
        assert next(csv.DictReader(fh))["sequence_id"].startswith("r")
    (base / "bad.cfg").write_text("seed 3\n")
    assert run_prep(base, base / "o2", "--config", str(base / "bad.cfg")) == 2


def test_baseline_round_trip(tmp_path):
    train, queries = planted_motif_corpus(n_categories=4, n_train=6, n_query=5, length=200)
    write_fasta(train, tmp_path / "train.fasta")
    write_fasta(queries, tmp_path / "q.fasta")
    truth = LabelMap({q.sequence_id: q.lab_id for q in queries})
    write_labels(truth, tmp_path / "truth.csv")
    idx = tmp_path / "idx.npz"
    assert main(["baseline", "build-index", str(tmp_path / "train.fasta"), "--k", "8", "-o", str(idx)]) == 0

    base = ["baseline", "predict", str(idx), str(tmp_path / "q.fasta")]
    assert main([*base, "-o", str(tmp_path / "kmer.csv")]) == 0
    assert main([*base, "--method", "nb", "-o", str(tmp_path / "nb.csv")]) == 0
    for name in ("kmer.csv", "nb.csv"):
        p = load_predictions(tmp_path / name)
        assert validate(p, truth).ok
        r = score(tmp_path / name, tmp_path / "truth.csv", tmp_path / f"{name}.json")
        assert r.top_n["1"] == 1.0

    assert main([*base, "--mode", "unstable", "-o", str(tmp_path / "u.csv")]) == 2
    assert main([*base, "--mode", "unstable", "--seed", "4", "-o", str(tmp_path / "u1.csv")]) == 0
    assert main([*base, "--mode", "unstable", "--seed", "4", "-o", str(tmp_path / "u2.csv")]) == 0
    assert (tmp_path / "u1.csv").read_bytes() == (tmp_path / "u2.csv").read_bytes()
    assert main([*base, "--k", "6", "-o", str(tmp_path / "x.csv")]) == 2


def test_lineage_with_unknown_id_is_rejected(tmp_path):
    write_fasta(planted_motif_corpus(n_categories=2, n_train=10, n_query=0, length=50)[0], tmp_path / "c.fa")
    write_lineage(LineageGraph((("t0", "ghost"),)), tmp_path / "l.csv")
    args = ["prep", str(tmp_path / "c.fa"), "--lineage", str(tmp_path / "l.csv"), "--out-dir", str(tmp_path / "o")]
    assert main([*args, "--seed", "0"]) == 2

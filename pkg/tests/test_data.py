import numpy as np
import pytest

from geattr.data import (
    DanglingEdgeError,
    DuplicateIdError,
    EmptySequenceError,
    LabelMap,
    LineageGraph,
    ParseError,
    PredictionMatrix,
    SequenceRecord,
    load_fasta,
    load_labels,
    load_lineage,
    load_predictions,
    validate,
    write_fasta,
    write_labels,
    write_lineage,
    write_predictions,
)

from conftest import make_matrix


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_minimal_predictions(tmp_path):
    path = write(tmp_path / "p.csv", "sequence_id,a,b,c\ns1,0.2,0.3,0.5\ns2,1,0,0\n")
    p = load_predictions(path)
    assert p.shape == (2, 3)
    assert p.sequence_ids == ("s1", "s2")
    assert p.category_ids == ("a", "b", "c")
    assert p.values[0].tolist() == [0.2, 0.3, 0.5]


def test_bad_row_sum_loads_but_fails_validation(tmp_path):
    path = write(tmp_path / "p.csv", "sequence_id,a,b\ns1,0.25,0.25\n")
    p = load_predictions(path)
    report = validate(p, LabelMap({"s1": "a"}))
    assert not report.ok
    assert report.row_sum_violations == [("s1", 0.5)]


@pytest.mark.parametrize(
    "body, line",
    [
        ("sequence_id,a,b\ns1,0.5,0.5\ns2,0.5,x\n", 3),
        ("sequence_id,a,b\ns1,0.5,0.5,0.1\n", 2),
        ("sequence_id,a,b\ns1,nan,1\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, body, line):
    path = write(tmp_path / "p.csv", body)
    with pytest.raises(ParseError) as info:
        load_predictions(path)
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_duplicate_prediction_row(tmp_path):
    path = write(tmp_path / "p.csv", "sequence_id,a,b\ns1,0.5,0.5\ns1,1,0\n")
    with pytest.raises(DuplicateIdError):
        load_predictions(path)


def test_competition_shaped_file_loads_without_truncation(tmp_path):
    # holdout size and category count of the competition test set
    j, k = 11_351, 1_314
    rng = np.random.default_rng(0)
    values = np.round(rng.dirichlet(np.ones(k), size=j), 6)
    path = tmp_path / "big.csv"
    with open(path, "w") as fh:
        fh.write("sequence_id," + ",".join(f"lab{i}" for i in range(k)) + "\n")
        for i in range(j):
            fh.write(f"q{i}," + ",".join(f"{v:.6f}" for v in values[i]) + "\n")
    p = load_predictions(path)
    assert p.shape == (j, k)
    assert p.sequence_ids[-1] == f"q{j - 1}"
    np.testing.assert_array_equal(p.values, values)


def test_validate_examples():
    p, labels = make_matrix([[0.5, 0.5]], [0])
    assert validate(p, labels).ok

    p, labels = make_matrix([[0.6, 0.6]], [0])
    report = validate(p, labels)
    assert [s for _, s in report.row_sum_violations] == [pytest.approx(1.2)]

    p, _ = make_matrix([[0.5, 0.5]], [0])
    report = validate(p, LabelMap({"s0": "c0", "zzz": "c1"}))
    assert report.missing_from_matrix == ["zzz"]
    assert not report.ok


def test_validate_other_findings():
    p = make_matrix([[1.5, -0.5], [0.5, 0.5]])
    report = validate(p, LabelMap({"s0": "c0", "s1": "nope"}))
    assert ("s0", "c0", 1.5) in report.out_of_range
    assert ("s0", "c1", -0.5) in report.out_of_range
    assert report.unknown_categories == ["nope"]
    assert report.row_sum_violations == []

    report = validate(p, LabelMap({"s0": "c0"}))
    assert report.missing_from_labels == ["s1"]


def test_row_sum_tolerance_is_1e4():
    p = make_matrix([[0.50004, 0.5], [0.5002, 0.5]])
    assert [s for s, _ in validate(p).row_sum_violations] == ["s1"]


def test_prediction_matrix_invariants():
    with pytest.raises(ValueError):
        PredictionMatrix(["a"], ["x", "y"], [[1.0]])
    with pytest.raises(DuplicateIdError):
        PredictionMatrix(["a", "a"], ["x"], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        PredictionMatrix([], ["x"], np.zeros((0, 1)))
    p = make_matrix([[1.0, 0.0]])
    with pytest.raises(ValueError):
        p.values[0, 0] = 0.5


def test_fasta_two_records(tmp_path):
    path = write(tmp_path / "x.fa", ">s1 labA\nACGT\nacgt\n>s2\nNNAC\n")
    recs = load_fasta(path)
    assert [(r.sequence_id, r.dna, r.lab_id) for r in recs] == [
        ("s1", "ACGTACGT", "labA"),
        ("s2", "NNAC", None),
    ]


def test_fasta_bracketed_lab_and_ambiguity_codes(tmp_path):
    path = write(tmp_path / "x.fa", ">s1 [lab7]\nACRYGT\n")
    (rec,) = load_fasta(path)
    assert rec.lab_id == "lab7"
    assert rec.dna == "ACNNGT"


def test_fasta_errors(tmp_path):
    with pytest.raises(EmptySequenceError):
        load_fasta(write(tmp_path / "a.fa", ">s1\n>s2\nACGT\n"))
    with pytest.raises(DuplicateIdError):
        load_fasta(write(tmp_path / "b.fa", ">s1\nA\n>s1\nC\n"))
    with pytest.raises(ParseError):
        load_fasta(write(tmp_path / "c.fa", "ACGT\n"))


def test_lineage_dangling_endpoint(tmp_path):
    path = write(tmp_path / "l.csv", "id_a,id_b\na,b\nb,zzz\n")
    assert len(load_lineage(path).edges) == 2
    with pytest.raises(DanglingEdgeError):
        load_lineage(path, known_ids=["a", "b"])


def test_lineage_self_loop(tmp_path):
    with pytest.raises(ParseError):
        load_lineage(write(tmp_path / "l.csv", "id_a,id_b\na,a\n"))
    with pytest.raises(ValueError):
        LineageGraph((("a", "a"),))


def test_labels_file(tmp_path):
    path = write(tmp_path / "y.csv", "sequence_id,lab_id\ns1,A\ns2,B\n")
    labels = load_labels(path)
    assert dict(labels) == {"s1": "A", "s2": "B"}
    with pytest.raises(DuplicateIdError):
        load_labels(write(tmp_path / "d.csv", "sequence_id,lab_id\ns1,A\ns1,B\n"))


def test_labels_training_set_size(tmp_path):
    # training split size reported for the competition dataset
    n = 63_017
    path = tmp_path / "train.csv"
    write_labels(LabelMap({f"seq{i}": f"lab{i % 1313}" for i in range(n)}), path)
    assert len(load_labels(path)) == n


def test_round_trips_are_bit_identical(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.dirichlet(np.ones(7), size=9)
    values[0, :] = [1 / 3, 1 / 3, 1 / 3, 0, 0, 0, 0]
    p = make_matrix(values)
    write_predictions(p, tmp_path / "p.csv")
    q = load_predictions(tmp_path / "p.csv")
    assert q == p
    write_predictions(q, tmp_path / "p2.csv")
    assert (tmp_path / "p.csv").read_bytes() == (tmp_path / "p2.csv").read_bytes()

    labels = LabelMap({"s1": "A", "s,2": "B"})
    write_labels(labels, tmp_path / "y.csv")
    assert dict(load_labels(tmp_path / "y.csv")) == dict(labels)

    recs = [SequenceRecord("a", "ACGT" * 50, "L1"), SequenceRecord("b", "NNA")]
    write_fasta(recs, tmp_path / "x.fa")
    assert load_fasta(tmp_path / "x.fa") == recs

    graph = LineageGraph((("a", "b"), ("b", "c")))
    write_lineage(graph, tmp_path / "l.csv")
    assert load_lineage(tmp_path / "l.csv") == graph


def test_sequence_record_rules():
    with pytest.raises(EmptySequenceError):
        SequenceRecord("x", "")
    with pytest.raises(ValueError):
        SequenceRecord("x", "ACGU")
    with pytest.raises(ValueError):
        SequenceRecord("x", "ACGT", metadata={"colour": "red"})

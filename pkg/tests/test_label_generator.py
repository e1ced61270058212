"""Walk labels, training rows, folds and meta labels"""

import numpy as np
import pytest

from core_utils import DataFormatError, ValidationError
from label_generator import (HYBNN_CLASS, SVR_CLASS, NetLabelAccumulator, TrainingRows, assemble_training_set,
                             generate_labels, generate_meta_labels, label_circuit, meta_dataset,
                             per_net_meta_labels, read_meta_labels_csv, read_training_csv, split_rows,
                             write_meta_labels_csv, write_training_csv)
from netlist import random_circuit
from testability import EXTENDED_DIM, analyze


def _rows(sizes, seed=0):
    """Synthetic rows: sizes maps circuit name to row count"""
    rng = np.random.default_rng(seed)
    names = [name for name, n in sizes.items() for _ in range(n)]
    nets = [f"n{i}" for n in sizes.values() for i in range(n)]
    total = len(names)
    f_total = rng.integers(1, 10, size=total)
    f_success = np.minimum(f_total, rng.integers(0, 10, size=total))
    return TrainingRows(circuit=np.array(names, dtype=object), net=np.array(nets, dtype=object),
                        extended=rng.random((total, EXTENDED_DIM)), f_total=f_total, f_success=f_success,
                        p=f_success / f_total)


def test_accumulator_counts_each_net_once_per_walk():
    labels = NetLabelAccumulator.empty(4)
    labels.add_walk([3, 1, 1], survived=True)
    labels.add_walk([3, 2], survived=False)
    assert labels.f_total.tolist() == [0, 1, 1, 2]
    assert labels.f_success.tolist() == [0, 1, 0, 1]
    assert labels.labeled_nets().tolist() == [1, 2, 3]
    p = labels.probability()
    assert np.isnan(p[0])
    assert p[1:].tolist() == [1.0, 0.0, 0.5]


def test_merge_requires_same_circuit():
    with pytest.raises(ValidationError):
        NetLabelAccumulator.empty(3).merge(NetLabelAccumulator.empty(4))


def test_labels_from_walks(rng):
    circuit = random_circuit(rng, 8, 60, name="walks")
    labels = generate_labels(circuit, analyze(circuit), k_hard=20)
    assert np.all(labels.f_success <= labels.f_total)
    assert len(labels.labeled_nets()) > 0
    assert all(0.0 <= p <= 1.0 for p in labels.probability()[labels.labeled_nets()])


def test_labeled_circuit_rows(c17):
    labeled = label_circuit(c17, analyze(c17), k_hard=22)
    rows = labeled.rows()
    assert len(rows) == len(labeled.labels.labeled_nets())
    assert set(rows.circuit.tolist()) == {"c17"}
    assert rows.base.shape == (len(rows), 17)
    np.testing.assert_allclose(rows.p, rows.f_success / rows.f_total)
    np.testing.assert_array_equal(rows.weight, rows.f_total.astype(float))
    assert rows.weight.min() >= 1.0


def test_fold_sizes_differ_by_at_most_one():
    rows = _rows({"a": 400, "b": 350, "c": 253})
    split = split_rows(rows, holdout=None, folds=5, seed=3)
    assert sorted(split.fold_sizes(), reverse=True) == [201, 201, 201, 200, 200]


def test_folds_are_deterministic():
    rows = _rows({"a": 30, "b": 20})
    first = split_rows(rows, None, 4, seed=9).folds
    assert np.array_equal(first, split_rows(rows, None, 4, seed=9).folds)
    assert not np.array_equal(first, split_rows(rows, None, 4, seed=10).folds)


def test_holdout_rows_never_train():
    rows = _rows({"a": 30, "b": 20, "c": 10})
    split = split_rows(rows, holdout="b", folds=3, seed=0)
    assert "b" not in split.train.circuit.tolist()
    assert set(split.test.circuit.tolist()) == {"b"}
    assert len(split.train) + len(split.test) == 60
    train, valid = split.split(0)
    assert len(np.intersect1d(train, valid)) == 0
    assert len(train) + len(valid) == len(split.train)


@pytest.mark.parametrize("holdout,folds", [("zzz", 3), ("a", 1), (None, 100)])
def test_split_rejects_bad_arguments(holdout, folds):
    with pytest.raises(ValidationError):
        split_rows(_rows({"a": 30, "b": 20}), holdout, folds, seed=0)


def test_holdout_needs_two_circuits():
    with pytest.raises(ValidationError):
        split_rows(_rows({"a": 30}), "a", 3, seed=0)


def test_assemble_rejects_single_circuit(c17):
    with pytest.raises(ValidationError):
        assemble_training_set([label_circuit(c17, analyze(c17), k_hard=5)], holdout=None)


def test_training_csv(tmp_path):
    rows = _rows({"a": 5, "b": 3})
    path = tmp_path / "training.csv"
    write_training_csv(path, rows)
    again = read_training_csv(path)
    assert again.circuit.tolist() == rows.circuit.tolist()
    np.testing.assert_array_equal(again.extended, rows.extended)
    np.testing.assert_array_equal(again.p, rows.p)
    assert path.read_text().splitlines()[0].endswith(",fanout,f_total,f_success,p")


def test_training_csv_rejects_bad_label(tmp_path):
    path = tmp_path / "training.csv"
    write_training_csv(path, _rows({"a": 2}))
    lines = path.read_text().splitlines()
    lines[1] = lines[1].rsplit(",", 1)[0] + ",1.5"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataFormatError):
        read_training_csv(path)


def test_meta_labels_ties_go_to_hybnn():
    labels = generate_meta_labels({"c1": (10, 20), "c2": (20, 10), "c3": (15, 15)})
    assert labels == {"c1": HYBNN_CLASS, "c2": SVR_CLASS, "c3": HYBNN_CLASS}


def test_meta_labels_need_both_results():
    with pytest.raises(DataFormatError):
        generate_meta_labels({"c1": (10, None)})


def test_per_net_meta_labels():
    hybnn = NetLabelAccumulator(f_total=np.array([2, 0, 3, 0]), f_success=np.array([1, 0, 3, 0]))
    svr = NetLabelAccumulator(f_total=np.array([2, 4, 3, 0]), f_success=np.array([2, 1, 2, 0]))
    assert per_net_meta_labels(hybnn, svr) == {0: SVR_CLASS, 1: HYBNN_CLASS, 2: HYBNN_CLASS}


def test_meta_labels_csv_and_dataset(tmp_path):
    rows = _rows({"a": 4, "b": 3, "c": 2})
    labels = {("a", None): 1, ("b", None): 0, ("a", "n0"): 0}
    path = tmp_path / "meta.csv"
    write_meta_labels_csv(path, labels)
    assert path.read_text().splitlines()[0] == "circuit,net,class"
    assert read_meta_labels_csv(path) == labels

    features, classes = meta_dataset(rows, labels)
    assert classes.tolist() == [0, 1, 1, 1, 0, 0, 0]
    assert features.shape == (7, EXTENDED_DIM)


def test_meta_labels_csv_circuit_level(tmp_path):
    path = tmp_path / "meta.csv"
    write_meta_labels_csv(path, {("b", None): 1, ("a", None): 0})
    assert path.read_text().splitlines() == ["circuit,class", "a,0", "b,1"]
    path.write_text("circuit,class\na,2\n")
    with pytest.raises(DataFormatError):
        read_meta_labels_csv(path)

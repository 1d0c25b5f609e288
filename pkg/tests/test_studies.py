from __future__ import annotations

import json
import warnings

import numpy as np
import pytest

from segtune.errors import ConfigError
from segtune.paramspace import load_space
from segtune.studies import (GeneratorParams, StudyReport, as_samples, generate_dataset, generate_scene,
                             grouped_dataset, grouped_xval, mean_std, monte_carlo_xval, split_indices, split_sizes,
                             weight_sweep)


@pytest.fixture(scope="module")
def space():
    return load_space("synthetic")


@pytest.fixture(scope="module")
def small_data():
    return generate_dataset(5, seed=3, size=(64, 64), params=GeneratorParams(count=4))


# -- generator -------------------------------------------------------------------

def test_dataset_is_reproducible():
    a = generate_dataset(15, seed=7)
    b = generate_dataset(15, seed=7)
    assert len(a) == 15
    assert all(x.image.tobytes() == y.image.tobytes() and x.truth == y.truth for x, y in zip(a, b))
    c = generate_dataset(15, seed=8)
    assert any(x.image.tobytes() != y.image.tobytes() for x, y in zip(a, c))


def test_single_small_scene():
    (scene,) = generate_dataset(1, seed=0, size=(64, 64))
    assert scene.image.shape == (64, 64) and scene.image.dtype == np.uint8


def test_truth_objects_and_labels():
    for scene in generate_dataset(5, seed=2):
        labels = scene.truth.labels
        present = sorted(int(v) for v in np.unique(labels) if v)
        assert present == list(range(1, scene.params.count + 1))
        fg = scene.image[labels > 0].astype(float)
        bg = scene.image[labels == 0].astype(float)
        assert fg.mean() > bg.mean() + 60


def test_crowded_scene_warns_and_keeps_fewer():
    rng = np.random.default_rng(0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scene = generate_scene((24, 24), GeneratorParams(count=20, radius=(5, 6)), rng)
    assert any("rejections" in str(w.message) for w in caught)
    assert 1 <= int(scene.truth.labels.max()) < 20


def test_generator_params_validation():
    for bad in (dict(count=-1), dict(radius=(0.5, 2)), dict(noise=-1), dict(elongation=0.5)):
        with pytest.raises(ConfigError):
            GeneratorParams(**bad)
    with pytest.raises(ConfigError):
        generate_dataset(0)


def test_grouped_dataset_labels():
    data = grouped_dataset({"elongated": 2, "round": 3}, seed=1, size=(64, 64))
    assert [d.group for d in data] == ["elongated"] * 2 + ["round"] * 3
    assert data[0].params.elongation == 2.5 and data[2].params.elongation == 1.0


# -- aggregation ---------------------------------------------------------------------

def test_mean_std():
    assert mean_std([0.4]) == (0.4, 0.0)
    m, s = mean_std([1.0, 2.0, 3.0])
    assert m == 2.0 and s == pytest.approx(1.0)


# -- splits ----------------------------------------------------------------------

@pytest.mark.parametrize("n,frac,expected", [(15, 0.2, (3, 12)), (5, 0.2, (1, 4)), (10, 0.2, (2, 8)),
                                             (3, 0.5, (2, 1))])
def test_split_sizes(n, frac, expected):
    assert split_sizes(n, frac) == expected


@pytest.mark.parametrize("n,frac", [(1, 0.5), (4, 0.01), (15, 0.0), (15, 1.0)])
def test_degenerate_splits(n, frac):
    with pytest.raises(ConfigError):
        split_sizes(n, frac)


def test_split_indices_partition_and_determinism():
    def seq(seed):
        rng = np.random.default_rng(seed)
        return [split_indices(15, 0.2, rng) for _ in range(10)]

    first = seq(4)
    assert first == seq(4)
    for train, test in first:
        assert len(train) == 3 and len(test) == 12
        assert set(train).isdisjoint(test) and set(train) | set(test) == set(range(15))
    assert len({tuple(t) for t, _ in first}) > 1


# -- studies -------------------------------------------------------------------

def test_weight_sweep_shape_and_ratios(space, small_data):
    report = weight_sweep(space, small_data, algorithms=("ga", "nm", "pro", "boa"), budget=12, seed=0)
    assert report.kind == "weight-sweep" and len(report.rows) == 16
    assert [r["weights"]["raw"] for r in report.rows[::4]] == ["1,0", "1/2,1/2", "2/3,1/3", "4/5,1/5"]
    for r in report.rows:
        assert r["tuned_quality_std"] == 0.0 and len(r["repeats"]) == 1
        assert r["quality_improvement"] == pytest.approx(r["tuned_quality"] / r["default_quality"], abs=1e-9)
        if r["weights"]["time"] == 0:
            assert r["speedup"] is None
        else:
            assert r["speedup"] == pytest.approx(r["default_time"] / r["tuned_time"], abs=1e-9)
    table = report.to_table()
    assert "quality_improvement" in table.splitlines()[0] and len(table.splitlines()) == 18


def test_weight_sweep_repeats_and_raw_weights(space, small_data):
    report = weight_sweep(space, small_data, algorithms=("nm",), weight_sets=[(2, 1)], budget=6, repeats=2)
    (row,) = report.rows
    assert row["weights"] == {"raw": "2,1", "quality": pytest.approx(2 / 3), "time": pytest.approx(1 / 3)}
    assert [r["seed"] for r in row["repeats"]] == [0, 1]
    q = [r["quality"] for r in row["repeats"]]
    assert row["tuned_quality"] == pytest.approx(np.mean(q))
    assert row["tuned_quality_std"] == pytest.approx(np.std(q, ddof=1))


def test_weight_sweep_report_is_deterministic(space, small_data):
    kwargs = dict(algorithms=("ga",), weight_sets=[(1, 0)], budget=8, seed=5)
    a = weight_sweep(space, small_data, **kwargs).to_json()
    b = weight_sweep(space, small_data, **kwargs).to_json()
    assert a == b
    assert json.loads(a)["rows"][0]["algorithm"] == "ga"


def test_weight_sweep_empty(space):
    with pytest.raises(ConfigError):
        weight_sweep(space, [])


def test_xval_splits_and_determinism(space):
    data = generate_dataset(15, seed=7, size=(64, 64), params=GeneratorParams(count=4))
    a = monte_carlo_xval(space, data, 0.2, repeats=3, seed=2, budget=5)
    b = monte_carlo_xval(space, data, 0.2, repeats=3, seed=2, budget=5)
    assert a.to_json() == b.to_json()
    (row,) = a.rows
    assert row["train"] == 3 and row["test"] == 12 and len(row["repeats"]) == 3
    for rep in row["repeats"]:
        assert set(rep["train"]).isdisjoint(rep["test"]) and len(rep["train"]) + len(rep["test"]) == 15


def test_xval_train_equals_test_cannot_lose(space, small_data):
    everything = list(range(len(small_data)))
    report = monte_carlo_xval(space, small_data, splits=[(everything, everything)], budget=15, seed=0)
    rep = report.rows[0]["repeats"][0]
    assert rep["tuned_quality"] >= rep["default_quality"]


def test_xval_rejects_bad_splits(space, small_data):
    with pytest.raises(ConfigError):
        monte_carlo_xval(space, small_data, splits=[([0], [])], budget=2)
    with pytest.raises(ConfigError):
        monte_carlo_xval(space, small_data[:1], 0.2, repeats=1, budget=2)


def test_grouped_xval_per_group_sizes(space):
    data = grouped_dataset({"elongated": 5, "round": 10}, seed=0, size=(64, 64))
    report = grouped_xval(space, data, train_fraction={"elongated": 1 / 5, "round": 2 / 10},
                          repeats=2, budget=4, seed=1)
    rows = {r["group"]: r for r in report.rows}
    assert (rows["elongated"]["train"], rows["elongated"]["test"]) == (1, 4)
    assert (rows["round"]["train"], rows["round"]["test"]) == (2, 8)
    assert "group" in report.to_table().splitlines()[0]


def test_grouped_xval_single_group_and_labels(space, small_data):
    single = grouped_xval(space, small_data, groups=["g"] * 5, repeats=1, budget=3, seed=0)
    plain = monte_carlo_xval(space, small_data, repeats=1, budget=3, seed=0, group="g")
    assert single.rows == plain.rows
    with pytest.raises(ConfigError):
        grouped_xval(space, small_data, repeats=1, budget=3)  # scenes carry no group


def test_report_serialization():
    r = StudyReport("x", [{"algorithm": "ga", "speedup": None, "weights": {"raw": "1,0"}}], {"k": 1})
    assert json.loads(r.to_json()) == {"kind": "x", "config": {"k": 1}, "rows": r.rows}
    assert r.to_table().splitlines()[2].split() == ["ga", "1,0", "-"]


def test_as_samples_names(small_data):
    assert [s.name for s in as_samples(small_data)] == [f"scene{i}" for i in range(5)]

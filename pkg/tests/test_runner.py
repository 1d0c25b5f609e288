from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

from segtune.errors import ConfigError, EvaluationError
from segtune.maskdata import LabelMask, save_mask
from segtune.objective import ObjectiveConfig
from segtune.paramspace import ParameterPoint, ParameterSpace, ParameterSpec, load_space
from segtune.runner import (CommandWorkflow, Sample, SyntheticWorkflow, TuningOutcome, calibrate_time_cap,
                            evaluate_point, format_value, load_samples, run_tuning, safe_evaluate,
                            synthetic_cost, synthetic_segment, workflow_from_dict)
from segtune.studies import GeneratorParams, as_samples, generate_dataset

FIXTURE = Path(__file__).parent / "fixtures" / "threshold_seg.py"
MATCHED = {"Blur": 0, "Threshold": 115, "MinSize": 1, "MaxSize": 2000, "Connectivity": "8-conn"}


@pytest.fixture(scope="module")
def clean_samples():
    return as_samples(generate_dataset(3, seed=1, size=(64, 64), params=GeneratorParams(count=4, noise=0.0)))


@pytest.fixture(scope="module")
def noisy_samples():
    return as_samples(generate_dataset(4, seed=7, size=(96, 96)))


def synthetic_space():
    return load_space("synthetic")


# -- synthetic segmenter -------------------------------------------------------

def test_matched_parameters_give_quality_one(clean_samples):
    space = synthetic_space()
    point = space.point_from_mapping(MATCHED)
    r = evaluate_point(point, SyntheticWorkflow(), clean_samples, ObjectiveConfig((1, 0), time_cap=1.0), space)
    assert r.quality == 1.0 and r.per_image == (1.0, 1.0, 1.0)
    assert r.time_source == "adapter-reported"


def test_generator_defaults_with_matched_threshold(noisy_samples):
    space = synthetic_space()
    point = space.point_from_mapping({**MATCHED, "MinSize": 5})
    r = evaluate_point(point, SyntheticWorkflow(), noisy_samples, ObjectiveConfig((1, 0), time_cap=1.0), space)
    assert r.quality >= 0.95


def test_segmenter_edge_cases():
    img = np.full((10, 10), 200, dtype=np.uint8)
    img[2:5, 2:5] = 250
    assert synthetic_segment(img, {**MATCHED, "Threshold": 255}).labels.max() == 0
    assert synthetic_segment(img, {**MATCHED, "Threshold": 220, "MinSize": 10}).labels.max() == 0
    out = synthetic_segment(img, {**MATCHED, "Threshold": 220})
    assert out.labels.max() == 1 and int((out.labels == 1).sum()) == 9
    assert synthetic_cost(img, {"Blur": 3}) == pytest.approx(4 * 100 * 1e-7)
    with pytest.raises(ConfigError):
        synthetic_segment(img, {**MATCHED, "Connectivity": "6-conn"})


def test_blur_smooths_noise():
    rng = np.random.default_rng(0)
    img = np.clip(100 + rng.normal(0, 40, (40, 40)), 0, 255)
    noisy = synthetic_segment(img, {**MATCHED, "Threshold": 150}).labels.max()
    smooth = synthetic_segment(img, {**MATCHED, "Threshold": 150, "Blur": 3}).labels.max()
    assert smooth < noisy


# -- samples and templates -----------------------------------------------------------

def test_sample_validation_and_binary_truth():
    with pytest.raises(ConfigError):
        Sample(np.zeros((3, 3)), LabelMask(np.zeros((3, 4), dtype=int)))
    s = Sample(np.zeros((1, 3)), LabelMask(np.array([[255, 0, 255]])))
    assert s.truth.labels.tolist() == [[1, 0, 2]]
    assert len(s.truth_objects) == 2


def test_load_samples(tmp_path):
    save_mask(LabelMask(np.array([[10, 200]])), tmp_path / "i.pgm")
    save_mask(LabelMask(np.array([[0, 1]])), tmp_path / "t.pgm")
    (s,) = load_samples([tmp_path / "i.pgm"], [tmp_path / "t.pgm"])
    assert s.name == "i" and s.image.tolist() == [[10, 200]]
    with pytest.raises(ConfigError):
        load_samples([tmp_path / "i.pgm"], [])


def test_format_value():
    assert format_value(3) == "3"
    assert format_value(0.1 + 0.2) == "0.3"
    assert format_value(1 / 3) == "0.333333333"
    assert format_value("8-conn") == "8-conn"


def test_template_substitution_is_literal_and_shell_free():
    space = ParameterSpace([ParameterSpec("OTSU", lo=0.3, hi=1.3, step=0.1),
                            ParameterSpec("Curvature Weight", lo=0.0, hi=1.0, step=0.05)])
    wf = CommandWorkflow("mysegmenter --otsu {OTSU} --cw {Curvature Weight} --in {input} --out {output}")
    wf.validate(space)
    argv = wf.argv({"OTSU": 0.7, "Curvature Weight": 0.35}, "a b.pgm", "$(rm -rf x).pgm")
    assert argv == ["mysegmenter", "--otsu", "0.7", "--cw", "0.35", "--in", "a b.pgm", "--out", "$(rm -rf x).pgm"]


@pytest.mark.parametrize("template", [
    "seg --t {T} --in {input}",                          # no output
    "seg --t {T} {T} --in {input} --out {output}",       # twice
    "seg --in {input} --out {output}",                   # missing dim
    "seg --t {T} --x {Y} --in {input} --out {output}",   # unknown
    "seg 'unterminated --t {T} --in {input} --out {output}",
])
def test_template_validation(template):
    space = ParameterSpace([ParameterSpec("T", lo=0, hi=10, step=1)])
    with pytest.raises(ConfigError):
        CommandWorkflow(template).validate(space)


def test_workflow_from_dict():
    assert isinstance(workflow_from_dict({"kind": "synthetic"}), SyntheticWorkflow)
    wf = workflow_from_dict({"kind": "external-command", "command": "x {input} {output}", "timeout": 5})
    assert wf == CommandWorkflow("x {input} {output}", 5.0)
    for bad in ({"kind": "external-command"}, {"kind": "docker"}):
        with pytest.raises(ConfigError):
            workflow_from_dict(bad)
    with pytest.raises(ConfigError):
        SyntheticWorkflow().validate(ParameterSpace([ParameterSpec("T", lo=0, hi=1, step=1)]))


# -- external commands ---------------------------------------------------------------

def threshold_space():
    return ParameterSpace([ParameterSpec("T", lo=50, hi=250, step=50, default=100)])


def test_external_command_evaluation(clean_samples):
    space = threshold_space()
    wf = CommandWorkflow(f"{sys.executable} {FIXTURE} --t {{T}} --in {{input}} --out {{output}}")
    wf.validate(space)
    r = evaluate_point(ParameterPoint((100,)), wf, clean_samples, ObjectiveConfig((1, 0), time_cap=60), space)
    assert r.quality == 1.0 and r.time_source == "measured" and r.time_seconds > 0


def test_false_records_zero(clean_samples):
    space = ParameterSpace([ParameterSpec("T", lo=0, hi=1, step=1)])
    wf = CommandWorkflow("false {T} {input} {output}")
    obj = ObjectiveConfig((1, 0), time_cap=1.0)
    with pytest.raises(EvaluationError):
        evaluate_point(ParameterPoint((0,)), wf, clean_samples[:1], obj, space)
    r = safe_evaluate(ParameterPoint((0,)), wf, clean_samples[:1], obj, space)
    assert r.scalar == 0.0 and r.failed and "status 1" in r.error


def test_failures_carry_stderr_and_do_not_abort(clean_samples):
    space = threshold_space()
    wf = CommandWorkflow(f"{sys.executable} {FIXTURE} --t {{T}} --fail-above 150 --in {{input}} --out {{output}}")
    out = run_tuning(space, wf, clean_samples[:1], ObjectiveConfig((1, 0), time_cap=60), "random", budget=5, seed=0)
    failed = [r for r in out.history if r.failed]
    assert failed and all("rejected" in r.error and r.scalar == 0.0 for r in failed)
    assert out.executed == 5 and out.best.quality == 1.0


def test_missing_executable_and_timeout(clean_samples):
    space = ParameterSpace([ParameterSpec("T", lo=0, hi=1, step=1)])
    obj = ObjectiveConfig((1, 0), time_cap=1.0)
    r = safe_evaluate(ParameterPoint((0,)), CommandWorkflow("/no/such/bin {T} {input} {output}"),
                      clean_samples[:1], obj, space)
    assert r.failed and "cannot run" in r.error
    slow = CommandWorkflow(f"{sys.executable} -c 'import time; time.sleep(5)' {{T}} {{input}} {{output}}", timeout=0.3)
    r = safe_evaluate(ParameterPoint((0,)), slow, clean_samples[:1], obj, space)
    assert r.failed and "timed out" in r.error


def test_no_output_file_is_a_failure(clean_samples):
    space = ParameterSpace([ParameterSpec("T", lo=0, hi=1, step=1)])
    r = safe_evaluate(ParameterPoint((0,)), CommandWorkflow("true {T} {input} {output}"), clean_samples[:1],
                      ObjectiveConfig((1, 0), time_cap=1.0), space)
    assert r.failed and "unreadable output" in r.error


# -- tuning loop ---------------------------------------------------------------

def test_cache_hits_are_free(noisy_samples):
    space = ParameterSpace([ParameterSpec("Blur", values=(0,)), ParameterSpec("Threshold", lo=100, hi=120, step=10),
                            ParameterSpec("MinSize", values=(5,)), ParameterSpec("MaxSize", values=(2000,)),
                            ParameterSpec("Connectivity", values=("8-conn",))])
    calls = []
    out = run_tuning(space, SyntheticWorkflow(), noisy_samples, ObjectiveConfig((1, 0), time_cap=1.0),
                     "random", budget=50, seed=0, on_progress=lambda n, b, best: calls.append(n))
    assert out.executed == len(out.history) == 3  # only three distinct points exist
    assert calls == [1, 2, 3]
    keys = [r.point for r in out.history]
    assert len(set(keys)) == 3


def test_budget_one_best_is_only_point(noisy_samples):
    out = run_tuning(synthetic_space(), SyntheticWorkflow(), noisy_samples, ObjectiveConfig((0.5, 0.5)),
                     "ga", budget=1, seed=3)
    assert out.executed == 1 and out.best == out.history[0]
    assert out.default is not None and out.time_cap == pytest.approx(2 * out.default.time_seconds)


@pytest.mark.parametrize("algo", ["ga", "nm", "pro", "boa"])
def test_budget_respected(noisy_samples, algo):
    out = run_tuning(synthetic_space(), SyntheticWorkflow(), noisy_samples[:2], ObjectiveConfig((0.8, 0.2)),
                     algo, budget=100, seed=0)
    assert out.executed <= 100
    assert out.best == max(out.history, key=lambda r: r.scalar)


def test_workers_do_not_change_the_outcome(noisy_samples):
    args = (synthetic_space(), SyntheticWorkflow(), noisy_samples, ObjectiveConfig((0.8, 0.2)), "ga", 100, 11)
    one = run_tuning(*args, workers=1)
    four = run_tuning(*args, workers=4)
    assert one.best.point == four.best.point and one.best.scalar == four.best.scalar
    assert [r.point for r in one.history] == [r.point for r in four.history]


def test_target_stops_early(clean_samples):
    out = run_tuning(synthetic_space(), SyntheticWorkflow(), clean_samples, ObjectiveConfig((1, 0)),
                     "random", budget=100, seed=0, target=0.0)
    assert out.executed == 1


def test_calibration_failure_is_config_error(clean_samples):
    space = ParameterSpace([ParameterSpec("T", lo=0, hi=1, step=1)])
    with pytest.raises(ConfigError):
        calibrate_time_cap(space, CommandWorkflow("false {T} {input} {output}"), clean_samples[:1],
                           ObjectiveConfig((1, 0)))


def test_bad_arguments(clean_samples):
    for kwargs in (dict(budget=0), dict(workers=0)):
        with pytest.raises(ConfigError):
            run_tuning(synthetic_space(), SyntheticWorkflow(), clean_samples, ObjectiveConfig(), "ga", **kwargs)
    with pytest.raises(ConfigError):
        run_tuning(synthetic_space(), SyntheticWorkflow(), [], ObjectiveConfig())


def test_outcome_round_trip(clean_samples):
    out = run_tuning(synthetic_space(), SyntheticWorkflow(), clean_samples, ObjectiveConfig((0.5, 0.5)),
                     "nm", budget=5, seed=0)
    back = TuningOutcome.from_dict(out.to_dict())
    assert back.best == out.best and back.history == out.history and back.default == out.default

"""Workflow execution and the ask / evaluate / tell tuning loop.

A workflow turns one grayscale image plus a parameter assignment into a
label mask. Two kinds exist: an external command run once per image, and a
built-in synthetic segmenter used for tests, studies and demos.
"""
from __future__ import annotations

import logging
import math
import re
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import ConfigError, EvaluationError, Finished, FormatError
from .maskdata import LabelMask, ObjectSet, as_labeled, connected_components, extract_objects, load_mask, save_mask
from .metrics import avg_object_dice, metric_fn
from .objective import EvaluationResult, ObjectiveConfig, evaluation, failed_evaluation
from .optimizers import make_optimizer
from .paramspace import ParameterPoint, ParameterSpace, Value

log = logging.getLogger(__name__)

#: simulated seconds per pixel per blur pass of the synthetic segmenter
SYNTHETIC_COST = 1e-7
STDERR_EXCERPT = 2000
_PLACEHOLDER = re.compile(r"\{([^{}]+)\}")


# -- inputs ------------------------------------------------------------------

@dataclass
class Sample:
    """One tuning input: a grayscale image and its reference mask."""

    image: np.ndarray
    truth: LabelMask
    image_path: Path | None = None
    name: str = ""
    _truth_objects: ObjectSet | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.image = np.asarray(self.image)
        if self.image.ndim != 2:
            raise ConfigError(f"image must be 2D, got shape {self.image.shape}")
        if self.image.shape != self.truth.shape:
            raise ConfigError(f"image {self.image.shape} and truth {self.truth.shape} differ in shape")
        self.truth = as_labeled(self.truth)

    @property
    def truth_objects(self) -> ObjectSet:
        if self._truth_objects is None:
            self._truth_objects = extract_objects(self.truth, boundaries=False)
        return self._truth_objects


def load_samples(images: Sequence[str | Path], truths: Sequence[str | Path]) -> list[Sample]:
    """Read matching image / reference PGM files. Raises ``FormatError`` or ``OSError``."""
    if len(images) != len(truths):
        raise ConfigError(f"{len(images)} images but {len(truths)} reference masks")
    if not images:
        raise ConfigError("at least one input image is required")
    out = []
    for ip, tp in zip(images, truths):
        image = load_mask(ip).labels
        out.append(Sample(image, load_mask(tp), Path(ip), Path(ip).stem))
    return out


# -- workflows ---------------------------------------------------------------

def format_value(value: Value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".9g")


@dataclass(frozen=True)
class SyntheticWorkflow:
    """The built-in segmenter; see :func:`synthetic_segment`."""

    kind = "synthetic"

    def validate(self, space: ParameterSpace) -> None:
        missing = {"Blur", "Threshold", "MinSize", "MaxSize", "Connectivity"} - set(space.names)
        if missing:
            raise ConfigError(f"synthetic workflow needs dims {sorted(missing)}")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "synthetic"}


@dataclass(frozen=True)
class CommandWorkflow:
    """An external segmenter invoked without a shell.

    ``template`` is split like a shell command line, then every ``{name}``
    placeholder is replaced literally: parameter names, ``{input}`` (an image
    path) and ``{output}`` (a fresh path the command must write a PGM to).
    Placeholder names may contain spaces.
    """

    template: str
    timeout: float = 600.0
    kind = "external-command"

    def argv_template(self) -> list[str]:
        slots: list[str] = []

        def protect(m: re.Match) -> str:
            slots.append(m.group(1))
            return f"\x00{len(slots) - 1}\x00"

        try:
            parts = shlex.split(_PLACEHOLDER.sub(protect, self.template))
        except ValueError as exc:
            raise ConfigError(f"cannot parse command template: {exc}") from None
        if not parts:
            raise ConfigError("command template is empty")
        return [re.sub("\x00(\\d+)\x00", lambda m: "{" + slots[int(m.group(1))] + "}", p) for p in parts]

    def placeholders(self) -> list[str]:
        return _PLACEHOLDER.findall(self.template)

    def validate(self, space: ParameterSpace) -> None:
        if not self.timeout > 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout!r}")
        self.argv_template()
        found = self.placeholders()
        for name in space.names:
            n = found.count(name)
            if n != 1:
                raise ConfigError(f"parameter {name!r} appears {n} times in the command template; expected once")
        for special in ("input", "output"):
            if found.count(special) != 1:
                raise ConfigError(f"command template needs exactly one {{{special}}} placeholder")
        unknown = set(found) - set(space.names) - {"input", "output"}
        if unknown:
            raise ConfigError(f"unknown placeholders in command template: {sorted(unknown)}")

    def argv(self, values: Mapping[str, Value], input_path: str | Path, output_path: str | Path) -> list[str]:
        subs = {k: format_value(v) for k, v in values.items()}
        subs["input"] = str(input_path)
        subs["output"] = str(output_path)
        return [_PLACEHOLDER.sub(lambda m: subs.get(m.group(1), m.group(0)), part)
                for part in self.argv_template()]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "external-command", "command": self.template, "timeout": self.timeout}


WorkflowSpec = SyntheticWorkflow | CommandWorkflow


def workflow_from_dict(d: Mapping[str, Any]) -> WorkflowSpec:
    kind = d.get("kind", "synthetic")
    if kind == "synthetic":
        return SyntheticWorkflow()
    if kind in ("external-command", "command"):
        if not isinstance(d.get("command"), str):
            raise ConfigError("external-command workflow needs a 'command' template string")
        return CommandWorkflow(d["command"], float(d.get("timeout", 600.0)))
    raise ConfigError(f"unknown workflow kind {kind!r}")


# -- synthetic segmenter -----------------------------------------------------

def _connectivity(value: Value) -> int:
    text = str(value)
    if text in ("4", "4-conn"):
        return 4
    if text in ("8", "8-conn"):
        return 8
    raise ConfigError(f"connectivity must be 4-conn or 8-conn, got {value!r}")


def synthetic_segment(image: np.ndarray, params: Mapping[str, Value]) -> LabelMask:
    """Blur, threshold, label and size-filter a grayscale image.

    ``Blur`` passes of a 3x3 box filter (edges replicated), then pixels
    strictly above ``Threshold`` are foreground. Components outside
    ``[MinSize, MaxSize]`` are dropped and the survivors relabeled 1..n in
    raster order.
    """
    img = np.asarray(image, dtype=float)
    for _ in range(int(params["Blur"])):
        img = uniform_filter(img, size=3, mode="nearest")
    binary = img > float(params["Threshold"])
    labeled = connected_components(binary.astype(np.uint8), _connectivity(params["Connectivity"])).labels
    n = int(labeled.max()) if labeled.size else 0
    if n == 0:
        return LabelMask(labeled)
    area = np.bincount(labeled.ravel(), minlength=n + 1)
    keep = (area >= float(params["MinSize"])) & (area <= float(params["MaxSize"]))
    keep[0] = False
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[keep] = np.arange(1, int(keep.sum()) + 1, dtype=np.int32)
    return LabelMask(remap[labeled])


def synthetic_cost(image: np.ndarray, params: Mapping[str, Value]) -> float:
    return (1 + int(params["Blur"])) * int(np.asarray(image).size) * SYNTHETIC_COST


# -- evaluation ----------------------------------------------------------------

def _quality(metric: str, sample: Sample, computed: LabelMask) -> float:
    if computed.shape != sample.truth.shape:
        raise EvaluationError(f"output mask is {computed.width}x{computed.height}, "
                              f"expected {sample.truth.width}x{sample.truth.height}")
    if metric == "object-dice":
        return avg_object_dice(sample.truth, computed, ref_objects=sample.truth_objects)[0]
    return metric_fn(metric)(computed, sample.truth)


def _run_command(workflow: CommandWorkflow, values: Mapping[str, Value], sample: Sample,
                 workdir: Path, index: int) -> tuple[LabelMask, float]:
    input_path = sample.image_path
    if input_path is None:
        input_path = workdir / f"input-{index}.pgm"
        save_mask(LabelMask(sample.image), input_path)
    output_path = workdir / f"output-{index}.pgm"
    argv = workflow.argv(values, input_path, output_path)
    start = time.perf_counter()
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=workflow.timeout, check=False)
    except subprocess.TimeoutExpired as exc:
        err = (exc.stderr or b"").decode("utf-8", "replace")
        raise EvaluationError(f"command timed out after {workflow.timeout:g} s", err[-STDERR_EXCERPT:]) from None
    except OSError as exc:
        raise EvaluationError(f"cannot run {argv[0]!r}: {exc}") from None
    elapsed = time.perf_counter() - start
    stderr = proc.stderr.decode("utf-8", "replace")[-STDERR_EXCERPT:]
    if proc.returncode != 0:
        raise EvaluationError(f"command exited with status {proc.returncode}", stderr)
    try:
        mask = load_mask(output_path)
    except (OSError, FormatError) as exc:
        raise EvaluationError(f"unreadable output mask: {exc}", stderr) from None
    return as_labeled(mask), elapsed


def evaluate_point(point: ParameterPoint, workflow: WorkflowSpec, inputs: Sequence[Sample],
                   objective: ObjectiveConfig, space: ParameterSpace) -> EvaluationResult:
    """Run the workflow on every input and score the outputs.

    Raises :class:`EvaluationError` when a run fails; the tuning loop turns
    that into a zero-scored result.
    """
    if not inputs:
        raise ConfigError("evaluate_point needs at least one input")
    values = space.as_mapping(space.point_at(space.indices_of(point)))
    per_image: list[float] = []
    total = 0.0
    if isinstance(workflow, SyntheticWorkflow):
        for sample in inputs:
            computed = synthetic_segment(sample.image, values)
            per_image.append(_quality(objective.quality_metric, sample, computed))
            total += synthetic_cost(sample.image, values)
        source = "adapter-reported"
    else:
        with tempfile.TemporaryDirectory(prefix="segtune-") as tmp:
            for i, sample in enumerate(inputs):
                computed, elapsed = _run_command(workflow, values, sample, Path(tmp), i)
                per_image.append(_quality(objective.quality_metric, sample, computed))
                total += elapsed
        source = "measured"
    quality = float(np.mean(per_image))
    return evaluation(objective, point, quality, total, source, per_image)


def safe_evaluate(point: ParameterPoint, workflow: WorkflowSpec, inputs: Sequence[Sample],
                  objective: ObjectiveConfig, space: ParameterSpace) -> EvaluationResult:
    """:func:`evaluate_point` with failures recorded as scalar 0.0."""
    try:
        return evaluate_point(point, workflow, inputs, objective, space)
    except EvaluationError as exc:
        log.warning("evaluation of %s failed: %s", space.as_mapping(point), exc)
        return failed_evaluation(point, str(exc) + (f"\n{exc.stderr}" if exc.stderr else ""))


# -- tuning loop ---------------------------------------------------------------

@dataclass
class TuningOutcome:
    names: list[str]
    best: EvaluationResult
    history: list[EvaluationResult]
    executed: int
    wall_time: float
    algorithm: str = ""
    budget: int = 0
    seed: int | None = None
    time_cap: float | None = None
    default: EvaluationResult | None = None

    @property
    def best_point(self) -> ParameterPoint:
        return self.best.point

    def to_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "budget": self.budget,
            "seed": self.seed,
            "executed": self.executed,
            "wall_time": self.wall_time,
            "time_cap": self.time_cap,
            "best_point": dict(zip(self.names, self.best.point.values)),
            "best": self.best.to_dict(self.names),
            "default": self.default.to_dict(self.names) if self.default is not None else None,
            "history": [r.to_dict(self.names) for r in self.history],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TuningOutcome":
        names = list(d["best_point"])
        history = [EvaluationResult.from_dict(r, names) for r in d["history"]]
        default = EvaluationResult.from_dict(d["default"], names) if d.get("default") else None
        return cls(names, EvaluationResult.from_dict(d["best"], names), history, d["executed"],
                   d["wall_time"], d.get("algorithm", ""), d.get("budget", 0), d.get("seed"),
                   d.get("time_cap"), default)


def best_of(history: Sequence[EvaluationResult]) -> EvaluationResult:
    """Highest scalar; the earliest wins ties."""
    best = history[0]
    for r in history[1:]:
        if r.scalar > best.scalar:
            best = r
    return best


def calibrate_time_cap(space: ParameterSpace, workflow: WorkflowSpec, inputs: Sequence[Sample],
                       objective: ObjectiveConfig, point: ParameterPoint | None = None) -> tuple[float, EvaluationResult]:
    """Twice the run time of ``point`` (the space default unless given).

    Returns the cap and the point's result scored under it.
    """
    point = point if point is not None else space.default_point()
    probe = objective.with_time_cap(1.0)
    try:
        first = evaluate_point(point, workflow, inputs, probe, space)
    except EvaluationError as exc:
        raise ConfigError(f"default point failed, cannot calibrate the time cap: {exc}") from None
    cap = 2.0 * first.time_seconds
    if not (math.isfinite(cap) and cap > 0):
        raise ConfigError("default point reported zero time; pass an explicit time cap")
    rescored = evaluation(objective.with_time_cap(cap), point, first.quality, first.time_seconds,
                          first.time_source, first.per_image)
    return cap, rescored


ProgressFn = Callable[[int, int, EvaluationResult], None]


def run_tuning(space: ParameterSpace, workflow: WorkflowSpec, inputs: Sequence[Sample],
               objective: ObjectiveConfig, algorithm: str = "ga", budget: int = 100,
               seed: int | None = 0, workers: int = 1, *, target: float | None = None,
               default_point: ParameterPoint | None = None, on_progress: ProgressFn | None = None,
               algo_options: Mapping[str, Any] | None = None) -> TuningOutcome:
    """Tune ``space`` for ``workflow`` on ``inputs``.

    Points of one batch are evaluated by a pool of ``workers`` threads that
    each pull the next pending point, but results go back to the optimizer in
    the order they were asked for, so the outcome does not depend on
    ``workers``. Repeated grid points are answered from a cache and do not
    count as executed evaluations. When the objective has no time cap, the
    default point is run once beforehand to set it; that run is reported as
    ``default`` and is not charged to the budget.
    """
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if not inputs:
        raise ConfigError("at least one input is required")
    workflow.validate(space)
    started = time.perf_counter()
    default: EvaluationResult | None = None
    if objective.time_cap is None:
        cap, default = calibrate_time_cap(space, workflow, inputs, objective, default_point)
        objective = objective.with_time_cap(cap)
    optimizer = make_optimizer(algorithm, space, budget, seed, **dict(algo_options or {}))
    cache: dict[tuple[int, ...], EvaluationResult] = {}
    history: list[EvaluationResult] = []
    best: EvaluationResult | None = None
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="segtune-eval") as pool:
        while True:
            try:
                batch = optimizer.ask()
            except Finished:
                break
            keys = [space.indices_of(p) for p in batch]
            fresh = list(dict.fromkeys(k for k in keys if k not in cache))
            futures = [pool.submit(safe_evaluate, space.point_at(k), workflow, inputs, objective, space)
                       for k in fresh]
            for k, fut in zip(fresh, futures):
                result = fut.result()
                cache[k] = result
                history.append(result)
                if best is None or result.scalar > best.scalar:
                    best = result
                if on_progress is not None:
                    on_progress(len(history), budget, best)
            optimizer.tell([cache[k] for k in keys])
            if target is not None and best is not None and best.scalar >= target:
                break
    if best is None:
        raise ConfigError("the optimizer finished without evaluating any point")
    return TuningOutcome(space.names, best, history, len(history), time.perf_counter() - started,
                         algorithm, budget, seed, objective.time_cap, default)


def rescore(result: EvaluationResult, objective: ObjectiveConfig) -> EvaluationResult:
    """Re-apply a (possibly different) objective to a finished evaluation."""
    if result.failed:
        return result
    return evaluation(objective, result.point, result.quality, result.time_seconds,
                      result.time_source, result.per_image)

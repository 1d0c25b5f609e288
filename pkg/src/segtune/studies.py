"""Experiment protocols at desk scale: synthetic data, weight sweeps, cross-validation."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .maskdata import LabelMask
from .objective import ObjectiveConfig, normalize_weights, table2_weight_sets
from .paramspace import ParameterPoint, ParameterSpace
from .runner import Sample, SyntheticWorkflow, WorkflowSpec, calibrate_time_cap, rescore, run_tuning, safe_evaluate

MAX_REJECTIONS = 1000


# -- synthetic scenes ----------------------------------------------------------

@dataclass(frozen=True)
class GeneratorParams:
    count: int = 8
    radius: tuple[float, float] = (5.0, 10.0)
    foreground: tuple[float, float] = (150.0, 230.0)
    background: tuple[float, float] = (30.0, 80.0)
    noise: float = 12.0
    elongation: float = 1.0  # ratio of major to minor semi-axis
    gap: int = 2

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ConfigError("count must be >= 0")
        if not 1.0 <= self.radius[0] <= self.radius[1]:
            raise ConfigError(f"radius range must satisfy 1 <= lo <= hi, got {self.radius}")
        if self.noise < 0 or self.elongation < 1.0 or self.gap < 0:
            raise ConfigError("noise and gap must be >= 0 and elongation >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {"count": self.count, "radius": list(self.radius), "foreground": list(self.foreground),
                "background": list(self.background), "noise": self.noise,
                "elongation": self.elongation, "gap": self.gap}


@dataclass
class SyntheticScene:
    image: np.ndarray          # uint8 grayscale
    truth: LabelMask
    params: GeneratorParams
    seed: int
    group: str | None = None

    def sample(self, name: str = "") -> Sample:
        return Sample(self.image, self.truth, name=name)


def _ellipse(shape: tuple[int, int], cx: float, cy: float, a: float, b: float, theta: float) -> np.ndarray:
    h, w = shape
    y, x = np.mgrid[0:h, 0:w]
    dx, dy = x + 0.5 - cx, y + 0.5 - cy
    c, s = math.cos(theta), math.sin(theta)
    u = (dx * c + dy * s) / a
    v = (-dx * s + dy * c) / b
    return u * u + v * v <= 1.0


def generate_scene(size: tuple[int, int], params: GeneratorParams, rng: np.random.Generator,
                   seed: int = 0, group: str | None = None) -> SyntheticScene:
    """Non-overlapping noisy ellipses on a flat background.

    ``size`` is ``(width, height)``. If an ellipse cannot be placed within
    ``MAX_REJECTIONS`` attempts the scene keeps fewer objects and a warning
    is issued.
    """
    width, height = size
    shape = (height, width)
    truth = np.zeros(shape, dtype=np.int32)
    occupied = np.zeros(shape, dtype=bool)
    image = np.full(shape, rng.uniform(*params.background))
    placed = 0
    for _ in range(params.count):
        for _attempt in range(MAX_REJECTIONS):
            a = rng.uniform(*params.radius)
            b = a / params.elongation
            theta = rng.uniform(0.0, math.pi)
            cx, cy = rng.uniform(0, width), rng.uniform(0, height)
            body = _ellipse(shape, cx, cy, a, max(b, 1.0), theta)
            halo = _ellipse(shape, cx, cy, a + params.gap, max(b, 1.0) + params.gap, theta)
            if body.any() and not (halo & occupied).any():
                break
        else:
            warnings.warn(f"placed {placed} of {params.count} objects after {MAX_REJECTIONS} rejections",
                          RuntimeWarning, stacklevel=2)
            break
        placed += 1
        truth[body] = placed
        occupied |= body
        image[body] = rng.uniform(*params.foreground)
    image = image + rng.normal(0.0, params.noise, size=shape)
    image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    return SyntheticScene(image, LabelMask(truth), params, seed, group)


def generate_dataset(n: int, seed: int = 0, size: tuple[int, int] = (128, 128),
                     params: GeneratorParams | None = None, group: str | None = None) -> list[SyntheticScene]:
    """``n`` scenes; scene ``i`` depends only on ``(seed, i)``."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    params = params or GeneratorParams()
    children = np.random.SeedSequence(seed).spawn(n)
    return [generate_scene(size, params, np.random.default_rng(c), seed, group) for c in children]


def grouped_dataset(sizes: Mapping[str, int], seed: int = 0, size: tuple[int, int] = (128, 128),
                    params: Mapping[str, GeneratorParams] | None = None) -> list[SyntheticScene]:
    """Concatenate one generated dataset per group; ``elongated`` groups default to 2.5:1 ellipses."""
    out: list[SyntheticScene] = []
    for i, (name, n) in enumerate(sizes.items()):
        p = (params or {}).get(name) or GeneratorParams(elongation=2.5 if "elong" in name else 1.0)
        out.extend(generate_dataset(n, seed * 1000 + i, size, p, group=name))
    return out


def as_samples(dataset: Sequence[SyntheticScene | Sample]) -> list[Sample]:
    return [d if isinstance(d, Sample) else d.sample(f"scene{i}") for i, d in enumerate(dataset)]


# -- reports -----------------------------------------------------------------

def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


@dataclass
class StudyReport:
    kind: str
    rows: list[dict[str, Any]]
    config: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "config": self.config, "rows": self.rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        columns = [c for c in ("group", "algorithm", "weights", "default_quality", "tuned_quality",
                               "tuned_quality_std", "quality_improvement", "speedup", "tuned_scalar",
                               "train", "test")
                   if any(c in r for r in self.rows)]
        cells = [columns] + [[_cell(r.get(c)) for c in columns] for r in self.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    if isinstance(value, dict) and "raw" in value:
        return value["raw"]
    if isinstance(value, list):
        return "/".join(str(len(v)) if isinstance(v, list) else str(v) for v in value)
    return str(value)


def _weights_entry(raw: Sequence[Any]) -> tuple[dict[str, Any], tuple[Fraction, Fraction]]:
    """Report entry holding the weights as given and normalized to sum 1."""
    norm = normalize_weights(raw)
    entry = {"raw": ",".join(str(x) for x in raw), "quality": float(norm[0]), "time": float(norm[1])}
    return entry, norm


# -- weight sweep --------------------------------------------------------------

def weight_sweep(space: ParameterSpace, dataset: Sequence[SyntheticScene | Sample],
                 workflow: WorkflowSpec | None = None, algorithms: Sequence[str] = ("ga", "nm", "pro", "boa"),
                 weight_sets: Sequence[Sequence[Any]] | None = None, budget: int = 100, repeats: int = 1,
                 seed: int = 0, workers: int = 1, default_point: ParameterPoint | None = None,
                 quality_metric: str = "object-dice") -> StudyReport:
    """Tune once per (weights, algorithm, repeat) and compare with the default point.

    The time cap is calibrated once on the default point and shared by every
    run. ``speedup`` is default time over tuned time and is omitted for
    quality-only weights.
    """
    samples = as_samples(dataset)
    if not samples:
        raise ConfigError("weight_sweep needs a nonempty dataset")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    workflow = workflow or SyntheticWorkflow()
    weight_sets = list(weight_sets) if weight_sets is not None else table2_weight_sets()
    base = ObjectiveConfig((1.0, 0.0), None, quality_metric)
    cap, default = calibrate_time_cap(space, workflow, samples, base, default_point)
    rows = []
    for raw in weight_sets:
        entry, norm = _weights_entry(raw)
        objective = ObjectiveConfig(norm, cap, quality_metric)
        default_w = rescore(default, objective)
        for algo in algorithms:
            runs = [run_tuning(space, workflow, samples, objective, algo, budget, seed + r, workers,
                               default_point=default_point) for r in range(repeats)]
            q = [o.best.quality for o in runs]
            t = [o.best.time_seconds for o in runs]
            s = [o.best.scalar for o in runs]
            qm, qs = mean_std(q)
            tm, ts = mean_std(t)
            sm, ss = mean_std(s)
            rows.append({
                "algorithm": algo,
                "weights": entry,
                "default_quality": default_w.quality,
                "default_time": default_w.time_seconds,
                "default_scalar": default_w.scalar,
                "tuned_quality": qm, "tuned_quality_std": qs,
                "tuned_time": tm, "tuned_time_std": ts,
                "tuned_scalar": sm, "tuned_scalar_std": ss,
                "quality_improvement": _ratio(qm, default_w.quality),
                "speedup": None if norm[1] == 0 else _ratio(default_w.time_seconds, tm),
                "repeats": [{"seed": o.seed, "quality": o.best.quality, "time": o.best.time_seconds,
                             "scalar": o.best.scalar, "executed": o.executed,
                             "point": dict(zip(o.names, o.best.point.values))} for o in runs],
            })
    config = {"algorithms": list(algorithms), "budget": budget, "repeats": repeats, "seed": seed,
              "time_cap": cap, "images": len(samples), "quality_metric": quality_metric,
              "default_point": dict(zip(space.names, default.point.values))}
    return StudyReport("weight-sweep", rows, config)


# -- cross-validation ----------------------------------------------------------

def split_sizes(n: int, train_fraction: float) -> tuple[int, int]:
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = int(Fraction(str(train_fraction)) * n + Fraction(1, 2))
    if n_train < 1 or n - n_train < 1:
        raise ConfigError(f"cannot split {n} items with train fraction {train_fraction}")
    return n_train, n - n_train


def split_indices(n: int, train_fraction: float, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    """Random (train, test) partition of ``range(n)``, each side sorted."""
    n_train, _ = split_sizes(n, train_fraction)
    perm = rng.permutation(n)
    return sorted(perm[:n_train].tolist()), sorted(perm[n_train:].tolist())


def monte_carlo_xval(space: ParameterSpace, dataset: Sequence[SyntheticScene | Sample],
                     train_fraction: float = 0.2, repeats: int = 10, seed: int = 0,
                     workflow: WorkflowSpec | None = None, algorithm: str = "ga",
                     weights: Sequence[Any] = (1, 0), budget: int = 100, workers: int = 1,
                     default_point: ParameterPoint | None = None, quality_metric: str = "object-dice",
                     splits: Sequence[tuple[Sequence[int], Sequence[int]]] | None = None,
                     group: str | None = None) -> StudyReport:
    """Repeated random train/test splits: tune on train, score tuned and default on test.

    Each side calibrates its own time cap on the default point, since total
    time grows with the number of images. ``splits`` overrides the random
    partitions (then ``train_fraction`` and ``repeats`` are ignored).
    """
    samples = as_samples(dataset)
    workflow = workflow or SyntheticWorkflow()
    entry, norm = _weights_entry(weights)
    if splits is None:
        if repeats < 1:
            raise ConfigError("repeats must be >= 1")
        rng = np.random.default_rng(seed)
        splits = [split_indices(len(samples), train_fraction, rng) for _ in range(repeats)]
    else:
        splits = [(sorted(a), sorted(b)) for a, b in splits]
        if not splits or any(not a or not b for a, b in splits):
            raise ConfigError("every split needs at least one train and one test item")
    per_repeat = []
    for r, (train_idx, test_idx) in enumerate(splits):
        train = [samples[i] for i in train_idx]
        test = [samples[i] for i in test_idx]
        objective = ObjectiveConfig(norm, None, quality_metric)
        outcome = run_tuning(space, workflow, train, objective, algorithm, budget, seed + r, workers,
                             default_point=default_point)
        test_cap, default_test = calibrate_time_cap(space, workflow, test, objective, default_point)
        tuned_test = safe_evaluate(outcome.best.point, workflow, test, objective.with_time_cap(test_cap), space)
        per_repeat.append({
            "train": list(train_idx), "test": list(test_idx),
            "point": dict(zip(space.names, outcome.best.point.values)),
            "train_quality": outcome.best.quality,
            "default_quality": default_test.quality, "tuned_quality": tuned_test.quality,
            "default_time": default_test.time_seconds, "tuned_time": tuned_test.time_seconds,
            "default_scalar": default_test.scalar, "tuned_scalar": tuned_test.scalar,
        })
    agg: dict[str, Any] = {}
    for key in ("default_quality", "tuned_quality", "default_time", "tuned_time", "default_scalar", "tuned_scalar"):
        agg[key], agg[key + "_std"] = mean_std([p[key] for p in per_repeat])
    row = {"algorithm": algorithm, "weights": entry, **agg,
           "quality_improvement": _ratio(agg["tuned_quality"], agg["default_quality"]),
           "speedup": None if norm[1] == 0 else _ratio(agg["default_time"], agg["tuned_time"]),
           "train": len(splits[0][0]), "test": len(splits[0][1]), "repeats": per_repeat}
    if group is not None:
        row["group"] = group
    config = {"algorithm": algorithm, "budget": budget, "seed": seed, "train_fraction": train_fraction,
              "repeats": len(splits), "images": len(samples), "quality_metric": quality_metric}
    return StudyReport("monte-carlo-xval", [row], config)


def grouped_xval(space: ParameterSpace, dataset: Sequence[SyntheticScene | Sample],
                 groups: Sequence[str] | None = None,
                 train_fraction: float | Mapping[str, float] = 0.2, **kwargs: Any) -> StudyReport:
    """Cross-validate each group separately; one report row per group.

    Group labels come from ``groups`` or from each scene's ``group`` field.
    ``train_fraction`` may be a per-group mapping.
    """
    if groups is None:
        groups = [getattr(d, "group", None) for d in dataset]
    if len(groups) != len(dataset) or any(g is None for g in groups):
        raise ConfigError("every item needs a group label")
    order = list(dict.fromkeys(groups))
    rows, configs = [], {}
    for g in order:
        members = [d for d, lab in zip(dataset, groups) if lab == g]
        frac = train_fraction[g] if isinstance(train_fraction, Mapping) else train_fraction
        sub = monte_carlo_xval(space, members, frac, group=g, **kwargs)
        rows.extend(sub.rows)
        configs[g] = sub.config
    return StudyReport("grouped-xval", rows, {"groups": configs})

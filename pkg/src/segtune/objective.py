"""Linear scalarization of segmentation quality and execution speed."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .errors import ConfigError, MeasurementError
from .metrics import METRICS
from .paramspace import ParameterPoint

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class ObjectiveConfig:
    """Weights are ``(quality, time)`` and must sum to 1.

    ``time_cap`` is the time that maps to a time score of 0. ``None`` means
    "calibrate at tuning start" (twice the default point's run time).
    """

    weights: tuple[float, float] = (1.0, 0.0)
    time_cap: float | None = None
    quality_metric: str = "object-dice"

    def __post_init__(self) -> None:
        w = tuple(self.weights)
        if len(w) != 2:
            raise ConfigError(f"expected (quality, time) weights, got {w!r}")
        try:
            exact = [Fraction(x) if isinstance(x, (int, Fraction)) else Fraction(str(float(x))) for x in w]
        except (TypeError, ValueError):
            raise ConfigError(f"weights must be numbers, got {w!r}") from None
        if any(x < 0 for x in exact):
            raise ConfigError(f"weights must be >= 0, got {w!r}")
        if abs(float(sum(w)) - 1.0) > WEIGHT_TOL and sum(exact) != 1:
            raise ConfigError(f"weights must sum to 1, got {float(sum(w))!r}")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.time_cap is not None and not (math.isfinite(self.time_cap) and self.time_cap > 0):
            raise ConfigError(f"time_cap must be > 0, got {self.time_cap!r}")
        if self.quality_metric not in METRICS:
            raise ConfigError(f"unknown quality metric {self.quality_metric!r}")

    @property
    def quality_weight(self) -> float:
        return self.weights[0]

    @property
    def time_weight(self) -> float:
        return self.weights[1]

    def with_time_cap(self, cap: float) -> "ObjectiveConfig":
        return ObjectiveConfig(self.weights, cap, self.quality_metric)

    def to_dict(self) -> dict[str, Any]:
        return {"weights": {"quality": self.weights[0], "time": self.weights[1]},
                "time_cap": self.time_cap, "quality_metric": self.quality_metric}


def time_score(t: float, time_cap: float) -> float:
    """``clamp(1 - t / time_cap, 0, 1)``; higher is faster."""
    if t < 0 or not math.isfinite(t):
        raise MeasurementError(f"execution time must be finite and >= 0, got {t!r}")
    if not time_cap > 0:
        raise ConfigError(f"time_cap must be > 0, got {time_cap!r}")
    return min(1.0, max(0.0, 1.0 - t / time_cap))


def scalarize(config: ObjectiveConfig, quality: float, tscore: float) -> float:
    wq, wt = config.weights
    return wq * quality + wt * tscore


def table2_weight_sets() -> list[tuple[Fraction, Fraction]]:
    """The four (quality, time) weight pairs of the weight-sweep experiment."""
    return [
        (Fraction(1), Fraction(0)),
        (Fraction(1, 2), Fraction(1, 2)),
        (Fraction(2, 3), Fraction(1, 3)),
        (Fraction(4, 5), Fraction(1, 5)),
    ]


def normalize_weights(raw: Sequence[float | Fraction | int]) -> tuple[Fraction, Fraction]:
    """Scale a nonnegative pair such as ``(2, 1)`` to sum to 1: ``(2/3, 1/3)``."""
    q, t = (Fraction(x) if not isinstance(x, float) else Fraction(str(x)) for x in raw)
    if q < 0 or t < 0 or q + t == 0:
        raise ConfigError(f"cannot normalize weights {tuple(raw)!r}")
    return q / (q + t), t / (q + t)


def parse_weights(text: str) -> tuple[Fraction, Fraction]:
    """Parse ``"q,t"`` with exact rationals (``"2/3,1/3"``); the pair must sum to 1."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"weights must be 'quality,time', got {text!r}")
    try:
        q, t = (Fraction(p) for p in parts)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse weights {text!r}") from None
    if q < 0 or t < 0 or q + t != 1:
        raise ConfigError(f"weights must be >= 0 and sum to exactly 1, got {text!r}")
    return q, t


@dataclass(frozen=True)
class EvaluationResult:
    point: ParameterPoint
    quality: float
    time_seconds: float
    time_source: str  # "measured" | "adapter-reported"
    time_score: float
    scalar: float
    error: str | None = None
    per_image: tuple[float, ...] = field(default=(), repr=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self, names: Sequence[str] | None = None) -> dict[str, Any]:
        point: Any = dict(zip(names, self.point.values)) if names is not None else list(self.point.values)
        d = {
            "point": point,
            "quality": self.quality,
            "time_seconds": self.time_seconds,
            "time_source": self.time_source,
            "time_score": self.time_score,
            "scalar": self.scalar,
            "per_image": list(self.per_image),
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any], names: Sequence[str] | None = None) -> "EvaluationResult":
        raw = d["point"]
        values = tuple(raw[n] for n in names) if isinstance(raw, dict) and names else tuple(raw)
        return cls(ParameterPoint(values), d["quality"], d["time_seconds"], d["time_source"],
                   d["time_score"], d["scalar"], d.get("error"), tuple(d.get("per_image", ())))


def evaluation(config: ObjectiveConfig, point: ParameterPoint, quality: float, seconds: float,
               source: str, per_image: Sequence[float] = ()) -> EvaluationResult:
    if config.time_cap is None:
        raise ConfigError("objective time_cap is not calibrated")
    ts = time_score(seconds, config.time_cap)
    return EvaluationResult(point, quality, seconds, source, ts, scalarize(config, quality, ts),
                            per_image=tuple(per_image))


def failed_evaluation(point: ParameterPoint, message: str, seconds: float = 0.0,
                      source: str = "measured") -> EvaluationResult:
    return EvaluationResult(point, 0.0, max(0.0, seconds), source, 0.0, 0.0, error=message)

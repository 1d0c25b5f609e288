"""Discrete parameter spaces and the unit-hypercube bridge used by the optimizers.

A space is an ordered list of dimensions. Each dimension is either a stepped
numeric range (``lo, lo+step, ..., <= hi``) or an ordered list of
categorical labels. Continuous optimizers work on ``[0, 1]^k``; value index
``j`` of a dimension with ``n`` values owns the cell ``[j/n, (j+1)/n)`` and
is encoded at the cell center ``(j + 0.5) / n``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, GridError

GRID_TOL = 1e-9

Value = Any  # int | float | str


def _dec(x: float | int | str) -> Decimal:
    return Decimal(str(x))


@dataclass(frozen=True)
class ParameterSpec:
    """One named dimension.

    Exactly one of the numeric triple (``lo``, ``hi``, ``step``) or
    ``values`` is set.
    """

    name: str
    lo: float | int | None = None
    hi: float | int | None = None
    step: float | int | None = None
    values: tuple[str, ...] | None = None
    default: Value | None = None
    _grid: tuple[Value, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("dimension name must be a non-empty string")
        if self.values is not None:
            if self.lo is not None or self.hi is not None or self.step is not None:
                raise ConfigError(f"{self.name}: categorical dims take no range")
            labels = tuple(str(v) for v in self.values)
            if not labels:
                raise ConfigError(f"{self.name}: categorical dim needs >= 1 label")
            if len(set(labels)) != len(labels):
                raise ConfigError(f"{self.name}: duplicate categorical labels")
            object.__setattr__(self, "values", labels)
            grid: tuple[Value, ...] = labels
        else:
            if self.lo is None or self.hi is None or self.step is None:
                raise ConfigError(f"{self.name}: range dims need lo, hi and step")
            lo, hi, step = _dec(self.lo), _dec(self.hi), _dec(self.step)
            if not step > 0:
                raise ConfigError(f"{self.name}: step must be > 0")
            if lo > hi:
                raise ConfigError(f"{self.name}: lo must be <= hi")
            n = int(math.floor(float((hi - lo) / step) + GRID_TOL)) + 1
            integral = all(d == d.to_integral_value() for d in (lo, step))
            if integral:
                grid = tuple(int(lo + i * step) for i in range(n))
            else:
                grid = tuple(float(lo + i * step) for i in range(n))
        object.__setattr__(self, "_grid", grid)
        if self.default is not None:
            self.index_of(self.default)

    @property
    def is_categorical(self) -> bool:
        return self.values is not None

    @property
    def size(self) -> int:
        return len(self._grid)

    @property
    def grid(self) -> tuple[Value, ...]:
        return self._grid

    def value_at(self, index: int) -> Value:
        if not 0 <= index < self.size:
            raise GridError(f"{self.name}: index {index} outside [0, {self.size})")
        return self._grid[index]

    def index_of(self, value: Value) -> int:
        """Grid index of ``value``; raises :class:`GridError` when off-grid."""
        if self.is_categorical:
            try:
                return self._grid.index(str(value))
            except ValueError:
                raise GridError(f"{self.name}: {value!r} is not one of {self.values}") from None
        if isinstance(value, (str, bytes)) or isinstance(value, bool):
            raise GridError(f"{self.name}: {value!r} is not numeric")
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise GridError(f"{self.name}: {value!r} is not numeric") from None
        if not math.isfinite(v):
            raise GridError(f"{self.name}: {value!r} is not finite")
        lo, step = float(self.lo), float(self.step)  # type: ignore[arg-type]
        i = int(round((v - lo) / step))
        if 0 <= i < self.size and abs(float(self._grid[i]) - v) <= GRID_TOL:
            return i
        raise GridError(f"{self.name}: {value!r} is not on grid [{self.lo}:{self.hi}:{self.step}]")

    def to_dict(self) -> dict[str, Any]:
        if self.is_categorical:
            d: dict[str, Any] = {"name": self.name, "type": "cat", "values": list(self.values or ())}
        else:
            d = {"name": self.name, "type": "range", "lo": self.lo, "hi": self.hi, "step": self.step}
        if self.default is not None:
            d["default"] = self.default
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ParameterSpec":
        if not isinstance(d, dict):
            raise ConfigError("dimension entry must be an object")
        kind = d.get("type")
        name = d.get("name")
        if kind == "range":
            for key in ("lo", "hi", "step"):
                if not isinstance(d.get(key), (int, float)) or isinstance(d.get(key), bool):
                    raise ConfigError(f"{name}: range dim needs numeric {key!r}")
            return cls(name=name, lo=d["lo"], hi=d["hi"], step=d["step"], default=d.get("default"))
        if kind == "cat":
            values = d.get("values")
            if not isinstance(values, list):
                raise ConfigError(f"{name}: categorical dim needs a 'values' list")
            return cls(name=name, values=tuple(values), default=d.get("default"))
        raise ConfigError(f"{name}: unknown dimension type {kind!r} (expected 'range' or 'cat')")


@dataclass(frozen=True)
class ParameterPoint:
    """One value per dimension, in dimension order."""

    values: tuple[Value, ...]

    def __iter__(self) -> Iterator[Value]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> Value:
        return self.values[i]


class ParameterSpace:
    """Ordered, immutable collection of :class:`ParameterSpec`."""

    def __init__(self, dims: Sequence[ParameterSpec]) -> None:
        dims = tuple(dims)
        if not dims:
            raise ConfigError("a parameter space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate dimension names in {names}")
        self._dims = dims
        self._sizes = np.array([d.size for d in dims], dtype=np.int64)

    @property
    def dims(self) -> tuple[ParameterSpec, ...]:
        return self._dims

    @property
    def k(self) -> int:
        return len(self._dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self._dims]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self._sizes)

    def __len__(self) -> int:
        return self.k

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ParameterSpace) and self._dims == other._dims

    def __hash__(self) -> int:
        return hash(self._dims)

    def __repr__(self) -> str:
        return f"ParameterSpace({', '.join(f'{d.name}:{d.size}' for d in self._dims)})"

    def product(self, other: "ParameterSpace") -> "ParameterSpace":
        return ParameterSpace(self._dims + other._dims)

    # -- points -----------------------------------------------------------

    def indices_of(self, point: ParameterPoint | Sequence[Value]) -> tuple[int, ...]:
        values = tuple(point)
        if len(values) != self.k:
            raise GridError(f"point has {len(values)} values, space has {self.k} dims")
        return tuple(d.index_of(v) for d, v in zip(self._dims, values))

    def point_at(self, indices: Iterable[int]) -> ParameterPoint:
        idx = tuple(int(i) for i in indices)
        if len(idx) != self.k:
            raise GridError(f"expected {self.k} indices, got {len(idx)}")
        return ParameterPoint(tuple(d.value_at(i) for d, i in zip(self._dims, idx)))

    def point_from_mapping(self, mapping: dict[str, Value]) -> ParameterPoint:
        missing = [n for n in self.names if n not in mapping]
        extra = [n for n in mapping if n not in self.names]
        if missing or extra:
            raise GridError(f"point keys mismatch: missing={missing} unknown={extra}")
        point = ParameterPoint(tuple(mapping[n] for n in self.names))
        return self.point_at(self.indices_of(point))

    def as_mapping(self, point: ParameterPoint) -> dict[str, Value]:
        return dict(zip(self.names, point.values))

    def default_point(self) -> ParameterPoint:
        """Declared defaults; dims without one use their middle value."""
        idx = []
        for d in self._dims:
            idx.append(d.index_of(d.default) if d.default is not None else (d.size - 1) // 2)
        return self.point_at(idx)

    def iter_points(self) -> Iterator[ParameterPoint]:
        for idx in np.ndindex(*self.sizes):
            yield self.point_at(idx)

    # -- unit cube ---------------------------------------------------------

    def encode_indices(self, indices: Sequence[int]) -> np.ndarray:
        return (np.asarray(indices, dtype=float) + 0.5) / self._sizes

    def decode_indices(self, vec: Sequence[float] | np.ndarray) -> tuple[int, ...]:
        u = np.asarray(vec, dtype=float)
        if u.shape != (self.k,):
            raise GridError(f"expected a vector of length {self.k}, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise GridError(f"non-finite coordinate in {u.tolist()}")
        c = np.clip(u, 0.0, 1.0)
        idx = np.minimum(np.floor(c * self._sizes).astype(np.int64), self._sizes - 1)
        return tuple(int(i) for i in idx)

    def snap(self, vec: Sequence[float] | np.ndarray) -> np.ndarray:
        """Move a unit vector to the center of the grid cell it decodes to."""
        return self.encode_indices(self.decode_indices(vec))

    def random_indices(self, rng: np.random.Generator) -> tuple[int, ...]:
        return tuple(int(rng.integers(0, n)) for n in self._sizes)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {"dims": [d.to_dict() for d in self._dims]}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ParameterSpace":
        if not isinstance(doc, dict) or not isinstance(doc.get("dims"), list):
            raise ConfigError("space document must be an object with a 'dims' list")
        return cls([ParameterSpec.from_dict(d) for d in doc["dims"]])


def cardinality(space: ParameterSpace) -> int:
    """Exact number of grid points (Python ints never overflow)."""
    return math.prod(d.size for d in space.dims)


def encode_unit(point: ParameterPoint | Sequence[Value], space: ParameterSpace) -> np.ndarray:
    return space.encode_indices(space.indices_of(point))


def decode_unit(vec: Sequence[float] | np.ndarray, space: ParameterSpace) -> ParameterPoint:
    return space.point_at(space.decode_indices(vec))


def random_point(space: ParameterSpace, rng: np.random.Generator) -> ParameterPoint:
    return space.point_at(space.random_indices(rng))


SHIPPED_SPACES = ("table1a", "table1b", "table1c", "synthetic")


def load_space(source: str | Path | dict[str, Any]) -> ParameterSpace:
    """Load a space from a dict, a JSON file path, or a shipped config name."""
    if isinstance(source, dict):
        return ParameterSpace.from_dict(source)
    name = str(source)
    if name in SHIPPED_SPACES:
        text = resources.files("segtune.spaces").joinpath(f"{name}.json").read_text()
    else:
        try:
            text = Path(name).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read space file {name}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"space file {name} is not valid JSON: {exc}") from exc
    return ParameterSpace.from_dict(doc)

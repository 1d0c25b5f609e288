from __future__ import annotations

import re
import sys
from pathlib import Path

import pytest

from segtune import _kernels

sys.path.insert(0, str(Path(__file__).parent))

BACKENDS = [name for name in ("compiled", "python") if getattr(_kernels, name) is not None]
KERNEL_NAMES = ("label", "object_stats", "hilbert_index", "pair_overlaps")


@pytest.fixture(params=BACKENDS)
def kernels(request):
    """One kernel module (compiled or pure Python)."""
    return getattr(_kernels, request.param)


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every package-level kernel call through one backend."""
    module = getattr(_kernels, request.param)
    for name in KERNEL_NAMES:
        monkeypatch.setattr(_kernels, name, getattr(module, name))
    return request.param


def write_scenes(directory: Path, n: int = 2, seed: int = 0, size=(48, 48)) -> list[dict[str, str]]:
    """Save ``n`` clean synthetic scenes as PGM pairs; returns request-style input entries."""
    from segtune.maskdata import LabelMask, save_mask
    from segtune.studies import GeneratorParams, generate_dataset

    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for i, scene in enumerate(generate_dataset(n, seed, size, GeneratorParams(count=3, noise=0.0))):
        image, truth = directory / f"image_{i:03d}.pgm", directory / f"truth_{i:03d}.pgm"
        save_mask(LabelMask(scene.image), image)
        save_mask(scene.truth, truth)
        out.append({"image": str(image), "truth": str(truth)})
    return out


@pytest.fixture
def pgm_inputs(tmp_path):
    return write_scenes(tmp_path / "data")


# -- acceptance summary ---------------------------------------------------------------

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(key, passed, detail)`` records one line for the terminal summary."""

    def record(key: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE[key] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(re.search(r"\d+", k).group()), k)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")

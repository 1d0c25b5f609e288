"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it imports; set ``SEGTUNE_PURE_PYTHON=1``
to force the fallback. ``BACKEND`` names the active implementation and
``compiled``/``python`` expose both for tests and benchmarks.
"""
import os

from . import _pykernels as python

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("SEGTUNE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    _active = compiled
    BACKEND = "compiled"
else:
    _active = python
    BACKEND = "python"

label = _active.label
object_stats = _active.object_stats
hilbert_index = _active.hilbert_index
pair_overlaps = _active.pair_overlaps

__all__ = ["BACKEND", "compiled", "python", "label", "object_stats", "hilbert_index", "pair_overlaps"]

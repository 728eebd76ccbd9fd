"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it imports; set ``SQUAREGROWTH_PURE=1``
to force the fallback. ``BACKEND`` names the active one.
"""

import os

from . import _pure

if os.environ.get("SQUAREGROWTH_PURE", "") not in ("", "0"):
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

replicator_run = _impl.replicator_run
cell_ranks = _impl.cell_ranks
coverage_scan = _impl.coverage_scan

__all__ = ["BACKEND", "replicator_run", "cell_ranks", "coverage_scan"]

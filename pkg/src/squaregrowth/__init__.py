"""Binomial-exponential growth toolkit.

Submodules: ``combinatorics`` (exact counts), ``growth`` (regime
simulators), ``games`` (replicator play), ``spatial`` (windows, ranks and
square detection), ``fitting`` (curve fits and model selection) and
``cli``. ``BACKEND`` names the active kernel implementation.
"""

from importlib.metadata import PackageNotFoundError, version

from . import combinatorics, fitting, games, growth, spatial
from ._kernels import BACKEND

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = ["BACKEND", "combinatorics", "fitting", "games", "growth", "spatial", "__version__"]

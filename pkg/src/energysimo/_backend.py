"""Pick the energy-sampling kernel at import time.

The compiled extension is used when it imports cleanly; setting
``ENERGYSIMO_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
sample_energies = _fallback.sample_energies

if os.environ.get("ENERGYSIMO_PURE_PYTHON", "") in ("", "0"):
    try:
        from ._kernels import sample_energies  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

"""Kernel backend selection.

The compiled extension is preferred when present; setting OBLIQ_PURE_PYTHON=1
forces the NumPy fallback. Both backends implement the same contract and the
test suite checks them against each other.
"""

import os

from . import _py

if os.environ.get("OBLIQ_PURE_PYTHON"):
    backend = _py
else:
    try:
        from . import _ext as backend
    except ImportError:
        backend = _py

BACKEND = backend.NAME
apply_1q = backend.apply_1q
apply_diag1 = backend.apply_diag1
apply_diag2 = backend.apply_diag2
gather_pair = backend.gather_pair
gather_bit = backend.gather_bit
prob_bit1 = backend.prob_bit1

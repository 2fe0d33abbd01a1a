"""Kernel backend selection.

The hot loops (Gibbs sweep, tally, trajectory simulation) exist twice: a
compiled Cython extension (``_core``) and a pure-Python twin (``_pure``)
with identical semantics and RNG consumption.  The compiled backend is used
when built; set ``DIARYMC_BACKEND=python`` or ``=cython`` to force one.
"""

import os

from . import _pure

_forced = os.environ.get("DIARYMC_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _pure
    BACKEND = "python"
elif _forced == "cython":
    from . import _core as _impl

    BACKEND = "cython"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

sweep_subject = _impl.sweep_subject
tally_subject = _impl.tally_subject
simulate_full = _impl.simulate_full
simulate_reduced = _impl.simulate_reduced

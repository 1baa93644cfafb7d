"""Backend selection for the per-trial simulation kernel.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``MISSPEC_BANDITS_PURE`` is set to a non-empty value,
the pure-Python kernel runs instead.  Both produce bit-identical traces.
"""
import os

from . import _kernel_py

EPS_GREEDY = _kernel_py.EPS_GREEDY
LINUCB = _kernel_py.LINUCB
FORCED, EXPLORE, EXPLOIT = _kernel_py.FORCED, _kernel_py.EXPLORE, _kernel_py.EXPLOIT

_ext = None
if not os.environ.get("MISSPEC_BANDITS_PURE"):
    try:
        from . import _kernel_ext as _ext
    except ImportError:  # extension not built
        _ext = None

BACKEND = "cython" if _ext is not None else "python"
run_trial = _ext.run_trial if _ext is not None else _kernel_py.run_trial
run_trial_py = _kernel_py.run_trial
run_trial_ext = _ext.run_trial if _ext is not None else None

"""Hot-loop backend selection.

The compiled Cython kernel is preferred; the pure-Python twin is the
fallback and the behavioural reference.  Set ARMSIM_PURE_PYTHON=1 to force
the fallback (used by the parity tests and the benchmark).
"""

import os

if os.environ.get("ARMSIM_PURE_PYTHON"):
    from . import _kernel_py as _impl
else:
    try:
        from . import _kernel_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernel_py as _impl

BACKEND = _impl.BACKEND
run_axis_ticks = _impl.run_axis_ticks


def backends():
    """All importable kernel backends, name -> run_axis_ticks."""
    from . import _kernel_py
    found = {_kernel_py.BACKEND: _kernel_py.run_axis_ticks}
    try:
        from . import _kernel_cy  # type: ignore[attr-defined]
        found[_kernel_cy.BACKEND] = _kernel_cy.run_axis_ticks
    except ImportError:
        pass
    return found

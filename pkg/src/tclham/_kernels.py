"""Select the propagation kernel at import time.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``TCLHAM_PURE_PYTHON=1`` is set, the numpy version is used.
Both expose ``rk4_bright(C, e1, e2, lam, a, b, t0, dt, nsteps)``.
"""
import os

from . import _kernels_py

COMPILED = False
if os.environ.get("TCLHAM_PURE_PYTHON") != "1":
    try:
        from . import _kernels_cy as _impl
        COMPILED = True
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

rk4_bright = _impl.rk4_bright
rk4_bright_py = _kernels_py.rk4_bright
if COMPILED:
    rk4_bright_compiled = _impl.rk4_bright
else:
    rk4_bright_compiled = None

BACKEND = "cython" if COMPILED else "numpy"

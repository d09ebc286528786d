"""Fixed-step RK4 propagator for vectorized master equations.

Two interchangeable backends: a compiled Cython kernel (built at install
time) and a numpy/scipy fallback.  The compiled kernel is preferred when
present; set WARMLINK_ENGINE=python or =cython to force a choice.
"""

import os

import numpy as np
import scipy.sparse as sp

from . import rk4_py

try:
    from . import _rk4_cy
except ImportError:  # pragma: no cover - depends on the build environment
    _rk4_cy = None

_choice = os.environ.get("WARMLINK_ENGINE", "").strip().lower()
if _choice == "cython":
    if _rk4_cy is None:
        raise ImportError("WARMLINK_ENGINE=cython but the compiled kernel is not available")
    _impl = _rk4_cy
elif _choice == "python":
    _impl = rk4_py
elif _choice == "":
    _impl = _rk4_cy if _rk4_cy is not None else rk4_py
else:
    raise ValueError(f"WARMLINK_ENGINE={_choice!r} (expected 'cython' or 'python')")


def backend_name() -> str:
    return "cython" if _impl is _rk4_cy else "python"


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _rk4_cy is not None else [])


def propagate(L, v0, dt: float, n_steps: int, stride: int, backend: str | None = None):
    """Propagate vec(rho) under dv/dt = L v; returns samples [(n_steps/stride)+1, d2].

    Row 0 is the initial vector, later rows are every ``stride`` steps.
    ``n_steps`` must be a multiple of ``stride``.
    """
    if n_steps % stride != 0:
        raise ValueError("n_steps must be divisible by stride")
    L = sp.csr_matrix(L, dtype=np.complex128)
    data = np.ascontiguousarray(L.data, dtype=np.complex128)
    indices = np.ascontiguousarray(L.indices, dtype=np.int32)
    indptr = np.ascontiguousarray(L.indptr, dtype=np.int32)
    v = np.ascontiguousarray(v0, dtype=np.complex128)
    impl = _impl
    if backend == "python":
        impl = rk4_py
    elif backend == "cython":
        if _rk4_cy is None:
            raise ImportError("compiled kernel not available")
        impl = _rk4_cy
    return impl.rk4_samples(data, indices, indptr, L.shape[0], v, float(dt),
                            int(n_steps), int(stride))

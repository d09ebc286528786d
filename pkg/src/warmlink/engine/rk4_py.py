"""Pure numpy/scipy RK4 backend; reference semantics for the compiled kernel."""

import numpy as np
import scipy.sparse as sp


def rk4_samples(data, indices, indptr, n, v0, dt, n_steps, stride):
    L = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    v = v0.copy()
    out = np.empty((n_steps // stride + 1, n), dtype=np.complex128)
    out[0] = v
    row = 1
    for step in range(1, n_steps + 1):
        k1 = L @ v
        k2 = L @ (v + (0.5 * dt) * k1)
        k3 = L @ (v + (0.5 * dt) * k2)
        k4 = L @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % stride == 0:
            out[row] = v
            row += 1
    return out

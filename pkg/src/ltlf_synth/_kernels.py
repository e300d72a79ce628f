"""Value-iteration sweeps over CSR product arrays, compiled with numba when present."""

from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
else:
    # The bundled TBB is too old for numba; try it last so it is never loaded.
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

# Iterates may dip by rounding error only; anything larger is a real violation.
MONOTONE_SLACK = 1e-12


def _gauss_seidel(state_ptr, choice_ptr, succ, prob, fixed, V, eps, max_iters):
    n = state_ptr.shape[0] - 1
    res = 0.0
    nonmonotone = False
    for it in range(max_iters):
        res = 0.0
        for x in range(n):
            if fixed[x]:
                continue
            best = 0.0
            for c in range(state_ptr[x], state_ptr[x + 1]):
                acc = 0.0
                for t in range(choice_ptr[c], choice_ptr[c + 1]):
                    acc += prob[t] * V[succ[t]]
                if acc > best:
                    best = acc
            d = best - V[x]
            if d < -MONOTONE_SLACK:
                nonmonotone = True
            if abs(d) > res:
                res = abs(d)
            V[x] = best
        if res < eps:
            return it + 1, res, nonmonotone
    return max_iters, res, nonmonotone


def _jacobi(state_ptr, choice_ptr, succ, prob, fixed, V, eps, max_iters):
    n = state_ptr.shape[0] - 1
    res = 0.0
    nonmonotone = False
    W = V.copy()
    delta = np.zeros(n)
    for it in range(max_iters):
        for x in _prange(n):
            if fixed[x]:
                W[x] = V[x]
                delta[x] = 0.0
                continue
            best = 0.0
            for c in range(state_ptr[x], state_ptr[x + 1]):
                acc = 0.0
                for t in range(choice_ptr[c], choice_ptr[c + 1]):
                    acc += prob[t] * V[succ[t]]
                if acc > best:
                    best = acc
            W[x] = best
            delta[x] = best - V[x]
        res = 0.0
        for x in range(n):
            if delta[x] < -MONOTONE_SLACK:
                nonmonotone = True
            if abs(delta[x]) > res:
                res = abs(delta[x])
            V[x] = W[x]
        if res < eps:
            return it + 1, res, nonmonotone
    return max_iters, res, nonmonotone


if numba is not None:
    _prange = numba.prange
    gauss_seidel = numba.njit(cache=True)(_gauss_seidel)
    jacobi = numba.njit(cache=True, parallel=True)(_jacobi)
else:  # pragma: no cover
    _prange = range
    gauss_seidel = _gauss_seidel
    jacobi = _jacobi


def set_threads(n: int) -> None:
    if numba is not None and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))

"""Numpy reference for the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def _apply(rho: np.ndarray, S: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    b, d, _ = rho.shape
    n = d.bit_length() - 1
    k = len(qubits)
    t = rho.reshape((b,) + (2,) * (2 * n))
    # row axis of qubit q is 1 + (n-1-q), column axis is 1 + n + (n-1-q)
    src = [1 + n - 1 - q for q in qubits] + [1 + 2 * n - 1 - q for q in qubits]
    dst = list(range(2 * n + 1 - 2 * k, 2 * n + 1))
    t = np.moveaxis(t, src, dst)
    shape = t.shape
    v = t.reshape(b, -1, 4**k)
    out = np.matmul(v, np.swapaxes(S, 1, 2))
    out = np.moveaxis(out.reshape(shape), dst, src)
    rho[...] = out.reshape(b, d, d)
    return rho


def apply_1q(rho: np.ndarray, S: np.ndarray, q: int) -> np.ndarray:
    return _apply(rho, S, (q,))


def apply_2q(rho: np.ndarray, S: np.ndarray, qa: int, qb: int) -> np.ndarray:
    return _apply(rho, S, (qa, qb))

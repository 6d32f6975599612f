"""Dense complex linear algebra for small qubit registers.

Conventions used across the package:

* Qubit 0 is the least-significant bit of a computational-basis index, so the
  basis string ``Q3Q2Q1Q0`` reads left to right from the highest qubit.
* A multi-qubit operator acting on an ordered target list treats the *first*
  listed qubit as the most-significant bit of its own local index (control
  first for CNOT, ``tensor(a, b)`` puts ``a`` on the first target).
* Matrices and density matrices are plain ``numpy`` arrays of ``complex128``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

ATOL_UNITARY = 1e-10
ATOL_HERMITIAN = 1e-10
ATOL_TRACE = 1e-9
ATOL_PSD = 1e-9
ATOL_COMPLETENESS = 1e-10

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (I2, X, Y, Z)


class CompletenessError(ValueError):
    """Kraus operators do not sum to the identity."""


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Lift a k-qubit operator onto ``n`` qubits, acting as identity elsewhere.

    ``targets[0]`` is the most-significant qubit of ``op``'s local index.
    """
    op = np.asarray(op, dtype=np.complex128)
    targets = [int(t) for t in targets]
    k = len(targets)
    if op.shape != (1 << k, 1 << k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target qubit(s)")
    if len(set(targets)) != k:
        raise ValueError(f"duplicate target qubits in {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"target qubits {targets} out of range for {n} qubits")

    # Tensor axis for qubit q sits at position n-1-q (row-major, MSB first).
    full = np.kron(op, np.eye(1 << (n - k), dtype=np.complex128))
    rest = [q for q in range(n - 1, -1, -1) if q not in targets]
    order = targets + rest  # qubit carried by each axis of ``full``
    full = full.reshape((2,) * (2 * n))
    axis_of = {q: i for i, q in enumerate(order)}
    perm = [axis_of[q] for q in range(n - 1, -1, -1)]
    full = full.transpose(perm + [n + p for p in perm])
    return full.reshape(1 << n, 1 << n)


def is_unitary(u: np.ndarray, atol: float = ATOL_UNITARY) -> bool:
    u = np.asarray(u)
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=atol)


def check_completeness(ops: Sequence[np.ndarray], atol: float = ATOL_COMPLETENESS) -> float:
    """Return the max deviation of ``Σ E†E`` from identity; raise if above ``atol``."""
    if len(ops) == 0:
        raise CompletenessError("empty Kraus set")
    dim = np.asarray(ops[0]).shape[0]
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for e in ops:
        e = np.asarray(e, dtype=np.complex128)
        acc += e.conj().T @ e
    dev = float(np.max(np.abs(acc - np.eye(dim))))
    if dev > atol:
        raise CompletenessError(f"Σ E†E deviates from identity by {dev:.3e}")
    return dev


def apply_kraus(rho: np.ndarray, ops: Sequence[np.ndarray]) -> np.ndarray:
    """Operator-sum map ``Σ E ρ E†``."""
    check_completeness(ops)
    rho = np.asarray(rho, dtype=np.complex128)
    out = np.zeros_like(rho)
    for e in ops:
        e = np.asarray(e, dtype=np.complex128)
        out += e @ rho @ e.conj().T
    return out


def kraus_superop(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Superoperator of a Kraus set acting on row-major ``vec(ρ)``."""
    ops = [np.asarray(e, dtype=np.complex128) for e in ops]
    d = ops[0].shape[0]
    s = np.zeros((d * d, d * d), dtype=np.complex128)
    for e in ops:
        s += np.kron(e, e.conj())
    return s


def pure_density(psi: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state vector norm {norm} is not 1")
    return np.outer(psi, psi.conj())


def ground_state(n: int) -> np.ndarray:
    rho = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    rho[0, 0] = 1.0
    return rho


def check_density(rho: np.ndarray) -> None:
    """Raise ``ValueError`` unless ``rho`` is a unit-trace Hermitian PSD matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    n_qubits_of(rho.shape[0])
    tr = np.trace(rho)
    if abs(tr - 1.0) > ATOL_TRACE:
        raise ValueError(f"trace {tr} differs from 1")
    if np.max(np.abs(rho - rho.conj().T)) > ATOL_HERMITIAN:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -ATOL_PSD:
        raise ValueError("density matrix has a negative eigenvalue")


def basis_probabilities(rho: np.ndarray) -> np.ndarray:
    """Computational-basis outcome probabilities (the diagonal of ``ρ``).

    Works for batched input of shape ``(..., D, D)``.
    """
    return np.real(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1)).copy()


def z_signs(n: int, target: int) -> np.ndarray:
    """+1 where ``target``'s bit is 0, -1 where it is 1, over all basis indices."""
    if not 0 <= target < n:
        raise ValueError(f"target qubit {target} out of range for {n} qubits")
    bits = (np.arange(1 << n) >> target) & 1
    return 1.0 - 2.0 * bits


def expectation_z(rho: np.ndarray, target: int) -> float | np.ndarray:
    """⟨Z⟩ of ``target``; accepts a single ``ρ`` or a batch ``(B, D, D)``."""
    probs = basis_probabilities(rho)
    n = n_qubits_of(probs.shape[-1])
    return probs @ z_signs(n, target)

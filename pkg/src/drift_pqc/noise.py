"""Kraus operators for gate error, T1 relaxation and T2 dephasing."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .qmath import I2, PAULIS, X, Y, Z

TQ_NOISE_MODES = ("pair_depolarizing", "independent_local")


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def survival_probability(t: float, T: float) -> float:
    """Probability of *no* decay during an operation of length ``t``: ``exp(-t/T)``."""
    if T <= 0:
        raise ValueError(f"time constant must be positive, got {T}")
    if t < 0:
        raise ValueError(f"duration must be nonnegative, got {t}")
    return math.exp(-t / T)


def depolarizing_kraus(p: float) -> list[np.ndarray]:
    """X, Y and Z errors with probability p/3 each."""
    p = _check_prob("p", p)
    a, b = math.sqrt(1.0 - p), math.sqrt(p / 3.0)
    return [a * I2, b * X, b * Y, b * Z]


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    gamma = _check_prob("gamma", gamma)
    e0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]], dtype=np.complex128)
    e1 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=np.complex128)
    return [e0, e1]


def phase_damping_kraus(lam: float) -> list[np.ndarray]:
    lam = _check_prob("lambda", lam)
    e0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - lam)]], dtype=np.complex128)
    e1 = np.array([[0.0, 0.0], [0.0, math.sqrt(lam)]], dtype=np.complex128)
    return [e0, e1]


def two_qubit_gate_error_kraus(p: float) -> list[np.ndarray]:
    """Two-qubit depolarizing: each of the 15 non-identity Pauli pairs with p/15."""
    p = _check_prob("p", p)
    ops = [math.sqrt(1.0 - p) * np.kron(I2, I2)]
    b = math.sqrt(p / 15.0)
    for pa, pb in itertools.product(range(4), repeat=2):
        if pa == 0 and pb == 0:
            continue
        ops.append(b * np.kron(PAULIS[pa], PAULIS[pb]))
    return ops


def independent_local_kraus(p: float) -> list[np.ndarray]:
    """Single-qubit depolarizing with probability ``p`` on each qubit of a pair."""
    local = depolarizing_kraus(p)
    return [np.kron(a, b) for a in local for b in local]


def gate_error_2q_kraus(p: float, mode: str = "pair_depolarizing") -> list[np.ndarray]:
    if mode == "pair_depolarizing":
        return two_qubit_gate_error_kraus(p)
    if mode == "independent_local":
        return independent_local_kraus(p)
    raise ValueError(f"unknown two-qubit noise mode {mode!r}; expected one of {TQ_NOISE_MODES}")


def t1_gamma(t_ns: float, t1_us: float) -> float:
    return 1.0 - survival_probability(t_ns, t1_us * 1e3)


def t2_lambda(t_ns: float, t2_us: float) -> float:
    return 1.0 - survival_probability(t_ns, t2_us * 1e3)

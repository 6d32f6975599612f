"""Classical-to-quantum encoders: basis encoding and 2-qubit amplitude encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, Instruction, Param, bind

ANGLE_VARIANTS = ("standard", "paper-verbatim")
N_PREP_ANGLES = 5


def normalize(x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector has non-finite entries")
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return x / norm


def basis_encode(bits: Sequence[int]) -> Circuit:
    """X where the bit is 1, I where it is 0; ``bits[i]`` lands on qubit ``i``."""
    bits = list(bits)
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"basis encoding needs binary input, got {bits}")
    ops = tuple(Instruction("X" if b else "I", (q,)) for q, b in enumerate(bits))
    return Circuit(len(bits), ops, 0)


def int_to_bits(x: int, width: int) -> tuple[int, ...]:
    """Little-endian bits: element ``i`` is bit ``i`` of ``x``."""
    return tuple((x >> i) & 1 for i in range(width))


@dataclass(frozen=True)
class PrepAngles:
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    beta0: float
    beta1: float
    beta2: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.a1, self.a2, self.a3, self.a4, self.a5)


def _half_angle(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0
    return 2.0 * math.asin(min(1.0, max(-1.0, num / den)))


def amplitude_angles(x: Sequence[float], variant: str = "standard") -> PrepAngles:
    """Rotation angles that prepare ``Σ x_i |i⟩`` from |00⟩.

    ``variant="paper-verbatim"`` squares the numerators of the two conditional
    angles, kept only for comparison; it does not reproduce ``x``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ValueError(f"amplitude encoding takes 4 features, got shape {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValueError("amplitude encoding needs a unit-norm vector; call normalize() first")
    if variant not in ANGLE_VARIANTS:
        raise ValueError(f"unknown angle variant {variant!r}")
    low = math.hypot(x[0], x[1])
    high = math.hypot(x[2], x[3])
    if variant == "standard":
        b0 = _half_angle(x[1], low)
        b1 = _half_angle(x[3], high)
    else:
        b0 = _half_angle(x[1] ** 2, low)
        b1 = _half_angle(x[3] ** 2, high)
    b2 = _half_angle(high, 1.0)
    return PrepAngles(b2, -b1 / 2, b1 / 2, -b0 / 2, b0 / 2, b0, b1, b2)


def amplitude_prep_template(offset: int = 0, n_params: int | None = None) -> Circuit:
    """Prep circuit with A1..A5 read from ``θ[offset : offset + 5]``.

    Qubit 1 is the most significant. Each conditioned rotation on qubit 0 is
    ``CNOT, RY(a), CNOT, RY(-a)``: the identity when qubit 1 is |0⟩ and
    ``RY(-2a)`` when it is |1⟩. The second block is wrapped in X on qubit 1
    so that it fires on |0⟩ instead.
    """
    a = [Param.of(offset + k) for k in range(N_PREP_ANGLES)]
    ops = (
        Instruction("RY", (1,), (a[0],)),
        Instruction("CNOT", (1, 0)),
        Instruction("RY", (0,), (a[1],)),
        Instruction("CNOT", (1, 0)),
        Instruction("RY", (0,), (a[2],)),
        Instruction("X", (1,)),
        Instruction("CNOT", (1, 0)),
        Instruction("RY", (0,), (a[3],)),
        Instruction("CNOT", (1, 0)),
        Instruction("RY", (0,), (a[4],)),
        Instruction("X", (1,)),
    )
    return Circuit(2, ops, n_params if n_params is not None else offset + N_PREP_ANGLES)


def amplitude_prep_circuit(angles: PrepAngles) -> Circuit:
    return bind(amplitude_prep_template(), angles.as_tuple())


def amplitude_encode(features: Sequence[float], variant: str = "standard") -> Circuit:
    return amplitude_prep_circuit(amplitude_angles(normalize(features), variant))

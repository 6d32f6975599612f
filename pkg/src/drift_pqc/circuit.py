"""Gate library and circuit intermediate representation.

Circuits are immutable. A parameter slot is either a literal angle (radians) or
a reference into the trainable parameter vector θ.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .device import DeviceModel

# kind -> (arity, parameter count)
GATES: dict[str, tuple[int, int]] = {
    "I": (1, 0),
    "X": (1, 0),
    "U3": (1, 3),
    "RZ": (1, 1),
    "RY": (1, 1),
    "CNOT": (2, 0),
    "CZ": (2, 0),
}

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    """A literal angle (``ref is None``) or a reference ``θ[ref]``."""

    value: float = 0.0
    ref: int | None = None

    @classmethod
    def lit(cls, value: float) -> "Param":
        return cls(value=float(value))

    @classmethod
    def of(cls, index: int) -> "Param":
        return cls(ref=int(index))

    @property
    def is_ref(self) -> bool:
        return self.ref is not None

    def to_json(self) -> dict:
        return {"ref": self.ref} if self.is_ref else {"lit": self.value}

    @classmethod
    def from_json(cls, obj: dict) -> "Param":
        if "ref" in obj:
            return cls.of(obj["ref"])
        if "lit" in obj:
            return cls.lit(obj["lit"])
        raise CircuitError(f"parameter must carry 'ref' or 'lit': {obj!r}")


@dataclass(frozen=True)
class Instruction:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[Param, ...] = ()

    def __post_init__(self):
        if self.kind not in GATES:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        arity, n_par = GATES[self.kind]
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        params = tuple(p if isinstance(p, Param) else Param.lit(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != arity:
            raise CircuitError(f"{self.kind} needs distinct qubits, got {self.qubits}")
        if len(params) != n_par:
            raise CircuitError(f"{self.kind} takes {n_par} parameter(s), got {len(params)}")

    @property
    def arity(self) -> int:
        return len(self.qubits)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    instructions: tuple[Instruction, ...] = ()
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        for k, ins in enumerate(self.instructions):
            if any(q < 0 or q >= self.n_qubits for q in ins.qubits):
                raise CircuitError(f"instruction {k}: qubit out of range for {self.n_qubits} qubits")
            for p in ins.params:
                if p.is_ref and not 0 <= p.ref < self.n_params:
                    raise CircuitError(f"instruction {k}: ref {p.ref} outside θ of length {self.n_params}")

    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def is_bound(self) -> bool:
        return all(not p.is_ref for ins in self.instructions for p in ins.params)

    def count_refs(self) -> int:
        return sum(p.is_ref for ins in self.instructions for p in ins.params)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "ops": [
                {
                    "gate": ins.kind,
                    "qubits": list(ins.qubits),
                    "params": [p.to_json() for p in ins.params],
                }
                for ins in self.instructions
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Circuit":
        try:
            ops = [
                Instruction(
                    op["gate"],
                    tuple(op["qubits"]),
                    tuple(Param.from_json(p) for p in op.get("params", [])),
                )
                for op in obj["ops"]
            ]
            return cls(int(obj["n_qubits"]), tuple(ops), int(obj.get("n_params", 0)))
        except (KeyError, TypeError) as exc:
            raise CircuitError(f"malformed circuit JSON: {exc}") from exc


def load_circuit(path: str | Path) -> Circuit:
    with open(path) as fh:
        return Circuit.from_json(json.load(fh))


def save_circuit(circuit: Circuit, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(circuit.to_json(), fh, indent=2)
        fh.write("\n")


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def gate_matrix(kind: str, params: Sequence[float] = ()) -> np.ndarray:
    """Unitary for ``kind`` with literal ``params`` in radians."""
    if kind not in GATES:
        raise CircuitError(f"unknown gate kind {kind!r}")
    if len(params) != GATES[kind][1]:
        raise CircuitError(f"{kind} takes {GATES[kind][1]} parameter(s), got {len(params)}")
    return gate_matrices(kind, np.asarray(params, dtype=float).reshape(1, -1))[0]


def gate_matrices(kind: str, params: np.ndarray) -> np.ndarray:
    """Batched gate matrices; ``params`` has shape ``(B, n_params)``."""
    params = np.asarray(params, dtype=float)
    b = params.shape[0]
    if kind == "U3" or kind == "RY":
        theta = params[:, 0]
        if kind == "U3":
            phi, lam = params[:, 1], params[:, 2]
        else:
            phi = lam = np.zeros(b)
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        out = np.empty((b, 2, 2), dtype=np.complex128)
        out[:, 0, 0] = c
        out[:, 0, 1] = -np.exp(1j * lam) * s
        out[:, 1, 0] = np.exp(1j * phi) * s
        out[:, 1, 1] = np.exp(1j * (phi + lam)) * c
        return out
    if kind == "RZ":
        out = np.zeros((b, 2, 2), dtype=np.complex128)
        out[:, 0, 0] = 1.0
        out[:, 1, 1] = np.exp(1j * params[:, 0])
        return out
    fixed = {"I": np.eye(2, dtype=np.complex128), "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
             "CNOT": _CNOT, "CZ": _CZ}[kind]
    return np.broadcast_to(fixed, (b,) + fixed.shape).copy()


def bind(circuit: Circuit, theta: Sequence[float]) -> Circuit:
    """Replace every ``Ref`` with the matching entry of ``theta``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != circuit.n_params:
        raise CircuitError(f"θ has length {theta.shape[0]}, circuit expects {circuit.n_params}")
    ops = tuple(
        replace(ins, params=tuple(Param.lit(theta[p.ref]) if p.is_ref else p for p in ins.params))
        for ins in circuit.instructions
    )
    return Circuit(circuit.n_qubits, ops, circuit.n_params)


def compose(*circuits: Circuit, param_offsets: Iterable[int] | None = None) -> Circuit:
    """Concatenate circuits on the same register.

    Refs of the k-th circuit are shifted by ``param_offsets[k]`` (default: each
    circuit keeps its own refs, which therefore share one θ).
    """
    if not circuits:
        raise CircuitError("nothing to compose")
    n = max(c.n_qubits for c in circuits)
    offsets = list(param_offsets) if param_offsets is not None else [0] * len(circuits)
    ops: list[Instruction] = []
    n_params = 0
    for c, off in zip(circuits, offsets):
        for ins in c.instructions:
            ops.append(
                replace(ins, params=tuple(Param.of(p.ref + off) if p.is_ref else p for p in ins.params))
            )
        n_params = max(n_params, off + c.n_params)
    return Circuit(n, tuple(ops), n_params)


def remap(circuit: Circuit, mapping: Sequence[int], n_qubits: int) -> Circuit:
    """Relabel logical qubit ``i`` as ``mapping[i]`` on an ``n_qubits`` register."""
    ops = tuple(replace(ins, qubits=tuple(mapping[q] for q in ins.qubits)) for ins in circuit.instructions)
    return Circuit(n_qubits, ops, circuit.n_params)


def lower(circuit: Circuit, native_1q: Iterable[str] | None) -> Circuit:
    """Rewrite ``RY(θ)`` as ``U3(θ, 0, 0)`` when RY is not a native gate."""
    if native_1q is None or "RY" in set(native_1q):
        return circuit
    ops = tuple(
        Instruction("U3", ins.qubits, (ins.params[0], Param.lit(0.0), Param.lit(0.0)))
        if ins.kind == "RY"
        else ins
        for ins in circuit.instructions
    )
    return Circuit(circuit.n_qubits, ops, circuit.n_params)


@dataclass(frozen=True)
class Violation:
    index: int
    reason: str

    def __str__(self) -> str:
        return f"instruction {self.index}: {self.reason}"


def validate(circuit: Circuit, device: "DeviceModel") -> list[Violation]:
    """Coupling-constraint and range check; an empty list means the circuit runs as is."""
    out: list[Violation] = []
    if circuit.n_qubits > device.n_qubits:
        out.append(Violation(-1, f"circuit uses {circuit.n_qubits} qubits, device has {device.n_qubits}"))
    edges = set(device.edges)
    for k, ins in enumerate(circuit.instructions):
        bad = [q for q in ins.qubits if q >= device.n_qubits]
        if bad:
            out.append(Violation(k, f"qubit(s) {bad} not on device"))
            continue
        if ins.arity == 2:
            c, t = ins.qubits
            if (c, t) in edges:
                continue
            if ins.kind == "CZ" and (t, c) in edges:
                continue
            if (t, c) in edges:
                out.append(Violation(k, f"{ins.kind}({c}->{t}) against coupling direction (only {t}->{c} exists)"))
            else:
                out.append(Violation(k, f"{ins.kind}({c}->{t}) has no coupling edge"))
    return out

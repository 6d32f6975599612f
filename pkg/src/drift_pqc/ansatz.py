"""Layered model circuits: a U3 on every qubit followed by a CNOT entangler.

The CNOT pattern of each topology is read from ``data/entanglers.json``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .circuit import Circuit, Instruction, Param, validate
from .device import DeviceModel

TOPOLOGIES = ("TTN", "ALT", "MERA", "IRIS_LAYER")


class AnsatzError(ValueError):
    pass


@lru_cache(maxsize=None)
def entangler_table() -> dict:
    with resources.files("drift_pqc").joinpath("data/entanglers.json").open() as fh:
        table = json.load(fh)
    return {k: v for k, v in table.items() if not k.startswith("_")}


@dataclass(frozen=True)
class AnsatzSpec:
    topology: str
    n_qubits: int
    layers: int
    target: int = 0
    mapping: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "topology", self.topology.upper())
        if self.mapping is not None:
            object.__setattr__(self, "mapping", tuple(int(m) for m in self.mapping))
        if self.topology not in TOPOLOGIES:
            raise AnsatzError(f"unknown topology {self.topology!r}; choose from {TOPOLOGIES}")
        if self.layers < 1:
            raise AnsatzError("need at least one layer")
        if not 0 <= self.target < self.n_qubits:
            raise AnsatzError(f"target {self.target} outside {self.n_qubits} qubits")
        expected = entangler_table()[self.topology]["n_qubits"]
        if self.n_qubits != expected:
            raise AnsatzError(f"{self.topology} is defined on {expected} qubits, got {self.n_qubits}")
        if self.mapping is not None:
            if len(self.mapping) != self.n_qubits or len(set(self.mapping)) != self.n_qubits:
                raise AnsatzError(f"mapping {self.mapping} must be injective over {self.n_qubits} qubits")

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits * self.layers

    def with_mapping(self, mapping: Sequence[int]) -> "AnsatzSpec":
        return AnsatzSpec(self.topology, self.n_qubits, self.layers, self.target, tuple(mapping))

    def to_json(self) -> dict:
        return {
            "topology": self.topology,
            "n_qubits": self.n_qubits,
            "layers": self.layers,
            "target": self.target,
            "mapping": list(self.mapping) if self.mapping is not None else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnsatzSpec":
        mapping = obj.get("mapping")
        return cls(obj["topology"], int(obj["n_qubits"]), int(obj["layers"]), int(obj.get("target", 0)),
                   tuple(mapping) if mapping is not None else None)


def entangler(spec: AnsatzSpec) -> list[tuple[int, int]]:
    # patterns are stored for target 0; swap labels 0 <-> target
    swap = {0: spec.target, spec.target: 0}
    return [(swap.get(c, c), swap.get(t, t)) for c, t in entangler_table()[spec.topology]["cnots"]]


def build(spec: AnsatzSpec) -> Circuit:
    """Logical model circuit; θ is laid out layer-major, then qubit, then (θ, φ, λ)."""
    ops: list[Instruction] = []
    cnots = entangler(spec)
    k = 0
    for _ in range(spec.layers):
        for q in range(spec.n_qubits):
            ops.append(Instruction("U3", (q,), (Param.of(k), Param.of(k + 1), Param.of(k + 2))))
            k += 3
        ops.extend(Instruction("CNOT", pair) for pair in cnots)
    return Circuit(spec.n_qubits, tuple(ops), k)


def available_mappings(spec: AnsatzSpec, device: DeviceModel, circuit: Circuit | None = None) -> list[tuple[int, ...]]:
    """Injective logical→physical assignments placing every 2-qubit gate on a device edge.

    Lexicographic order. ``circuit`` defaults to ``build(spec)``; pass a
    composed prep+model circuit to constrain the prep gates as well.
    """
    circuit = circuit if circuit is not None else build(spec)
    pairs = sorted({ins.qubits for ins in circuit.instructions if ins.arity == 2})
    edges = set(device.edges)
    out = []
    for perm in itertools.permutations(range(device.n_qubits), spec.n_qubits):
        if all((perm[c], perm[t]) in edges for c, t in pairs):
            out.append(tuple(perm))
    return out


def resolve_mapping(spec: AnsatzSpec, device: DeviceModel, index: int = 0,
                    circuit: Circuit | None = None) -> AnsatzSpec:
    """Pin ``spec.mapping`` (explicit mapping wins, else the ``index``-th available one)."""
    circuit = circuit if circuit is not None else build(spec)
    if spec.mapping is not None:
        sub = device.subdevice(spec.mapping)
        bad = validate(circuit, sub)
        if bad:
            raise AnsatzError(f"mapping {spec.mapping} violates coupling: {bad[0]}")
        return spec
    maps = available_mappings(spec, device, circuit)
    if not maps:
        raise AnsatzError(f"no direct mapping of {spec.topology} onto the device")
    if not 0 <= index < len(maps):
        raise AnsatzError(f"mapping index {index} out of range ({len(maps)} available)")
    return spec.with_mapping(maps[index])

"""Noisy density-matrix execution of circuits against a device model.

Each instruction is applied as: ideal unitary, then gate-error channel, then
amplitude damping (T1), then phase damping (T2) on the qubits it touches. The
four maps are fused into one local superoperator per instruction and applied
by the kernels in :mod:`drift_pqc.kernels`. A compiled circuit evaluates a whole
batch of parameter vectors at once, which is how training and replay use it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels, noise
from .circuit import GATES, Circuit, gate_matrices, lower, validate
from .device import DeviceModel
from .qmath import basis_probabilities, expectation_z, kraus_superop, n_qubits_of
from .rng import RNG_ALGORITHM  # noqa: F401


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    noise: bool = True
    idle_decoherence: bool = False
    tq_noise_mode: str = "pair_depolarizing"
    shots: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.tq_noise_mode not in noise.TQ_NOISE_MODES:
            raise ValueError(f"unknown tq_noise_mode {self.tq_noise_mode!r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


NOISELESS = RunConfig(noise=False)


def _decoherence_ops(device: DeviceModel, q: int, t_ns: float) -> list[list[np.ndarray]]:
    return [
        noise.amplitude_damping_kraus(noise.t1_gamma(t_ns, device.t1_us[q])),
        noise.phase_damping_kraus(noise.t2_lambda(t_ns, device.t2_us[q])),
    ]


def _chain(superops: Sequence[np.ndarray]) -> np.ndarray:
    out = superops[0]
    for s in superops[1:]:
        out = s @ out
    return out


def noise_superop(kind: str, qubits: Sequence[int], device: DeviceModel, mode: str) -> np.ndarray:
    """Gate-error → T1 → T2 channel of one instruction, as a local superoperator."""
    t_ns = device.gate_time_ns(kind, qubits)
    if len(qubits) == 1:
        (q,) = qubits
        sets = [noise.depolarizing_kraus(device.err_1q[q])] + _decoherence_ops(device, q, t_ns)
        return _chain([kraus_superop(s) for s in sets])
    c, t = qubits
    eye = np.eye(2, dtype=np.complex128)
    sets = [noise.gate_error_2q_kraus(device.edge_error(c, t), mode)]
    for ops in _decoherence_ops(device, c, t_ns):
        sets.append([np.kron(e, eye) for e in ops])
    for ops in _decoherence_ops(device, t, t_ns):
        sets.append([np.kron(eye, e) for e in ops])
    return _chain([kraus_superop(s) for s in sets])


def _unitary_superops(u: np.ndarray) -> np.ndarray:
    b, d, _ = u.shape
    return np.einsum("bij,bkl->bikjl", u, u.conj()).reshape(b, d * d, d * d)


@dataclass
class _Step:
    qubits: tuple[int, ...]
    kind: str | None = None
    lit_cols: np.ndarray | None = None
    lit_vals: np.ndarray | None = None
    ref_cols: np.ndarray | None = None
    ref_idx: np.ndarray | None = None
    noise: np.ndarray | None = None
    fixed: np.ndarray | None = None  # (1, d², d²) when independent of θ


class CompiledCircuit:
    """A circuit template prepared for repeated batched evaluation on one device."""

    def __init__(self, circuit: Circuit, device: DeviceModel | None = None, config: RunConfig = RunConfig()):
        self.config = config
        if device is not None:
            circuit = lower(circuit, device.native_1q_gates)
            violations = validate(circuit, device)
            if violations:
                raise SimulationError("; ".join(str(v) for v in violations))
        self.circuit = circuit
        self.n_qubits = circuit.n_qubits
        self.n_params = circuit.n_params
        noisy = config.noise and device is not None
        self.steps: list[_Step] = []
        for ins in circuit.instructions:
            step = _Step(ins.qubits, ins.kind)
            refs = [(i, p.ref) for i, p in enumerate(ins.params) if p.is_ref]
            lits = [(i, p.value) for i, p in enumerate(ins.params) if not p.is_ref]
            step.ref_cols = np.array([i for i, _ in refs], dtype=np.intp)
            step.ref_idx = np.array([r for _, r in refs], dtype=np.intp)
            step.lit_cols = np.array([i for i, _ in lits], dtype=np.intp)
            step.lit_vals = np.array([v for _, v in lits], dtype=float)
            if noisy:
                step.noise = noise_superop(ins.kind, ins.qubits, device, config.tq_noise_mode)
            if not refs:
                u = gate_matrices(ins.kind, step.lit_vals.reshape(1, -1))
                s = _unitary_superops(u)
                step.fixed = np.ascontiguousarray(s if step.noise is None else step.noise @ s)
            self.steps.append(step)
            if noisy and config.idle_decoherence:
                t_ns = device.gate_time_ns(ins.kind, ins.qubits)
                for q in range(self.n_qubits):
                    if q in ins.qubits:
                        continue
                    s = _chain([kraus_superop(k) for k in _decoherence_ops(device, q, t_ns)])
                    self.steps.append(_Step((q,), fixed=np.ascontiguousarray(s[None])))

    def evolve(self, params: np.ndarray | None = None) -> np.ndarray:
        """Final density matrices, shape ``(B, D, D)``, for a ``(B, n_params)`` batch."""
        if params is None:
            params = np.zeros((1, self.n_params))
        params = np.atleast_2d(np.asarray(params, dtype=float))
        if params.shape[1] != self.n_params:
            raise SimulationError(f"expected {self.n_params} parameters, got {params.shape[1]}")
        b = params.shape[0]
        d = 1 << self.n_qubits
        rho = np.zeros((b, d, d), dtype=np.complex128)
        rho[:, 0, 0] = 1.0
        for step in self.steps:
            if step.fixed is not None:
                s = step.fixed
            else:
                p = np.empty((b, GATES[step.kind][1]))
                p[:, step.lit_cols] = step.lit_vals
                p[:, step.ref_cols] = params[:, step.ref_idx]
                s = _unitary_superops(gate_matrices(step.kind, p))
                if step.noise is not None:
                    s = np.matmul(step.noise, s)
                s = np.ascontiguousarray(s)
            if len(step.qubits) == 1:
                kernels.apply_1q(rho, s, step.qubits[0])
            else:
                kernels.apply_2q(rho, s, step.qubits[0], step.qubits[1])
        return rho

    def expectations(self, params: np.ndarray, target: int) -> np.ndarray:
        return expectation_z(self.evolve(params), target)


def run(circuit: Circuit, device: DeviceModel | None = None, config: RunConfig = RunConfig()) -> np.ndarray:
    """Output density matrix of a fully bound circuit, starting from |0…0⟩."""
    if not circuit.is_bound:
        raise SimulationError("circuit has unbound parameters")
    return CompiledCircuit(circuit, device, config).evolve()[0]


def expectation(circuit: Circuit, device: DeviceModel | None, config: RunConfig, target: int) -> float:
    return float(expectation_z(run(circuit, device, config), target))


def sample(rho: np.ndarray, shots: int, seed: int) -> dict[str, int]:
    """Multinomial shot counts over computational-basis outcomes.

    Bitstrings are written highest qubit first, so qubit 0 is the last character.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = basis_probabilities(rho)
    n = n_qubits_of(probs.shape[0])
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    counts = np.random.Generator(np.random.PCG64(seed)).multinomial(shots, probs)
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c > 0}


def target_tally(counts: Mapping[str, int], target: int) -> tuple[int, int]:
    """``(shots with target bit 0, shots with target bit 1)``."""
    zeros = ones = 0
    for bits, c in counts.items():
        if bits[len(bits) - 1 - target] == "1":
            ones += c
        else:
            zeros += c
    return zeros, ones


def ratio(counts: Mapping[str, int], target: int) -> float:
    """Shots with target bit 1 divided by shots with target bit 0."""
    zeros, ones = target_tally(counts, target)
    if zeros + ones < 1:
        raise ValueError("no shots")
    if zeros == 0:
        return float("inf")
    return ones / zeros

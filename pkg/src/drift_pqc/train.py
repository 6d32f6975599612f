"""Squared-error cost, finite-difference gradients and the three training strategies.

Strategies differ only in the noise model used while optimizing:

* ``app01:<day>`` trains against one day's calibration snapshot,
* ``app02`` trains noiselessly,
* ``app03`` trains against the IQR-filtered average over the whole history.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ansatz import AnsatzSpec, build, resolve_mapping
from .circuit import Circuit, compose
from .device import CalibrationSeries, DeviceModel, average_device
from .encode import (
    N_PREP_ANGLES,
    amplitude_angles,
    amplitude_prep_template,
    basis_encode,
    int_to_bits,
    normalize,
)
from .rng import RNG_ALGORITHM, make_rng
from .simulator import CompiledCircuit, RunConfig

TASKS = ("parity", "iris")
IRIS_LABELS = {"setosa": +1, "versicolor": -1}


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Inputs with ±1 labels. ``encoding`` is ``"basis"`` (bit tuples) or ``"amplitude"``."""

    inputs: tuple
    labels: tuple[int, ...]
    encoding: str
    name: str = ""

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise TrainingError("one label per input required")
        if any(y not in (-1, 1) for y in self.labels):
            raise TrainingError("labels must be -1 or +1")
        if self.encoding not in ("basis", "amplitude"):
            raise TrainingError(f"unknown encoding {self.encoding!r}")

    def __len__(self) -> int:
        return len(self.labels)


def parity_dataset(n_bits: int = 4) -> LabeledDataset:
    """All ``2**n_bits`` inputs; odd parity → +1 (outcome 0), even parity → -1."""
    inputs = tuple(int_to_bits(x, n_bits) for x in range(1 << n_bits))
    labels = tuple(+1 if sum(b) % 2 else -1 for b in inputs)
    return LabeledDataset(inputs, labels, "basis", "parity")


def iris_dataset(path: str | Path | None = None) -> LabeledDataset:
    """Setosa (+1) vs versicolor (-1), four features in cm."""
    if path is None:
        fh = resources.files("drift_pqc").joinpath("data/iris_binary.csv").open()
    else:
        fh = open(path, newline="")
    with fh:
        rows = list(csv.DictReader(fh))
    cols = ("sepal_len", "sepal_wid", "petal_len", "petal_wid")
    inputs, labels = [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            inputs.append(tuple(float(row[c]) for c in cols))
            labels.append(IRIS_LABELS[row["label"].strip()])
        except (KeyError, ValueError, AttributeError) as exc:
            raise TrainingError(f"iris data line {lineno}: {exc}") from None
    return LabeledDataset(tuple(inputs), tuple(labels), "amplitude", "iris")


def task_dataset(task: str, path: str | Path | None = None) -> LabeledDataset:
    if task == "parity":
        return parity_dataset(4)
    if task == "iris":
        return iris_dataset(path)
    raise TrainingError(f"unknown task {task!r}; choose from {TASKS}")


def default_spec(task: str, topology: str, layers: int) -> AnsatzSpec:
    topology = topology.upper()
    if topology == "IRIS":
        topology = "IRIS_LAYER"
    n = 2 if topology == "IRIS_LAYER" else 4
    if (task == "iris") != (topology == "IRIS_LAYER"):
        raise TrainingError(f"topology {topology} does not fit task {task}")
    return AnsatzSpec(topology, n, layers, 0)


class Objective:
    """Dataset cost ``J(θ) = mean_i (y_i - ⟨Z_target⟩_i)²`` on one noise model.

    ``device=None`` means a noiseless simulation. With a device, the model is
    placed on the physical qubits in ``spec.mapping``.
    """

    def __init__(
        self,
        dataset: LabeledDataset,
        spec: AnsatzSpec,
        device: DeviceModel | None = None,
        run_config: RunConfig = RunConfig(),
        angle_variant: str = "standard",
    ):
        self.dataset = dataset
        self.spec = spec
        self.labels = np.asarray(dataset.labels, dtype=float)
        self.model = build(spec)
        self.n_params = self.model.n_params
        if device is not None:
            if spec.mapping is None:
                raise TrainingError("a device-backed objective needs spec.mapping")
            device = device.subdevice(spec.mapping)
        self.device = device
        self.run_config = run_config

        # group inputs sharing one prep structure; extra columns feed prep angles
        self._groups: dict[object, tuple[Circuit, list[int]]] = {}
        self._extra = np.zeros((len(dataset), 0))
        if dataset.encoding == "amplitude":
            if spec.n_qubits != 2:
                raise TrainingError("amplitude encoding needs a 2-qubit model")
            prep = amplitude_prep_template(offset=self.n_params, n_params=self.n_params + N_PREP_ANGLES)
            circuit = compose(prep, self.model)
            self._groups["amp"] = (circuit, list(range(len(dataset))))
            self._extra = np.array(
                [amplitude_angles(normalize(x), angle_variant).as_tuple() for x in dataset.inputs]
            )
        else:
            for i, bits in enumerate(dataset.inputs):
                if len(bits) != spec.n_qubits:
                    raise TrainingError(f"input {bits} does not fit {spec.n_qubits} qubits")
                key = tuple(bits)
                if key not in self._groups:
                    self._groups[key] = (compose(basis_encode(bits), self.model), [])
                self._groups[key][1].append(i)
        self._compiled: dict[object, CompiledCircuit] = {}
        self._group_of = {i: key for key, (_, items) in self._groups.items() for i in items}

    def full_circuit(self, index: int) -> Circuit:
        return self._groups[self._group_of[index]][0]

    def _compiled_for(self, key) -> CompiledCircuit:
        if key not in self._compiled:
            self._compiled[key] = CompiledCircuit(self._groups[key][0], self.device, self.run_config)
        return self._compiled[key]

    def expectations(self, thetas: np.ndarray, items: Sequence[int] | None = None) -> np.ndarray:
        """Target-qubit ⟨Z⟩ for every θ row and item; shape ``(V, len(items))``."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if thetas.shape[1] != self.n_params:
            raise TrainingError(f"θ has {thetas.shape[1]} entries, model expects {self.n_params}")
        items = list(range(len(self.dataset))) if items is None else [int(i) for i in items]
        if not items:
            raise TrainingError("empty batch")
        v = thetas.shape[0]
        out = np.empty((v, len(items)))
        by_group: dict[object, list[int]] = {}
        for pos, i in enumerate(items):
            by_group.setdefault(self._group_of[i], []).append(pos)
        for key, positions in by_group.items():
            idx = [items[p] for p in positions]
            extra = self._extra[idx]
            params = np.concatenate(
                [np.repeat(thetas, len(idx), axis=0), np.tile(extra, (v, 1))], axis=1
            )
            e = self._compiled_for(key).expectations(params, self.spec.target)
            out[:, positions] = e.reshape(v, len(idx))
        return out

    def densities(self, theta: Sequence[float], items: Sequence[int]) -> np.ndarray:
        """Output density matrices for one θ, shape ``(len(items), D, D)``."""
        theta = np.asarray(theta, dtype=float)
        out = np.empty((len(items), 1 << self.spec.n_qubits, 1 << self.spec.n_qubits), dtype=np.complex128)
        for pos, i in enumerate(items):
            params = np.concatenate([theta, self._extra[i]])[None, :]
            out[pos] = self._compiled_for(self._group_of[i]).evolve(params)[0]
        return out

    def costs(self, thetas: np.ndarray, items: Sequence[int] | None = None) -> np.ndarray:
        items = list(range(len(self.dataset))) if items is None else list(items)
        e = self.expectations(thetas, items)
        return np.mean((self.labels[items][None, :] - e) ** 2, axis=1)

    def cost(self, theta: Sequence[float], items: Sequence[int] | None = None) -> float:
        return float(self.costs(np.asarray(theta, dtype=float)[None, :], items)[0])

    def gradient(self, theta: Sequence[float], items: Sequence[int] | None = None, h: float = 0.01) -> np.ndarray:
        return central_difference(lambda thetas: self.costs(thetas, items), theta, h)


def central_difference(costs: Callable[[np.ndarray], np.ndarray], theta: Sequence[float], h: float = 0.01) -> np.ndarray:
    """``(J(θ + h e_i) - J(θ - h e_i)) / 2h`` for every i.

    ``costs`` maps a ``(V, P)`` batch of parameter vectors to ``V`` costs; all
    2P shifted vectors go through it in one call.
    """
    if h <= 0:
        raise TrainingError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    shifts = np.repeat(theta[None, :], 2 * p, axis=0)
    idx = np.arange(p)
    shifts[2 * idx, idx] += h
    shifts[2 * idx + 1, idx] -= h
    c = np.asarray(costs(shifts), dtype=float)
    return (c[0::2] - c[1::2]) / (2 * h)


def cost(theta, batch: Sequence[int], spec: AnsatzSpec, device: DeviceModel | None,
         dataset: LabeledDataset, run_config: RunConfig = RunConfig()) -> float:
    return Objective(dataset, spec, device, run_config).cost(theta, batch)


def gradient(theta, batch: Sequence[int], spec: AnsatzSpec, device: DeviceModel | None,
             dataset: LabeledDataset, h: float = 0.01, run_config: RunConfig = RunConfig()) -> np.ndarray:
    return Objective(dataset, spec, device, run_config).gradient(theta, batch, h)


@dataclass(frozen=True)
class TrainConfig:
    strategy: str = "app02"
    iterations: int = 100
    batch_size: int = 1
    learning_rate: float = 0.1
    fd_step: float = 0.01
    seed: int = 0
    iqr_k: float = 1.5
    tq_noise_mode: str = "pair_depolarizing"
    idle_decoherence: bool = False
    angle_variant: str = "standard"

    def __post_init__(self):
        if self.iterations < 0:
            raise TrainingError("iterations must be nonnegative")
        if self.batch_size < 1 or self.learning_rate <= 0 or self.fd_step <= 0:
            raise TrainingError("batch size, learning rate and step must be positive")
        parse_strategy(self.strategy)

    @property
    def run_config(self) -> RunConfig:
        return RunConfig(noise=True, idle_decoherence=self.idle_decoherence, tq_noise_mode=self.tq_noise_mode)


def parse_strategy(strategy: str) -> tuple[str, str | None]:
    name, _, day = strategy.partition(":")
    if name not in ("app01", "app02", "app03"):
        raise TrainingError(f"unknown strategy {strategy!r}; use app01:<day>, app02 or app03")
    if name == "app01" and not day:
        raise TrainingError("app01 needs a day label, e.g. app01:day05")
    if name != "app01" and day:
        raise TrainingError(f"{name} takes no day label")
    return name, day or None


def training_device(strategy: str, series: CalibrationSeries | None, iqr_k: float = 1.5) -> DeviceModel | None:
    name, day = parse_strategy(strategy)
    if name == "app02":
        return None
    if series is None:
        raise TrainingError(f"{name} needs a calibration series")
    if name == "app01":
        try:
            return series[day]
        except KeyError:
            raise TrainingError(f"day {day!r} not in calibration series") from None
    return average_device(series, iqr_k)


@dataclass
class TrainedModel:
    task: str
    spec: AnsatzSpec
    theta: np.ndarray
    strategy: str
    cost_trace: list[float]
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "spec": self.spec.to_json(),
            "theta": [float(t) for t in self.theta],
            "strategy": self.strategy,
            "cost_trace": [float(c) for c in self.cost_trace],
            "config": self.config,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainedModel":
        try:
            spec = AnsatzSpec.from_json(obj["spec"])
            theta = np.asarray(obj["theta"], dtype=float)
            if theta.shape != (spec.n_params,):
                raise TrainingError(f"θ has {theta.size} entries, spec expects {spec.n_params}")
            return cls(obj["task"], spec, theta, obj["strategy"], list(obj.get("cost_trace", [])),
                       dict(obj.get("config", {})), dict(obj.get("provenance", {})))
        except (KeyError, TypeError) as exc:
            raise TrainingError(f"malformed model JSON: {exc}") from exc

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        obj = self.to_json()
        if extra:
            obj.update(extra)
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def fit(
    dataset: LabeledDataset,
    spec: AnsatzSpec,
    config: TrainConfig,
    series: CalibrationSeries | None = None,
    device: DeviceModel | None = None,
    task: str | None = None,
    mapping_index: int = 0,
) -> TrainedModel:
    """Mini-batch gradient descent on the strategy's noise model.

    One iteration is one pass over the shuffled dataset. ``cost_trace`` holds
    the full-dataset cost before training and after every iteration.
    ``device`` supplies the coupling graph for placement; it defaults to the
    first snapshot of ``series``.
    """
    if len(dataset) == 0:
        raise TrainingError("empty dataset")
    train_dev = training_device(config.strategy, series, config.iqr_k)
    topo = device if device is not None else (series.snapshots[0] if series is not None else None)
    if topo is not None:
        probe = Objective(dataset, spec, None, angle_variant=config.angle_variant)
        spec = resolve_mapping(spec, topo, mapping_index, probe.full_circuit(0))
    elif train_dev is not None:
        spec = resolve_mapping(spec, train_dev, mapping_index)

    objective = Objective(dataset, spec, train_dev, config.run_config, config.angle_variant)
    init_rng = make_rng(config.seed, "train.init")
    shuffle_rng = make_rng(config.seed, "train.shuffle")
    theta = init_rng.uniform(0.0, 2.0 * math.pi, objective.n_params)
    trace = [objective.cost(theta)]
    n = len(dataset)
    for _ in range(config.iterations):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            theta = theta - config.learning_rate * objective.gradient(theta, batch, config.fd_step)
        trace.append(objective.cost(theta))

    name, day = parse_strategy(config.strategy)
    provenance = {"training_noise": {"app01": f"snapshot {day}", "app02": "none",
                                     "app03": "IQR-filtered average of series"}[name],
                  "series_days": len(series) if series is not None else 0,
                  "rng": RNG_ALGORITHM}
    return TrainedModel(
        task=task or dataset.name,
        spec=spec,
        theta=theta,
        strategy=config.strategy,
        cost_trace=trace,
        config=asdict(config),
        provenance=provenance,
    )

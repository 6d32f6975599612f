"""Post-training evaluation: drift replay, shot-ratio statistics and their CDFs.

Label/bit orientation: label +1 ↔ ⟨Z⟩ = +1 ↔ target bit 0; label -1 ↔ bit 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .circuit import validate
from .device import CalibrationSeries, DeviceModel
from .ansatz import build
from .rng import make_rng
from .simulator import RunConfig, sample, target_tally
from .train import LabeledDataset, Objective, TrainedModel

DEFAULT_SHOTS = 1024


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ReplayReport:
    days: tuple[str, ...]
    costs: tuple[float, ...]

    @property
    def mean(self) -> float:
        return math.fsum(self.costs) / len(self.costs)

    @property
    def min(self) -> float:
        return min(self.costs)

    @property
    def max(self) -> float:
        return max(self.costs)

    def summary(self) -> dict:
        return {"mean": self.mean, "min": self.min, "max": self.max, "days": len(self.days)}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["day", "cost"])
            for d, c in zip(self.days, self.costs):
                w.writerow([d, repr(float(c))])


def _model_objective(model: TrainedModel, dataset: LabeledDataset, device: DeviceModel | None,
                     run_config: RunConfig) -> Objective:
    if device is not None:
        mapping = model.spec.mapping
        if mapping is None:
            raise EvaluationError("model has no qubit mapping; cannot place it on a device")
        if max(mapping) >= device.n_qubits:
            raise EvaluationError(f"topology mismatch: mapping {mapping} needs more than {device.n_qubits} qubits")
        bad = validate(build(model.spec), device.subdevice(mapping))
        if bad:
            raise EvaluationError(f"topology mismatch: {bad[0]}")
    variant = model.config.get("angle_variant", "standard")
    return Objective(dataset, model.spec, device, run_config, variant)


def _run_config(model: TrainedModel) -> RunConfig:
    return RunConfig(
        noise=True,
        idle_decoherence=bool(model.config.get("idle_decoherence", False)),
        tq_noise_mode=model.config.get("tq_noise_mode", "pair_depolarizing"),
    )


def replay(model: TrainedModel, dataset: LabeledDataset, series: CalibrationSeries,
           run_config: RunConfig | None = None) -> ReplayReport:
    """Full-dataset cost of fixed parameters under each day's noise."""
    run_config = run_config or _run_config(model)
    costs = []
    for snap in series.snapshots:
        costs.append(_model_objective(model, dataset, snap, run_config).cost(model.theta))
    return ReplayReport(series.days, tuple(costs))


def classify(counts: Mapping[str, int], target: int) -> tuple[int | None, float]:
    """Class 1 if target-bit ones outnumber zeros, class 0 if fewer, ``None`` on a tie.

    Also returns the ones/zeros ratio (``inf`` when no zeros were seen).
    """
    zeros, ones = target_tally(counts, target)
    if zeros + ones < 1:
        raise EvaluationError("no shots")
    r = math.inf if zeros == 0 else ones / zeros
    if ones > zeros:
        return 1, r
    if ones < zeros:
        return 0, r
    return None, r


def correct_ratio(counts: Mapping[str, int], label: int, target: int) -> float:
    """Correct-outcome shots over incorrect-outcome shots for an input labelled ``label``."""
    if label not in (-1, 1):
        raise EvaluationError("label must be -1 or +1")
    zeros, ones = target_tally(counts, target)
    correct, wrong = (zeros, ones) if label == 1 else (ones, zeros)
    return math.inf if wrong == 0 else correct / wrong


@dataclass(frozen=True)
class RatioObservation:
    input_id: int
    shots: int
    correct_count: int
    incorrect_count: int

    @property
    def r(self) -> float:
        return math.inf if self.incorrect_count == 0 else self.correct_count / self.incorrect_count

    def to_json(self) -> dict:
        out = asdict(self)
        out["r"] = json_number(self.r)
        return out


def json_number(x: float) -> float | str:
    return "inf" if math.isinf(x) else float(x)


def ratio_cdf(observations: Sequence[RatioObservation | float]) -> list[tuple[float, float]]:
    """Empirical CDF of r, one point per distinct value; ``inf`` sorts last."""
    rs = [o.r if isinstance(o, RatioObservation) else float(o) for o in observations]
    if not rs:
        raise EvaluationError("no observations")
    rs.sort()
    n = len(rs)
    points: list[tuple[float, float]] = []
    for i, r in enumerate(rs):
        if i + 1 < n and rs[i + 1] == r:
            continue
        points.append((r, (i + 1) / n))
    return points


def cdf_at(points: Sequence[tuple[float, float]], r: float) -> float:
    """Right-continuous step-function value of a ``ratio_cdf`` result at ``r``."""
    cp = 0.0
    for x, p in points:
        if x <= r:
            cp = p
        else:
            break
    return cp


def evaluate(
    model: TrainedModel,
    dataset: LabeledDataset,
    device: DeviceModel,
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
    n_observations: int = 100,
) -> list[RatioObservation]:
    """Shot-sampled correct/incorrect ratios on randomly chosen inputs (uniform, with replacement)."""
    objective = _model_objective(model, dataset, device, _run_config(model))
    rng = make_rng(seed, "evaluate.inputs")
    picks = rng.integers(0, len(dataset), n_observations)
    shot_seeds = rng.integers(0, 2**63 - 1, n_observations)
    unique = sorted(set(int(i) for i in picks))
    rhos = dict(zip(unique, objective.densities(model.theta, unique)))
    target = model.spec.target
    obs = []
    for i, s in zip(picks, shot_seeds):
        counts = sample(rhos[int(i)], shots, int(s))
        zeros, ones = target_tally(counts, target)
        label = dataset.labels[int(i)]
        correct, wrong = (zeros, ones) if label == 1 else (ones, zeros)
        obs.append(RatioObservation(int(i), shots, correct, wrong))
    return obs


def summarize_observations(obs: Sequence[RatioObservation]) -> dict:
    finite = [o.r for o in obs if not math.isinf(o.r)]
    return {
        "n": len(obs),
        "mean_r_finite": math.fsum(finite) / len(finite) if finite else None,
        "perfect": sum(math.isinf(o.r) for o in obs),
        "median_r": json_number(float(np.median([o.r for o in obs]))),
        "accuracy": sum(o.correct_count > o.incorrect_count for o in obs) / len(obs),
    }

"""The ten acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one pass/fail line, printed in the terminal summary.
"""

import math
import time
import warnings
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE
from drift_pqc.circuit import Circuit, Instruction, Param
from drift_pqc.cli import data_path
from drift_pqc.device import IqrWarning, iqr_filter, iqr_mean, load_device, load_series
from drift_pqc.encode import amplitude_angles, amplitude_prep_circuit, basis_encode, int_to_bits, normalize
from drift_pqc.evalx import cdf_at, classify, correct_ratio, ratio_cdf, replay
from drift_pqc.noise import (
    amplitude_damping_kraus,
    depolarizing_kraus,
    independent_local_kraus,
    phase_damping_kraus,
    t1_gamma,
    two_qubit_gate_error_kraus,
)
from drift_pqc.qmath import apply_kraus, basis_probabilities, check_completeness, expectation_z, ground_state, pure_density
from drift_pqc.rng import make_rng
from drift_pqc.simulator import NOISELESS, CompiledCircuit, run
from drift_pqc.train import TrainConfig, central_difference, default_spec, fit, iris_dataset, parity_dataset
from oracles import statevector, total_variation
from test_simulator import random_circuit

SEEDS = range(10)


class Check:
    """Collects sub-results of one criterion and records the verdict."""

    def __init__(self, n, budget_s):
        self.n, self.budget, self.parts, self.ok = n, budget_s, [], True
        self.t0 = time.perf_counter()

    def expect(self, cond, text):
        self.ok &= bool(cond)
        self.parts.append(text if cond else f"{text} [x]")

    def finish(self):
        dt = time.perf_counter() - self.t0
        self.expect(dt < self.budget, f"{dt:.1f}s < {self.budget:g}s")
        ACCEPTANCE[self.n] = (self.ok, "; ".join(self.parts))
        assert self.ok, ACCEPTANCE[self.n][1]


@lru_cache(maxsize=None)
def fixtures():
    device = load_device(data_path("ibmqx4.json"))
    return device, load_series(data_path("synthetic_43day.csv"), device)


@lru_cache(maxsize=None)
def trained(task, strategy, seed, layers):
    device, series = fixtures()
    ds = parity_dataset() if task == "parity" else iris_dataset()
    topo = "ttn" if task == "parity" else "iris"
    cfg = TrainConfig(strategy=strategy, seed=seed, batch_size=1 if task == "parity" else 5)
    return fit(ds, default_spec(task, topo, layers), cfg, series, device, task=task)


@lru_cache(maxsize=None)
def replayed(task, strategy, seed, layers):
    _, series = fixtures()
    ds = parity_dataset() if task == "parity" else iris_dataset()
    return replay(trained(task, strategy, seed, layers), ds, series)


def test_criterion_01_channels():
    c = Check(1, 1.0)
    worst = 0.0
    for p in np.linspace(0, 1, 21):
        for ops in (depolarizing_kraus(p), amplitude_damping_kraus(p), phase_damping_kraus(p),
                    two_qubit_gate_error_kraus(p), independent_local_kraus(p)):
            worst = max(worst, check_completeness(ops, atol=1e-12))
    c.expect(worst <= 1e-12, f"completeness dev {worst:.1e}")
    rho = apply_kraus(ground_state(1), depolarizing_kraus(0.3))
    c.expect(np.max(np.abs(rho - np.diag([0.8, 0.2]))) < 1e-12, "depol(0.3)|0> = diag(0.8,0.2)")
    rho = apply_kraus(np.diag([0.0, 1.0]).astype(complex), amplitude_damping_kraus(t1_gamma(40_000.0, 40.0)))
    target = np.diag([1 - math.exp(-1), math.exp(-1)])
    c.expect(np.max(np.abs(rho - target)) < 1e-12, "AD(t=T1)|1> = diag(1-1/e, 1/e)")
    c.finish()


def test_criterion_02_simulator_oracle():
    c = Check(2, 10.0)
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(50):
        circ = random_circuit(rng, int(rng.integers(1, 5)), int(rng.integers(1, 13)))
        tv = total_variation(basis_probabilities(run(circ, None, NOISELESS)), np.abs(statevector(circ)) ** 2)
        worst = max(worst, tv)
    c.expect(worst < 1e-9, f"50 circuits, max TV {worst:.1e}")
    c.finish()


def test_criterion_03_expectation_anchor():
    c = Check(3, 1.0)
    e = expectation_z(pure_density([0.8, 0.6]), 0)
    c.expect(abs(e - 0.28) <= 1e-12, f"<Z> = {e:.15f}")
    c.finish()


def test_criterion_04_encoding_round_trip():
    c = Check(4, 5.0)
    basis_ok = all(
        basis_probabilities(run(basis_encode(int_to_bits(x, 4)), None, NOISELESS))[x] > 1 - 1e-12 for x in range(16)
    )
    c.expect(basis_ok, "16 basis states")
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        x = normalize(np.abs(rng.normal(size=4)))
        psi = statevector(amplitude_prep_circuit(amplitude_angles(x)))
        worst = max(worst, float(np.max(np.abs(psi - x))))
    c.expect(worst <= 1e-6, f"100 random vectors, max amp err {worst:.1e}")
    x = normalize([0.1826, 0.3651, 0.5477, 0.7303])
    probs = basis_probabilities(run(amplitude_prep_circuit(amplitude_angles(x)), None, NOISELESS))
    err = float(np.max(np.abs(probs - x**2)))
    c.expect(err <= 1e-6, f"worked example prob err {err:.1e}")
    c.finish()


def test_criterion_05_gradient():
    c = Check(5, 5.0)
    toy = CompiledCircuit(Circuit(1, (Instruction("RY", (0,), (Param.of(0),)),), n_params=1))

    def costs(thetas):
        return (-1.0 - toy.expectations(thetas, 0)) ** 2

    worst = 0.0
    for th in np.linspace(0, 2 * np.pi, 50):
        g = central_difference(costs, [th], 0.01)[0]
        worst = max(worst, abs(g - 2 * (-1 - math.cos(th)) * math.sin(th)))
    c.expect(worst <= 1e-4, f"50 points, max |FD - analytic| {worst:.1e}")
    # successive-halving differences shrink like h^p; fit p
    exps = []
    for th in (0.4, 1.1, 2.0, 2.7, 4.0):
        hs = np.array([0.4, 0.2, 0.1, 0.05])
        d = np.array([central_difference(costs, [th], h)[0] for h in np.append(hs, hs[-1] / 2)])
        diffs = np.abs(np.diff(d))
        exps.append(np.polyfit(np.log(hs), np.log(diffs), 1)[0])
    c.expect(all(abs(p - 2) <= 0.3 for p in exps), "exponents " + ", ".join(f"{p:.2f}" for p in exps))
    c.finish()


def test_criterion_06_training_sanity():
    c = Check(6, 120.0)
    device, series = fixtures()
    args = (parity_dataset(), default_spec("parity", "ttn", 1), TrainConfig(strategy="app02", seed=7, iterations=100),
            series, device)
    m1 = fit(*args)
    m2 = fit(*args)
    tr = m1.cost_trace
    c.expect(tr[-1] <= 0.5 * tr[0], f"cost {tr[0]:.4f} -> {tr[-1]:.2e}")
    c.expect(len(tr) == 101, f"trace length {len(tr)}")
    c.expect(np.array_equal(m1.theta, m2.theta) and m1.cost_trace == m2.cost_trace, "bit-identical rerun")
    c.finish()


@pytest.mark.slow
def test_criterion_07_drift_robustness():
    c = Check(7, 1800.0)
    for task, layers in (("parity", 1), ("iris", 4)):
        gaps, wins = [], 0
        for seed in SEEDS:
            a02 = replayed(task, "app02", seed, layers).mean
            a03 = replayed(task, "app03", seed, layers).mean
            wins += a03 < a02
            gaps.append(100 * (a02 / a03 - 1))
        c.expect(wins >= 8, f"{task}-{layers}L app03 < app02 in {wins}/10 (mean gap {np.mean(gaps):+.2f}%)")
    c.finish()


@pytest.mark.slow
def test_criterion_08_app01_staleness():
    c = Check(8, 900.0)
    _, series = fixtures()
    wins = beats_app02 = 0
    rows = []
    for seed in SEEDS:
        day = series.days[int(make_rng(seed, "acceptance.app01_day").integers(len(series)))]
        rep = replayed("parity", f"app01:{day}", seed, 1)
        costs = dict(zip(rep.days, rep.costs))
        others = math.fsum(v for k, v in costs.items() if k != day) / (len(costs) - 1)
        wins += costs[day] <= others
        # diagnostic: same day, model trained without that day's noise
        beats_app02 += costs[day] < dict(zip(*astuple(replayed("parity", "app02", seed, 1))))[day]
        rows.append(f"{day}:{costs[day]:.4f}/{others:.4f}")
    c.expect(wins >= 8, f"cost(d) <= mean(other days) in {wins}/10")
    c.parts.append(f"diagnostic: app01 beats app02 on its own day in {beats_app02}/10")
    c.parts.append("pairs " + " ".join(rows))
    c.finish()


def astuple(rep):
    return rep.days, rep.costs


def test_criterion_09_iqr():
    c = Check(9, 1.0)
    c.expect(iqr_filter([1, 2, 3, 4, 100]) == [1, 2, 3, 4] and iqr_mean([1, 2, 3, 4, 100]) == 2.5,
             "{1,2,3,4,100} -> {1,2,3,4}, mean 2.5")
    rng = np.random.default_rng(9)
    idem = perm = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IqrWarning)
        for _ in range(1000):
            vals = list(rng.standard_cauchy(int(rng.integers(4, 40))))
            out = iqr_filter(vals)
            idem += iqr_filter(out) == out
            shuffled = list(rng.permutation(vals))
            perm += sorted(iqr_filter(shuffled)) == sorted(out) and iqr_mean(shuffled) == iqr_mean(vals)
    c.expect(idem == 1000, f"idempotent {idem}/1000")
    c.expect(perm == 1000, f"permutation-invariant {perm}/1000")
    c.finish()


def test_criterion_10_evaluation():
    c = Check(10, 1.0)
    counts = {"0000": 762, "0001": 262}
    cls, r = classify(counts, 0)
    c.expect(cls == 0, "class 0")
    c.expect(abs(r - 0.3438) <= 5e-4, f"r = {r:.4f}")
    cr = correct_ratio(counts, +1, 0)
    c.expect(abs(cr - 2.908) <= 5e-3, f"correct_ratio = {cr:.4f}")
    cp = cdf_at(ratio_cdf([1, 2, 3, 4]), 2)
    c.expect(cp == 0.5, f"CP(2) = {cp}")
    c.finish()

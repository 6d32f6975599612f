"""Compiled vs numpy kernels: raw superoperator application and a training-sized batch.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from drift_pqc import kernels
from drift_pqc.device import load_device
from drift_pqc.cli import data_path
from drift_pqc.noise import two_qubit_gate_error_kraus, depolarizing_kraus
from drift_pqc.qmath import kraus_superop
from drift_pqc.simulator import CompiledCircuit, RunConfig
from drift_pqc.train import Objective, default_spec, parity_dataset


def random_rho(rng, b, n):
    d = 1 << n
    a = rng.normal(size=(b, d, d)) + 1j * rng.normal(size=(b, d, d))
    rho = a @ np.conj(np.swapaxes(a, 1, 2))
    return rho / np.trace(rho, axis1=1, axis2=2)[:, None, None]


def time_call(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def use_backend(mod):
    kernels.apply_1q = mod.apply_1q
    kernels.apply_2q = mod.apply_2q


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    s1 = np.ascontiguousarray(kraus_superop(depolarizing_kraus(0.01))[None])
    s2 = np.ascontiguousarray(kraus_superop(two_qubit_gate_error_kraus(0.03))[None])

    print(f"{'case':<28}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for n, b in ((2, 64), (4, 24), (5, 8), (5, 64)):
        rho = random_rho(rng, b, n)
        for label, fn in (("1q", lambda m, r: m.apply_1q(r, s1, n - 1)), ("2q", lambda m, r: m.apply_2q(r, s2, 1, 0))):
            times = {name: time_call(lambda: fn(mod, rho.copy()), args.repeat) for name, mod in backends.items()}
            row = f"apply_{label} n={n} B={b}"
            print(f"{row:<28}" + "".join(f"{t * 1e6:>10.1f}us" for t in times.values()) + _speedup(times))

    # one gradient evaluation of the parity TTN-1L objective on a noisy device
    device = load_device(data_path("ibmqx4.json"))
    spec = default_spec("parity", "ttn", 1).with_mapping((0, 1, 2, 3))
    theta = rng.uniform(0, 2 * np.pi, spec.n_params)
    times = {}
    for name, mod in backends.items():
        use_backend(mod)
        obj = Objective(parity_dataset(), spec, device, RunConfig())
        obj.gradient(theta, [0])  # compile outside the timing
        times[name] = time_call(lambda: obj.gradient(theta, list(range(16))), args.repeat)
    print(f"{'gradient TTN-1L, 16 inputs':<28}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times.values()) + _speedup(times))
    use_backend(backends.get("cython", backends["python"]))


def _speedup(times):
    if "cython" in times:
        return f"{times['python'] / times['cython']:>9.1f}x"
    return ""


if __name__ == "__main__":
    main()

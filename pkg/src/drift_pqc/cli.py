"""``drift-pqc`` command line.

Outputs are files only; progress goes to stderr. Every output gets a run
manifest recording the full flag set, input digests, seed, package version and
RNG algorithm, so identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .ansatz import AnsatzError, AnsatzSpec, available_mappings, build, resolve_mapping
from .circuit import CircuitError, bind, load_circuit, remap, save_circuit
from .device import (
    CalibrationSeries,
    DeviceError,
    DeviceModel,
    load_device,
    load_series,
    save_series,
    series_stats,
    synth_series,
)
from .encode import ANGLE_VARIANTS
from .evalx import (
    DEFAULT_SHOTS,
    EvaluationError,
    evaluate,
    json_number,
    ratio_cdf,
    replay,
    summarize_observations,
)
from .noise import TQ_NOISE_MODES
from .qmath import basis_probabilities, expectation_z
from .rng import RNG_ALGORITHM, derive_seed
from .simulator import RunConfig, SimulationError, run, sample
from .train import TASKS, TrainConfig, TrainedModel, TrainingError, default_spec, fit, task_dataset

log = logging.getLogger("drift_pqc")

VALIDATION_ERRORS = (
    AnsatzError, CircuitError, DeviceError, EvaluationError, SimulationError, TrainingError, ValueError, KeyError,
)

SHIPPED_DEVICE = "ibmqx4.json"
SHIPPED_SERIES = "synthetic_43day.csv"


def data_path(name: str) -> Path:
    return Path(str(resources.files("drift_pqc").joinpath("data", name)))


class UsageError(Exception):
    pass


class InputError(ValueError):
    """A validation error tied to one input file."""


def _load(loader, path, *args):
    try:
        return loader(path, *args)
    except OSError:
        raise
    except VALIDATION_ERRORS as exc:
        raise InputError(f"{path}: {exc}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- manifests ---------------------------------------------------------------

def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(subcommand: str, args: argparse.Namespace, inputs: dict[str, str | Path | None],
                   outputs: Sequence[str | Path]) -> dict:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
              if k not in ("func",)}
    return {
        "subcommand": subcommand,
        "config": config,
        "inputs": {k: {"path": str(p), "sha256": file_digest(p)} for k, p in sorted(inputs.items()) if p},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "outputs": [str(Path(o).name) for o in outputs],
    }


def manifest_name(out: str | Path) -> str:
    return Path(out).name + ".manifest.json"


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_manifest(out: str | Path, manifest: dict) -> None:
    write_json(Path(out).parent / manifest_name(out), manifest)


# -- helpers -----------------------------------------------------------------

def _device(path: str | None) -> tuple[DeviceModel, Path]:
    p = Path(path) if path else data_path(SHIPPED_DEVICE)
    return _load(load_device, p), p


def _series(path: str | None, template: DeviceModel | None) -> tuple[CalibrationSeries, Path]:
    p = Path(path) if path else data_path(SHIPPED_SERIES)
    return _load(load_series, p, template), p


def _dataset(task: str, path: str | None):
    if path is None:
        return task_dataset(task)
    return _load(lambda p: task_dataset(task, p), path)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _strategy_device_day(series: CalibrationSeries, day: str | None) -> str:
    return day if day is not None else series.days[0]


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    circuit = _load(load_circuit, args.circuit)
    device, dev_path = _device(args.device)
    if args.theta is not None:
        circuit = bind(circuit, _floats(args.theta))
    cfg = RunConfig(noise=args.noise, idle_decoherence=args.idle_decoherence,
                    tq_noise_mode=args.tq_noise_mode, shots=args.shots, seed=args.seed)
    rho = run(circuit, device, cfg)
    n = circuit.n_qubits
    probs = basis_probabilities(rho)
    targets = args.target if args.target else [0]
    counts = sample(rho, args.shots, derive_seed(args.seed, "simulate.sample"))
    out = {
        "probabilities": {format(i, f"0{n}b"): float(p) for i, p in enumerate(probs)},
        "expectation": {str(t): float(expectation_z(rho, t)) for t in targets},
        "counts": counts,
        "config": cfg.to_json(),
        "rng": RNG_ALGORITHM,
        "manifest": manifest_name(args.out),
    }
    write_json(args.out, out)
    write_manifest(args.out, build_manifest("simulate", args, {"circuit": args.circuit, "device": dev_path},
                                            [args.out]))
    return 0


def cmd_ansatz(args) -> int:
    spec = AnsatzSpec(args.topology.upper().replace("IRIS", "IRIS_LAYER") if args.topology.lower() == "iris"
                      else args.topology.upper(), args.qubits, args.layers, args.target)
    circuit = build(spec)
    out = circuit.to_json()
    dev_path = None
    if args.device:
        device, dev_path = _device(args.device)
        spec = resolve_mapping(spec, device, args.mapping)
        out = remap(circuit, spec.mapping, device.n_qubits).to_json()
        out["mapping"] = list(spec.mapping)
        out["available_mappings"] = [list(m) for m in available_mappings(spec, device)]
    out["spec"] = spec.to_json()
    out["manifest"] = manifest_name(args.out)
    write_json(args.out, out)
    write_manifest(args.out, build_manifest("ansatz", args, {"device": dev_path}, [args.out]))
    return 0


def _train_config(args, strategy: str, seed: int, batch_size: int) -> TrainConfig:
    return TrainConfig(
        strategy=strategy, iterations=args.iterations, batch_size=batch_size, learning_rate=args.lr,
        fd_step=args.fd_step, seed=seed, iqr_k=args.iqr_k, tq_noise_mode=args.tq_noise_mode,
        idle_decoherence=args.idle_decoherence, angle_variant=args.angles,
    )


def cmd_train(args) -> int:
    device, dev_path = _device(args.device)
    series, series_path = _series(args.calib, device)
    dataset = _dataset(args.task, args.data)
    spec = default_spec(args.task, args.topology, args.layers)
    batch = args.batch_size or (5 if args.task == "iris" else 1)
    config = _train_config(args, args.strategy, args.seed, batch)
    log.info("training %s %s %dL with %s", args.task, spec.topology, spec.layers, args.strategy)
    model = fit(dataset, spec, config, series, device, task=args.task, mapping_index=args.mapping)
    model.save(args.out, {"manifest": manifest_name(args.out)})
    inputs = {"device": dev_path, "calib": series_path, "data": args.data}
    write_manifest(args.out, build_manifest("train", args, inputs, [args.out]))
    return 0


def cmd_replay(args) -> int:
    model = _load(TrainedModel.load, args.model)
    device, dev_path = _device(args.device)
    series, series_path = _series(args.calib, device)
    dataset = _dataset(model.task, args.data)
    report = replay(model, dataset, series)
    report.write_csv(args.out)
    inputs = {"model": args.model, "calib": series_path, "device": dev_path, "data": args.data}
    manifest = build_manifest("replay", args, inputs, [args.out])
    manifest["summary"] = report.summary()
    write_manifest(args.out, manifest)
    return 0


def _eval_payload(model, dataset, device, shots, seed, n_obs) -> dict:
    obs = evaluate(model, dataset, device, shots, seed, n_obs)
    return {
        "observations": [o.to_json() for o in obs],
        "cdf": [[json_number(r), cp] for r, cp in ratio_cdf(obs)],
        "summary": summarize_observations(obs),
        "shots": shots,
        "rng": RNG_ALGORITHM,
    }


def cmd_evaluate(args) -> int:
    model = _load(TrainedModel.load, args.model)
    if args.day is not None:
        template, dev_path = _device(args.device)
        series, series_path = _series(args.calib, template)
        device = series[args.day]
        inputs = {"model": args.model, "calib": series_path, "device": dev_path, "data": args.data}
    else:
        device, dev_path = _device(args.device)
        inputs = {"model": args.model, "device": dev_path, "data": args.data}
    dataset = _dataset(model.task, args.data)
    payload = _eval_payload(model, dataset, device, args.shots, args.seed, args.observations)
    payload["manifest"] = manifest_name(args.out)
    write_json(args.out, payload)
    write_manifest(args.out, build_manifest("evaluate", args, inputs, [args.out]))
    return 0


def cmd_calib_stats(args) -> int:
    template = _device(args.device)[0] if args.device else None
    series = _load(load_series, args.csv, template)
    rows = series_stats(series, args.iqr_k)
    print(f"# {len(series)} days, {series.n_qubits} qubits, {len(series.edges)} edges")
    print(f"{'metric':<12}{'index':>6}{'mean':>14}{'min':>14}{'max':>14}{'outliers':>10}")
    for r in rows:
        print(f"{r['metric']:<12}{r['index']:>6}{r['mean']:>14.6g}{r['min']:>14.6g}{r['max']:>14.6g}{r['outliers']:>10d}")
    return 0


def cmd_calib_synth(args) -> int:
    base, base_path = _device(args.base)
    series = synth_series(base, args.days, args.drift, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_series(series, args.out)
    write_manifest(args.out, build_manifest("calib synth", args, {"base": base_path}, [args.out]))
    return 0


def _model_name(topology: str, layers: int, strategy: str) -> str:
    short = {"IRIS_LAYER": "iris"}.get(topology, topology.lower())
    return f"{short}-{layers}l-{strategy.split(':')[0]}"


def cmd_repro(args) -> int:
    out = Path(args.out)
    device, dev_path = _device(args.device)
    series, series_path = _series(args.calib, device)
    dataset = _dataset(args.task, args.data)
    train_day = _strategy_device_day(series, args.app01_day)
    eval_day = args.eval_day if args.eval_day is not None else series.days[-1]
    series[train_day], series[eval_day]  # fail fast on unknown labels
    if args.task == "parity":
        topologies = [t.upper() for t in args.topologies.split(",")]
        strategies = [f"app01:{train_day}", "app02", "app03"]
        batch = args.batch_size or 1
    else:
        topologies = ["IRIS_LAYER"]
        strategies = ["app02", "app03"] + ([f"app01:{train_day}"] if args.with_app01 else [])
        batch = args.batch_size or 5
    layers = _ints(args.layers) if args.layers else ([1, 2] if args.task == "parity" else [4, 6])

    outputs: list[Path] = []
    summary = {"task": args.task, "train_day": train_day, "eval_day": eval_day, "models": {}, "by_strategy": {}}
    for topo in topologies:
        for n_layers in layers:
            spec = default_spec(args.task, topo, n_layers)
            for strategy in strategies:
                name = _model_name(spec.topology, n_layers, strategy)
                log.info("repro %s: training %s", args.task, name)
                model = fit(dataset, spec, _train_config(args, strategy, args.seed, batch), series, device,
                            task=args.task, mapping_index=args.mapping)
                model_path = out / "models" / f"{name}.json"
                model_path.parent.mkdir(parents=True, exist_ok=True)
                model.save(model_path, {"manifest": "../manifest.json"})
                rep = replay(model, dataset, series)
                replay_path = out / "replay" / f"{name}.csv"
                replay_path.parent.mkdir(parents=True, exist_ok=True)
                rep.write_csv(replay_path)
                ev = _eval_payload(model, dataset, series[eval_day], args.shots,
                                   derive_seed(args.seed, f"repro.eval.{name}"), args.observations)
                ev["day"] = eval_day
                ev["manifest"] = "../manifest.json"
                eval_path = out / "eval" / f"{name}.json"
                write_json(eval_path, ev)
                outputs += [model_path, replay_path, eval_path]
                entry = {
                    "strategy": strategy,
                    "topology": spec.topology,
                    "layers": n_layers,
                    "final_training_cost": model.cost_trace[-1],
                    "replay": rep.summary(),
                    "eval": ev["summary"],
                }
                if strategy.startswith("app01"):
                    same = _eval_payload(model, dataset, series[train_day], args.shots,
                                         derive_seed(args.seed, f"repro.eval.same.{name}"), args.observations)
                    same["day"] = train_day
                    same["manifest"] = "../manifest.json"
                    same_path = out / "eval" / f"{name}-trainday.json"
                    write_json(same_path, same)
                    outputs.append(same_path)
                    entry["eval_train_day"] = same["summary"]
                summary["models"][name] = entry
                key = strategy.split(":")[0]
                agg = summary["by_strategy"].setdefault(key, {"replay_means": [], "mean_r": []})
                agg["replay_means"].append(rep.mean)
                if ev["summary"]["mean_r_finite"] is not None:
                    agg["mean_r"].append(ev["summary"]["mean_r_finite"])
    for key, agg in summary["by_strategy"].items():
        agg["mean_replay_cost"] = float(np.mean(agg.pop("replay_means")))
        rs = agg.pop("mean_r")
        agg["mean_r"] = float(np.mean(rs)) if rs else None
    bs = summary["by_strategy"]
    if "app02" in bs and "app03" in bs:
        summary["app02_over_app03_replay_pct"] = 100.0 * (bs["app02"]["mean_replay_cost"] / bs["app03"]["mean_replay_cost"] - 1.0)
    summary["manifest"] = "manifest.json"
    write_json(out / "summary.json", summary)
    outputs.append(out / "summary.json")
    inputs = {"device": dev_path, "calib": series_path, "data": args.data}
    manifest = build_manifest(f"repro {args.task}", args, inputs, [])
    manifest["outputs"] = [str(p.relative_to(out)) for p in outputs]
    write_json(out / "manifest.json", manifest)
    return 0


# -- parser ------------------------------------------------------------------

def _add_noise_flags(p) -> None:
    p.add_argument("--tq-noise-mode", choices=TQ_NOISE_MODES, default="pair_depolarizing")
    p.add_argument("--idle-decoherence", action="store_true", help="also decohere qubits idle during a gate")


def _add_train_flags(p) -> None:
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=None, help="default: 1 for parity, 5 for iris")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--fd-step", type=float, default=0.01)
    p.add_argument("--iqr-k", type=float, default=1.5)
    p.add_argument("--mapping", type=int, default=0, help="index into the available direct mappings")
    p.add_argument("--angles", choices=ANGLE_VARIANTS, default="standard")
    p.add_argument("--data", default=None, help="iris CSV (default: shipped fixture)")
    _add_noise_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drift-pqc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a bound circuit on a device model")
    p.add_argument("--circuit", required=True)
    p.add_argument("--device", default=None)
    p.add_argument("--noise", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=int, action="append", default=None)
    p.add_argument("--theta", default=None, help="comma-separated values for unbound refs")
    p.add_argument("--out", required=True)
    _add_noise_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ansatz", help="emit a model circuit with trainable refs")
    p.add_argument("--topology", required=True, type=str.lower, choices=["ttn", "alt", "mera", "iris", "iris_layer"])
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--target", type=int, default=0)
    p.add_argument("--device", default=None)
    p.add_argument("--mapping", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ansatz)

    p = sub.add_parser("train", help="train a classifier with one strategy")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--topology", type=str.lower, choices=["ttn", "alt", "mera", "iris"], required=True)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--strategy", required=True, help="app01:<day>, app02 or app03")
    p.add_argument("--calib", default=None)
    p.add_argument("--device", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("replay", help="cost of a trained model on every calibration day")
    p.add_argument("--model", required=True)
    p.add_argument("--calib", default=None)
    p.add_argument("--device", default=None, help="supplies gate times for the CSV")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("evaluate", help="shot-sampled correct/incorrect ratios and their CDF")
    p.add_argument("--model", required=True)
    p.add_argument("--device", default=None)
    p.add_argument("--calib", default=None, help="with --day: evaluate on that day's snapshot")
    p.add_argument("--day", default=None)
    p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    p.add_argument("--observations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    calib = sub.add_parser("calib", help="calibration series tools")
    csub = calib.add_subparsers(dest="calib_command", required=True, parser_class=_Parser)
    p = csub.add_parser("stats", help="per-metric mean/min/max/outlier count")
    p.add_argument("csv")
    p.add_argument("--device", default=None)
    p.add_argument("--iqr-k", type=float, default=1.5)
    p.set_defaults(func=cmd_calib_stats)
    p = csub.add_parser("synth", help="synthetic drifting calibration history")
    p.add_argument("--base", default=None)
    p.add_argument("--days", type=int, default=43)
    p.add_argument("--drift", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calib_synth)

    p = sub.add_parser("repro", help="end-to-end app01/app02/app03 comparison")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--calib", default=None)
    p.add_argument("--device", default=None)
    p.add_argument("--layers", default=None, help="comma list (default: 1,2 parity; 4,6 iris)")
    p.add_argument("--topologies", default="ttn,alt", help="parity only")
    p.add_argument("--app01-day", default=None, help="training day for app01 (default: first day)")
    p.add_argument("--eval-day", default=None, help="execution day for shot evaluation (default: last day)")
    p.add_argument("--with-app01", action="store_true", help="iris: also train app01")
    p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    p.add_argument("--observations", type=int, default=100)
    _add_train_flags(p)
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"drift-pqc: I/O error: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"drift-pqc {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

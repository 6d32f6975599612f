"""Device noise snapshots, calibration histories and their averaging."""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import make_rng

log = logging.getLogger(__name__)

Edge = tuple[int, int]

QUBIT_METRICS = ("t1_us", "t2_us", "err_1q", "readout_err")
PROB_METRICS = ("err_1q", "readout_err", "err_2q")
CSV_COLUMNS = ("day", "kind", "index", "t1_us", "t2_us", "err_1q", "readout_err", "err_2q")

DEFAULT_GATE_TIME_1Q_NS = 120.0  # U3 = two 60 ns U2 pulses
DEFAULT_GATE_TIME_2Q_NS = 400.0


class DeviceError(ValueError):
    pass


class IqrWarning(UserWarning):
    pass


def edge_key(edge: Edge) -> str:
    return f"{edge[0]}-{edge[1]}"


def parse_edge(key: str) -> Edge:
    try:
        c, t = key.split("-")
        return int(c), int(t)
    except ValueError as exc:
        raise DeviceError(f"edge key must look like 'c-t', got {key!r}") from exc


@dataclass(frozen=True)
class DeviceModel:
    """One calibration snapshot. Times: T1/T2 in µs, gate durations in ns."""

    n_qubits: int
    edges: tuple[Edge, ...]
    t1_us: tuple[float, ...]
    t2_us: tuple[float, ...]
    err_1q: tuple[float, ...]
    err_2q: dict[Edge, float]
    gate_time_1q_ns: float = DEFAULT_GATE_TIME_1Q_NS
    gate_time_2q_ns: float = DEFAULT_GATE_TIME_2Q_NS
    native_1q_gates: tuple[str, ...] = ("U3",)
    readout_err: tuple[float, ...] | None = None
    gate_time_overrides_ns: dict[str, float] = field(default_factory=dict)
    edge_gate_time_ns: dict[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_qubits
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        set_("edges", tuple((int(c), int(t)) for c, t in self.edges))
        for name in ("t1_us", "t2_us", "err_1q"):
            set_(name, tuple(float(v) for v in getattr(self, name)))
        if self.readout_err is not None:
            set_("readout_err", tuple(float(v) for v in self.readout_err))
        set_("err_2q", {(int(c), int(t)): float(v) for (c, t), v in self.err_2q.items()})
        set_("native_1q_gates", tuple(self.native_1q_gates))

        if n < 1:
            raise DeviceError("device needs at least one qubit")
        for name in ("t1_us", "t2_us", "err_1q") + (("readout_err",) if self.readout_err else ()):
            if len(getattr(self, name)) != n:
                raise DeviceError(f"{name} has {len(getattr(self, name))} entries for {n} qubits")
        for c, t in self.edges:
            if not (0 <= c < n and 0 <= t < n) or c == t:
                raise DeviceError(f"edge {c}->{t} invalid for {n} qubits")
        if set(self.err_2q) != set(self.edges):
            raise DeviceError("err_2q must carry exactly one entry per edge")
        for name in ("t1_us", "t2_us"):
            for q, v in enumerate(getattr(self, name)):
                if not v > 0 or not math.isfinite(v):
                    raise DeviceError(f"{name}[{q}] = {v} must be positive")
        probs = list(enumerate(self.err_1q)) + list(self.err_2q.items())
        if self.readout_err:
            probs += list(enumerate(self.readout_err))
        for where, v in probs:
            if not 0.0 <= v <= 1.0:
                raise DeviceError(f"error probability at {where} = {v} outside [0, 1]")
        times = [self.gate_time_1q_ns, self.gate_time_2q_ns]
        times += list(self.gate_time_overrides_ns.values()) + list(self.edge_gate_time_ns.values())
        if any(not v > 0 for v in times):
            raise DeviceError("gate times must be positive")

    def gate_time_ns(self, kind: str, qubits: Sequence[int]) -> float:
        if kind in self.gate_time_overrides_ns:
            return self.gate_time_overrides_ns[kind]
        if len(qubits) == 2:
            return self.edge_gate_time_ns.get(tuple(qubits), self.gate_time_2q_ns)
        return self.gate_time_1q_ns

    def edge_error(self, control: int, target: int) -> float:
        if (control, target) in self.err_2q:
            return self.err_2q[(control, target)]
        if (target, control) in self.err_2q:  # CZ is symmetric
            return self.err_2q[(target, control)]
        raise DeviceError(f"no coupling edge between {control} and {target}")

    def suspect_t2(self) -> list[int]:
        return [q for q in range(self.n_qubits) if self.t2_us[q] > 2 * self.t1_us[q]]

    def subdevice(self, mapping: Sequence[int]) -> "DeviceModel":
        """Restrict to physical qubits ``mapping`` relabelled as 0..len-1."""
        mapping = [int(m) for m in mapping]
        if len(set(mapping)) != len(mapping) or any(not 0 <= m < self.n_qubits for m in mapping):
            raise DeviceError(f"mapping {mapping} is not injective into {self.n_qubits} qubits")
        inv = {p: i for i, p in enumerate(mapping)}
        edges = tuple((inv[c], inv[t]) for c, t in self.edges if c in inv and t in inv)
        pick = lambda vals: tuple(vals[m] for m in mapping)  # noqa: E731
        return replace(
            self,
            n_qubits=len(mapping),
            edges=edges,
            t1_us=pick(self.t1_us),
            t2_us=pick(self.t2_us),
            err_1q=pick(self.err_1q),
            err_2q={(inv[c], inv[t]): v for (c, t), v in self.err_2q.items() if c in inv and t in inv},
            readout_err=pick(self.readout_err) if self.readout_err else None,
            edge_gate_time_ns={
                (inv[c], inv[t]): v for (c, t), v in self.edge_gate_time_ns.items() if c in inv and t in inv
            },
        )

    def to_json(self) -> dict:
        qubits = []
        for q in range(self.n_qubits):
            entry = {"t1_us": self.t1_us[q], "t2_us": self.t2_us[q], "err_1q": self.err_1q[q]}
            if self.readout_err is not None:
                entry["readout_err"] = self.readout_err[q]
            qubits.append(entry)
        out = {
            "n_qubits": self.n_qubits,
            "edges": [list(e) for e in self.edges],
            "gate_time_1q_ns": self.gate_time_1q_ns,
            "gate_time_2q_ns": self.gate_time_2q_ns,
            "native_1q_gates": list(self.native_1q_gates),
            "qubits": qubits,
            "edge_err": {edge_key(e): self.err_2q[e] for e in self.edges},
        }
        if self.gate_time_overrides_ns:
            out["gate_time_overrides_ns"] = dict(self.gate_time_overrides_ns)
        if self.edge_gate_time_ns:
            out["edge_gate_time_ns"] = {edge_key(e): v for e, v in self.edge_gate_time_ns.items()}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DeviceModel":
        try:
            qubits = obj["qubits"]
            readout = [q["readout_err"] for q in qubits] if all("readout_err" in q for q in qubits) else None
            return cls(
                n_qubits=int(obj["n_qubits"]),
                edges=tuple(tuple(e) for e in obj["edges"]),
                t1_us=tuple(q["t1_us"] for q in qubits),
                t2_us=tuple(q["t2_us"] for q in qubits),
                err_1q=tuple(q["err_1q"] for q in qubits),
                err_2q={parse_edge(k): v for k, v in obj["edge_err"].items()},
                gate_time_1q_ns=float(obj.get("gate_time_1q_ns", DEFAULT_GATE_TIME_1Q_NS)),
                gate_time_2q_ns=float(obj.get("gate_time_2q_ns", DEFAULT_GATE_TIME_2Q_NS)),
                native_1q_gates=tuple(obj.get("native_1q_gates", ["U3"])),
                readout_err=tuple(readout) if readout is not None else None,
                gate_time_overrides_ns=dict(obj.get("gate_time_overrides_ns", {})),
                edge_gate_time_ns={parse_edge(k): v for k, v in obj.get("edge_gate_time_ns", {}).items()},
            )
        except (KeyError, TypeError) as exc:
            raise DeviceError(f"malformed device JSON: missing or invalid {exc}") from exc


def load_device(path: str | Path) -> DeviceModel:
    with open(path) as fh:
        device = DeviceModel.from_json(json.load(fh))
    for q in device.suspect_t2():
        log.warning("qubit %d: T2 > 2*T1 in %s; kept as reported", q, path)
    return device


def save_device(device: DeviceModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(device.to_json(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class CalibrationSeries:
    days: tuple[str, ...]
    snapshots: tuple[DeviceModel, ...]

    def __post_init__(self):
        object.__setattr__(self, "days", tuple(str(d) for d in self.days))
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if not self.snapshots:
            raise DeviceError("calibration series is empty")
        if len(self.days) != len(self.snapshots):
            raise DeviceError("one day label per snapshot required")
        if len(set(self.days)) != len(self.days):
            raise DeviceError("duplicate day labels")
        first = self.snapshots[0]
        for day, snap in zip(self.days, self.snapshots):
            if snap.n_qubits != first.n_qubits or set(snap.edges) != set(first.edges):
                raise DeviceError(f"day {day}: topology differs from day {self.days[0]}")

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, day: str) -> DeviceModel:
        try:
            return self.snapshots[self.days.index(str(day))]
        except ValueError:
            raise KeyError(f"unknown day {day!r}") from None

    @property
    def n_qubits(self) -> int:
        return self.snapshots[0].n_qubits

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self.snapshots[0].edges


def _cell(row: dict, col: str, lineno: int, required: bool = True) -> float | None:
    raw = (row.get(col) or "").strip()
    if raw == "":
        if required:
            raise DeviceError(f"line {lineno}, column {col!r}: missing value")
        return None
    try:
        value = float(raw)
    except ValueError:
        raise DeviceError(f"line {lineno}, column {col!r}: non-numeric value {raw!r}") from None
    if not math.isfinite(value):
        raise DeviceError(f"line {lineno}, column {col!r}: non-finite value {raw!r}")
    if col in ("t1_us", "t2_us") and value <= 0:
        raise DeviceError(f"line {lineno}, column {col!r}: {value} must be positive")
    if col in PROB_METRICS and not 0.0 <= value <= 1.0:
        raise DeviceError(f"line {lineno}, column {col!r}: {value} outside [0, 1]")
    return value


def load_series(path: str | Path, template: DeviceModel | None = None) -> CalibrationSeries:
    """Parse a calibration CSV.

    Gate times and native gates are not part of the CSV; they come from
    ``template`` when given, otherwise the package defaults apply.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("day", "kind", "index") if c not in header]
        if missing:
            raise DeviceError(f"{path}: missing column(s) {missing}")
        qubit_rows: dict[str, dict[int, dict]] = {}
        edge_rows: dict[str, dict[Edge, float]] = {}
        order: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            day = (row.get("day") or "").strip()
            kind = (row.get("kind") or "").strip()
            if not day:
                raise DeviceError(f"line {lineno}, column 'day': missing value")
            if day not in qubit_rows:
                qubit_rows[day], edge_rows[day] = {}, {}
                order.append(day)
            index = (row.get("index") or "").strip()
            if kind == "qubit":
                for col in ("t1_us", "t2_us", "err_1q"):
                    if col not in header:
                        raise DeviceError(f"{path}: missing column {col!r}")
                try:
                    q = int(index)
                except ValueError:
                    raise DeviceError(f"line {lineno}, column 'index': bad qubit id {index!r}") from None
                if q in qubit_rows[day]:
                    raise DeviceError(f"line {lineno}: duplicate qubit {q} on day {day}")
                qubit_rows[day][q] = {
                    col: _cell(row, col, lineno, required=(col != "readout_err")) for col in QUBIT_METRICS
                }
            elif kind == "edge":
                if "err_2q" not in header:
                    raise DeviceError(f"{path}: missing column 'err_2q'")
                try:
                    e = parse_edge(index)
                except DeviceError:
                    raise DeviceError(f"line {lineno}, column 'index': bad edge {index!r}") from None
                edge_rows[day][e] = _cell(row, "err_2q", lineno)
            else:
                raise DeviceError(f"line {lineno}, column 'kind': expected 'qubit' or 'edge', got {kind!r}")

    if not order:
        raise DeviceError(f"{path}: no calibration rows")
    days, snaps = [], []
    n_ref = None
    for day in order:
        rows = qubit_rows[day]
        n = len(rows)
        if sorted(rows) != list(range(n)):
            raise DeviceError(f"day {day}: qubit ids {sorted(rows)} are not 0..{n - 1}")
        if n_ref is None:
            n_ref = n
        elif n != n_ref:
            raise DeviceError(f"day {day}: {n} qubits, expected {n_ref}")
        readout = [rows[q]["readout_err"] for q in range(n)]
        edges = tuple(sorted(edge_rows[day]))
        kw = {}
        if template is not None:
            kw = dict(
                gate_time_1q_ns=template.gate_time_1q_ns,
                gate_time_2q_ns=template.gate_time_2q_ns,
                native_1q_gates=template.native_1q_gates,
                gate_time_overrides_ns=template.gate_time_overrides_ns,
                edge_gate_time_ns={e: v for e, v in template.edge_gate_time_ns.items() if e in edge_rows[day]},
            )
        try:
            snap = DeviceModel(
                n_qubits=n,
                edges=edges,
                t1_us=tuple(rows[q]["t1_us"] for q in range(n)),
                t2_us=tuple(rows[q]["t2_us"] for q in range(n)),
                err_1q=tuple(rows[q]["err_1q"] for q in range(n)),
                err_2q=edge_rows[day],
                readout_err=tuple(readout) if all(r is not None for r in readout) else None,
                **kw,
            )
        except DeviceError as exc:
            raise DeviceError(f"day {day}: {exc}") from None
        for q in snap.suspect_t2():
            log.warning("day %s, qubit %d: T2 > 2*T1; kept as reported", day, q)
        days.append(day)
        snaps.append(snap)
    return CalibrationSeries(tuple(days), tuple(snaps))


def _fmt(v: float) -> str:
    return repr(float(v))


def save_series(series: CalibrationSeries, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for day, snap in zip(series.days, series.snapshots):
            for q in range(snap.n_qubits):
                ro = _fmt(snap.readout_err[q]) if snap.readout_err else ""
                w.writerow([day, "qubit", q, _fmt(snap.t1_us[q]), _fmt(snap.t2_us[q]), _fmt(snap.err_1q[q]), ro, ""])
            for e in snap.edges:
                w.writerow([day, "edge", edge_key(e), "", "", "", "", _fmt(snap.err_2q[e])])


def _fence_pass(values: list[float], k: float) -> list[float]:
    q1, _, q3 = statistics.quantiles(values, n=4, method="inclusive")
    iqr = q3 - q1
    lo, hi = q1 - k * iqr, q3 + k * iqr
    return [v for v in values if lo <= v <= hi]


def iqr_filter(values: Iterable[float], k: float = 1.5, single_pass: bool = False) -> list[float]:
    """Drop values outside ``[Q1 - k*IQR, Q3 + k*IQR]``.

    Quartiles interpolate linearly between order statistics. One fence pass
    can expose new outliers, so by default passes repeat until nothing else is
    removed; the result is then a fixed point (filtering it again changes
    nothing). ``single_pass=True`` applies the fences once. Order and
    multiplicity of the kept values are preserved.
    """
    values = [float(v) for v in values]
    if len(values) < 4:
        warnings.warn(f"IQR filter needs at least 4 values, got {len(values)}; passing through", IqrWarning)
        return values
    kept = values
    while True:
        nxt = _fence_pass(kept, k)
        if not nxt:  # only reachable with non-finite input
            warnings.warn("IQR filter removed every value; returning input unchanged", IqrWarning)
            return values
        if len(nxt) == len(kept) or single_pass or len(nxt) < 4:
            return nxt
        kept = nxt


def iqr_mean(values: Iterable[float], k: float = 1.5, single_pass: bool = False) -> float:
    kept = iqr_filter(values, k, single_pass)
    return math.fsum(kept) / len(kept)


def average_device(series: CalibrationSeries, k: float = 1.5) -> DeviceModel:
    """Per-metric mean of IQR-filtered daily values; topology and timing from the first day."""
    snaps = series.snapshots
    first = snaps[0]
    if len(snaps) == 1:
        return first
    n = first.n_qubits

    def per_qubit(name: str) -> tuple[float, ...]:
        with warnings.catch_warnings():
            if len(snaps) < 4:
                warnings.simplefilter("ignore", IqrWarning)
            return tuple(iqr_mean([getattr(s, name)[q] for s in snaps], k) for q in range(n))

    readout = None
    if all(s.readout_err is not None for s in snaps):
        readout = per_qubit("readout_err")
    with warnings.catch_warnings():
        if len(snaps) < 4:
            warnings.simplefilter("ignore", IqrWarning)
        err_2q = {e: iqr_mean([s.err_2q[e] for s in snaps], k) for e in first.edges}
    return replace(
        first,
        t1_us=per_qubit("t1_us"),
        t2_us=per_qubit("t2_us"),
        err_1q=per_qubit("err_1q"),
        err_2q=err_2q,
        readout_err=readout,
    )


def synth_series(
    base: DeviceModel,
    days: int,
    drift: float,
    seed: int,
    excursion_prob: float = 0.05,
    excursion_sigma: float = 3.0,
) -> CalibrationSeries:
    """Synthetic calibration history around ``base``.

    Every metric of every qubit/edge is scaled per day by ``exp(drift * z)``
    with ``z ~ N(0, 1)``; with probability ``excursion_prob`` the draw is
    replaced by ``±excursion_sigma``. Probabilities are clipped to 1.
    """
    if drift < 0:
        raise ValueError("drift must be nonnegative")
    if days < 1:
        raise ValueError("need at least one day")
    rng = make_rng(seed, "calib.synth")
    n, edges = base.n_qubits, base.edges

    def factors(width: int) -> np.ndarray:
        z = rng.standard_normal((days, width))
        jump = rng.random((days, width)) < excursion_prob
        sign = np.where(rng.random((days, width)) < 0.5, -1.0, 1.0)
        z = np.where(jump, sign * excursion_sigma, z)
        return np.exp(drift * z)

    f_t1, f_t2, f_e1, f_ro = (factors(n) for _ in range(4))
    f_e2 = factors(len(edges))
    snaps = []
    for d in range(days):
        clip = lambda v: min(float(v), 1.0)  # noqa: E731
        snaps.append(
            replace(
                base,
                t1_us=tuple(base.t1_us[q] * f_t1[d, q] for q in range(n)),
                t2_us=tuple(base.t2_us[q] * f_t2[d, q] for q in range(n)),
                err_1q=tuple(clip(base.err_1q[q] * f_e1[d, q]) for q in range(n)),
                err_2q={e: clip(base.err_2q[e] * f_e2[d, i]) for i, e in enumerate(edges)},
                readout_err=(
                    tuple(clip(base.readout_err[q] * f_ro[d, q]) for q in range(n)) if base.readout_err else None
                ),
            )
        )
    width = max(2, len(str(days)))
    return CalibrationSeries(tuple(f"day{d + 1:0{width}d}" for d in range(days)), tuple(snaps))


def series_stats(series: CalibrationSeries, k: float = 1.5) -> list[dict]:
    """Per metric and qubit/edge: mean, min, max and IQR outlier count across days."""
    rows = []
    snaps = series.snapshots
    for name in QUBIT_METRICS:
        if name == "readout_err" and any(s.readout_err is None for s in snaps):
            continue
        for q in range(series.n_qubits):
            vals = [getattr(s, name)[q] for s in snaps]
            rows.append(_stat_row(name, str(q), vals, k))
    for e in series.edges:
        rows.append(_stat_row("err_2q", edge_key(e), [s.err_2q[e] for s in snaps], k))
    return rows


def _stat_row(metric: str, where: str, vals: list[float], k: float) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IqrWarning)
        kept = iqr_filter(vals, k)
    return {
        "metric": metric,
        "index": where,
        "mean": math.fsum(vals) / len(vals),
        "min": min(vals),
        "max": max(vals),
        "outliers": len(vals) - len(kept),
    }

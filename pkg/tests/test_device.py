import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drift_pqc.device import (
    CalibrationSeries,
    DeviceError,
    DeviceModel,
    IqrWarning,
    average_device,
    iqr_filter,
    iqr_mean,
    load_device,
    load_series,
    save_device,
    save_series,
    series_stats,
    synth_series,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def tiny_device(t1=50.0, e2=0.02):
    return DeviceModel(
        n_qubits=2, edges=((1, 0),), t1_us=(t1, 40.0), t2_us=(30.0, 20.0), err_1q=(0.001, 0.002),
        err_2q={(1, 0): e2}, readout_err=(0.05, 0.06),
    )


class TestDeviceModel:
    def test_json_round_trip(self, tmp_path, device):
        save_device(device, tmp_path / "d.json")
        assert load_device(tmp_path / "d.json") == device
        obj = json.loads((tmp_path / "d.json").read_text())
        assert "1-0" in obj["edge_err"]

    def test_shipped_fixture(self, device):
        assert device.n_qubits == 5 and len(device.edges) == 6
        assert device.gate_time_ns("U3", (0,)) == 120 and device.gate_time_ns("CNOT", (1, 0)) == 400

    @pytest.mark.parametrize(
        "change",
        [
            dict(t1_us=(0.0, 40.0)),
            dict(err_1q=(1.5, 0.0)),
            dict(err_2q={(0, 1): 0.1}),
            dict(edges=((1, 1),), err_2q={(1, 1): 0.1}),
            dict(t2_us=(30.0,)),
            dict(gate_time_2q_ns=0.0),
        ],
    )
    def test_invalid(self, change):
        base = dict(n_qubits=2, edges=((1, 0),), t1_us=(50.0, 40.0), t2_us=(30.0, 20.0),
                    err_1q=(0.001, 0.002), err_2q={(1, 0): 0.02})
        base.update(change)
        with pytest.raises(DeviceError):
            DeviceModel(**base)

    def test_edge_error_symmetric_lookup(self):
        d = tiny_device()
        assert d.edge_error(0, 1) == d.edge_error(1, 0) == 0.02
        with pytest.raises(DeviceError):
            tiny_device().subdevice([0, 0])

    def test_subdevice(self, device):
        sub = device.subdevice([2, 0])
        # physical 2->0 becomes logical 0->1
        assert sub.n_qubits == 2 and sub.edges == ((0, 1),)
        assert sub.t1_us == (device.t1_us[2], device.t1_us[0])
        assert sub.err_2q == {(0, 1): device.err_2q[(2, 0)]}

    def test_t2_warning_logged(self, tmp_path, caplog):
        d = tiny_device()
        obj = d.to_json()
        obj["qubits"][0]["t2_us"] = 150.0
        (tmp_path / "d.json").write_text(json.dumps(obj))
        load_device(tmp_path / "d.json")
        assert "T2 > 2*T1" in caplog.text

    def test_malformed_json(self, tmp_path):
        (tmp_path / "d.json").write_text('{"n_qubits": 2}')
        with pytest.raises(DeviceError):
            load_device(tmp_path / "d.json")


class TestSeriesIO:
    def test_shipped_series(self, series):
        assert len(series) == 43 and series.n_qubits == 5 and len(series.edges) == 6
        assert series.days[0] == "day01" and series.days[-1] == "day43"

    def test_round_trip(self, tmp_path, series, device):
        save_series(series, tmp_path / "s.csv")
        again = load_series(tmp_path / "s.csv", device)
        assert again == series

    def test_missing_cell_has_context(self, tmp_path, series):
        save_series(series, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        cells = lines[3].split(",")
        cells[3] = ""
        lines[3] = ",".join(cells)
        (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(DeviceError, match=r"line 4, column 't1_us'"):
            load_series(tmp_path / "bad.csv")

    def test_non_numeric(self, tmp_path):
        (tmp_path / "s.csv").write_text(
            "day,kind,index,t1_us,t2_us,err_1q,readout_err,err_2q\nd1,qubit,0,abc,1,0.1,,\n"
        )
        with pytest.raises(DeviceError, match="non-numeric"):
            load_series(tmp_path / "s.csv")

    def test_topology_change_rejected(self):
        a = tiny_device()
        b = DeviceModel(2, ((0, 1),), a.t1_us, a.t2_us, a.err_1q, {(0, 1): 0.01})
        with pytest.raises(DeviceError):
            CalibrationSeries(("d1", "d2"), (a, b))

    def test_unknown_day(self, series):
        with pytest.raises(KeyError):
            series["day99"]


class TestIqr:
    def test_pinned(self):
        assert iqr_filter([1, 2, 3, 4, 100]) == [1, 2, 3, 4]
        assert iqr_mean([1, 2, 3, 4, 100]) == 2.5
        assert iqr_filter([5, 5, 5, 5]) == [5, 5, 5, 5]
        assert iqr_mean([50, 52, 48, 51, 5]) == 50.25

    def test_short_list_warns(self):
        with pytest.warns(IqrWarning):
            assert iqr_filter([1.0, 100.0]) == [1.0, 100.0]

    def test_single_pass_differs_from_fixed_point(self):
        # the second pass drops 0, 15 and 19 once 53 is gone
        vals = [0, 4, 5, 6, 7, 8, 15, 19, 53]
        assert iqr_filter(vals, single_pass=True) == [0, 4, 5, 6, 7, 8, 15, 19]
        assert iqr_filter(vals) == [4, 5, 6, 7, 8]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=4, max_size=40))
    def test_idempotent_and_sublist(self, vals):
        out = iqr_filter(vals)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IqrWarning)  # fixed points may be shorter than 4
            assert iqr_filter(out) == out
        it = iter([float(v) for v in vals])
        assert all(any(o == v for v in it) for o in out)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=4, max_size=40), st.randoms(use_true_random=False))
    def test_permutation_invariant(self, vals, rnd):
        shuffled = list(vals)
        rnd.shuffle(shuffled)
        assert sorted(iqr_filter(vals)) == sorted(iqr_filter(shuffled))
        assert iqr_mean(vals) == iqr_mean(shuffled)

    def test_k_widens(self):
        vals = [1, 2, 3, 4, 9]
        assert 9 not in iqr_filter(vals, k=1.0)
        assert 9 in iqr_filter(vals, k=3.0)


class TestAverage:
    def test_filters_outlier_per_qubit(self):
        snaps = [tiny_device(t1=t) for t in (50, 52, 48, 51, 5)]
        avg = average_device(CalibrationSeries(tuple(f"d{i}" for i in range(5)), tuple(snaps)))
        assert avg.t1_us[0] == 50.25 and avg.t1_us[1] == 40.0
        assert avg.edges == snaps[0].edges and avg.gate_time_2q_ns == snaps[0].gate_time_2q_ns

    def test_single_snapshot(self):
        d = tiny_device()
        assert average_device(CalibrationSeries(("d",), (d,))) == d


class TestSynth:
    def test_deterministic(self, device):
        assert synth_series(device, 5, 0.2, 3) == synth_series(device, 5, 0.2, 3)
        assert synth_series(device, 5, 0.2, 3) != synth_series(device, 5, 0.2, 4)

    def test_zero_drift_is_constant(self, device):
        s = synth_series(device, 4, 0.0, 1)
        assert all(snap == device for snap in s.snapshots)

    def test_shipped_fixture_matches_generator(self, device, series):
        assert synth_series(device, 43, 0.2, 1234) == series

    def test_spread_in_band(self, device):
        # Monte-Carlo over 100 seeds: relative std in [0.1, 0.35] for >= 99% of metric series
        cvs = []
        for seed in range(100):
            s = synth_series(device, 43, 0.2, seed)
            for row in series_matrix(s):
                cvs.append(np.std(row, ddof=1) / np.mean(row))
        cvs = np.array(cvs)
        assert np.mean((cvs >= 0.1) & (cvs <= 0.35)) >= 0.99

    def test_bad_args(self, device):
        with pytest.raises(ValueError):
            synth_series(device, 0, 0.2, 1)
        with pytest.raises(ValueError):
            synth_series(device, 3, -0.2, 1)


def series_matrix(s):
    rows = []
    for name in ("t1_us", "t2_us", "err_1q", "readout_err"):
        for q in range(s.n_qubits):
            rows.append([getattr(x, name)[q] for x in s.snapshots])
    for e in s.edges:
        rows.append([x.err_2q[e] for x in s.snapshots])
    return np.array(rows)


class TestStats:
    def test_rows(self, series):
        rows = series_stats(series)
        assert len(rows) == 4 * 5 + 6
        r = rows[0]
        vals = [s.t1_us[0] for s in series.snapshots]
        assert r["metric"] == "t1_us" and math.isclose(r["mean"], np.mean(vals))
        assert r["min"] == min(vals) and r["max"] == max(vals)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert r["outliers"] == len(vals) - len(iqr_filter(vals))

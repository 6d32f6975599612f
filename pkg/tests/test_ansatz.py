import pytest

from drift_pqc.ansatz import (
    AnsatzError,
    AnsatzSpec,
    available_mappings,
    build,
    entangler,
    resolve_mapping,
)
from drift_pqc.circuit import remap, validate

GOLDEN = {
    "TTN": [(1, 0), (3, 2), (2, 0)],
    "ALT": [(1, 0), (3, 2), (2, 1)],
    "MERA": [(2, 1), (1, 0), (3, 2), (2, 0)],
    "IRIS_LAYER": [(1, 0)],
}


class TestSpec:
    def test_param_count(self):
        assert AnsatzSpec("ttn", 4, 1).n_params == 12
        assert AnsatzSpec("IRIS_LAYER", 2, 6).n_params == 36

    @pytest.mark.parametrize("args", [("BOGUS", 4, 1), ("TTN", 3, 1), ("TTN", 4, 0), ("TTN", 4, 1, 4)])
    def test_invalid(self, args):
        with pytest.raises(AnsatzError):
            AnsatzSpec(*args)

    def test_bad_mapping(self):
        with pytest.raises(AnsatzError):
            AnsatzSpec("TTN", 4, 1, mapping=(0, 0, 1, 2))

    def test_json_round_trip(self):
        s = AnsatzSpec("ALT", 4, 2, 1, (0, 1, 2, 3))
        assert AnsatzSpec.from_json(s.to_json()) == s


class TestBuild:
    @pytest.mark.parametrize("topo", sorted(GOLDEN))
    def test_golden_entanglers(self, topo):
        n = 2 if topo == "IRIS_LAYER" else 4
        assert entangler(AnsatzSpec(topo, n, 1)) == GOLDEN[topo]

    def test_layout(self):
        c = build(AnsatzSpec("TTN", 4, 2))
        assert c.n_params == 24 and len(c) == 2 * (4 + 3)
        first = c.instructions[0]
        assert first.kind == "U3" and [p.ref for p in first.params] == [0, 1, 2]
        second_layer = c.instructions[7]
        assert second_layer.qubits == (0,) and second_layer.params[0].ref == 12

    def test_target_swap(self):
        pairs = entangler(AnsatzSpec("TTN", 4, 1, target=2))
        # TTN funnels into the target: the last CNOT hits it
        assert pairs[-1][1] == 2


class TestMapping:
    @pytest.mark.parametrize("topo", ["TTN", "ALT", "MERA"])
    def test_identity_fits_device(self, device, topo):
        spec = AnsatzSpec(topo, 4, 1)
        assert validate(remap(build(spec), (0, 1, 2, 3), 5), device) == []
        assert (0, 1, 2, 3) in available_mappings(spec, device)

    def test_mappings_lexicographic_and_valid(self, device):
        spec = AnsatzSpec("IRIS_LAYER", 2, 1)
        maps = available_mappings(spec, device)
        assert maps == sorted(maps) and len(maps) == 6
        for m in maps:
            assert (m[1], m[0]) in device.edges

    def test_resolve(self, device):
        spec = resolve_mapping(AnsatzSpec("TTN", 4, 1), device)
        assert spec.mapping == (0, 1, 2, 3)
        with pytest.raises(AnsatzError):
            resolve_mapping(AnsatzSpec("TTN", 4, 1), device, index=999)
        with pytest.raises(AnsatzError):
            resolve_mapping(AnsatzSpec("TTN", 4, 1, mapping=(3, 2, 1, 0)), device)

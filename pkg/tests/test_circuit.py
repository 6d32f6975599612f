import json

import numpy as np
import pytest

from drift_pqc.circuit import (
    GATES,
    Circuit,
    CircuitError,
    Instruction,
    Param,
    bind,
    compose,
    gate_matrices,
    gate_matrix,
    load_circuit,
    lower,
    remap,
    save_circuit,
    u3_matrix,
    validate,
)
from drift_pqc.qmath import is_unitary


def small_circuit():
    return Circuit(
        2,
        (
            Instruction("U3", (0,), (Param.of(0), Param.lit(0.1), Param.of(1))),
            Instruction("CNOT", (1, 0)),
            Instruction("RY", (1,), (Param.lit(0.5),)),
        ),
        n_params=2,
    )


class TestInstruction:
    def test_rejects_bad_arity(self):
        with pytest.raises(CircuitError):
            Instruction("CNOT", (0,))
        with pytest.raises(CircuitError):
            Instruction("CNOT", (1, 1))
        with pytest.raises(CircuitError):
            Instruction("U3", (0,), (Param.lit(0),))
        with pytest.raises(CircuitError):
            Instruction("SWAP", (0, 1))

    def test_ref_out_of_range(self):
        with pytest.raises(CircuitError):
            Circuit(1, (Instruction("RY", (0,), (Param.of(3),)),), n_params=2)

    def test_qubit_out_of_range(self):
        with pytest.raises(CircuitError):
            Circuit(1, (Instruction("X", (1,)),))


class TestJson:
    def test_round_trip(self, tmp_path):
        c = small_circuit()
        save_circuit(c, tmp_path / "c.json")
        assert load_circuit(tmp_path / "c.json") == c
        obj = json.loads((tmp_path / "c.json").read_text())
        assert obj["ops"][0]["params"][0] == {"ref": 0}
        assert obj["ops"][0]["params"][1] == {"lit": 0.1}

    def test_bad_param(self):
        with pytest.raises(CircuitError):
            Param.from_json({"value": 1})


class TestMatrices:
    @pytest.mark.parametrize("kind", sorted(GATES))
    def test_unitary(self, kind):
        params = np.linspace(0.3, 1.1, GATES[kind][1])
        assert is_unitary(gate_matrix(kind, params))

    def test_u3_special_cases(self):
        np.testing.assert_allclose(u3_matrix(np.pi, 0, np.pi), [[0, 1], [1, 0]], atol=1e-15)
        np.testing.assert_allclose(gate_matrix("RY", [0.7]), u3_matrix(0.7, 0, 0))

    def test_batched_matches_single(self):
        p = np.array([[0.1, 0.2, 0.3], [1.0, -2.0, 0.5]])
        batch = gate_matrices("U3", p)
        for row, m in zip(p, batch):
            np.testing.assert_allclose(m, u3_matrix(*row))

    def test_wrong_param_count(self):
        with pytest.raises(CircuitError):
            gate_matrix("RY", [])


class TestTransforms:
    def test_bind_idempotent(self):
        c = small_circuit()
        b = bind(c, [1.0, 2.0])
        assert b.is_bound and not c.is_bound
        assert bind(b, [1.0, 2.0]) == b
        assert b.instructions[0].params[2].value == 2.0

    def test_bind_wrong_length(self):
        with pytest.raises(CircuitError):
            bind(small_circuit(), [1.0])

    def test_compose_offsets(self):
        a, b = small_circuit(), small_circuit()
        c = compose(a, b, param_offsets=[0, 2])
        assert c.n_params == 4 and len(c) == 6
        assert c.instructions[3].params[0].ref == 2

    def test_remap(self):
        c = remap(small_circuit(), [3, 1], 5)
        assert c.n_qubits == 5
        assert c.instructions[1].qubits == (1, 3)

    def test_lower_ry(self):
        c = lower(small_circuit(), ("U3",))
        ins = c.instructions[2]
        assert ins.kind == "U3" and ins.params[0].value == 0.5
        assert lower(small_circuit(), ("U3", "RY")) == small_circuit()


class TestValidate:
    def test_direction_and_missing_edge(self, device):
        ok = Circuit(5, (Instruction("CNOT", (1, 0)),))
        assert validate(ok, device) == []
        rev = validate(Circuit(5, (Instruction("CNOT", (0, 1)),)), device)
        assert len(rev) == 1 and "direction" in rev[0].reason
        missing = validate(Circuit(5, (Instruction("CNOT", (0, 3)),)), device)
        assert "no coupling edge" in missing[0].reason

    def test_cz_either_direction(self, device):
        assert validate(Circuit(5, (Instruction("CZ", (0, 1)),)), device) == []

    def test_too_many_qubits(self, device):
        assert validate(Circuit(6), device)[0].index == -1

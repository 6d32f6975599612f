import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drift_pqc.circuit import bind
from drift_pqc.encode import (
    amplitude_angles,
    amplitude_encode,
    amplitude_prep_circuit,
    amplitude_prep_template,
    basis_encode,
    int_to_bits,
    normalize,
)
from drift_pqc.qmath import basis_probabilities
from drift_pqc.simulator import NOISELESS, run
from oracles import statevector

PAPER_X = [0.1826, 0.3651, 0.5477, 0.7303]


class TestBasis:
    @pytest.mark.parametrize("x", range(16))
    def test_all_basis_states(self, x):
        bits = int_to_bits(x, 4)
        probs = basis_probabilities(run(basis_encode(bits), None, NOISELESS))
        assert probs[x] == pytest.approx(1.0, abs=1e-15)

    def test_little_endian(self):
        assert int_to_bits(1, 4) == (1, 0, 0, 0)
        assert int_to_bits(8, 4) == (0, 0, 0, 1)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            basis_encode([0, 2])


class TestAngles:
    def test_pinned_betas(self):
        # PAPER_X is (1, 2, 3, 4)/sqrt(30) rounded to 4 places
        a = amplitude_angles(normalize([1, 2, 3, 4]))
        assert a.beta0 == pytest.approx(2.2143, abs=1e-4)
        assert a.beta1 == pytest.approx(1.8546, abs=1e-4)
        assert a.beta2 == pytest.approx(2.3006, abs=1e-4)
        b = amplitude_angles(normalize(PAPER_X))
        assert b.beta0 == pytest.approx(2.2143, abs=5e-4)

    def test_paper_vector_probabilities(self):
        x = normalize(PAPER_X)
        probs = basis_probabilities(run(amplitude_encode(x), None, NOISELESS))
        np.testing.assert_allclose(probs, x**2, atol=1e-6)

    def test_requires_unit_norm(self):
        with pytest.raises(ValueError):
            amplitude_angles([1, 1, 1, 1])
        with pytest.raises(ValueError):
            normalize([0, 0, 0, 0])
        with pytest.raises(ValueError):
            amplitude_angles([1, 0, 0])

    def test_zero_half(self):
        # x0 = x1 = 0: the lower-pair angle is undefined and set to 0
        a = amplitude_angles([0.0, 0.0, 0.6, 0.8])
        assert a.beta0 == 0.0

    def test_paper_verbatim_differs(self):
        x = normalize(PAPER_X)
        probs = basis_probabilities(run(amplitude_encode(x, "paper-verbatim"), None, NOISELESS))
        assert np.max(np.abs(probs - x**2)) > 1e-3
        with pytest.raises(ValueError):
            amplitude_angles(x, "bogus")

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=4, max_size=4))
    def test_round_trip_amplitudes(self, raw):
        if np.linalg.norm(raw) < 1e-6:
            return
        x = normalize(raw)
        psi = statevector(amplitude_prep_circuit(amplitude_angles(x)))
        np.testing.assert_allclose(psi.real, x, atol=1e-6)
        np.testing.assert_allclose(psi.imag, 0, atol=1e-12)


class TestTemplate:
    def test_offset_refs(self):
        t = amplitude_prep_template(offset=4, n_params=9)
        refs = sorted({p.ref for ins in t.instructions for p in ins.params if p.is_ref})
        assert refs == [4, 5, 6, 7, 8] and t.n_params == 9

    def test_signed_amplitudes(self):
        # the template itself handles signs, e.g. negative entries, exactly
        x = np.array([0.5, -0.5, 0.5, -0.5])
        psi = statevector(bind(amplitude_prep_template(), amplitude_angles(x).as_tuple()))
        np.testing.assert_allclose(psi.real, x, atol=1e-12)
        assert math.isclose(np.sum(np.abs(psi) ** 2), 1.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qscramble.errors import ResourceLimitError
from qscramble.hamiltonians import build_hamiltonian, fast_scrambler_spec, local_spec, reference_models
from qscramble.hilbert import PAULI_MATRICES, Pauli, local_operator
from qscramble.observables import squared_commutator_infT
from qscramble.operators import (
    OperatorDensityProfile,
    average_squared_commutator,
    cumulative_weights,
    density_from_coefficients,
    haar_density,
    haar_operator_size,
    haar_profile,
    operator_density_profile,
    operator_size,
    pauli_decompose,
    pauli_string,
    reconstruct,
    string_index,
    string_kinds,
    string_size,
    string_sizes,
)
from qscramble.propagation import eigendecompose, heisenberg_operator, heisenberg_operators


def test_string_indexing():
    assert string_index("YII") == 2
    assert string_kinds(2, 3) == (Pauli.Y, Pauli.I, Pauli.I)
    assert string_size(0) == 0
    assert string_size(string_index("YII")) == 1
    assert string_size(string_index("IXI")) == 2
    assert string_size(string_index("ZIZ")) == 3
    np.testing.assert_array_equal(string_sizes(2), [0, 1, 1, 1] + [2] * 12)


def test_pauli_string_layout():
    # site 1 is the rightmost Kronecker factor
    np.testing.assert_allclose(pauli_string("XZ"), np.kron(PAULI_MATRICES[Pauli.Z], PAULI_MATRICES[Pauli.X]))
    np.testing.assert_allclose(pauli_string("YII"), local_operator("Y", 1, 3))


def test_decompose_examples():
    c = pauli_decompose(local_operator("Y", 1, 3))
    expected = np.zeros(64)
    expected[string_index("YII")] = 1
    np.testing.assert_allclose(c, expected, atol=1e-15)
    c = pauli_decompose(np.eye(8))
    assert c[0] == 1 and np.count_nonzero(np.abs(c) > 1e-15) == 1


@pytest.mark.parametrize("t", [0.0, 0.3, 1.9])
def test_decompose_single_qubit_rotation(t):
    sp = eigendecompose(PAULI_MATRICES[Pauli.Z])
    c = pauli_decompose(heisenberg_operator(sp, PAULI_MATRICES[Pauli.X], t))
    np.testing.assert_allclose(c, [0, math.cos(2 * t), -math.sin(2 * t), 0], atol=1e-14)


def test_decompose_orthonormal_basis():
    n = 2
    strings = np.stack([pauli_string(string_kinds(i, n)) for i in range(4**n)])
    gram = np.einsum("aij,bij->ab", strings.conj(), strings) / 2**n
    np.testing.assert_allclose(gram, np.eye(4**n), atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_decompose_reconstruct_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    op = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    c = pauli_decompose(op)
    np.testing.assert_allclose(reconstruct(c, n), op, atol=1e-10)
    # brute-force coefficients from the trace formula
    for idx in rng.integers(0, 4**n, size=5):
        s = pauli_string(string_kinds(int(idx), n))
        assert c[idx] == pytest.approx(np.trace(s.conj().T @ op) / 2**n, abs=1e-12)


def test_decompose_limit():
    with pytest.raises(ResourceLimitError):
        pauli_decompose(np.eye(2**8))


def test_unitary_seed_has_unit_weight(spectrum):
    wt = heisenberg_operator(spectrum(local_spec(5)), local_operator("Y", 1, 5), 2.0)
    assert np.sum(np.abs(pauli_decompose(wt)) ** 2) == pytest.approx(1, abs=1e-10)


def test_profile_at_time_zero():
    prof = operator_density_profile(local_operator("Y", 1, 4), time=0.0)
    np.testing.assert_allclose(prof.p, [1, 0, 0, 0], atol=1e-15)
    assert prof.p0 == 0 and prof.time == 0.0 and prof.n_qubits == 4


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_profile_matches_decomposition(t, spectrum):
    n = 5
    wt = heisenberg_operator(spectrum(local_spec(n)), local_operator("Y", 1, n), t)
    fast = operator_density_profile(wt, t)
    slow = density_from_coefficients(pauli_decompose(wt), n, t)
    np.testing.assert_allclose(fast.p, slow.p, atol=1e-10)
    assert fast.p0 == pytest.approx(slow.p0, abs=1e-10)


@pytest.mark.xfail(
    strict=True,
    reason="at N=8 the small-l weights stay above the Haar value (5x at l=1); only l >= 6 land within 10%",
)
def test_long_time_profile_is_haar(spectrum):
    n = 8
    times = np.linspace(20, 40, 41)
    w0 = local_operator("Y", 1, n)
    p = np.mean([operator_density_profile(w).p for w in heisenberg_operators(spectrum(local_spec(n)), w0, times)], axis=0)
    np.testing.assert_allclose(p, haar_profile(n), rtol=0.10)


def test_long_time_profile_large_sizes_near_haar(spectrum):
    n = 8
    times = np.linspace(20, 40, 41)
    w0 = local_operator("Y", 1, n)
    p = np.mean([operator_density_profile(w).p for w in heisenberg_operators(spectrum(local_spec(n)), w0, times)], axis=0)
    np.testing.assert_allclose(p[-2:], haar_profile(n)[-2:], rtol=0.10)
    # excess weight sits at small sizes and decays with l
    ratio = p / haar_profile(n)
    assert np.all(np.diff(ratio[:6]) < 0)


def test_operator_size_examples():
    assert operator_size(np.array([1.0, 0, 0])) == 1
    assert operator_size(np.array([0.5, 0.5])) == 1.5
    assert operator_size(np.array([3 / 15, 12 / 15])) == pytest.approx(1.8, rel=1e-14)
    assert operator_size(OperatorDensityProfile(np.array([0.0, 1.0]))) == 2


def test_haar_examples():
    assert haar_operator_size(1) == pytest.approx(1, rel=1e-14)
    assert haar_operator_size(2) == pytest.approx(1.8, rel=1e-14)
    assert haar_operator_size(16) == pytest.approx(15.6667, abs=1e-4)
    assert haar_density(1, 2) == pytest.approx(3 / 15)
    assert haar_density(2, 2) == pytest.approx(12 / 15)
    for n in range(1, 12):
        assert haar_profile(n).sum() == pytest.approx(1, rel=1e-13)
        assert operator_size(haar_profile(n)) == pytest.approx(haar_operator_size(n), rel=1e-13)
    with pytest.raises(ValueError):
        haar_density(0, 3)
    with pytest.raises(ValueError):
        haar_operator_size(0)


def test_average_commutator_examples(spectrum):
    n = 4
    y1 = local_operator("Y", 1, n)
    for r in range(2, n + 1):
        assert average_squared_commutator(y1, r) == pytest.approx(0, abs=1e-15)
    wt = heisenberg_operator(spectrum(fast_scrambler_spec(n)), y1, 1.0)
    four_term = np.mean([squared_commutator_infT(wt, 2, v) for v in "IXYZ"])
    assert average_squared_commutator(wt, 2) == pytest.approx(four_term, abs=1e-10)
    assert average_squared_commutator(wt, n) == pytest.approx(operator_density_profile(wt).p[-1], abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(idx=st.integers(0, 3), n=st.integers(4, 6), t=st.floats(0.0, 6.0), w=st.sampled_from("XYZ"))
def test_density_invariants(spectrum, idx, n, t, w):
    spec = reference_models(n)[idx]
    wt = heisenberg_operator(spectrum(spec), local_operator(w, 1, n), t)
    prof = operator_density_profile(wt, t)
    assert prof.total == pytest.approx(1, abs=1e-9)
    assert np.all(prof.p >= -1e-10)
    assert prof.p0 < 1e-10
    cbar = np.array([average_squared_commutator(wt, r) for r in range(1, n + 1)])
    assert abs(prof.p[-1] - cbar[-1]) < 1e-10
    assert np.all(prof.p[1:] <= cbar[1:] + 1e-10)
    assert 0 <= operator_size(prof) <= n


def test_cumulative_weights_monotone(spectrum):
    wt = heisenberg_operator(spectrum(local_spec(6)), local_operator("Z", 2, 6), 1.5)
    cum = cumulative_weights(wt)
    assert np.all(np.diff(cum) >= -1e-12)
    assert cum[-1] == pytest.approx(1, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    weights=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=10).filter(lambda w: sum(w) > 1e-3),
    data=st.data(),
)
def test_operator_size_stochastic_dominance(weights, data):
    p = np.array(weights) / sum(weights)
    src = data.draw(st.integers(0, len(p) - 2))
    dst = data.draw(st.integers(src + 1, len(p) - 1))
    frac = data.draw(st.floats(0.0, 1.0))
    q = p.copy()
    moved = frac * q[src]
    q[src] -= moved
    q[dst] += moved
    assert operator_size(q) >= operator_size(p) - 1e-12

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localizable import bases
from localizable.linalg import (
    H,
    I2,
    KET,
    X,
    Z,
    DensityMatrix,
    MeasurementBasis,
    Projector,
    ResourceError,
    StateVector,
    UnitaryOp,
    ValidationError,
    apply_on,
    born_probabilities,
    haar_random_state,
    kron,
    luders_update,
    max_qubits,
    partial_trace,
    same_state,
    set_max_qubits,
    trace_distance,
)

S = 1 / math.sqrt(2)


def dense(u, targets, n):
    """Full-register matrix of ``u`` on adjacent-or-not ``targets``, by explicit permutation."""
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    order = list(targets) + rest
    full = np.kron(u, np.eye(1 << (n - k)))
    perm = np.zeros((1 << n, 1 << n))
    for i in range(1 << n):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        j = 0
        for q in order:
            j = (j << 1) | bits[q]
        perm[j, i] = 1
    return perm.T @ full @ perm


def random_unitary(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# kron


def test_kron_zero_zero():
    out = kron(StateVector(KET["0"]), StateVector(KET["0"]))
    assert np.allclose(out.amps, [1, 0, 0, 0])


def test_kron_identity():
    out = kron(UnitaryOp(I2), UnitaryOp(I2))
    assert np.allclose(out.mat, np.eye(4))


def test_kron_one_plus():
    out = kron(StateVector(KET["1"]), StateVector(KET["+"]))
    assert np.allclose(out.amps, [0, 0, S, S])


def test_kron_overflow_is_resource_error():
    previous = set_max_qubits(3)
    try:
        with pytest.raises(ResourceError):
            kron(StateVector.from_label("00"), StateVector.from_label("00"))
    finally:
        set_max_qubits(previous)
    assert max_qubits() == previous


# apply_on


def test_x_on_first_qubit():
    out = apply_on(UnitaryOp(X), [0], StateVector.from_label("00"))
    assert np.allclose(out.amps, StateVector.from_label("10").amps)


def test_h_on_second_qubit():
    out = apply_on(UnitaryOp(H), [1], StateVector.from_label("10"))
    assert np.allclose(out.amps, StateVector.from_label("1+").amps)


@pytest.mark.parametrize("targets", [[2], [0, 0], [-1], []])
def test_apply_on_bad_targets(targets):
    with pytest.raises(ValueError):
        apply_on(UnitaryOp(X), targets, StateVector.from_label("00"))


def test_apply_on_matches_dense_operator():
    rng = np.random.default_rng(11)
    psi = haar_random_state(4, 2)
    for targets in ([3, 0], [1, 2], [2, 1], [0, 3]):
        u = random_unitary(4, rng)
        got = apply_on(UnitaryOp(u), targets, psi).amps
        assert np.allclose(got, dense(u, targets, 4) @ psi.amps, atol=1e-12)


# partial trace


def test_trace_out_second_of_00():
    rho = partial_trace(StateVector.from_label("00").dm(), [0])
    assert np.allclose(rho.mat, np.diag([1, 0]))


@pytest.mark.parametrize("keep", [[0], [1]])
def test_bell_marginals_maximally_mixed(keep):
    phi = bases.bell_basis().state(0)
    assert np.allclose(partial_trace(phi.dm(), keep).mat, np.eye(2) / 2)


def test_trace_out_b_of_one_plus():
    rho = partial_trace(StateVector.from_label("1+").dm(), [0])
    assert np.allclose(rho.mat, np.diag([0, 1]))


def test_empty_keep_is_scalar_trace():
    rho = partial_trace(haar_random_state(2, 0).dm(), [])
    assert rho.mat.shape == (1, 1)
    assert np.isclose(rho.mat[0, 0], 1)


def test_partial_trace_against_einsum():
    psi = haar_random_state(3, 4).amps.reshape(2, 2, 2)
    want = np.einsum("abc,dbc->ad", psi, psi.conj())
    assert np.allclose(partial_trace(haar_random_state(3, 4).dm(), [0]).mat, want)
    want = np.einsum("abc,abd->cd", psi, psi.conj())
    assert np.allclose(partial_trace(haar_random_state(3, 4).dm(), [2]).mat, want)


# Born and Luders


def test_born_twisted_examples():
    t = bases.twisted_basis()
    assert np.allclose(born_probabilities(StateVector.from_label("00"), t), [1, 0, 0, 0])
    assert np.allclose(born_probabilities(StateVector.from_label("10"), t), [0, 0, 0.5, 0.5])


def test_born_bell():
    phi = bases.bell_basis().state(0)
    assert np.allclose(born_probabilities(phi, bases.bell_basis()), [1, 0, 0, 0])


def test_non_orthonormal_basis_rejected():
    with pytest.raises(ValidationError):
        MeasurementBasis(("a", "b"), (KET["0"], KET["+"]))


def test_luders_examples():
    p0 = Projector(np.diag([1, 0]))
    rho, p = luders_update(StateVector(KET["0"]).dm(), p0)
    assert np.isclose(p, 1) and np.allclose(rho.mat, np.diag([1, 0]))
    rho, p = luders_update(StateVector(KET["+"]).dm(), p0)
    assert np.isclose(p, 0.5) and np.allclose(rho.mat, np.diag([1, 0]))
    one_plus = StateVector.from_label("1+")
    rho, p = luders_update(StateVector.from_label("10").dm(), Projector.onto(one_plus.amps))
    assert np.isclose(p, 0.5) and np.allclose(rho.mat, one_plus.dm().mat)


def test_luders_zero_probability_flags_branch():
    rho, p = luders_update(StateVector(KET["0"]).dm(), Projector(np.diag([0, 1])))
    assert rho is None and p == 0


# trace distance


def test_trace_distance_examples():
    zero, one = StateVector(KET["0"]).dm(), StateVector(KET["1"]).dm()
    assert trace_distance(zero, zero) == pytest.approx(0, abs=1e-15)
    assert trace_distance(zero, one) == pytest.approx(1)
    assert trace_distance(zero, DensityMatrix.maximally_mixed(1)) == pytest.approx(0.5)


def test_trace_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        trace_distance(DensityMatrix.maximally_mixed(1), DensityMatrix.maximally_mixed(2))


# Haar states


def test_haar_deterministic():
    assert np.array_equal(haar_random_state(1, 7).amps, haar_random_state(1, 7).amps)


def test_haar_first_moment():
    rng = np.random.default_rng(2024)
    vals = [abs(haar_random_state(1, rng).amps[0]) ** 2 for _ in range(10_000)]
    assert abs(np.mean(vals) - 0.5) < 0.02


def test_validation_rejects_bad_objects():
    with pytest.raises(ValidationError):
        StateVector(np.array([1, 1]))
    with pytest.raises(ValidationError):
        StateVector(np.array([np.nan, 0]))
    with pytest.raises(ValidationError):
        UnitaryOp(np.array([[1, 1], [0, 1]]))
    with pytest.raises(ValidationError):
        Projector(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.7, 0.7]))


def test_same_state_ignores_global_phase():
    psi = haar_random_state(2, 5)
    assert same_state(psi, StateVector(np.exp(0.7j) * psi.amps))
    assert not same_state(psi, haar_random_state(2, 6))


# invariants

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 4))
def test_unitaries_preserve_norm(seed, n):
    rng = np.random.default_rng(seed)
    psi = haar_random_state(n, rng)
    q = int(rng.integers(n))
    out = apply_on(UnitaryOp(random_unitary(2, rng)), [q], psi)
    assert abs(np.linalg.norm(out.amps) - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_trace_distance_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (haar_random_state(2, rng).dm() for _ in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12
    assert 0 <= trace_distance(a, b) <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["bell", "twisted", "ejm", "computational:2"]))
def test_luders_probabilities_are_born(seed, basis_id):
    basis = bases.basis_from_id(basis_id)
    psi = haar_random_state(2, seed)
    probs = [luders_update(psi.dm(), Projector(P))[1] for P in basis.projectors]
    assert np.allclose(probs, born_probabilities(psi, basis), atol=1e-12)
    assert abs(sum(probs) - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_local_unitary_leaves_other_marginal(seed):
    rng = np.random.default_rng(seed)
    psi = haar_random_state(3, rng)
    out = apply_on(UnitaryOp(random_unitary(4, rng)), [0, 2], psi)
    assert np.allclose(partial_trace(psi.dm(), [1]).mat, partial_trace(out.dm(), [1]).mat, atol=1e-12)

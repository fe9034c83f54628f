import numpy as np
import pytest

from localizable import bases, protocols
from localizable.engine import enumerate_branches, result_distribution
from localizable.linalg import StateVector, haar_random_state, reduce_pure
from localizable.verify import ebit_cost, receiver_distribution


def born(psi, basis):
    """Dense Born rule, independent of the engine."""
    return {lab: float(np.real(psi.amps.conj() @ P @ psi.amps)) for lab, P in zip(basis.labels, basis.projectors)}


def certain(p, psi, label):
    return result_distribution(p, psi)[label] == pytest.approx(1, abs=1e-12)


# sender / receiver demo


def test_sorkin_naive_receiver_distributions():
    s = protocols.sorkin_naive()
    assert np.allclose(receiver_distribution(s, "I"), [1, 0], atol=1e-12)
    assert np.allclose(receiver_distribution(s, "X"), [0.5, 0.5], atol=1e-12)
    gap = 0.5 * np.abs(receiver_distribution(s, "I") - receiver_distribution(s, "X")).sum()
    assert gap == pytest.approx(0.5, abs=1e-12)


# twisted


@pytest.mark.parametrize("label", ["00", "01", "1+", "1-"])
def test_twisted_eigenstates(label):
    assert certain(protocols.twisted_local(), StateVector.from_label(label), label)


def test_twisted_cost():
    assert ebit_cost(protocols.twisted_local()) == 1


def test_twisted_bob_reads_nothing():
    # Bob's outcome alone is uniform whatever the input
    p = protocols.twisted_local()
    for seed in range(3):
        bs = enumerate_branches(p, haar_random_state(2, seed))
        marg = np.zeros(4)
        for b in bs:
            marg[b.outcome("b")] += b.probability
        assert np.allclose(marg, 0.25)


# BSM


def test_bsm_parity_rule():
    p = protocols.bsm_local()
    assert p.postprocess[(2, 3)] == "Psi+"
    assert p.postprocess[(0, 0)] == "Phi+"
    assert p.postprocess[(1, 1)] == "Phi+"
    assert p.postprocess[(1, 3)] == "Psi-"


@pytest.mark.parametrize("k", range(4))
def test_bsm_eigenstates(k):
    b = bases.bell_basis()
    assert certain(protocols.bsm_local(), b.state(k), b.labels[k])


@pytest.mark.parametrize("pid,seed", [("bsm", 3), ("ejm", 5), ("twisted", 7), ("bsm-ideal", 2), ("ghz:3", 4)])
def test_born_against_dense_oracle(pid, seed):
    p = protocols.get(pid)
    psi = haar_random_state(p.n_inputs, seed)
    got = result_distribution(p, psi)
    want = born(psi, protocols.target_basis(p))
    assert sum(abs(got[k] - want[k]) for k in want) < 1e-9


def test_bsm_ideal_output_is_the_bell_state():
    p = protocols.bsm_ideal()
    bell = bases.bell_basis()
    for seed in range(3):
        for b in enumerate_branches(p, haar_random_state(2, seed)):
            out = reduce_pure(b.amps, p.output, p.n_qubits)
            want = bell.projectors[bell.index(b.label)]
            assert np.allclose(out, want, atol=1e-10)


def test_bsm_ideal_repeat_with_fresh_bsm():
    p, fresh = protocols.bsm_ideal(), protocols.bsm_local()
    for b in enumerate_branches(p, haar_random_state(2, 6)):
        out = reduce_pure(b.amps, p.output, p.n_qubits)
        w, v = np.linalg.eigh(out)
        again = result_distribution(fresh, StateVector.normalized(v[:, -1]))
        assert again[b.label] == pytest.approx(1, abs=1e-10)


def test_costs():
    assert ebit_cost(protocols.bsm_local()) == 1
    assert ebit_cost(protocols.bsm_ideal()) == 2
    assert ebit_cost(protocols.ejm_local()) == 3


# EJM


@pytest.mark.parametrize("k", range(4))
def test_ejm_eigenstates(k):
    assert certain(protocols.ejm_local(), bases.ejm_basis().state(k), str(k))


def test_ejm_table_covers_all_outcomes():
    assert len(protocols.EJM_TABLE) == 256
    assert set(protocols.EJM_TABLE.values()) == set(bases.EJM_LABELS)
    # each label is reached by the same number of outcome tuples
    counts = [list(protocols.EJM_TABLE.values()).count(k) for k in bases.EJM_LABELS]
    assert counts == [64] * 4


# GHZ


def test_ghz_two_reduces_to_bsm():
    relabel = {"+00": "Phi+", "-00": "Phi-", "+01": "Psi+", "-01": "Psi-"}
    g, b = protocols.ghz_local(2), protocols.bsm_local()
    for seed in range(4):
        psi = haar_random_state(2, seed)
        dg, db = result_distribution(g, psi), result_distribution(b, psi)
        for k, v in dg.items():
            assert v == pytest.approx(db[relabel[k]], abs=1e-12)


def test_ghz_three_on_ghz_state():
    psi = StateVector(bases.ghz_state(3))
    assert certain(protocols.ghz_local(3), psi, "+000")


@pytest.mark.parametrize("label", bases.ghz_labels(3))
def test_ghz_three_eigenstates(label):
    b = bases.ghz_basis(3)
    assert certain(protocols.ghz_local(3), b.state(label), label)
    assert certain(protocols.ghz_local(3, ideal=True), b.state(label), label)


def test_ghz_costs():
    assert ebit_cost(protocols.ghz_local(3)) == 1
    assert ebit_cost(protocols.ghz_local(3, ideal=True)) == 2


# registry


def test_registry():
    for pid in ("twisted", "bsm", "bsm-ideal", "ejm", "ghz:4", "ghz-ideal:2", "naive-twisted"):
        assert protocols.is_valid(protocols.get(pid))
    assert isinstance(protocols.get("sorkin-naive"), protocols.SorkinScenario)
    for bad in ("nope", "ghz:", "ghz:x", "bsm:2"):
        with pytest.raises(KeyError):
            protocols.get(bad)


def test_scenario_rejects_bad_kicks():
    s = protocols.sorkin_naive()
    with pytest.raises(ValueError):
        protocols.SorkinScenario(s.name, s.middle, {"X": protocols.KICKS["X"]}, s.sender, s.receiver_qubits,
                                 s.receiver_basis)

import json

import numpy as np
import pytest

from localizable import bases, protocols
from localizable.engine import Resource, validate
from localizable.linalg import StateVector, ValidationError
from localizable.verify import (
    FAIL,
    PASS,
    VerificationReport,
    check_born_equivalence,
    check_ebits,
    check_erasure,
    check_ideal,
    check_no_signaling,
    check_protocol_no_signaling,
    check_valid,
    ebit_cost,
    spanning_inputs,
)


def test_spanning_inputs_sizes():
    two = spanning_inputs(bases.bell_basis(), 2)
    assert len(two) == 4 + 36 + 20
    three = spanning_inputs(None, 3, haar_seeds=range(2))
    assert len(three) == 64 + 2
    ids = [i for i, _ in two]
    assert len(set(ids)) == len(ids)


def test_spanning_products_are_tomographically_complete():
    # the outer products of the product inputs span all 16x16 operators
    ops = [psi.dm().mat.ravel() for i, psi in spanning_inputs(None, 2, ()) if i.startswith("prod:")]
    assert np.linalg.matrix_rank(np.array(ops)) == 16


# Born


@pytest.mark.parametrize("pid", ["twisted", "ejm", "bsm", "bsm-ideal", "ghz:3", "ghz-ideal:3"])
def test_born_passes(pid):
    rep = check_born_equivalence(protocols.get(pid))
    assert rep.verdict == PASS and rep.value < 1e-9
    assert rep.seed_list == list(range(20))


def test_born_wrong_target_fails_with_witness():
    t = bases.twisted_basis()
    eig = [(f"eig:{lab}", t.state(k)) for k, lab in enumerate(t.labels)]
    rep = check_born_equivalence(protocols.bsm_local(), t, eig)
    assert rep.verdict == FAIL
    assert rep.witnesses and rep.witnesses[0].gap > 0.1
    assert "position" in rep.note


def test_born_outcome_count_mismatch():
    with pytest.raises(ValueError):
        check_born_equivalence(protocols.ghz_local(3), bases.bell_basis())


# no-signaling


def test_sorkin_naive_signals():
    rep = check_no_signaling(protocols.sorkin_naive())
    assert rep.verdict == FAIL
    assert rep.value == pytest.approx(0.5, abs=1e-12)
    assert rep.witnesses[0].kick == "I|X"
    d = rep.data["receiver_distributions"]
    assert np.allclose(d["I"], [1, 0]) and np.allclose(d["X"], [0.5, 0.5])


def test_same_scenario_with_local_middle_passes():
    s = protocols.sorkin_naive()
    local = protocols.SorkinScenario("sorkin-twisted", protocols.twisted_local(), s.kicks, s.sender,
                                     s.receiver_qubits, s.receiver_basis, "B", s.psi0, "A")
    rep = check_no_signaling(local)
    assert rep.verdict == PASS and rep.value < 1e-12


@pytest.mark.parametrize("pid", ["bsm", "twisted", "bsm-ideal", "ejm", "ghz:3", "ghz-ideal:3"])
def test_valid_protocols_do_not_signal(pid):
    p = protocols.get(pid)
    assert validate(p).ok
    rep = check_protocol_no_signaling(p)
    assert rep.verdict == PASS, rep.witnesses
    assert rep.value < 1e-9


# idealness


@pytest.mark.parametrize("pid", ["bsm-ideal", "ghz-ideal:3", "naive-twisted"])
def test_ideal_passes(pid):
    rep = check_ideal(protocols.get(pid))
    assert rep.verdict == PASS
    assert rep.value == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("pid", ["twisted", "bsm", "ghz:3"])
def test_ideal_fails_with_witness_branch(pid):
    rep = check_ideal(protocols.get(pid))
    assert rep.verdict == FAIL
    assert rep.value < 0.9
    assert "branch" in rep.witnesses[0].detail


def test_no_output_register():
    p = protocols.bsm_local().replace(output=None)
    rep = check_ideal(p)
    assert rep.verdict == FAIL and rep.note == "no output state"


# erasure


def test_erasure_bsm_ideal():
    rep = check_erasure(protocols.bsm_ideal())
    assert rep.verdict == PASS
    assert rep.data["max_distance_to_maximally_mixed"] < 1e-9


def test_erasure_twisted_bob_only():
    p = protocols.twisted_local()
    rep = check_erasure(p, parties=["B"])
    assert rep.verdict == PASS
    assert rep.data["max_distance_to_maximally_mixed"] < 1e-9
    assert check_erasure(p).verdict == FAIL


def test_erasure_naive_fails():
    p = protocols.naive_ideal(bases.twisted_basis())
    rep = check_erasure(p, sites={"A": (0,), "B": (1,)})
    assert rep.verdict == FAIL
    assert any(w.detail == "site A" for w in rep.witnesses)


@pytest.mark.parametrize("pid", ["bsm-ideal", "ghz-ideal:3", "bsm", "twisted"])
def test_ideal_local_implies_erasure(pid):
    p = protocols.get(pid)
    if check_ideal(p).passed:
        sites = {q: (q,) for q in p.output}
        assert check_erasure(p, sites=sites).passed


def test_ideal_without_locality_keeps_information():
    # the implication needs a local implementation: the joint observer is ideal yet leaks
    p = protocols.naive_ideal(bases.twisted_basis())
    assert check_ideal(p).passed
    assert not check_erasure(p, sites={"A": (0,), "B": (1,)}).passed


# ebits


def test_ebit_costs():
    assert [ebit_cost(protocols.get(k)) for k in ("twisted", "bsm", "bsm-ideal", "ejm")] == [1, 1, 2, 3]
    assert ebit_cost(protocols.naive_ideal()) == 0


def test_non_resource_rejected():
    p = protocols.bsm_local()
    fake = Resource(StateVector.from_label("00"), (2, 3), 1, "product")
    with pytest.raises(ValidationError):
        ebit_cost(p.replace(resources=(fake,)))
    assert check_ebits(p.replace(resources=(fake,))).verdict == FAIL


def test_check_ebits_expected():
    assert check_ebits(protocols.ejm_local(), 3).passed
    assert not check_ebits(protocols.ejm_local(), 2).passed


def test_check_valid():
    assert check_valid(protocols.twisted_local()).passed
    assert not check_valid(protocols.twisted_local().replace(postprocess={})).passed


# reports


def test_reports_are_deterministic():
    a = check_protocol_no_signaling(protocols.twisted_local()).to_dict(runtime=False)
    b = check_protocol_no_signaling(protocols.twisted_local()).to_dict(runtime=False)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_report_schema():
    d = check_ideal(protocols.twisted_local()).to_dict()
    for key in ("check", "verdict", "tolerance", "witnesses", "seed_list", "runtime_ms"):
        assert key in d
    assert set(d["witnesses"][0]) >= {"input_id", "kick", "gap"}


def test_fail_needs_witness():
    with pytest.raises(ValueError):
        VerificationReport("x", "y", FAIL, 1e-9)

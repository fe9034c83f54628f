"""Property checkers: Born equivalence, no-signaling, idealness, erasure, ebit cost.

Each check returns a :class:`VerificationReport` whose JSON form is
``{check, verdict, tolerance, witnesses: [{input_id, kick, gap}], seed_list,
runtime_ms}`` plus a few descriptive fields.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import MEASURE, Protocol, enumerate_branches, mixed_distribution, resource_entropies, validate
from .linalg import (
    DensityMatrix,
    MeasurementBasis,
    StateVector,
    ValidationError,
    apply_on,
    born_probabilities,
    haar_random_state,
    reduce_pure,
    trace_distance,
)
from .protocols import SorkinScenario, scenarios_for, target_basis

TOL = 1e-9
HAAR_SEEDS = tuple(range(20))
PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Witness:
    input_id: str
    kick: str | None
    gap: float
    detail: str = ""


@dataclass
class VerificationReport:
    check: str
    subject: str
    verdict: str
    tolerance: float
    value: float | None = None
    witnesses: list[Witness] = field(default_factory=list)
    seed_list: list[int] = field(default_factory=list)
    runtime_ms: float = 0.0
    note: str = ""
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict == FAIL and not self.witnesses:
            raise ValueError("a failing report needs at least one witness")

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self, runtime: bool = True) -> dict:
        d = asdict(self)
        if not runtime:
            d.pop("runtime_ms")
        return d


def spanning_inputs(basis: MeasurementBasis | None, n_qubits: int, haar_seeds: Sequence[int] = HAAR_SEEDS,
                products: bool = True) -> list[tuple[str, StateVector]]:
    """Eigenstates of ``basis``, product stabilizer states and seeded Haar states.

    Products use the six single-qubit stabilizer states for up to two qubits
    and the tomographically complete ``{0, 1, +, +i}`` per qubit beyond that;
    either set spans the operator space, so channel identities on it hold
    everywhere by linearity.
    """
    out = []
    if basis is not None:
        out += [(f"eig:{lab}", basis.state(k)) for k, lab in enumerate(basis.labels)]
    if products:
        alphabet = "01+-ij" if n_qubits <= 2 else "01+i"
        out += [(f"prod:{''.join(k)}", StateVector.from_label("".join(k)))
                for k in itertools.product(alphabet, repeat=n_qubits)]
    out += [(f"haar:{s}", haar_random_state(n_qubits, s)) for s in haar_seeds]
    return out


def _seeds_of(inputs) -> list[int]:
    return [int(i.split(":")[1]) for i, _ in inputs if i.startswith("haar:")]


def _vector(dist: Mapping[str, float], labels: Sequence[str]) -> np.ndarray:
    return np.array([dist.get(lab, 0.0) for lab in labels])


def _top(witnesses: list[Witness], k: int = 10) -> list[Witness]:
    return sorted(witnesses, key=lambda w: -w.gap)[:k]


def check_born_equivalence(p: Protocol, target: MeasurementBasis | None = None,
                           test_states: Iterable[tuple[str, StateVector]] | None = None,
                           tol: float = TOL) -> VerificationReport:
    """Max L1 gap between the protocol's result distribution and the Born rule.

    Labels are matched by name when the label sets agree and by position when
    only their number agrees; differing numbers of outcomes raise ``ValueError``.
    """
    t0 = time.perf_counter()
    target = target or target_basis(p)
    if len(target.labels) != len(p.labels) or target.dim != 1 << p.n_inputs:
        raise ValueError(f"protocol {p.name} and basis {target.name} have different outcome spaces")
    by_name = set(target.labels) == set(p.labels)
    order = target.labels if by_name else p.labels
    inputs = list(test_states) if test_states is not None else spanning_inputs(target, p.n_inputs, products=False)
    witnesses = []
    worst = 0.0
    for input_id, psi in inputs:
        got = _vector(enumerate_branches(p, psi).distribution(), order)
        gap = float(np.abs(got - born_probabilities(psi, target)).sum())
        worst = max(worst, gap)
        witnesses.append(Witness(input_id, None, gap))
    verdict = PASS if worst < tol else FAIL
    return VerificationReport(
        "born", p.name, verdict, tol, worst,
        _top([w for w in witnesses if w.gap >= tol]) if verdict == FAIL else _top(witnesses, 1),
        _seeds_of(inputs), (time.perf_counter() - t0) * 1e3,
        note="" if by_name else "labels matched by position",
        data={"target": target.name},
    )


def _kicked(s: SorkinScenario, kick: str, psi: StateVector) -> StateVector:
    return apply_on(s.kicks[kick], s.sender, psi)


def receiver_view(s: SorkinScenario, kick: str, psi: StateVector | None = None):
    """Receiver outcome distribution and, if a receiver party is set, its
    classical-quantum state (outcome history -> unnormalized local state)."""
    psi = psi if psi is not None else s.psi0
    bs = enumerate_branches(s.middle, _kicked(s, kick, psi))
    rho = bs.reduced(s.receiver_qubits)
    probs = np.array([np.trace(P @ rho).real for P in s.receiver_basis.projectors])
    cq = None
    if s.receiver_party is not None:
        party = s.middle.party(s.receiver_party)
        own = [st.name for st in s.middle.steps if st.kind == MEASURE and st.party == party.id]
        cq = bs.conditional_states(own, party.qubits)
    return probs, cq


def receiver_distribution(s: SorkinScenario, kick: str, psi: StateVector | None = None) -> np.ndarray:
    return receiver_view(s, kick, psi)[0]


def _cq_distance(a: dict, b: dict) -> float:
    total = 0.0
    for key in set(a) | set(b):
        ra = a.get(key)
        rb = b.get(key)
        if ra is None:
            ra = np.zeros_like(rb)
        if rb is None:
            rb = np.zeros_like(ra)
        total += trace_distance(ra, rb)
    return total


def check_no_signaling(s: SorkinScenario, inputs: Sequence[tuple[str, StateVector]] | None = None,
                       tol: float = TOL) -> VerificationReport:
    """Max pairwise distance, across kicks, of what the receiver can observe.

    Compares the receiver's outcome distribution (total variation) and, when
    the receiver is a protocol party, its full classical-quantum state (trace
    distance).  Passes iff the largest gap is below ``tol``.
    """
    t0 = time.perf_counter()
    if inputs is None:
        if s.psi0 is not None:
            inputs = [("psi0", s.psi0)]
        else:
            tb = target_basis(s.middle) if s.middle.target else None
            inputs = spanning_inputs(tb, s.middle.n_inputs)
    kicks = list(s.kicks)
    witnesses = []
    worst = 0.0
    data = {}
    for input_id, psi in inputs:
        views = {k: receiver_view(s, k, psi) for k in kicks}
        if input_id == "psi0":
            data["receiver_distributions"] = {k: v[0].tolist() for k, v in views.items()}
        for k1, k2 in itertools.combinations(kicks, 2):
            (p1, cq1), (p2, cq2) = views[k1], views[k2]
            gap = 0.5 * float(np.abs(p1 - p2).sum())
            if cq1 is not None:
                gap = max(gap, _cq_distance(cq1, cq2))
            worst = max(worst, gap)
            witnesses.append(Witness(input_id, f"{k1}|{k2}", gap))
    verdict = PASS if worst < tol else FAIL
    return VerificationReport(
        "nosig", s.name, verdict, tol, worst,
        _top([w for w in witnesses if w.gap >= tol]) if verdict == FAIL else _top(witnesses, 1),
        _seeds_of(inputs), (time.perf_counter() - t0) * 1e3, data=data,
    )


def check_protocol_no_signaling(p: Protocol, inputs=None, kicks=None, tol: float = TOL) -> VerificationReport:
    """No-signaling from the first input slot to every other party of ``p``."""
    t0 = time.perf_counter()
    reports = [check_no_signaling(s, inputs, tol) for s in scenarios_for(p, kicks)]
    worst = max(r.value for r in reports)
    witnesses = [w for r in reports for w in r.witnesses]
    verdict = PASS if all(r.passed for r in reports) else FAIL
    return VerificationReport(
        "nosig", p.name, verdict, tol, worst, _top(witnesses),
        reports[0].seed_list, (time.perf_counter() - t0) * 1e3,
        data={"scenarios": [r.subject for r in reports]},
    )


def check_ideal(p: Protocol, inputs: Sequence[tuple[str, StateVector]] | None = None,
                tol: float = TOL) -> VerificationReport:
    """Repeatability: re-run ``p`` with fresh resources on its own output register.

    For every branch with label ``r`` the agreement is the probability that the
    fresh run also yields ``r``; passes iff the minimum agreement is ``>= 1 - tol``.
    """
    t0 = time.perf_counter()
    if p.output is None or len(p.output) != p.n_inputs:
        return VerificationReport("ideal", p.name, FAIL, tol, 0.0,
                                  [Witness("-", None, 1.0, "no output state")], note="no output state")
    if inputs is None:
        inputs = spanning_inputs(target_basis(p) if p.target else None, p.n_inputs, HAAR_SEEDS[:5], products=False)
    witnesses = []
    worst = 1.0
    for input_id, psi in inputs:
        for b in enumerate_branches(p, psi):
            out = reduce_pure(b.amps, p.output, p.n_qubits)
            again = mixed_distribution(p, DensityMatrix((out + out.conj().T) / 2))[b.label]
            worst = min(worst, again)
            witnesses.append(Witness(input_id, None, 1.0 - again, f"branch {b.outcomes} label {b.label}"))
    verdict = PASS if worst >= 1 - tol else FAIL
    return VerificationReport(
        "ideal", p.name, verdict, tol, worst,
        _top([w for w in witnesses if w.gap > tol]) if verdict == FAIL else _top(witnesses, 1),
        _seeds_of(inputs), (time.perf_counter() - t0) * 1e3,
        note="value is the minimum repeat-agreement probability",
    )


def output_sites(p: Protocol) -> dict[str, tuple[int, ...]]:
    reg = p.output if p.output is not None else p.inputs
    sites: dict[str, tuple[int, ...]] = {}
    for q in reg:
        owner = p.owner(q)
        sites[owner] = sites.get(owner, ()) + (q,)
    return sites


def check_erasure(p: Protocol, inputs: Sequence[tuple[str, StateVector]] | None = None,
                  sites: Mapping[str, Sequence[int]] | None = None, parties: Sequence[str] | None = None,
                  tol: float = TOL) -> VerificationReport:
    """Each site's outcome-averaged post-measurement state must not depend on the input.

    ``sites`` maps names to registers (default: each party's share of the
    output register); ``parties`` restricts the check to some of them.
    """
    t0 = time.perf_counter()
    sites = dict(sites) if sites is not None else output_sites(p)
    if parties is not None:
        sites = {k: v for k, v in sites.items() if k in parties}
    if inputs is None:
        inputs = spanning_inputs(target_basis(p) if p.target else None, p.n_inputs)
    reference: dict[str, np.ndarray] = {}
    witnesses = []
    worst = 0.0
    mixedness = 0.0
    for input_id, psi in inputs:
        bs = enumerate_branches(p, psi)
        for site, qubits in sites.items():
            rho = bs.reduced(tuple(qubits))
            d = rho.shape[0]
            mixedness = max(mixedness, trace_distance(rho, np.eye(d) / d))
            ref = reference.setdefault(site, rho)
            gap = trace_distance(rho, ref)
            worst = max(worst, gap)
            witnesses.append(Witness(input_id, None, gap, f"site {site}"))
    verdict = PASS if worst < tol else FAIL
    return VerificationReport(
        "erasure", p.name, verdict, tol, worst,
        _top([w for w in witnesses if w.gap >= tol]) if verdict == FAIL else _top(witnesses, 1),
        _seeds_of(inputs), (time.perf_counter() - t0) * 1e3,
        data={"sites": {k: list(v) for k, v in sites.items()}, "max_distance_to_maximally_mixed": mixedness},
    )


def ebit_cost(p: Protocol) -> int:
    """Total entanglement of the preshared resources, in ebits.

    Every resource must carry an integral entropy, the same for each party's
    share, equal to its declared ebit count; anything else raises
    ``ValidationError``.
    """
    total = 0
    for res in p.resources:
        ent = list(resource_entropies(res, p).values())
        k = round(ent[0])
        if len(ent) < 2 or k < 1 or any(abs(e - k) > 1e-9 for e in ent):
            raise ValidationError(f"resource {res.name} is not a maximally entangled resource: {ent}")
        if k != res.ebits:
            raise ValidationError(f"resource {res.name} declares {res.ebits} ebits but carries {k}")
        total += k
    return total


def check_ebits(p: Protocol, expected: int | None = None) -> VerificationReport:
    t0 = time.perf_counter()
    try:
        cost = ebit_cost(p)
    except ValidationError as exc:
        return VerificationReport("ebits", p.name, FAIL, 0.0, None, [Witness("-", None, 1.0, str(exc))])
    ok = expected is None or cost == expected
    witnesses = [] if ok else [Witness("-", None, float(abs(cost - expected)), f"expected {expected}")]
    return VerificationReport("ebits", p.name, PASS if ok else FAIL, 0.0, float(cost), witnesses,
                              runtime_ms=(time.perf_counter() - t0) * 1e3,
                              data={"expected": expected})


def check_valid(p: Protocol) -> VerificationReport:
    rep = validate(p)
    witnesses = [Witness("-", None, 1.0, f"{v.kind}: {v.detail}") for v in rep.violations]
    return VerificationReport("validate", p.name, PASS if rep.ok else FAIL, 0.0, float(len(witnesses)), witnesses)

"""Shipped protocol instances and the sender/middle/receiver signaling scenario.

Register layout shared by the bipartite protocols: qubit 0 is Alice's input
(``A-in``), qubit 1 is Bob's input (``B-in``); each preshared ``Phi+`` ebit
occupies a consecutive pair with Alice's half first.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import bases
from .engine import (
    Party,
    Protocol,
    Resource,
    measure_step,
    unitary_step,
    validate,
)
from .linalg import H, I2, PAULI, X, Y, Z, MeasurementBasis, StateVector, UnitaryOp, ValidationError

PAULI_OPS = tuple(UnitaryOp(m, n) for m, n in zip(PAULI, "IXYZ"))
KICKS = {name: UnitaryOp(m, name) for name, m in zip("IXYZH", (I2, X, Y, Z, H))}

# (a1, a2, b) -> twisted label; a2 flips for b in {1,2} after a Z readout and
# for b in {2,3} after an X readout.
TWISTED_TABLE = {
    (0, 0, 0): "00", (0, 0, 1): "01", (0, 0, 2): "01", (0, 0, 3): "00",
    (0, 1, 0): "01", (0, 1, 1): "00", (0, 1, 2): "00", (0, 1, 3): "01",
    (1, 0, 0): "1+", (1, 0, 1): "1+", (1, 0, 2): "1-", (1, 0, 3): "1-",
    (1, 1, 0): "1-", (1, 1, 1): "1-", (1, 1, 2): "1+", (1, 1, 3): "1+",
}

# EJM label for (a1, a2, b, o) in lexicographic order of the four outcomes.
_EJM_DIGITS = (
    "0123031221032301103212033012321010322130123023010123302103213210"
    "2301213003210123321030211230103232100312301201232301120321031032"
    "2301302130122301321021302103321032101203032123012301031212303210"
    "0123120312300123103203120321103210323021210301230123213030121032"
)
EJM_TABLE = dict(zip(itertools.product(range(4), repeat=4), _EJM_DIGITS))

# Bob's second measurement on his pair, chosen by his BSM outcome b.
EJM_READOUT = ("zz", "yz-bell", "zy-bell", "yy")


def _ebit(a: int, b: int) -> Resource:
    return Resource(bases.bell_basis().state(0), (a, b), 1, "bell:Phi+")


def pauli_product_index(a: int, b: int) -> int:
    """Index ``r`` with ``sigma_r ∝ sigma_a sigma_b``."""
    return a ^ b


def naive_ideal(basis: MeasurementBasis | None = None) -> Protocol:
    """A single middle observer ``M`` holding both qubits performs an ideal measurement."""
    basis = basis or bases.twisted_basis()
    n = basis.n_qubits
    qubits = tuple(range(n))
    return Protocol(
        name=f"naive-{basis.name}",
        parties=(Party("M", qubits),),
        inputs=qubits,
        steps=(measure_step("m", "M", qubits, basis),),
        record=("m",),
        postprocess={(k,): lab for k, lab in enumerate(basis.labels)},
        labels=basis.labels,
        output=qubits,
        target=basis.name,
        input_names=tuple(f"{c}-in" for c in string.ascii_uppercase[:n]),
    )


def twisted_local() -> Protocol:
    """Twisted-basis measurement with one ebit.

    Bob's BSM teleports ``B-in`` onto Alice's ebit half up to ``sigma_b``;
    Alice reads her input in Z and then her ebit half in Z or X depending on it.
    """
    bell, zb, xb = bases.bell_basis(), bases.basis_from_id("z"), bases.basis_from_id("x")
    return Protocol(
        name="twisted",
        parties=(Party("A", (0, 2)), Party("B", (1, 3))),
        inputs=(0, 1),
        steps=(
            measure_step("b", "B", (1, 3), bell),
            measure_step("a1", "A", (0,), zb),
            measure_step("a2", "A", (2,), {(0,): zb, (1,): xb}, given=("a1",)),
        ),
        record=("a1", "a2", "b"),
        postprocess=dict(TWISTED_TABLE),
        labels=bases.TWISTED_LABELS,
        resources=(_ebit(2, 3),),
        output=(0, 1),
        target="twisted",
        input_names=("A-in", "B-in"),
    )


def bsm_local() -> Protocol:
    bell = bases.bell_basis()
    table = {(a, b): bell.labels[pauli_product_index(a, b)] for a in range(4) for b in range(4)}
    return Protocol(
        name="bsm",
        parties=(Party("A", (0, 2)), Party("B", (1, 3))),
        inputs=(0, 1),
        steps=(measure_step("a", "A", (0, 2), bell), measure_step("b", "B", (1, 3), bell)),
        record=("a", "b"),
        postprocess=table,
        labels=bases.BELL_LABELS,
        resources=(_ebit(2, 3),),
        output=(0, 1),
        target="bell",
        input_names=("A-in", "B-in"),
    )


def bsm_ideal() -> Protocol:
    """``bsm_local`` plus a second ebit (qubits 4, 5) that each party Pauli-corrects into the outcome."""
    p = bsm_local()
    fix = {(k,): PAULI_OPS[k] for k in range(4)}
    return p.replace(
        name="bsm-ideal",
        parties=(Party("A", (0, 2, 4)), Party("B", (1, 3, 5))),
        steps=p.steps + (
            unitary_step("fix_a", "A", (4,), fix, given=("a",)),
            unitary_step("fix_b", "B", (5,), fix, given=("b",)),
        ),
        resources=p.resources + (_ebit(4, 5),),
        output=(4, 5),
    )


def ejm_local() -> Protocol:
    """Elegant joint measurement with three ebits.

    Qubits: 0 A-in, 1 B-in, ebits (2,3), (4,5), (6,7).  Bob's BSM on (1,7)
    moves his input to Alice's qubit 6; Alice applies ``U^dag`` to (0,6) and
    teleports both qubits to Bob's (3,5) via BSMs on (0,2) and (6,4); Bob
    reads (3,5) in the basis selected by his first outcome.
    """
    bell = bases.bell_basis()
    readout = {(b,): bases.basis_from_id(bid) for b, bid in enumerate(EJM_READOUT)}
    return Protocol(
        name="ejm",
        parties=(Party("A", (0, 2, 4, 6)), Party("B", (1, 3, 5, 7))),
        inputs=(0, 1),
        steps=(
            measure_step("b", "B", (1, 7), bell),
            unitary_step("udag", "A", (0, 6), bases.ejm_unitary().dagger()),
            measure_step("a1", "A", (0, 2), bell),
            measure_step("a2", "A", (6, 4), bell),
            measure_step("o", "B", (3, 5), readout, given=("b",)),
        ),
        record=("a1", "a2", "b", "o"),
        postprocess=dict(EJM_TABLE),
        labels=bases.EJM_LABELS,
        resources=(_ebit(2, 3), _ebit(4, 5), _ebit(6, 7)),
        output=(0, 1),
        target="ejm",
        input_names=("A-in", "B-in"),
    )


def ghz_label(outcomes) -> str:
    """GHZ-basis label from the parties' local BSM outcomes.

    Each local BSM reveals ``Z_in Z_res`` (-1 for Psi outcomes 1, 2) and
    ``X_in X_res`` (-1 for outcomes 2, 3); with a ``+0...0`` GHZ resource the
    Z parities fix ``x`` relative to party 0 and the X product fixes the sign.
    """
    zflip = [o in (1, 2) for o in outcomes]
    sign = sum(o in (2, 3) for o in outcomes) % 2
    bits = "".join("1" if z != zflip[0] else "0" for z in zflip)
    return "-+"[sign == 0] + bits


def ghz_local(n: int, ideal: bool = False) -> Protocol:
    """GHZ-basis measurement over ``n`` parties with a preshared GHZ resource.

    Party ``k`` holds input qubit ``k`` and resource qubit ``n + k``; the ideal
    variant adds a second GHZ state on ``2n + k`` that each party corrects with
    ``sigma`` of its own outcome.
    """
    if n < 2:
        raise ValueError("ghz_local needs n >= 2")
    if n > 26:
        raise ValueError("at most 26 parties")
    ids = string.ascii_uppercase[:n]
    bell = bases.bell_basis()
    ghz = StateVector(bases.ghz_state(n))
    steps = [measure_step(f"o{k}", ids[k], (k, n + k), bell) for k in range(n)]
    resources = [Resource(ghz, tuple(range(n, 2 * n)), 1, f"ghz:{n}:+{'0' * n}")]
    fresh = ()
    if ideal:
        fix = {(k,): PAULI_OPS[k] for k in range(4)}
        steps += [unitary_step(f"fix{k}", ids[k], (2 * n + k,), fix, given=(f"o{k}",)) for k in range(n)]
        resources.append(Resource(ghz, tuple(range(2 * n, 3 * n)), 1, f"ghz:{n}:+{'0' * n}"))
        fresh = (2 * n,)
    parties = tuple(Party(ids[k], (k, n + k) + tuple(q + k for q in fresh)) for k in range(n))
    table = {o: ghz_label(o) for o in itertools.product(range(4), repeat=n)}
    return Protocol(
        name=f"ghz{'-ideal' if ideal else ''}:{n}",
        parties=parties,
        inputs=tuple(range(n)),
        steps=tuple(steps),
        record=tuple(f"o{k}" for k in range(n)),
        postprocess=table,
        labels=bases.ghz_labels(n),
        resources=tuple(resources),
        output=tuple(range(2 * n, 3 * n)) if ideal else tuple(range(n)),
        target=f"ghz:{n}",
        input_names=tuple(f"{c}-in" for c in ids),
    )


def target_basis(p: Protocol) -> MeasurementBasis:
    if p.target is None:
        raise ValueError(f"protocol {p.name} declares no target basis")
    return bases.basis_from_id(p.target)


# ---------------------------------------------------------------------------
# sender / middle / receiver scenario


@dataclass(frozen=True, eq=False)
class SorkinScenario:
    """Sender kicks part of the input, the middle protocol runs, a receiver reads out.

    ``sender`` indexes qubits of the *input state*; ``receiver_qubits`` are
    global registers of ``middle``.  When ``receiver_party`` is set, that
    party's classical outcomes and all its qubits are also visible to the
    receiver (and enter the signaling comparison).
    """

    name: str
    middle: Protocol
    kicks: Mapping[str, UnitaryOp]
    sender: tuple[int, ...]
    receiver_qubits: tuple[int, ...]
    receiver_basis: MeasurementBasis
    receiver_party: str | None = None
    psi0: StateVector | None = None
    sender_party: str | None = field(default=None)

    def __post_init__(self):
        if not any(np.allclose(u.mat, np.eye(u.dim)) for u in self.kicks.values()):
            raise ValidationError("kick family must contain the identity")
        if self.receiver_basis.n_qubits != len(self.receiver_qubits):
            raise ValidationError("receiver basis does not match receiver register")
        if self.sender_party and self.receiver_party == self.sender_party:
            raise ValidationError("sender and receiver must be different parties")
        for u in self.kicks.values():
            if u.n_qubits != len(self.sender):
                raise ValidationError("kick does not match the sender register")


def sorkin_naive() -> SorkinScenario:
    """``|00>``, kicks ``{I, sigma_x on A}``, ideal twisted measurement, receiver reads B in Z."""
    return SorkinScenario(
        name="sorkin-naive",
        middle=naive_ideal(bases.twisted_basis()),
        kicks={"I": KICKS["I"], "X": KICKS["X"]},
        sender=(0,),
        receiver_qubits=(1,),
        receiver_basis=bases.basis_from_id("z"),
        psi0=StateVector.from_label("00"),
        sender_party="A",
    )


def scenarios_for(p: Protocol, kicks: Mapping[str, UnitaryOp] | None = None,
                  psi0: StateVector | None = None) -> list[SorkinScenario]:
    """One scenario per receiving party: the kick hits the first input slot, the
    receiver reads its own input register in Z and sees all its local data."""
    kicks = dict(KICKS if kicks is None else kicks)
    sender_q = p.inputs[0]
    sender_party = p.owner(sender_q)
    out = []
    for slot, q in enumerate(p.inputs):
        party = p.owner(q)
        if party == sender_party:
            continue
        out.append(SorkinScenario(
            name=f"{p.name}:{sender_party}->{party}",
            middle=p,
            kicks=kicks,
            sender=(0,),
            receiver_qubits=(q,),
            receiver_basis=bases.basis_from_id("z"),
            receiver_party=party,
            psi0=psi0,
            sender_party=sender_party,
        ))
    return out


_REGISTRY = {
    "twisted": twisted_local,
    "bsm": bsm_local,
    "bsm-ideal": bsm_ideal,
    "ejm": ejm_local,
    "naive-twisted": lambda: naive_ideal(bases.twisted_basis()),
}

PROTOCOL_IDS = ("sorkin-naive", "twisted", "bsm", "bsm-ideal", "ejm", "ghz:<n>", "ghz-ideal:<n>")


def get(pid: str) -> Protocol | SorkinScenario:
    """Resolve a CLI id to a protocol or (for ``sorkin-naive``) a scenario."""
    pid = pid.strip()
    if pid == "sorkin-naive":
        return sorkin_naive()
    if pid in _REGISTRY:
        return _REGISTRY[pid]()
    key, _, arg = pid.partition(":")
    if key in ("ghz", "ghz-ideal") and arg.isdigit():
        return ghz_local(int(arg), ideal=key == "ghz-ideal")
    raise KeyError(f"unknown protocol id {pid!r}")


def shipped() -> list[Protocol]:
    """Every localizable protocol instance checked by the acceptance suite."""
    return [twisted_local(), bsm_local(), bsm_ideal(), ejm_local(), ghz_local(3), ghz_local(3, ideal=True)]


def is_valid(p: Protocol) -> bool:
    return validate(p).ok

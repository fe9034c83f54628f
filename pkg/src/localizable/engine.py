"""Party-local adaptive protocols with preshared resources, executed exactly.

A :class:`Protocol` is a list of steps, each owned by one party and acting only
on that party's qubits.  Adaptivity is an explicit lookup table keyed by the
outcomes of earlier measurement steps *of the same party*, which is what makes
the no-communication constraint checkable by :func:`validate`.

Execution is an exhaustive depth-first expansion of every measurement into its
Lüders branches (:func:`enumerate_branches`); sampling and channels are derived
from the resulting :class:`BranchSet`.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import bases
from .linalg import (
    H,
    I2,
    PRUNE_TOL,
    X,
    Y,
    Z,
    DensityMatrix,
    MeasurementBasis,
    StateVector,
    UnitaryOp,
    ValidationError,
    _check_size,
    apply_matrix,
    entanglement_entropy,
    reduce_pure,
)

UNITARY = "unitary"
MEASURE = "measure"


@dataclass(frozen=True)
class Party:
    id: str
    qubits: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Resource:
    """Preshared state placed on ``qubits``; ``ebits`` is the declared entanglement."""

    state: StateVector
    qubits: tuple[int, ...]
    ebits: int
    name: str | None = None


@dataclass(frozen=True, eq=False)
class Step:
    name: str
    party: str
    kind: str
    targets: tuple[int, ...]
    table: Mapping[tuple[int, ...], UnitaryOp | MeasurementBasis]
    given: tuple[str, ...] = ()

    def payload(self, history: Mapping[str, int]):
        return self.table[tuple(history[g] for g in self.given)]


def unitary_step(name: str, party: str, targets: Sequence[int], op: UnitaryOp | Mapping,
                 given: Sequence[str] = ()) -> Step:
    table = op if isinstance(op, Mapping) else {(): op}
    return Step(name, party, UNITARY, tuple(targets), dict(table), tuple(given))


def measure_step(name: str, party: str, targets: Sequence[int], basis: MeasurementBasis | Mapping,
                 given: Sequence[str] = ()) -> Step:
    table = basis if isinstance(basis, Mapping) else {(): basis}
    return Step(name, party, MEASURE, tuple(targets), dict(table), tuple(given))


@dataclass(frozen=True, eq=False)
class Protocol:
    """Executable localizable-measurement scheme.

    ``inputs`` are the registers holding the measured system (in input-state
    qubit order).  ``record`` names the measurement steps whose outcomes, in
    that order, key the classical ``postprocess`` table.  ``output`` is the
    register carrying the post-measurement state of the measured system.
    """

    name: str
    parties: tuple[Party, ...]
    inputs: tuple[int, ...]
    steps: tuple[Step, ...]
    record: tuple[str, ...]
    postprocess: Mapping[tuple[int, ...], str]
    labels: tuple[str, ...]
    resources: tuple[Resource, ...] = ()
    output: tuple[int, ...] | None = None
    target: str | None = None
    input_names: tuple[str, ...] = ()

    @property
    def n_qubits(self) -> int:
        return 1 + max(q for party in self.parties for q in party.qubits)

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    def party(self, pid: str) -> Party:
        for party in self.parties:
            if party.id == pid:
                return party
        raise KeyError(pid)

    def owner(self, qubit: int) -> str | None:
        for party in self.parties:
            if qubit in party.qubits:
                return party.id
        return None

    def step(self, name: str) -> Step:
        for s in self.steps:
            if s.name == name:
                return s
        raise KeyError(name)

    def replace(self, **changes) -> "Protocol":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return Protocol(**fields)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclass
class ValidationReport:
    protocol: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind: str, detail: str) -> None:
        self.violations.append(Violation(kind, detail))

    def raise_if_failed(self) -> None:
        if self.violations:
            lines = "; ".join(f"{v.kind}: {v.detail}" for v in self.violations)
            raise ValidationError(f"protocol {self.protocol!r} is invalid: {lines}")


def _outcome_count(step: Step) -> int:
    return max(len(b) for b in step.table.values())


def histories(p: Protocol) -> list[dict[str, int]]:
    """Every structurally reachable measurement history (ignoring probabilities)."""
    hs: list[dict[str, int]] = [{}]
    for step in p.steps:
        if step.kind != MEASURE:
            continue
        nxt = []
        for h in hs:
            key = tuple(h.get(g) for g in step.given)
            basis = step.table.get(key)
            if basis is None:
                continue
            nxt.extend({**h, step.name: k} for k in range(len(basis)))
        hs = nxt
    return hs


def resource_entropies(res: Resource, p: Protocol) -> dict[str, float]:
    """Entanglement entropy of each party's share of a resource."""
    groups: dict[str, list[int]] = {}
    for pos, q in enumerate(res.qubits):
        groups.setdefault(p.owner(q) or "?", []).append(pos)
    return {pid: entanglement_entropy(res.state, idx) for pid, idx in groups.items()}


def validate(p: Protocol) -> ValidationReport:
    """Check party-locality, register layout, table totality and resource declarations."""
    rep = ValidationReport(p.name)
    seen: dict[int, str] = {}
    for party in p.parties:
        for q in party.qubits:
            if q in seen:
                rep.add("register clash", f"qubit {q} held by {seen[q]} and {party.id}")
            seen[q] = party.id
    n = p.n_qubits
    registers = list(p.inputs) + [q for r in p.resources for q in r.qubits]
    if len(set(registers)) != len(registers):
        rep.add("register clash", "input and resource registers overlap")
    for q in range(n):
        if q not in seen:
            rep.add("register clash", f"qubit {q} belongs to no party")

    for res in p.resources:
        if res.state.n_qubits != len(res.qubits):
            rep.add("resource mismatch", f"{res.name}: state size differs from register list")
            continue
        ent = resource_entropies(res, p)
        if len(ent) < 2:
            rep.add("resource mismatch", f"{res.name}: resource not shared between parties")
        elif any(abs(e - res.ebits) > 1e-9 for e in ent.values()):
            rep.add("resource mismatch", f"{res.name}: declared {res.ebits} ebits, entropies {ent}")

    names = [s.name for s in p.steps]
    if len(set(names)) != len(names):
        rep.add("duplicate step", "step names must be unique")
    kinds: dict[str, Step] = {}
    measured: dict[int, str] = {}
    for step in p.steps:
        party = next((x for x in p.parties if x.id == step.party), None)
        if party is None:
            rep.add("unknown party", f"step {step.name} names party {step.party}")
        elif any(t not in party.qubits for t in step.targets):
            rep.add("foreign target", f"step {step.name} touches qubits outside {step.party}")
        if step.kind not in (UNITARY, MEASURE):
            rep.add("bad step", f"step {step.name} has kind {step.kind!r}")
        for g in step.given:
            prior = kinds.get(g)
            if prior is None:
                rep.add("unknown step", f"step {step.name} conditions on {g}, not an earlier step")
            elif prior.kind != MEASURE:
                rep.add("unknown step", f"step {step.name} conditions on non-measurement {g}")
            elif prior.party != step.party:
                rep.add("cross-party conditioning",
                        f"step {step.name} of {step.party} conditions on {g} of {prior.party}")
        width = 1 << len(step.targets)
        for payload in step.table.values():
            dim = payload.dim if isinstance(payload, (UnitaryOp, MeasurementBasis)) else None
            if dim != width:
                rep.add("bad payload", f"step {step.name} payload does not match {len(step.targets)} targets")
                break
            if (step.kind == MEASURE) != isinstance(payload, MeasurementBasis):
                rep.add("bad payload", f"step {step.name} payload kind does not match {step.kind}")
                break
        if step.kind == MEASURE:
            for t in step.targets:
                if t in measured:
                    rep.add("remeasured qubit", f"qubit {t} measured by {measured[t]} and {step.name}")
                measured[t] = step.name
        if all(g in kinds and kinds[g].kind == MEASURE for g in step.given):
            space = itertools.product(*(range(_outcome_count(kinds[g])) for g in step.given))
            missing = [key for key in space if key not in step.table]
            if missing:
                rep.add("incomplete condition", f"step {step.name} has no payload for {missing[:3]}")
        kinds[step.name] = step

    for r in p.record:
        if r not in kinds or kinds[r].kind != MEASURE:
            rep.add("unknown step", f"record entry {r} is not a measurement step")
    if rep.ok:
        reachable = {tuple(h[r] for r in p.record) for h in histories(p)}
        missing = sorted(t for t in reachable if t not in p.postprocess)
        if missing:
            rep.add("partial postprocess", f"{len(missing)} reachable outcome tuples unlabeled, e.g. {missing[0]}")
        stray = {lab for lab in p.postprocess.values() if lab not in p.labels}
        if stray:
            rep.add("unknown label", f"postprocess produces labels {sorted(stray)}")
    if p.output is not None and len(p.output) != len(p.inputs):
        rep.add("bad output", "output register size differs from the input register")
    return rep


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True, eq=False)
class Branch:
    history: tuple[tuple[str, int], ...]
    outcomes: tuple[int, ...]
    probability: float
    amps: np.ndarray
    label: str | None

    @property
    def state(self) -> StateVector:
        return StateVector(self.amps)

    def outcome(self, step: str) -> int:
        return dict(self.history)[step]


@dataclass(frozen=True, eq=False)
class BranchSet:
    """All classical outcome branches of one protocol run, with exact probabilities.

    Each branch carries the normalized post-measurement state of the full
    register; measured qubits sit in the eigenvector they were projected onto.
    """

    protocol: str
    labels: tuple[str, ...]
    n_qubits: int
    branches: tuple[Branch, ...]
    pruned: tuple[tuple[tuple[tuple[str, int], ...], float], ...] = ()

    def __len__(self):
        return len(self.branches)

    def __iter__(self) -> Iterator[Branch]:
        return iter(self.branches)

    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def distribution(self) -> dict[str, float]:
        out = dict.fromkeys(self.labels, 0.0)
        for b in self.branches:
            out[b.label] = out.get(b.label, 0.0) + b.probability
        return out

    def reduced(self, keep: Sequence[int]) -> np.ndarray:
        """Probability-weighted mixture of the branch states on ``keep``."""
        rho = np.zeros((1 << len(keep),) * 2, dtype=complex)
        for b in self.branches:
            rho += b.probability * reduce_pure(b.amps, keep, self.n_qubits)
        return rho

    def conditional_states(self, steps: Sequence[str], keep: Sequence[int]) -> dict[tuple[int, ...], np.ndarray]:
        """Unnormalized states on ``keep`` grouped by the outcomes of ``steps``."""
        out: dict[tuple[int, ...], np.ndarray] = {}
        for b in self.branches:
            h = dict(b.history)
            key = tuple(h[s] for s in steps)
            rho = b.probability * reduce_pure(b.amps, keep, self.n_qubits)
            out[key] = out[key] + rho if key in out else rho
        return out


def initial_state(p: Protocol, psi: StateVector) -> np.ndarray:
    """Input state placed on ``p.inputs`` tensored with every resource, in global qubit order."""
    n = p.n_qubits
    _check_size(n)
    if psi.n_qubits != len(p.inputs):
        raise ValueError(f"protocol {p.name} takes a {len(p.inputs)}-qubit input, got {psi.n_qubits}")
    vec = psi.amps
    order = list(p.inputs)
    for res in p.resources:
        vec = np.kron(vec, res.state.amps)
        order.extend(res.qubits)
    for q in range(n):
        if q not in order:
            vec = np.kron(vec, [1, 0])
            order.append(q)
    return np.transpose(vec.reshape((2,) * n), np.argsort(order)).reshape(-1)


def _walk(p: Protocol, vec: np.ndarray, rng: np.random.Generator | None = None):
    n = p.n_qubits
    steps = p.steps
    leaves: list[Branch] = []
    pruned: list = []

    def leaf(vec, prob, hist):
        outcomes = tuple(dict(hist)[r] for r in p.record)
        leaves.append(Branch(tuple(hist), outcomes, prob, vec, p.postprocess.get(outcomes)))

    def walk(i, vec, prob, hist):
        while i < len(steps) and steps[i].kind == UNITARY:
            step = steps[i]
            vec = apply_matrix(step.payload(dict(hist)).mat, step.targets, vec, n)
            i += 1
        if i == len(steps):
            leaf(vec, prob, hist)
            return
        step = steps[i]
        basis = step.payload(dict(hist))
        kids = []
        for k, proj in enumerate(basis.projectors):
            v = apply_matrix(proj, step.targets, vec, n)
            q = float(np.vdot(v, v).real)
            kids.append((k, v, q))
        if rng is not None:
            w = np.array([q for _, _, q in kids])
            k, v, q = kids[rng.choice(len(kids), p=w / w.sum())]
            walk(i + 1, v / math.sqrt(q), prob * q, hist + ((step.name, k),))
            return
        for k, v, q in kids:
            h = hist + ((step.name, k),)
            if prob * q < PRUNE_TOL:
                pruned.append((h, prob * q))
                continue
            walk(i + 1, v / math.sqrt(q), prob * q, h)

    walk(0, vec, 1.0, ())
    return leaves, pruned


def enumerate_branches(p: Protocol, psi: StateVector, check: bool = True) -> BranchSet:
    """Exhaustively expand every measurement of ``p`` run on ``psi``.

    Branches whose probability falls below ``PRUNE_TOL`` are dropped and listed
    in ``BranchSet.pruned``.  With ``check=False`` validation is skipped and
    unlabeled outcome tuples get ``label=None`` (used when deriving tables).
    """
    if check:
        validate(p).raise_if_failed()
    leaves, pruned = _walk(p, initial_state(p, psi))
    return BranchSet(p.name, p.labels, p.n_qubits, tuple(leaves), tuple(pruned))


def result_distribution(p: Protocol, psi: StateVector) -> dict[str, float]:
    return enumerate_branches(p, psi).distribution()


def _pure_components(rho: DensityMatrix):
    w, v = np.linalg.eigh(rho.mat)
    for weight, vec in zip(w, v.T):
        if weight > PRUNE_TOL:
            yield float(weight), StateVector.normalized(vec)


def mixed_distribution(p: Protocol, rho: DensityMatrix) -> dict[str, float]:
    """Result distribution for a mixed input, by linearity over its eigen-decomposition."""
    out = dict.fromkeys(p.labels, 0.0)
    for weight, psi in _pure_components(rho):
        for lab, prob in result_distribution(p, psi).items():
            out[lab] += weight * prob
    return out


def nonselective_channel(p: Protocol, rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Outcome-averaged post-measurement state on ``keep``."""
    validate(p).raise_if_failed()
    d = 1 << len(keep)
    out = np.zeros((d, d), dtype=complex)
    for weight, psi in _pure_components(rho):
        out += weight * enumerate_branches(p, psi, check=False).reduced(keep)
    out = (out + out.conj().T) / 2
    return DensityMatrix(out / np.trace(out).real)


@dataclass(frozen=True, eq=False)
class SampleRun:
    outcomes: tuple[int, ...]
    label: str
    state: StateVector
    probability: float


def sample_run(p: Protocol, psi: StateVector, seed) -> SampleRun:
    """One run of ``p``, each measurement drawing its outcome with the Born probability."""
    validate(p).raise_if_failed()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    (leaf,), _ = _walk(p, initial_state(p, psi), rng)
    return SampleRun(leaf.outcomes, leaf.label, leaf.state, leaf.probability)


def sample_counts(p: Protocol, psi: StateVector, shots: int, seed, method: str = "branches") -> Counter:
    """Label counts over ``shots`` independent runs.

    ``method="branches"`` draws a multinomial over the exact branch set;
    ``method="sequential"`` replays the protocol shot by shot, drawing each
    measurement outcome in turn as :func:`sample_run` does (slower, but a
    separate route through the engine).
    """
    rng = np.random.default_rng(seed)
    out: Counter = Counter(dict.fromkeys(p.labels, 0))
    if method == "sequential":
        validate(p).raise_if_failed()
        start = initial_state(p, psi)
        for _ in range(shots):
            (leaf,), _ = _walk(p, start, rng)
            out[leaf.label] += 1
        return out
    if method != "branches":
        raise ValueError(f"unknown sampling method {method!r}")
    bs = enumerate_branches(p, psi)
    probs = np.array([b.probability for b in bs])
    counts = rng.multinomial(shots, probs / probs.sum())
    for b, c in zip(bs, counts):
        out[b.label] += int(c)
    return out


def derive_postprocess(p: Protocol, target: MeasurementBasis) -> dict[tuple[int, ...], str]:
    """Outcome-tuple -> label table read off by running ``p`` on each eigenstate of ``target``.

    Raises ``ValueError`` if some outcome tuple occurs for two eigenstates,
    i.e. the scheme does not discriminate the basis.
    """
    table: dict[tuple[int, ...], str] = {}
    for k, label in enumerate(target.labels):
        for b in enumerate_branches(p, target.state(k), check=False):
            prev = table.setdefault(b.outcomes, label)
            if prev != label:
                raise ValueError(f"outcome {b.outcomes} occurs for both {prev} and {label}")
    return table


# ---------------------------------------------------------------------------
# JSON serialization

_NAMED_UNITARIES = {"I": I2, "X": X, "Y": Y, "Z": Z, "H": H}


def unitary_from_id(uid: str) -> UnitaryOp:
    if uid in _NAMED_UNITARIES:
        return UnitaryOp(_NAMED_UNITARIES[uid], uid)
    base, dag = (uid[:-4], True) if uid.endswith("^dag") else (uid, False)
    if base == "ejm-u":
        u = bases.ejm_unitary()
        return u.dagger() if dag else u
    raise ValueError(f"unknown unitary id {uid!r}")


def _cplx(a) -> list:
    a = np.asarray(a)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_cplx(x) for x in a]


def _uncplx(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _payload_to_json(obj):
    if isinstance(obj, UnitaryOp):
        if obj.name is not None:
            try:
                if np.array_equal(unitary_from_id(obj.name).mat, obj.mat):
                    return obj.name
            except ValueError:
                pass
        return {"matrix": _cplx(obj.mat)}
    if obj.name is not None:
        try:
            ref = bases.basis_from_id(obj.name)
            if ref.labels == obj.labels and all(np.array_equal(a, b) for a, b in zip(ref.projectors, obj.projectors)):
                return obj.name
        except ValueError:
            pass
    if obj.vectors is not None:
        return {"labels": list(obj.labels), "vectors": _cplx(np.array(obj.vectors))}
    return {"labels": list(obj.labels), "projectors": _cplx(np.array(obj.projectors))}


def _payload_from_json(data, kind: str):
    if isinstance(data, str):
        return unitary_from_id(data) if kind == UNITARY else bases.basis_from_id(data)
    if kind == UNITARY:
        return UnitaryOp(_uncplx(data["matrix"]))
    if "vectors" in data:
        return MeasurementBasis(tuple(data["labels"]), tuple(_uncplx(data["vectors"])))
    return MeasurementBasis(tuple(data["labels"]), projectors=tuple(_uncplx(data["projectors"])))


def resource_state(state_id: str) -> StateVector:
    """Resolve ``"<basis-id>:<label>"`` (e.g. ``bell:Phi+``, ``ghz:3:+000``) to a state."""
    basis_id, _, label = state_id.rpartition(":")
    return bases.basis_from_id(basis_id).state(label)


def protocol_to_dict(p: Protocol) -> dict:
    resources = []
    for r in p.resources:
        state = r.name
        if state is None or not np.array_equal(resource_state(state).amps, r.state.amps):
            state = {"amps": _cplx(r.state.amps)}
        resources.append({"state": state, "qubits": list(r.qubits), "ebits": r.ebits})
    steps = []
    for s in p.steps:
        steps.append({
            "name": s.name,
            "party": s.party,
            "kind": s.kind,
            "targets": list(s.targets),
            "given": list(s.given),
            "table": [{"when": list(k), "payload": _payload_to_json(v)} for k, v in s.table.items()],
        })
    return {
        "name": p.name,
        "target": p.target,
        "parties": [{"id": x.id, "qubits": list(x.qubits)} for x in p.parties],
        "inputs": list(p.inputs),
        "input_names": list(p.input_names),
        "resources": resources,
        "steps": steps,
        "record": list(p.record),
        "labels": list(p.labels),
        "postprocess": [[list(k), v] for k, v in sorted(p.postprocess.items())],
        "output": None if p.output is None else list(p.output),
    }


def protocol_from_dict(d: dict) -> Protocol:
    resources = []
    for r in d.get("resources", []):
        st = r["state"]
        state = resource_state(st) if isinstance(st, str) else StateVector(_uncplx(st["amps"]))
        resources.append(Resource(state, tuple(r["qubits"]), int(r["ebits"]), st if isinstance(st, str) else None))
    steps = []
    for s in d["steps"]:
        table = {tuple(e["when"]): _payload_from_json(e["payload"], s["kind"]) for e in s["table"]}
        steps.append(Step(s["name"], s["party"], s["kind"], tuple(s["targets"]), table, tuple(s.get("given", ()))))
    return Protocol(
        name=d["name"],
        parties=tuple(Party(x["id"], tuple(x["qubits"])) for x in d["parties"]),
        inputs=tuple(d["inputs"]),
        steps=tuple(steps),
        record=tuple(d["record"]),
        postprocess={tuple(k): v for k, v in d["postprocess"]},
        labels=tuple(d["labels"]),
        resources=tuple(resources),
        output=None if d.get("output") is None else tuple(d["output"]),
        target=d.get("target"),
        input_names=tuple(d.get("input_names", ())),
    )


def protocol_to_json(p: Protocol, **kwargs) -> str:
    return json.dumps(protocol_to_dict(p), **kwargs)


def protocol_from_json(text: str) -> Protocol:
    return protocol_from_dict(json.loads(text))

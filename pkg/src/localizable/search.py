"""Derivative-free search over one-round, k-ebit local protocols.

A :class:`ProtocolTemplate` gives each party a parametrized unitary on its
input qubit plus its halves of ``k`` preshared ``Phi+`` ebits, followed by a
computational-basis readout of all its qubits.  :func:`optimize` maximizes how
well the joint readout discriminates the eigenstates of a target basis.

Results are numerical evidence about which measurements need how much
entanglement; a low best score does not prove impossibility.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import bases
from .engine import Party, Protocol, Resource, enumerate_branches, measure_step, unitary_step
from .linalg import X, Y, Z, MeasurementBasis, UnitaryOp

EVIDENCE = "numerical evidence"

_XX, _YY, _ZZ = np.kron(X, X), np.kron(Y, Y), np.kron(Z, Z)


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ])


def _exp_pauli(coef: float, pp: np.ndarray) -> np.ndarray:
    return math.cos(coef) * np.eye(4) + 1j * math.sin(coef) * pp


def kak_unitary(p) -> np.ndarray:
    """Two-qubit unitary from 15 parameters: local u3 layer, XX/YY/ZZ interaction, local u3 layer."""
    inner = _exp_pauli(p[6], _XX) @ _exp_pauli(p[7], _YY) @ _exp_pauli(p[8], _ZZ)
    return np.kron(u3(*p[0:3]), u3(*p[3:6])) @ inner @ np.kron(u3(*p[9:12]), u3(*p[12:15]))


def _cz_ladder(m: int) -> np.ndarray:
    d = 1 << m
    diag = np.ones(d)
    for k in range(d):
        bits = [(k >> (m - 1 - q)) & 1 for q in range(m)]
        if sum(bits[q] & bits[q + 1] for q in range(m - 1)) % 2:
            diag[k] = -1
    return np.diag(diag)


def layered_unitary(p, m: int) -> np.ndarray:
    """``m``-qubit unitary: u3 on every qubit, then alternating CZ-ladder and u3 layers."""
    p = np.asarray(p)
    per = 3 * m
    layers = len(p) // per

    def local(chunk):
        out = np.ones((1, 1))
        for q in range(m):
            out = np.kron(out, u3(*chunk[3 * q:3 * q + 3]))
        return out

    u = local(p[:per])
    ent = _cz_ladder(m)
    for layer in range(1, layers):
        u = local(p[layer * per:(layer + 1) * per]) @ ent @ u
    return u


@dataclass(frozen=True)
class ProtocolTemplate:
    """One local unitary per party on ``1 + ebits`` qubits, then a full computational readout.

    Qubit 0 is Alice's input, qubit 1 Bob's; ebit ``i`` sits on ``(2+2i, 3+2i)``.
    """

    ebits: int = 1

    @property
    def local_qubits(self) -> int:
        return 1 + self.ebits

    @property
    def party_dim(self) -> int:
        m = self.local_qubits
        if m == 1:
            return 3
        if m == 2:
            return 15
        return 3 * m * math.ceil((4**m - 1) / (3 * m))

    @property
    def dim(self) -> int:
        return 2 * self.party_dim

    @property
    def n_qubits(self) -> int:
        return 2 * self.local_qubits

    @property
    def alice(self) -> tuple[int, ...]:
        return (0,) + tuple(2 + 2 * i for i in range(self.ebits))

    @property
    def bob(self) -> tuple[int, ...]:
        return (1,) + tuple(3 + 2 * i for i in range(self.ebits))

    def local_unitary(self, p) -> np.ndarray:
        m = self.local_qubits
        if m == 1:
            return u3(*p)
        if m == 2:
            return kak_unitary(p)
        return layered_unitary(p, m)

    def unitaries(self, params) -> tuple[np.ndarray, np.ndarray]:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.dim,):
            raise ValueError(f"template expects {self.dim} parameters, got {params.shape}")
        d = self.party_dim
        return self.local_unitary(params[:d]), self.local_unitary(params[d:])

    def instantiate(self, params, decoder: dict | None = None, labels=None) -> Protocol:
        """Protocol at ``params``; without ``decoder`` its labels are the raw joint outcomes."""
        ua, ub = self.unitaries(params)
        m = self.local_qubits
        comp = bases.computational_basis(m)
        outcomes = [(a, b) for a in range(1 << m) for b in range(1 << m)]
        if decoder is None:
            decoder = {o: f"{comp.labels[o[0]]}.{comp.labels[o[1]]}" for o in outcomes}
            labels = tuple(decoder[o] for o in outcomes)
        ebit = bases.bell_basis().state(0)
        return Protocol(
            name=f"template-{self.ebits}ebit",
            parties=(Party("A", self.alice), Party("B", self.bob)),
            inputs=(0, 1),
            steps=(
                unitary_step("ua", "A", self.alice, UnitaryOp(ua)),
                unitary_step("ub", "B", self.bob, UnitaryOp(ub)),
                measure_step("a", "A", self.alice, comp),
                measure_step("b", "B", self.bob, comp),
            ),
            record=("a", "b"),
            postprocess=dict(decoder),
            labels=tuple(labels),
            resources=tuple(Resource(ebit, (2 + 2 * i, 3 + 2 * i), 1, "bell:Phi+") for i in range(self.ebits)),
            output=None,
        )


def _score(conf: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Average and worst-case success of the best outcome -> label assignment.

    ``conf[o, j] = P(outcome o | eigenstate j)``.  Labels may be reused across
    outcomes, so the optimal assignment sends each outcome to its most likely
    eigenstate.
    """
    assign = np.argmax(conf, axis=1)
    m = conf.shape[1]
    avg = float(conf[np.arange(len(conf)), assign].sum() / m)
    per_label = np.array([conf[assign == j, j].sum() for j in range(m)])
    return avg, float(per_label.min()), assign


def confusion(params, template: ProtocolTemplate, target: MeasurementBasis) -> np.ndarray:
    """Outcome/eigenstate table computed by exact branch enumeration."""
    p = template.instantiate(params)
    index = {o: k for k, o in enumerate(sorted(p.postprocess))}
    conf = np.zeros((len(index), len(target)))
    for j in range(len(target)):
        for b in enumerate_branches(p, target.state(j), check=False):
            conf[index[b.outcomes], j] += b.probability
    return conf


def discrimination_score(params, template: ProtocolTemplate, target: MeasurementBasis) -> float:
    return _score(confusion(params, template, target))[0]


class _FastConfusion:
    """Vectorized amplitude route to the same confusion table, for the inner search loop."""

    def __init__(self, template: ProtocolTemplate, target: MeasurementBasis):
        self.t = template
        n = template.n_qubits
        ebit = bases.bell_basis().state(0).amps
        states = []
        for v in target.vectors:
            vec = v
            for _ in range(template.ebits):
                vec = np.kron(vec, ebit)
            # kron order is (0, 1, 2, 3, ...) already; regroup as (alice..., bob...)
            states.append(np.transpose(vec.reshape((2,) * n), template.alice + template.bob).reshape(-1))
        m = template.local_qubits
        self.psi = np.array(states).reshape(len(states), 1 << m, 1 << m)

    def __call__(self, params) -> np.ndarray:
        ua, ub = self.t.unitaries(params)
        out = ua @ self.psi @ ub.T
        return (np.abs(out) ** 2).reshape(len(out), -1).T


@dataclass
class SearchResult:
    target: str
    ebits: int
    restarts: int
    seed: int
    budget: int
    best_params: list[float]
    best_score: float
    worst_case: float
    verified_score: float
    restart_scores: list[float]
    traces: list[list[float]] = field(repr=False)
    evidence: str = EVIDENCE

    def to_dict(self) -> dict:
        return asdict(self)


def _one_restart(args):
    template, target, seed, restart, budget = args
    rng = np.random.default_rng([seed, restart])
    fast = _FastConfusion(template, target)

    def loss(x):
        return 1.0 - _score(fast(x))[0]

    x = rng.uniform(-math.pi, math.pi, template.dim)
    best_x, best_f = x, loss(x)
    trace = [1.0 - best_f]
    used = 1
    scale = 0.5
    while used < budget and best_f > 1e-12:
        simplex = np.vstack([best_x] + [best_x + scale * e for e in np.eye(template.dim)])

        def record(intermediate_result):
            trace.append(max(trace[-1], 1.0 - intermediate_result.fun))

        res = minimize(loss, best_x, method="Nelder-Mead", callback=record,
                       options={"maxfev": budget - used, "adaptive": True, "initial_simplex": simplex,
                                "xatol": 1e-10, "fatol": 1e-13})
        used += res.nfev
        if res.fun < best_f - 1e-15:
            best_x, best_f = res.x, res.fun
        else:
            scale /= 2
            if scale < 1e-3:
                break
    return best_x, 1.0 - best_f, trace


def optimize(template: ProtocolTemplate, target: MeasurementBasis | str, restarts: int = 50, seed: int = 0,
             budget: int = 4000, workers: int = 1) -> SearchResult:
    """Nelder-Mead from ``restarts`` seeded random starts, re-seeded from the best point until
    ``budget`` evaluations per restart are spent.  Deterministic in ``(seed, restarts, budget)``."""
    if budget <= 0 or restarts <= 0:
        raise ValueError("budget and restarts must be positive")
    if isinstance(target, str):
        target = bases.basis_from_id(target)
    if target.n_qubits != 2 or target.vectors is None:
        raise ValueError("search targets must be non-degenerate two-qubit bases")
    jobs = [(template, target, seed, r, budget) for r in range(restarts)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_one_restart, jobs))
    else:
        runs = [_one_restart(job) for job in jobs]
    scores = [s for _, s, _ in runs]
    k = int(np.argmax(scores))
    best_x = runs[k][0]
    verified, worst, _ = _score(confusion(best_x, template, target))
    return SearchResult(
        target=target.name,
        ebits=template.ebits,
        restarts=restarts,
        seed=seed,
        budget=budget,
        best_params=[float(v) for v in best_x],
        best_score=float(scores[k]),
        worst_case=worst,
        verified_score=verified,
        restart_scores=[float(s) for s in scores],
        traces=[t for _, _, t in runs],
    )


def decoded_protocol(params, template: ProtocolTemplate, target: MeasurementBasis) -> Protocol:
    """Template instance whose postprocess is the optimal outcome -> label assignment."""
    conf = confusion(params, template, target)
    _, _, assign = _score(conf)
    m = template.local_qubits
    outcomes = [(a, b) for a in range(1 << m) for b in range(1 << m)]
    decoder = {o: target.labels[assign[k]] for k, o in enumerate(outcomes)}
    p = template.instantiate(params, decoder, target.labels)
    return p.replace(name=f"{p.name}-{target.name}", target=target.name)


def fit_params(template: ProtocolTemplate, ua: np.ndarray, ub: np.ndarray, seed: int = 0,
               attempts: int = 20) -> np.ndarray:
    """Parameters whose local unitaries match ``ua``/``ub`` up to global phase."""
    rng = np.random.default_rng(seed)
    d = template.party_dim

    def fit(target):
        dim = target.shape[0]

        def loss(x):
            return 1.0 - abs(np.trace(target.conj().T @ template.local_unitary(x))) / dim

        best = None
        for _ in range(attempts):
            res = minimize(loss, rng.uniform(-math.pi, math.pi, d), method="BFGS", options={"gtol": 1e-12})
            if best is None or res.fun < best.fun:
                best = res
            if best.fun < 1e-13:
                break
        return best.x

    return np.concatenate([fit(ua), fit(ub)])

"""Dense state-vector and density-matrix primitives.

Basis index ``k`` encodes qubit 0 as the most significant bit, so the ket
``|q0 q1 ... q_{n-1}>`` is read left to right.  All value types are frozen and
hold read-only numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CONSTRUCT_TOL = 1e-10
EQUAL_TOL = 1e-9
PRUNE_TOL = 1e-14

_max_qubits = 12


class ResourceError(RuntimeError):
    """Raised when a register would exceed the configured qubit limit."""


class ValidationError(ValueError):
    """Raised when a value fails its construction invariants."""


def max_qubits() -> int:
    return _max_qubits


def set_max_qubits(n: int) -> int:
    """Set the register size limit and return the previous one."""
    global _max_qubits
    if n < 1:
        raise ValueError("max qubits must be positive")
    previous, _max_qubits = _max_qubits, int(n)
    return previous


def _qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def _check_size(n: int) -> None:
    if n > _max_qubits:
        raise ResourceError(f"{n} qubits exceeds the configured maximum of {_max_qubits}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    if not np.all(np.isfinite(a)):
        raise ValidationError("non-finite amplitude")
    a.setflags(write=False)
    return a


# single-qubit constants
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = (I2, X, Y, Z)
for _m in (I2, X, Y, Z, H):
    _m.setflags(write=False)

KET = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "j": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm pure state of an n-qubit register."""

    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amps))
        n = _qubits_for(amps.size)
        _check_size(n)
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > CONSTRUCT_TOL:
            raise ValidationError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amps", amps)

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.amps.size)

    @classmethod
    def from_label(cls, label: str) -> "StateVector":
        """Product state from a ket string over ``0 1 + - i j`` (``i``/``j`` are ``|±y>``)."""
        if not label or any(c not in KET for c in label):
            raise ValueError(f"bad ket label {label!r}")
        vec = np.ones(1, dtype=complex)
        for c in label:
            vec = np.kron(vec, KET[c])
        return cls(vec)

    @classmethod
    def normalized(cls, amps) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).ravel()
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValidationError("zero vector")
        return cls(amps / norm)

    def dm(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amps, other.amps))

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits}, amps={np.round(self.amps, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix (zero qubits allowed)."""

    mat: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("density matrix must be square")
        _check_size(_qubits_for(mat.shape[0]))
        if not np.allclose(mat, mat.conj().T, atol=CONSTRUCT_TOL, rtol=0):
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1) > CONSTRUCT_TOL:
            raise ValidationError(f"trace {tr!r} differs from 1")
        if np.linalg.eigvalsh(mat).min() < -CONSTRUCT_TOL:
            raise ValidationError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "mat", mat)

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.mat.shape[0])

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 1 << n_qubits
        return cls(np.eye(d) / d)

    def purity(self) -> float:
        return float(np.trace(self.mat @ self.mat).real)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    mat: np.ndarray
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        mat = _frozen(self.mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("operator must be square")
        _check_size(_qubits_for(mat.shape[0]))
        if not np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=CONSTRUCT_TOL, rtol=0):
            raise ValidationError("operator is not unitary")
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.dim)

    def dagger(self) -> "UnitaryOp":
        name = None if self.name is None else f"{self.name}^dag"
        return UnitaryOp(self.mat.conj().T, name)


@dataclass(frozen=True, eq=False)
class Projector:
    mat: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.mat)
        _qubits_for(mat.shape[0])
        if not np.allclose(mat @ mat, mat, atol=CONSTRUCT_TOL, rtol=0):
            raise ValidationError("projector is not idempotent")
        if not np.allclose(mat, mat.conj().T, atol=CONSTRUCT_TOL, rtol=0):
            raise ValidationError("projector is not Hermitian")
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.mat).real))

    @classmethod
    def onto(cls, *vectors) -> "Projector":
        """Projector onto the span of orthonormal ``vectors``."""
        vs = np.array([np.asarray(getattr(v, "amps", v), dtype=complex) for v in vectors])
        return cls(vs.T @ vs.conj())


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Labeled projective measurement.

    Either ``vectors`` (rank-one, orthonormal) or ``projectors`` (for degenerate
    observables) is given; the other is derived where possible.
    """

    labels: tuple[str, ...]
    vectors: tuple[np.ndarray, ...] | None = None
    projectors: tuple[np.ndarray, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        if len(set(labels)) != len(labels):
            raise ValidationError("basis labels must be unique")
        object.__setattr__(self, "labels", labels)
        if self.vectors is not None:
            vecs = tuple(_frozen(np.ravel(getattr(v, "amps", v))) for v in self.vectors)
            if len(vecs) != len(labels):
                raise ValidationError("one label per vector required")
            dim = vecs[0].size
            _qubits_for(dim)
            if len(vecs) != dim:
                raise ValidationError(f"{len(vecs)} vectors cannot span dimension {dim}")
            gram = np.array(vecs).conj() @ np.array(vecs).T
            if not np.allclose(gram, np.eye(dim), atol=CONSTRUCT_TOL, rtol=0):
                raise ValidationError("basis vectors are not orthonormal")
            object.__setattr__(self, "vectors", vecs)
            object.__setattr__(self, "projectors", tuple(_frozen(np.outer(v, v.conj())) for v in vecs))
        elif self.projectors is not None:
            projs = tuple(_frozen(getattr(p, "mat", p)) for p in self.projectors)
            if len(projs) != len(labels):
                raise ValidationError("one label per projector required")
            dim = projs[0].shape[0]
            _qubits_for(dim)
            for i, p in enumerate(projs):
                Projector(p)
                for q in projs[i + 1:]:
                    if not np.allclose(p @ q, 0, atol=CONSTRUCT_TOL):
                        raise ValidationError("projectors are not mutually orthogonal")
            if not np.allclose(sum(projs), np.eye(dim), atol=CONSTRUCT_TOL, rtol=0):
                raise ValidationError("projectors do not resolve the identity")
            object.__setattr__(self, "projectors", projs)
        else:
            raise ValidationError("a basis needs vectors or projectors")

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return _qubits_for(self.dim)

    @property
    def degenerate(self) -> bool:
        return self.vectors is None

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def state(self, key: str | int) -> StateVector:
        if self.vectors is None:
            raise ValueError("degenerate basis has no eigenvectors")
        k = key if isinstance(key, int) else self.index(key)
        return StateVector(self.vectors[k])

    def relabel(self, labels: Sequence[str], name: str | None = None) -> "MeasurementBasis":
        return MeasurementBasis(tuple(labels), self.vectors, None if self.vectors else self.projectors, name)


# ---------------------------------------------------------------------------
# array-level kernels shared with the protocol engine


def apply_matrix(mat: np.ndarray, targets: Sequence[int], vec: np.ndarray, n: int) -> np.ndarray:
    """Apply ``mat`` to the ``targets`` qubits of a flat ``n``-qubit amplitude array."""
    k = len(targets)
    psi = vec.reshape((2,) * n)
    op = mat.reshape((2,) * (2 * k))
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(out, list(range(k)), list(targets)).reshape(-1)


def reduce_pure(vec: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Reduced density matrix of a pure state on ``keep`` (in the given order)."""
    keep = list(keep)
    rest = [q for q in range(n) if q not in keep]
    m = np.transpose(vec.reshape((2,) * n), keep + rest).reshape(1 << len(keep), -1)
    return m @ m.conj().T


def _check_targets(targets: Sequence[int], n: int, width: int | None = None) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target qubits {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"targets {targets} out of range for {n} qubits")
    if width is not None and len(targets) != width:
        raise ValueError(f"operator acts on {width} qubits but {len(targets)} targets given")
    return targets


# ---------------------------------------------------------------------------
# public operations


def kron(a, b):
    """Tensor product of two states, operators or density matrices of the same kind."""
    if type(a) is not type(b):
        raise TypeError("kron operands must be of the same kind")
    if isinstance(a, StateVector):
        _check_size(a.n_qubits + b.n_qubits)
        return StateVector(np.kron(a.amps, b.amps))
    if isinstance(a, UnitaryOp):
        _check_size(a.n_qubits + b.n_qubits)
        name = f"{a.name}(x){b.name}" if a.name and b.name else None
        return UnitaryOp(np.kron(a.mat, b.mat), name)
    if isinstance(a, DensityMatrix):
        _check_size(a.n_qubits + b.n_qubits)
        return DensityMatrix(np.kron(a.mat, b.mat))
    raise TypeError(f"cannot take kron of {type(a).__name__}")


def kron_all(items: Iterable):
    it = iter(items)
    out = next(it)
    for x in it:
        out = kron(out, x)
    return out


def apply_on(u: UnitaryOp, targets: Sequence[int], psi: StateVector) -> StateVector:
    n = psi.n_qubits
    targets = _check_targets(targets, n, u.n_qubits)
    return StateVector(apply_matrix(u.mat, targets, psi.amps, n))


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep``, ordered as given; empty ``keep`` yields the 1x1 trace."""
    n = rho.n_qubits
    keep = _check_targets(keep, n)
    rest = [q for q in range(n) if q not in keep]
    k = len(keep)
    t = rho.mat.reshape((2,) * (2 * n))
    t = np.transpose(t, keep + rest + [q + n for q in keep] + [q + n for q in rest])
    t = t.reshape(1 << k, 1 << (n - k), 1 << k, 1 << (n - k))
    return DensityMatrix(np.einsum("ajbj->ab", t))


def born_probabilities(psi: StateVector, basis: MeasurementBasis) -> np.ndarray:
    if basis.dim != psi.amps.size:
        raise ValueError(f"basis of dimension {basis.dim} does not span a {psi.amps.size}-dim state")
    if basis.vectors is not None:
        p = np.abs(np.array(basis.vectors).conj() @ psi.amps) ** 2
    else:
        p = np.array([np.vdot(psi.amps, P @ psi.amps).real for P in basis.projectors])
    return p


def luders_update(rho: DensityMatrix, projector: Projector) -> tuple[DensityMatrix | None, float]:
    """Post-measurement state and probability; ``None`` for a (pruned) zero-probability branch."""
    if projector.dim != rho.mat.shape[0]:
        raise ValueError("projector and state dimensions differ")
    P = projector.mat
    prob = float(np.trace(rho.mat @ P).real)
    if prob < PRUNE_TOL:
        return None, max(prob, 0.0)
    post = P @ rho.mat @ P / prob
    return DensityMatrix((post + post.conj().T) / 2), prob


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    am = getattr(a, "mat", a)
    bm = getattr(b, "mat", b)
    if am.shape != bm.shape:
        raise ValueError(f"dimension mismatch {am.shape} vs {bm.shape}")
    d = am - bm
    return float(0.5 * np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum())


def same_state(a: StateVector, b: StateVector, tol: float = EQUAL_TOL) -> bool:
    """Equality up to global phase."""
    return a.amps.size == b.amps.size and abs(abs(a.overlap(b)) - 1) < tol


def haar_random_state(n_qubits: int, seed) -> StateVector:
    """Haar-distributed pure state; ``seed`` is an int, SeedSequence or Generator."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = 1 << n_qubits
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return StateVector(z / np.linalg.norm(z))


def entanglement_entropy(psi: StateVector, part: Sequence[int]) -> float:
    """Von Neumann entropy (bits) of ``part`` for a pure state."""
    w = np.linalg.eigvalsh(reduce_pure(psi.amps, part, psi.n_qubits))
    w = w[w > 1e-15]
    return float(-(w * np.log2(w)).sum())


def schmidt_coefficients(psi: StateVector, part: Sequence[int]) -> np.ndarray:
    n = psi.n_qubits
    part = list(part)
    rest = [q for q in range(n) if q not in part]
    m = np.transpose(psi.amps.reshape((2,) * n), part + rest).reshape(1 << len(part), -1)
    return np.linalg.svd(m, compute_uv=False)

"""Constructors for the named measurement bases.

Every basis is addressable by a string id (see :func:`basis_from_id`):
``computational[:n]``, ``bell``, ``twisted``, ``t_alpha:<float>``, ``ejm``,
``ghz:<n>``, plus the single- and two-qubit Pauli product bases used inside
protocols (``z``, ``x``, ``y``, ``zz``, ``yy``, ``yz-bell``, ``zy-bell``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    CONSTRUCT_TOL,
    KET,
    X,
    Y,
    Z,
    DensityMatrix,
    MeasurementBasis,
    UnitaryOp,
    ValidationError,
)

BELL_LABELS = ("Phi+", "Psi+", "Psi-", "Phi-")
TWISTED_LABELS = ("00", "01", "1+", "1-")
EJM_LABELS = ("0", "1", "2", "3")

_S3 = math.sqrt(3)
EJM_SCHMIDT = ((_S3 + 1) / (2 * math.sqrt(2)), (_S3 - 1) / (2 * math.sqrt(2)))


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.length() > 1 + CONSTRUCT_TOL:
            raise ValidationError(f"Bloch vector longer than 1: {self.length()}")

    def length(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: "BlochVector") -> float:
        return float(self.as_array() @ other.as_array())

    def __neg__(self):
        return BlochVector(-self.x, -self.y, -self.z)


def computational_basis(n: int = 1) -> MeasurementBasis:
    if n < 1:
        raise ValueError("n must be at least 1")
    d = 1 << n
    labels = ["".join(bits) for bits in itertools.product("01", repeat=n)]
    return MeasurementBasis(tuple(labels), tuple(np.eye(d, dtype=complex)), name=f"computational:{n}")


def bell_basis() -> MeasurementBasis:
    """Bell basis ordered so outcome ``k`` pairs with the Pauli correction ``sigma_k``."""
    s = 1 / math.sqrt(2)
    vecs = (
        np.array([s, 0, 0, s]),
        np.array([0, s, s, 0]),
        np.array([0, s, -s, 0]),
        np.array([s, 0, 0, -s]),
    )
    return MeasurementBasis(BELL_LABELS, vecs, name="bell")


def t_alpha_basis(alpha: float) -> MeasurementBasis:
    """Twisted product basis ``{|00>, |01>, |1 alpha>, |1 alpha-bar>}`` for ``0 < alpha < pi``."""
    if not 0 < alpha < math.pi:
        raise ValueError(f"alpha must lie in (0, pi), got {alpha}")
    c, s = math.cos(alpha / 2), math.sin(alpha / 2)
    a = np.array([c, s], dtype=complex)
    abar = np.array([s, -c], dtype=complex)
    vecs = (
        np.kron(KET["0"], KET["0"]),
        np.kron(KET["0"], KET["1"]),
        np.kron(KET["1"], a),
        np.kron(KET["1"], abar),
    )
    return MeasurementBasis(("00", "01", "1a", "1abar"), vecs, name=f"t_alpha:{alpha!r}")


def twisted_basis() -> MeasurementBasis:
    vecs = [np.kron(KET[p], KET[q]) for p, q in ("00", "01", "1+", "1-")]
    return MeasurementBasis(TWISTED_LABELS, tuple(vecs), name="twisted")


def tetrahedron_vectors() -> list[BlochVector]:
    return [BlochVector(*(np.array(v) / _S3)) for v in [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]]


def bloch_kets(m: BlochVector) -> tuple[np.ndarray, np.ndarray]:
    """The kets ``|m>`` and ``|-m>`` in the spherical-angle phase convention.

    ``|m>  = cos(t/2) e^{-ip/2}|0> + sin(t/2) e^{ip/2}|1>``
    ``|-m> = sin(t/2) e^{-ip/2}|0> - cos(t/2) e^{ip/2}|1>``

    The relative phase fixed here matters for the EJM localization tables.
    """
    u = m.as_array() / m.length()
    theta = math.acos(max(-1.0, min(1.0, u[2])))
    phi = math.atan2(u[1], u[0])
    lo, hi = np.exp(-0.5j * phi), np.exp(0.5j * phi)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([c * lo, s * hi]), np.array([s * lo, -c * hi])


def ejm_basis() -> MeasurementBasis:
    big, small = EJM_SCHMIDT
    vecs = []
    for m in tetrahedron_vectors():
        up, down = bloch_kets(m)
        vecs.append(big * np.kron(up, down) + small * np.kron(down, up))
    return MeasurementBasis(EJM_LABELS, tuple(vecs), name="ejm")


def ejm_unitary() -> UnitaryOp:
    """Unitary whose columns are the EJM states."""
    return UnitaryOp(np.array(ejm_basis().vectors).T, "ejm-u")


def ghz_labels(n: int) -> tuple[str, ...]:
    reps = ["0" + "".join(b) for b in itertools.product("01", repeat=n - 1)]
    return tuple(sign + x for x in reps for sign in "+-")


def ghz_basis(n: int) -> MeasurementBasis:
    """States ``(|x> ± |~x>)/sqrt(2)`` labeled ``"±x"`` with the first bit of ``x`` fixed to 0."""
    if n < 2:
        raise ValueError("GHZ basis needs n >= 2")
    d = 1 << n
    vecs = []
    for label in ghz_labels(n):
        sign = 1 if label[0] == "+" else -1
        x = int(label[1:], 2)
        v = np.zeros(d, dtype=complex)
        v[x] = 1 / math.sqrt(2)
        v[(d - 1) ^ x] = sign / math.sqrt(2)
        vecs.append(v)
    return MeasurementBasis(ghz_labels(n), tuple(vecs), name=f"ghz:{n}")


def ghz_state(n: int) -> np.ndarray:
    return ghz_basis(n).vectors[0]


def product_basis(first: tuple[np.ndarray, np.ndarray], second: tuple[np.ndarray, np.ndarray], name=None,
                  labels=("++", "+-", "-+", "--")) -> MeasurementBasis:
    vecs = tuple(np.kron(a, b) for a in first for b in second)
    return MeasurementBasis(labels, vecs, name=name)


def bell_type_basis(first, second, name=None) -> MeasurementBasis:
    """``{|+a,+b> ± |-a,-b>, |+a,-b> ± |-a,+b>}/sqrt(2)`` for local bases ``first``/``second``."""
    (ap, am), (bp, bm) = first, second
    s = 1 / math.sqrt(2)
    vecs = (
        s * (np.kron(ap, bp) + np.kron(am, bm)),
        s * (np.kron(ap, bp) - np.kron(am, bm)),
        s * (np.kron(ap, bm) + np.kron(am, bp)),
        s * (np.kron(ap, bm) - np.kron(am, bp)),
    )
    return MeasurementBasis(("++,+", "++,-", "+-,+", "+-,-"), vecs, name=name)


_ZPAIR = (KET["0"], KET["1"])
_XPAIR = (KET["+"], KET["-"])
_YPAIR = (KET["i"], KET["j"])


def _pauli_bases() -> dict:
    return {
        "z": MeasurementBasis(("0", "1"), _ZPAIR, name="z"),
        "x": MeasurementBasis(("+", "-"), _XPAIR, name="x"),
        "y": MeasurementBasis(("+y", "-y"), _YPAIR, name="y"),
        "zz": product_basis(_ZPAIR, _ZPAIR, "zz"),
        "yy": product_basis(_YPAIR, _YPAIR, "yy"),
        "yz-bell": bell_type_basis(_YPAIR, _ZPAIR, "yz-bell"),
        "zy-bell": bell_type_basis(_ZPAIR, _YPAIR, "zy-bell"),
    }


def bloch_vector(rho: DensityMatrix) -> BlochVector:
    m = getattr(rho, "mat", rho)
    if m.shape != (2, 2):
        raise ValueError("Bloch vector needs a single-qubit state")
    return BlochVector(*(float(np.trace(m @ P).real) for P in (X, Y, Z)))


def basis_from_id(basis_id: str) -> MeasurementBasis:
    """Resolve a basis id string; raises ``ValueError`` for unknown ids."""
    key, _, arg = basis_id.strip().partition(":")
    key = key.lower()
    try:
        if key == "computational":
            return computational_basis(int(arg) if arg else 2)
        if key == "bell" and not arg:
            return bell_basis()
        if key == "twisted" and not arg:
            return twisted_basis()
        if key in ("t_alpha", "t-alpha"):
            return t_alpha_basis(float(arg))
        if key == "ejm" and not arg:
            return ejm_basis()
        if key == "ghz":
            return ghz_basis(int(arg))
        if key.startswith("ghz") and key[3:].isdigit() and not arg:
            return ghz_basis(int(key[3:]))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad basis id {basis_id!r}: {exc}") from None
    paulis = _pauli_bases()
    if key in paulis and not arg:
        return paulis[key]
    raise ValueError(f"unknown basis id {basis_id!r}")

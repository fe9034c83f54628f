"""Parsing of the compact input-state notation used on the command line.

Accepted forms::

    00, 1+, 0i         product kets over 0 1 + - i j
    bell:2, bell:Phi+  eigenstate of a named basis, by index or label
    ejm:1, twisted:1+
    ghz3:+000, ghz:3:+000
    haar:<seed>        seeded Haar-random state (needs the register size)
    [1, 0, 0, 0]       inline amplitudes; entries may be numbers,
                       [re, im] pairs or strings such as "0.5-0.5j"
"""

from __future__ import annotations

import json

import numpy as np

from .bases import basis_from_id
from .linalg import KET, StateVector, haar_random_state


def _amplitude(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"complex pair must have two entries, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    return complex(x)


def parse_state(text: str, n_qubits: int | None = None) -> StateVector:
    """Resolve ``text`` to a state; ``n_qubits`` is required for ``haar:`` and checked otherwise.

    Raises ``ValueError`` for anything malformed.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty state spec")
    if text.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad amplitude list: {exc}") from None
        psi = StateVector(np.array([_amplitude(x) for x in data]))
    elif text.startswith("haar:"):
        if n_qubits is None:
            raise ValueError("haar states need a register size")
        try:
            seed = int(text[5:])
        except ValueError:
            raise ValueError(f"bad haar seed in {text!r}") from None
        psi = haar_random_state(n_qubits, seed)
    elif ":" in text or text.startswith("ghz"):
        basis_id, _, key = text.rpartition(":")
        if not basis_id:
            raise ValueError(f"bad state spec {text!r}")
        basis = basis_from_id(basis_id)
        if key in basis.labels:
            psi = basis.state(key)
        elif key.isdigit() and int(key) < len(basis):
            psi = basis.state(int(key))
        else:
            raise ValueError(f"basis {basis.name} has no eigenstate {key!r}")
    elif all(c in KET for c in text):
        psi = StateVector.from_label(text)
    else:
        raise ValueError(f"bad state spec {text!r}")
    if n_qubits is not None and psi.n_qubits != n_qubits:
        raise ValueError(f"state has {psi.n_qubits} qubits, expected {n_qubits}")
    return psi

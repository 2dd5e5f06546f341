import numpy as np
import pytest

from blindspin.compiler import Circuit, Gate, PRIMITIVE_KINDS


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_primitive_circuit(rng, width, n_prims):
    """Random circuit over the primitive set {rz, rx, uxy}."""
    gates = []
    kinds = list(PRIMITIVE_KINDS) if width >= 2 else ["rz", "rx"]
    for _ in range(n_prims):
        kind = kinds[rng.integers(0, len(kinds))]
        if kind == "uxy":
            q1, q2 = rng.choice(width, size=2, replace=False)
            gates.append(Gate("uxy", (int(q1), int(q2))))
        else:
            q = int(rng.integers(0, width))
            gates.append(Gate(kind, (q,), float(rng.uniform(0, 2 * np.pi))))
    return Circuit(width, tuple(gates))


def random_clifford_circuit(rng, n, depth):
    gates = []
    for _ in range(depth):
        kind = ("h", "s", "x", "z", "cnot")[rng.integers(0, 5)]
        if kind == "cnot" and n >= 2:
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(Gate("cnot", (int(a), int(b))))
        elif kind != "cnot":
            gates.append(Gate(kind, (int(rng.integers(0, n)),)))
    return Circuit(n, tuple(gates))


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)

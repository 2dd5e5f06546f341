"""Dense complex linear algebra for multi-spin registers.

Conventions used throughout the package:

- a register of q spins lives in dimension 2**q, with site 0 the most
  significant bit of the basis-state index (so |0...0> is index 0 and
  flipping site 0 moves you by 2**(q-1));
- spin operators are Pauli/2, hbar = 1, energies in units of the central
  field h0;
- all operators and states are plain complex numpy arrays.
"""
from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

SX, SY, SZ = X / 2, Y / 2, Z / 2
SPLUS = SX + 1j * SY    # |0><1|
SMINUS = SX - 1j * SY   # |1><0|

HERM_TOL = 1e-10


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the left factor on the more significant bits."""
    return np.kron(a, b)


def kron_all(ops) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def num_sites(dim: int) -> int:
    q = int(dim).bit_length() - 1
    if dim <= 0 or 2**q != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return q


def embed(op: np.ndarray, targets, q: int) -> np.ndarray:
    """Extend ``op`` acting on ``targets`` to the full q-site register.

    ``op`` must act on len(targets) sites (dimension 2**k); the result acts
    as identity elsewhere.  Site 0 is the most significant bit.
    """
    targets = list(targets)
    k = len(targets)
    if len(set(targets)) != k:
        raise ValueError(f"duplicate targets {targets}")
    if any(t < 0 or t >= q for t in targets):
        raise ValueError(f"targets {targets} out of range for {q} sites")
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} targets")
    d = 2**q
    rest = [s for s in range(q) if s not in targets]
    perm = targets + rest
    # index of each basis state in the permuted (targets-first) ordering
    src = np.arange(d)
    permuted = np.zeros(d, dtype=np.int64)
    for j, s in enumerate(perm):
        permuted |= ((src >> (q - 1 - s)) & 1) << (q - 1 - j)
    big = np.kron(op, np.eye(2 ** (q - k), dtype=complex))
    return big[np.ix_(permuted, permuted)]


def is_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> bool:
    return bool(np.all(np.abs(a - a.conj().T) <= tol))

def is_unitary(a: np.ndarray, tol: float = HERM_TOL) -> bool:
    d = a.shape[0]
    return bool(np.all(np.abs(a.conj().T @ a - np.eye(d)) <= tol))


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian h, by spectral decomposition."""
    if not is_hermitian(h):
        raise ValueError("expm_hermitian requires a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def operator_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(a, 2))


def partial_trace(rho: np.ndarray, keep, q: int) -> np.ndarray:
    """Reduced density matrix on the (sorted) kept sites."""
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(s < 0 or s >= q for s in keep):
        raise ValueError(f"keep sites {keep} out of range for {q} sites")
    traced = [s for s in range(q) if s not in keep]
    t = rho.reshape([2] * (2 * q))
    for removed, s in enumerate(traced):
        # traced is ascending, so `removed` earlier labels sat before s
        ax = s - removed
        t = np.trace(t, axis1=ax, axis2=ax + q - removed)
    k = len(keep)
    return t.reshape(2**k, 2**k)


def fidelity_unitary(u: np.ndarray, v: np.ndarray) -> float:
    """|tr(u^dag v)| / dim, insensitive to global phase."""
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    d = u.shape[0]
    return float(abs(np.trace(u.conj().T @ v)) / d)


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for pure state vectors."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(abs(np.vdot(a, b)) ** 2)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) ||rho - sigma||_1 for Hermitian matrices."""
    w = np.linalg.eigvalsh(rho - sigma)
    return float(np.sum(np.abs(w)) / 2)


def check_state(psi: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Validate a pure-state vector (power-of-two length, unit norm)."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    num_sites(psi.shape[0])
    if not np.all(np.isfinite(psi.view(float))):
        raise ValueError("state has non-finite amplitudes")
    if abs(np.vdot(psi, psi).real - 1.0) > tol:
        raise ValueError("state is not normalized")
    return psi


def check_density(rho: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, PSD within tol."""
    rho = np.asarray(rho, dtype=complex)
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def basis_state(bits, q: int | None = None) -> np.ndarray:
    """Computational basis state from a bit sequence (site 0 first)."""
    bits = list(bits)
    q = len(bits) if q is None else q
    if len(bits) != q:
        raise ValueError("bit count does not match register size")
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"invalid bit {b}")
        idx = (idx << 1) | b
    psi = np.zeros(2**q, dtype=complex)
    psi[idx] = 1.0
    return psi

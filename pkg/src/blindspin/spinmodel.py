"""Central spin Hamiltonian and its effective bath Hamiltonians.

One central spin (site 0) couples isotropically to n bath spins sitting in
a strong field h0.  For h0 much larger than the couplings the dynamics
splits into two branches labelled by the central-spin state, and each
branch evolves the bath under an effective Hamiltonian obtained from a
second-order Schrieffer-Wolff transformation:

    H_up   = -1/(2 h0) sum_{j<k} g_j g_k (Sx_j Sx_k + Sy_j Sy_k)
             - sum_j (h_j - g_j/2 - g_j^2/(4 h0)) Sz_j
    H_down = +1/(2 h0) sum_{j<k} g_j g_k (Sx_j Sx_k + Sy_j Sy_k)
             - sum_j (h_j + g_j/2 - g_j^2/(4 h0)) Sz_j

(identity-proportional terms dropped).  Both sign conventions here were
fixed against the numeric Schrieffer-Wolff evaluation in
``build_effective_numeric``; with bath fields h_j = +g_j^2/(4 h0) the two
branches are exact opposites, H_up = -H_down, which is what the delegation
protocol relies on.

The perturbation scale is eta = n * mean|g_j| and all second-order
statements degrade as O(eta^3).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    HADAMARD,
    SMINUS,
    SPLUS,
    SX,
    SY,
    SZ,
    embed,
    expm_hermitian,
    is_hermitian,
    kron_all,
    operator_norm,
)

ETA_WARN_FACTOR = 0.3

Branch = str  # "up" | "down"
_BRANCH_SIGN = {"up": +1.0, "down": -1.0}


def _branch_sign(branch: Branch) -> float:
    try:
        return _BRANCH_SIGN[branch]
    except KeyError:
        raise ValueError(f"unknown branch {branch!r}, expected 'up' or 'down'") from None


@dataclass(frozen=True)
class CentralSpinParams:
    """Couplings and fields of the central spin model.

    gamma[j] couples the central spin to bath spin j (units of h0);
    h_bath[j] is the field on bath spin j; axis is the field direction for
    every spin, 'z' or 'x'.
    """

    gamma: np.ndarray
    h_bath: np.ndarray
    h0: float = 1.0
    axis: str = "z"

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        h = np.atleast_1d(np.asarray(self.h_bath, dtype=float))
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "h_bath", h)
        if g.ndim != 1 or g.size < 1:
            raise ValueError("gamma must be a nonempty 1-d array")
        if h.shape != g.shape:
            raise ValueError("h_bath must match gamma in length")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h)) and np.isfinite(self.h0)):
            raise ValueError("parameters must be finite")
        if self.axis not in ("z", "x"):
            raise ValueError(f"axis must be 'z' or 'x', got {self.axis!r}")
        if self.eta > ETA_WARN_FACTOR * abs(self.h0):
            warnings.warn(
                f"eta = {self.eta:.3g} exceeds {ETA_WARN_FACTOR} * h0; "
                "second-order effective Hamiltonians may be inaccurate",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return self.gamma.size

    @property
    def eta(self) -> float:
        return float(self.n * np.mean(np.abs(self.gamma)))


def choose_antisymmetric_fields(gamma, h0: float = 1.0) -> np.ndarray:
    """Bath fields h_j = +gamma_j^2 / (4 h0) that make H_up = -H_down.

    The sign was resolved numerically: with this choice the second-order
    field coefficients of the two branches are exact opposites (the +-g_j/2
    terms already are, and the g_j^2/(4 h0) contributions cancel against
    h_j in both branches).
    """
    gamma = np.asarray(gamma, dtype=float)
    return gamma**2 / (4.0 * h0)


def antisymmetric_params(gamma, h0: float = 1.0, axis: str = "z") -> CentralSpinParams:
    """CentralSpinParams with the antisymmetric field choice applied."""
    gamma = np.asarray(gamma, dtype=float)
    return CentralSpinParams(gamma, choose_antisymmetric_fields(gamma, h0), h0, axis)


def build_central_hamiltonian(p: CentralSpinParams) -> np.ndarray:
    """Full (n+1)-spin Hamiltonian, site 0 = central spin.

    sum_j gamma_j S0.Sj - h0 S0^a - sum_j h_j Sj^a  with a = p.axis.
    The Heisenberg coupling is isotropic, so the x-axis variant is the
    z-axis operator conjugated by the z->x basis rotation on every spin.
    """
    q = p.n + 1
    d = 2**q
    H = np.zeros((d, d), dtype=complex)
    for j in range(1, q):
        g = p.gamma[j - 1]
        if g != 0.0:
            for s in (SX, SY, SZ):
                H += g * embed(s, [0], q) @ embed(s, [j], q)
    axis_op = SZ if p.axis == "z" else SX
    H -= p.h0 * embed(axis_op, [0], q)
    for j in range(1, q):
        if p.h_bath[j - 1] != 0.0:
            H -= p.h_bath[j - 1] * embed(axis_op, [j], q)
    return H


def build_effective_closed(p: CentralSpinParams, branch: Branch) -> np.ndarray:
    """Closed-form second-order effective bath Hamiltonian (constants dropped).

    Derived for the z-axis field; x-axis callers conjugate the result
    themselves (see approx_controlled_evolution).
    """
    if p.axis != "z":
        raise ValueError("closed-form effective Hamiltonian is derived for axis='z'")
    sign = _branch_sign(branch)
    n = p.n
    d = 2**n
    H = np.zeros((d, d), dtype=complex)
    for j in range(n):
        for k in range(j + 1, n):
            coef = -sign * p.gamma[j] * p.gamma[k] / (2.0 * p.h0)
            if coef != 0.0:
                H += coef * (
                    embed(SX, [j], n) @ embed(SX, [k], n)
                    + embed(SY, [j], n) @ embed(SY, [k], n)
                )
    for j in range(n):
        c = -(p.h_bath[j] - sign * p.gamma[j] / 2.0 - p.gamma[j] ** 2 / (4.0 * p.h0))
        if c != 0.0:
            H += c * embed(SZ, [j], n)
    return H


def branch_energy_offset(p: CentralSpinParams, branch: Branch) -> float:
    """Identity-proportional part of the effective Hamiltonian per branch.

    -h0/2 - sum g_j^2/(8 h0) on the up branch and its opposite on the down
    branch.  Dropped from the bath operators, but needed as a relative
    phase when the two branches are combined into a controlled evolution.
    """
    sign = _branch_sign(branch)
    return float(sign * (-p.h0 / 2.0 - np.sum(p.gamma**2) / (8.0 * p.h0)))


def t1_generator(p: CentralSpinParams) -> np.ndarray:
    """First-order Schrieffer-Wolff generator (anti-Hermitian, block-off-diagonal).

    T1 = -1/(2 h0) sum_j gamma_j (S0+ Sj- - S0- Sj+), satisfying
    [H0, T1] = H_od with H0 = -h0 S0^z.
    """
    if p.h0 == 0.0:
        raise ValueError("t1_generator requires h0 != 0")
    q = p.n + 1
    d = 2**q
    T = np.zeros((d, d), dtype=complex)
    for j in range(1, q):
        g = p.gamma[j - 1]
        if g != 0.0:
            T += g * (
                embed(SPLUS, [0], q) @ embed(SMINUS, [j], q)
                - embed(SMINUS, [0], q) @ embed(SPLUS, [j], q)
            )
    return -T / (2.0 * p.h0)


def _split_hamiltonian(p: CentralSpinParams):
    """H0, H_d (block-diagonal), H_od (block-off-diagonal) in the z basis."""
    q = p.n + 1
    d = 2**q
    H0 = -p.h0 * embed(SZ, [0], q)
    Hd = np.zeros((d, d), dtype=complex)
    Hod = np.zeros((d, d), dtype=complex)
    for j in range(1, q):
        Hd -= p.h_bath[j - 1] * embed(SZ, [j], q)
        g = p.gamma[j - 1]
        if g != 0.0:
            Hd += g * embed(SZ, [0], q) @ embed(SZ, [j], q)
            Hod += g * (
                embed(SX, [0], q) @ embed(SX, [j], q)
                + embed(SY, [0], q) @ embed(SY, [j], q)
            )
    return H0, Hd, Hod


def _central_block(m: np.ndarray, n: int, branch: Branch) -> np.ndarray:
    half = 2**n
    return m[:half, :half] if branch == "up" else m[half:, half:]


def _strip_constant(m: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    return m - np.trace(m) / d * np.eye(d)


def build_effective_numeric(p: CentralSpinParams, branch: Branch) -> np.ndarray:
    """Second-order effective bath Hamiltonian from explicit matrices.

    Evaluates P (H0 + H_d + H_od) P + (1/2) P [T1, H_od] P with P the
    projector onto the requested central-spin branch, extracts the bath
    block and strips the constant part.  This is the operational source of
    truth the closed form was checked against.
    """
    if p.axis != "z":
        raise ValueError("numeric effective Hamiltonian is derived for axis='z'")
    if p.h0 == 0.0:
        raise ValueError("degenerate unperturbed Hamiltonian: h0 = 0")
    _branch_sign(branch)
    q = p.n + 1
    d = 2**q
    H0, Hd, Hod = _split_hamiltonian(p)
    T1 = t1_generator(p)
    half = 2**p.n
    P = np.zeros((d, d), dtype=complex)
    if branch == "up":
        P[:half, :half] = np.eye(half)
    else:
        P[half:, half:] = np.eye(half)
    M = H0 @ P + P @ (Hd + Hod) @ P + 0.5 * P @ (T1 @ Hod - Hod @ T1) @ P
    return _strip_constant(_central_block(M, p.n, branch))


def build_effective_exact(p: CentralSpinParams, branch: Branch) -> np.ndarray:
    """Effective bath Hamiltonian from exact block diagonalization.

    Finds the 2**n eigenvectors of the full Hamiltonian adiabatically
    connected to the requested central-spin branch, rotates with the
    direct (closest) block-diagonalizing unitary and returns the bath
    block, constant part stripped.  Differs from the second-order forms at
    O(eta^3); used to measure their truncation error.
    """
    if p.axis != "z":
        raise ValueError("exact effective Hamiltonian is computed for axis='z'")
    if p.h0 == 0.0:
        raise ValueError("degenerate unperturbed Hamiltonian: h0 = 0")
    _branch_sign(branch)
    n = p.n
    q = n + 1
    d = 2**q
    half = 2**n
    H = build_central_hamiltonian(p)
    w, v = np.linalg.eigh(H)
    weight_up = np.sum(np.abs(v[:half, :]) ** 2, axis=0)
    order = np.argsort(-weight_up)
    up_idx, down_idx = np.sort(order[:half]), np.sort(order[half:])
    if weight_up[up_idx].min() <= 0.5:
        raise ValueError("branches are not separated; eta too large for h0")
    vecs = v[:, up_idx]
    P = vecs @ vecs.conj().T
    P0 = np.zeros((d, d), dtype=complex)
    P0[:half, :half] = np.eye(half)
    D = (P0 - P) @ (P0 - P)
    ww, vv = np.linalg.eigh(np.eye(d) - D)
    inv_sqrt = (vv * (1.0 / np.sqrt(ww))) @ vv.conj().T
    Q, Q0 = np.eye(d) - P, np.eye(d) - P0
    U = (P @ P0 + Q @ Q0) @ inv_sqrt
    Ht = U.conj().T @ H @ U
    return _strip_constant(_central_block(Ht, n, branch))


def _rotation_to_axis(axis: str, q: int) -> np.ndarray | None:
    """Basis rotation mapping the z construction to the requested axis."""
    if axis == "z":
        return None
    return kron_all([HADAMARD] * q)


def approx_controlled_evolution(p: CentralSpinParams, t: float) -> np.ndarray:
    """Controlled-evolution approximation of exp(-i H_c t).

    |0><0| (x) exp(-i H_up t) + |1><1| (x) exp(-i H_down t), with the
    central-spin states and bath operators taken along p.axis and each
    branch carrying its energy offset as a phase (the offsets are opposite,
    so they matter whenever the central spin superposes the branches).
    """
    pz = CentralSpinParams(p.gamma, p.h_bath, p.h0, "z")
    n = p.n
    half = 2**n
    h_up = build_effective_closed(pz, "up")
    h_dn = build_effective_closed(pz, "down")
    u_up = np.exp(-1j * branch_energy_offset(pz, "up") * t) * expm_hermitian(h_up, t)
    u_dn = np.exp(-1j * branch_energy_offset(pz, "down") * t) * expm_hermitian(h_dn, t)
    U = np.zeros((2 * half, 2 * half), dtype=complex)
    U[:half, :half] = u_up
    U[half:, half:] = u_dn
    R = _rotation_to_axis(p.axis, n + 1)
    return U if R is None else R @ U @ R


def evolution_error(p: CentralSpinParams, t: float, dressed: bool = False) -> float:
    """Operator-norm error of the controlled-evolution approximation.

    ``dressed=False`` compares exp(-i H_c t) directly against
    approx_controlled_evolution: this error is first order in eta because
    the effective Hamiltonians live in the frame rotated by exp(T1), which
    is identity only to O(eta).  ``dressed=True`` conjugates the
    approximation by exp(T1), measuring the quality of the second-order
    generators themselves; that error is O(eta^2).
    """
    H = build_central_hamiltonian(p)
    exact = expm_hermitian(H, t)
    approx = approx_controlled_evolution(p, t)
    if dressed:
        pz = CentralSpinParams(p.gamma, p.h_bath, p.h0, "z")
        T1 = t1_generator(pz)
        R = _rotation_to_axis(p.axis, p.n + 1)
        if R is not None:
            T1 = R @ T1 @ R
        E = expm_hermitian(1j * T1, 1.0)  # exp(T1); i*T1 is Hermitian
        approx = E.conj().T @ approx @ E
    return operator_norm(exact - approx)

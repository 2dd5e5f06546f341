"""Server verification: permutation circuits, stabilizer cross-checks, Simon.

The client can grade the server because the computation is hidden: the
server can only return correct outputs by actually running the requested
rounds.  Three escalating probes:

- permutation circuits (classical outcome, known only to the client);
- stabilizer circuits, cross-checked against a binary-tableau simulator;
- Simon's problem instances, whose hidden string the protocol recovers
  with O(n) oracle queries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiler import Circuit, Gate, gate_matrix
from .linalg import basis_state
from .protocol import ProtocolOutcome, ServerBehavior, honest, run_protocol3

CLIFFORD_GATES = ("h", "s", "cnot", "x", "z")


# ---------------------------------------------------------------------------
# stabilizer tableau (destabilizer/stabilizer binary matrix form)

class StabilizerTableau:
    """Binary-matrix Clifford simulator.

    Rows 0..n-1 are destabilizers, rows n..2n-1 stabilizers; columns are
    the X part, the Z part, and one phase bit, so the state is a
    (2n) x (2n+1) binary matrix.  Updates mutate in place.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        self.m = np.zeros((2 * n, 2 * n + 1), dtype=np.uint8)
        for i in range(n):
            self.m[i, i] = 1                # destabilizer X_i
            self.m[n + i, n + i] = 1        # stabilizer Z_i

    def copy(self) -> "StabilizerTableau":
        t = StabilizerTableau(self.n)
        t.m = self.m.copy()
        return t

    @property
    def x(self) -> np.ndarray:
        return self.m[:, : self.n]

    @property
    def z(self) -> np.ndarray:
        return self.m[:, self.n : 2 * self.n]

    @property
    def r(self) -> np.ndarray:
        return self.m[:, 2 * self.n]

    def is_valid(self) -> bool:
        """Rows must stay a symplectic generating set: full rank over GF(2)."""
        rows = [int("".join(map(str, row[:-1])), 2) for row in self.m]
        return _gf2_rank(rows) == 2 * self.n

    # -- gate updates ------------------------------------------------------

    def apply(self, kind: str, *qubits: int) -> "StabilizerTableau":
        if any(q < 0 or q >= self.n for q in qubits):
            raise ValueError(f"qubits {qubits} out of range")
        x, z, n = self.x, self.z, self.n
        if kind == "h":
            (q,) = qubits
            self.r[:] ^= x[:, q] & z[:, q]
            x[:, q], z[:, q] = z[:, q].copy(), x[:, q].copy()
        elif kind == "s":
            (q,) = qubits
            self.r[:] ^= x[:, q] & z[:, q]
            z[:, q] ^= x[:, q]
        elif kind == "x":
            (q,) = qubits
            self.r[:] ^= z[:, q]
        elif kind == "z":
            (q,) = qubits
            self.r[:] ^= x[:, q]
        elif kind == "cnot":
            a, b = qubits
            self.r[:] ^= x[:, a] & z[:, b] & (x[:, b] ^ z[:, a] ^ 1)
            x[:, b] ^= x[:, a]
            z[:, a] ^= z[:, b]
        else:
            raise ValueError(f"not a Clifford tableau gate: {kind!r}")
        return self

    # -- measurement -------------------------------------------------------

    def _g(self, x1, z1, x2, z2):
        """Phase exponent of multiplying two Pauli factors (values in {-1,0,1})."""
        if x1 == 0 and z1 == 0:
            return 0
        if x1 == 1 and z1 == 1:
            return int(z2) - int(x2)
        if x1 == 1 and z1 == 0:
            return int(z2) * (2 * int(x2) - 1)
        return int(x2) * (1 - 2 * int(z2))

    def _rowsum(self, h: int, i: int, into: np.ndarray | None = None):
        """Row h *= row i (Pauli product with phase tracking)."""
        tgt = self.m[h] if into is None else into
        phase = 2 * int(tgt[-1]) + 2 * int(self.m[i, -1])
        for q in range(self.n):
            phase += self._g(self.m[i, q], self.m[i, self.n + q],
                             tgt[q], tgt[self.n + q])
        tgt[: 2 * self.n] ^= self.m[i, : 2 * self.n]
        tgt[-1] = (phase % 4) // 2

    def measure(self, q: int, rng: np.random.Generator,
                forced: int | None = None) -> tuple[int, bool]:
        """Measure Z on qubit q; returns (outcome, deterministic).

        A random outcome is sampled from rng unless ``forced`` pins it
        (both values have probability 1/2, so forcing is postselection of
        an equally likely branch, used when cross-checking another
        simulator's trajectory).
        """
        if q < 0 or q >= self.n:
            raise ValueError(f"qubit {q} out of range")
        n = self.n
        anticommuting = [i for i in range(n, 2 * n) if self.m[i, q]]
        if anticommuting:
            p = anticommuting[0]
            for i in range(2 * n):
                if i != p and self.m[i, q]:
                    self._rowsum(i, p)
            self.m[p - n] = self.m[p]
            self.m[p] = 0
            self.m[p, n + q] = 1
            outcome = int(rng.integers(0, 2)) if forced is None else int(forced)
            self.m[p, -1] = outcome
            return outcome, False
        scratch = np.zeros(2 * n + 1, dtype=np.uint8)
        for i in range(n):
            if self.m[i, q]:
                self._rowsum(n + i, i, into=scratch)
        outcome = int(scratch[-1])
        if forced is not None and forced != outcome:
            raise ValueError("cannot force a deterministic measurement to the other value")
        return outcome, True


def tableau_apply(t: StabilizerTableau, kind: str, *qubits: int) -> StabilizerTableau:
    """Apply a Clifford gate to the tableau (mutates and returns it)."""
    return t.apply(kind, *qubits)


def tableau_measure(t: StabilizerTableau, qubit: int,
                    rng: np.random.Generator) -> tuple[int, StabilizerTableau]:
    outcome, _ = t.measure(qubit, rng)
    return outcome, t


# ---------------------------------------------------------------------------
# GF(2) linear algebra

def _gf2_rank(rows: list[int]) -> int:
    rank = 0
    pivots: list[int] = []
    for row in rows:
        for p in pivots:
            row = min(row, row ^ p)
        if row:
            pivots.append(row)
            pivots.sort(reverse=True)
            rank += 1
    return rank


def gf2_nullspace(rows, width: int) -> list[tuple[int, ...]]:
    """Basis of the right nullspace over GF(2) by Gaussian elimination.

    ``rows`` is a sequence of bit sequences of length ``width``; every
    returned vector v satisfies row . v = 0 (mod 2) for all rows.
    """
    mat = [list(map(int, r)) for r in rows]
    for r in mat:
        if len(r) != width:
            raise ValueError("row width mismatch")
    pivot_of_col: dict[int, int] = {}
    rank = 0
    for row in mat:
        row = row[:]
        for col, pr in pivot_of_col.items():
            if row[col]:
                row = [a ^ b for a, b in zip(row, pr)]
        lead = next((c for c, v in enumerate(row) if v), None)
        if lead is None:
            continue
        # eliminate the new pivot column from existing pivot rows
        for col, pr in list(pivot_of_col.items()):
            if pr[lead]:
                pivot_of_col[col] = [a ^ b for a, b in zip(pr, row)]
        pivot_of_col[lead] = row
        rank += 1
    free_cols = [c for c in range(width) if c not in pivot_of_col]
    basis = []
    for fc in free_cols:
        v = [0] * width
        v[fc] = 1
        for col, pr in pivot_of_col.items():
            if pr[fc]:
                v[col] = 1
        basis.append(tuple(v))
    return basis


# ---------------------------------------------------------------------------
# statevector helpers shared by the verification drivers

def apply_circuit_statevector(circuit: Circuit, psi: np.ndarray) -> np.ndarray:
    out = psi.astype(complex)
    for g in circuit.gates:
        out = gate_matrix(g, circuit.width) @ out
    return out


def measure_all_z(psi: np.ndarray, width: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Sample a full Z-basis measurement of the register."""
    probs = np.abs(psi) ** 2
    probs = probs / probs.sum()
    idx = int(rng.choice(probs.size, p=probs))
    return tuple((idx >> (width - 1 - q)) & 1 for q in range(width))


def _measure_qubit_statevector(psi: np.ndarray, q: int, width: int,
                               rng: np.random.Generator) -> tuple[int, np.ndarray]:
    t = psi.reshape([2] * width)
    moved = np.moveaxis(t, q, 0)
    p0 = float(np.sum(np.abs(moved[0]) ** 2))
    outcome = 0 if rng.random() < p0 else 1
    keep = moved[outcome]
    norm = np.linalg.norm(keep)
    new = np.zeros_like(moved)
    new[outcome] = keep / norm
    return outcome, np.moveaxis(new, 0, q).reshape(-1)


# ---------------------------------------------------------------------------
# verification drivers

@dataclass
class PermutationReport:
    passed: bool
    trials: int
    failures: int
    expected_bits: tuple[int, ...]
    last_measured: tuple[int, ...]
    aborted_runs: int = 0


def apply_transpositions(bits, transpositions) -> tuple[int, ...]:
    out = list(bits)
    for a, b in transpositions:
        out[a], out[b] = out[b], out[a]
    return tuple(out)


def verify_permutation(
    n: int,
    transpositions,
    initial_bits,
    rng: np.random.Generator,
    mode: str = "effective",
    behavior: ServerBehavior | None = None,
    trials: int = 1,
    fractions: tuple[float, float] = (0.25, 0.15),
    use_iswap: bool = False,
    coupling_scale: float = 0.1,
) -> PermutationReport:
    """Delegate a swap network and check the measured permutation classically.

    Each swap is compiled from cnots by default; ``use_iswap`` swaps pairs
    with two uxy rounds instead, which permutes computational basis states
    up to phases and leaves the Z-basis check unchanged.
    """
    initial_bits = tuple(int(b) for b in initial_bits)
    if len(initial_bits) != n:
        raise ValueError("initial_bits length must equal n")
    for a, b in transpositions:
        if not (0 <= a < n and 0 <= b < n and a != b):
            raise ValueError(f"bad transposition ({a}, {b})")
    behavior = behavior or honest()
    kind = "iswap" if use_iswap else "swap"
    circuit = Circuit(n, tuple(Gate(kind, (a, b)) for a, b in transpositions))
    expected = apply_transpositions(initial_bits, transpositions)
    psi0 = basis_state(initial_bits)
    failures = 0
    aborted = 0
    measured: tuple[int, ...] = initial_bits
    for _ in range(trials):
        outcome, _sched = run_protocol3(circuit, fractions, psi0, behavior, rng,
                                        mode=mode, coupling_scale=coupling_scale)
        if not outcome.completed:
            aborted += 1
            failures += 1
            continue
        measured = measure_all_z(outcome.bath, n, rng)
        if measured != expected:
            failures += 1
    return PermutationReport(failures == 0, trials, failures, expected, measured, aborted)


@dataclass
class StabilizerReport:
    passed: bool
    shots: int
    deterministic_total: int
    deterministic_matches: int
    random_total: int
    random_ones: int
    chi_square: float
    aborted_runs: int = 0

    CHI2_CRITICAL_5PCT = 3.841  # 1 degree of freedom

    @property
    def deterministic_agreement(self) -> float:
        if self.deterministic_total == 0:
            return 1.0
        return self.deterministic_matches / self.deterministic_total


def _as_tableau_circuit(circuit: Circuit) -> list[Gate]:
    """Clifford gate list for the tableau (s gets expressed via rz checks)."""
    gates = []
    for g in circuit.gates:
        if g.kind in CLIFFORD_GATES:
            gates.append(g)
        elif g.kind == "swap":
            a, b = g.targets
            gates += [Gate("cnot", (a, b)), Gate("cnot", (b, a)), Gate("cnot", (a, b))]
        else:
            raise ValueError(f"non-Clifford gate in stabilizer circuit: {g.kind!r}")
    return gates


def verify_stabilizer(
    circuit: Circuit,
    shots: int,
    rng: np.random.Generator,
    mode: str = "effective",
    behavior: ServerBehavior | None = None,
    fractions: tuple[float, float] = (0.25, 0.15),
    coupling_scale: float = 0.1,
) -> StabilizerReport:
    """Run a Clifford circuit through the protocol and grade it with a tableau.

    Per shot the protocol's final state is measured qubit by qubit; the
    tableau decides whether each bit is deterministic given the earlier
    outcomes.  Deterministic bits must match exactly; random bits are
    pooled into a chi-square test against a fair coin at the 5 percent
    level.
    """
    tableau_gates = _as_tableau_circuit(circuit)  # validates Clifford-only
    behavior = behavior or honest()
    psi0 = np.zeros(2**circuit.width, dtype=complex)
    psi0[0] = 1.0
    det_total = det_match = rand_total = rand_ones = aborted = 0
    for _ in range(shots):
        outcome, _sched = run_protocol3(circuit, fractions, psi0, behavior, rng,
                                        mode=mode, coupling_scale=coupling_scale)
        if not outcome.completed:
            aborted += 1
            continue
        tab = StabilizerTableau(circuit.width)
        for g in tableau_gates:
            tab.apply(g.kind, *g.targets)
        psi = outcome.bath
        for q in range(circuit.width):
            bit, psi = _measure_qubit_statevector(psi, q, circuit.width, rng)
            if _is_det(tab, q):
                pred, _ = tab.measure(q, rng)
                det_total += 1
                det_match += int(pred == bit)
            else:
                tab.measure(q, rng, forced=bit)
                rand_total += 1
                rand_ones += bit
    chi2 = (2 * rand_ones - rand_total) ** 2 / rand_total if rand_total else 0.0
    passed = (
        aborted == 0
        and det_match == det_total
        and chi2 <= StabilizerReport.CHI2_CRITICAL_5PCT
    )
    return StabilizerReport(passed, shots, det_total, det_match,
                            rand_total, rand_ones, chi2, aborted)


def _is_det(tab: StabilizerTableau, q: int) -> bool:
    return not any(tab.m[i, q] for i in range(tab.n, 2 * tab.n))


def tableau_statevector_agreement(
    circuit: Circuit,
    shots: int,
    rng: np.random.Generator,
):
    """Cross-check tableau measurements against direct statevector simulation.

    Returns (deterministic_total, mismatches, random_total, random_ones).
    Deterministic tableau outcomes must reproduce the statevector's bits
    exactly; random ones are collected for frequency checks.
    """
    tableau_gates = _as_tableau_circuit(circuit)
    psi_full = np.zeros(2**circuit.width, dtype=complex)
    psi_full[0] = 1.0
    psi_full = apply_circuit_statevector(circuit, psi_full)
    det_total = mismatches = rand_total = rand_ones = 0
    for _ in range(shots):
        tab = StabilizerTableau(circuit.width)
        for g in tableau_gates:
            tab.apply(g.kind, *g.targets)
        psi = psi_full
        for q in range(circuit.width):
            bit, psi = _measure_qubit_statevector(psi, q, circuit.width, rng)
            if _is_det(tab, q):
                pred, _ = tab.measure(q, rng)
                det_total += 1
                mismatches += int(pred != bit)
            else:
                tab.measure(q, rng, forced=bit)
                rand_total += 1
                rand_ones += bit
    return det_total, mismatches, rand_total, rand_ones


# ---------------------------------------------------------------------------
# Simon's problem

class SimonSampleError(RuntimeError):
    """Raised when the sample cap is hit before enough independent rows."""


@dataclass(frozen=True)
class SimonInstance:
    """Hidden-shift instance: f(x) = f(y) iff x = y or x ^ y = s."""

    nbits: int
    s: tuple[int, ...]
    table: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = self.nbits
        if not (1 <= n <= 3):
            raise ValueError("nbits must be between 1 and 3 at this register scale")
        s = tuple(int(b) for b in self.s)
        object.__setattr__(self, "s", s)
        if len(s) != n or not any(s):
            raise ValueError("s must be a nonzero bitstring of length nbits")
        table = tuple(tuple(int(b) for b in row) for row in self.table)
        object.__setattr__(self, "table", table)
        if len(table) != 2**n or any(len(row) != n for row in table):
            raise ValueError("truth table must map n bits to n bits")
        s_int = _bits_to_int(s)
        for x in range(2**n):
            for y in range(2**n):
                equal = table[x] == table[y]
                promised = x == y or (x ^ y) == s_int
                if equal != promised:
                    raise ValueError(
                        f"truth table violates the promise at x={x}, y={y}")

    @classmethod
    def from_secret(cls, nbits: int, s) -> "SimonInstance":
        """Instance with the linear oracle f(x) = x ^ (x_p * s), s_p = 1."""
        s = tuple(int(b) for b in s)
        if len(s) != nbits or not any(s):
            raise ValueError("s must be a nonzero bitstring of length nbits")
        p = s.index(1)
        table = []
        for x in range(2**nbits):
            bits = _int_to_bits(x, nbits)
            if bits[p]:
                bits = tuple(a ^ b for a, b in zip(bits, s))
            table.append(bits)
        return cls(nbits, s, tuple(table))


def _bits_to_int(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(x: int, width: int) -> tuple[int, ...]:
    return tuple((x >> (width - 1 - i)) & 1 for i in range(width))


def simon_circuit(inst: SimonInstance) -> Circuit:
    """Query circuit on 2*nbits qubits: H-layer, linear oracle, H-layer.

    The oracle for f(x) = x ^ (x_p * s) is a cnot/x network: output j
    copies input j, plus a controlled copy of s from input p.
    """
    b = inst.nbits
    p = inst.s.index(1)
    gates: list[Gate] = [Gate("h", (q,)) for q in range(b)]
    for j in range(b):
        target = b + j
        # column j of the oracle's linear map: delta_ij xor s_j delta_ip
        for i in range(b):
            coef = (1 if i == j else 0) ^ (inst.s[j] if i == p else 0)
            if coef:
                gates.append(Gate("cnot", (i, target)))
    gates += [Gate("h", (q,)) for q in range(b)]
    return Circuit(2 * b, tuple(gates))


def simon_run(
    inst: SimonInstance,
    rng: np.random.Generator,
    mode: str = "effective",
    behavior: ServerBehavior | None = None,
    fractions: tuple[float, float] = (0.25, 0.15),
    max_samples: int | None = None,
    coupling_scale: float = 0.1,
) -> tuple[int, ...]:
    """Recover the hidden string through the delegation protocol.

    Collects measured strings y (all orthogonal to s), solves for the
    nullspace over GF(2) and returns the unique nonzero candidate.  Raises
    SimonSampleError if the sample cap is reached without nbits - 1
    independent rows, and VerificationError-style ValueError if the
    nullspace is not one-dimensional.
    """
    b = inst.nbits
    behavior = behavior or honest()
    circuit = simon_circuit(inst)
    psi0 = np.zeros(2 ** (2 * b), dtype=complex)
    psi0[0] = 1.0
    cap = max_samples if max_samples is not None else 8 * b + 8
    rows: list[tuple[int, ...]] = []
    samples = 0
    while _gf2_rank([_bits_to_int(r) for r in rows]) < b - 1:
        if samples >= cap:
            raise SimonSampleError(
                f"only {_gf2_rank([_bits_to_int(r) for r in rows])} independent "
                f"rows after {cap} samples")
        outcome, _sched = run_protocol3(circuit, fractions, psi0, behavior, rng,
                                        mode=mode, coupling_scale=coupling_scale)
        samples += 1
        if not outcome.completed:
            continue
        bits = measure_all_z(outcome.bath, 2 * b, rng)
        y = bits[:b]
        if any(y):
            rows.append(y)
    basis = gf2_nullspace(rows, b)
    candidates = [v for v in basis if any(v)]
    if len(candidates) != 1:
        raise SimonSampleError(f"nullspace dimension {len(candidates)}, expected 1")
    return candidates[0]

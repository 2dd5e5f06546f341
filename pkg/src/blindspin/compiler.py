"""Compile circuits into schedules of central-spin rounds with secret keys.

A round sends the server classical parameters (gamma vector, time, field
axis) plus a central spin prepared in one of the four states
{|0>, |1>, |+>, |->}.  The two computational states select which branch of
the controlled evolution acts on the bath, so a round whose parameters
realize a gate G applies G when the key is 0 and G^dagger when it is 1.
The compiler folds that sign into the emitted parameters, so every compute
round applies exactly the intended gate, whichever key was drawn.

Key patterns and round roles:

    compute   alpha = beta in {0, 1}     contributes its gate
    pad       alpha != beta in {0, 1}    two half evolutions cancel
    honeypot  {alpha, beta} = {+, -}     identity; detects measurements

Only compute rounds reach the net unitary; omega(alpha, beta) is the
indicator of that.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .linalg import HADAMARD, embed, expm_hermitian, kron_all
from .spinmodel import antisymmetric_params, build_effective_closed

TWO_PI = 2.0 * math.pi

# sqrt-iSWAP-like two-qubit gate generated by the bath XY exchange
UXY = np.array(
    [
        [1, 0, 0, 0],
        [0, 1 / np.sqrt(2), 1j / np.sqrt(2), 0],
        [0, 1j / np.sqrt(2), 1 / np.sqrt(2), 0],
        [0, 0, 0, 1],
    ],
    dtype=complex,
)

DEFAULT_COUPLING_SCALE = 0.1


class KeySymbol(enum.Enum):
    K0 = "0"
    K1 = "1"
    KPLUS = "+"
    KMINUS = "-"

    @property
    def computational(self) -> bool:
        return self in (KeySymbol.K0, KeySymbol.K1)


_VALID_PAIRS = {
    (KeySymbol.K0, KeySymbol.K0),
    (KeySymbol.K1, KeySymbol.K1),
    (KeySymbol.K0, KeySymbol.K1),
    (KeySymbol.K1, KeySymbol.K0),
    (KeySymbol.KPLUS, KeySymbol.KMINUS),
    (KeySymbol.KMINUS, KeySymbol.KPLUS),
}


def omega(a: KeySymbol, b: KeySymbol) -> int:
    """1 iff the round's gate reaches the bath computation (a = b in {0,1})."""
    if (a, b) not in _VALID_PAIRS:
        raise ValueError(f"invalid key pairing ({a.value}, {b.value})")
    return 1 if (a == b and a.computational) else 0


GATE_ARITY = {
    "rz": 1, "rx": 1, "h": 1, "t": 1, "s": 1, "x": 1, "z": 1,
    "uxy": 2, "iswap": 2, "cnot": 2, "swap": 2,
}
_ANGLED = {"rz", "rx"}
PRIMITIVE_KINDS = ("rz", "rx", "uxy")


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} expects {GATE_ARITY[self.kind]} targets, got {targets}")
        if len(set(targets)) != len(targets):
            raise ValueError(f"duplicate targets {targets}")
        if any(t < 0 for t in targets):
            raise ValueError(f"negative target in {targets}")
        if self.kind in _ANGLED:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} needs a finite angle")
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.width < 1:
            raise ValueError("circuit width must be >= 1")
        for g in self.gates:
            if max(g.targets) >= self.width:
                raise ValueError(f"gate {g.kind} targets {g.targets} exceed width {self.width}")


@dataclass(frozen=True)
class Round:
    gamma: np.ndarray
    t: float
    axis: str
    alpha: KeySymbol
    beta: KeySymbol
    role: str  # compute | pad | honeypot
    gate_ref: int | None = None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        if not (math.isfinite(self.t) and self.t >= 0.0):
            raise ValueError(f"round time must be finite and >= 0, got {self.t}")
        if self.axis not in ("z", "x"):
            raise ValueError(f"axis must be 'z' or 'x', got {self.axis!r}")
        a, b = self.alpha, self.beta
        if (a, b) not in _VALID_PAIRS:
            raise ValueError(f"invalid key pairing ({a.value}, {b.value})")
        expected = (
            "honeypot" if not a.computational
            else ("compute" if a == b else "pad")
        )
        if self.role != expected:
            raise ValueError(f"role {self.role!r} inconsistent with keys ({a.value}, {b.value})")


@dataclass(frozen=True)
class Schedule:
    width: int
    rounds: tuple[Round, ...]

    def __post_init__(self):
        object.__setattr__(self, "rounds", tuple(self.rounds))
        for r in self.rounds:
            if r.gamma.size != self.width:
                raise ValueError("round gamma length does not match schedule width")


# ---------------------------------------------------------------------------
# primitive synthesis

def synth_rz(theta: float, qubit: int, n: int, g: float | None = None):
    """Round parameters realizing a Z rotation by theta on one bath qubit.

    Only gamma[qubit] = g is switched on; the up-branch effective field is
    +g/2 Sz, so exp(-i H_up t) = RZ(g t / 2) up to phase and t = 2 theta / g
    (theta reduced mod 2 pi).  g defaults to half the default coupling
    ceiling.
    """
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    g = DEFAULT_COUPLING_SCALE / 2 if g is None else g
    if not 0 < g:
        raise ValueError("coupling g must be positive")
    gamma = np.zeros(n)
    gamma[qubit] = g
    t = 2.0 * (theta % TWO_PI) / g
    return gamma, t, "z"


def synth_rx(theta: float, qubit: int, n: int, g: float | None = None):
    """As synth_rz but with the field along x, realizing an X rotation."""
    gamma, t, _ = synth_rz(theta, qubit, n, g)
    return gamma, t, "x"


def synth_uxy(q1: int, q2: int, c: int, n: int):
    """Round parameters for the UXY gate family: gamma = 7/(2c), t = 7 pi / gamma^2.

    With the antisymmetric bath fields these constants realize UXY exactly
    through the spin-down branch whenever c is even (the corner phases are
    (-1)^c); the compiler therefore only emits even c.  See uxy_generator
    for the designed two-qubit exponent these constants are tuned against.
    """
    if q1 == q2:
        raise ValueError("uxy needs two distinct qubits")
    if c < 1 or int(c) != c:
        raise ValueError("c must be a positive integer")
    gamma_val = 7.0 / (2.0 * c)
    t = 7.0 * math.pi / gamma_val**2
    gamma = np.zeros(n)
    gamma[q1] = gamma[q2] = gamma_val
    return gamma, t, "z"


def uxy_generator(gamma: float) -> np.ndarray:
    """Designed two-qubit generator for the UXY synthesis constants.

    (gamma^2/8)(XX + YY) + (gamma/2)(Z1 + Z2) in Pauli form; evolving under
    it for t = 7 pi / gamma^2 with gamma = 7/(2c) yields UXY exactly for
    every positive integer c.
    """
    from .linalg import X, Y, Z, I2

    XX = np.kron(X, X)
    YY = np.kron(Y, Y)
    Zs = np.kron(Z, I2) + np.kron(I2, Z)
    return gamma**2 / 8.0 * (XX + YY) + gamma / 2.0 * Zs


def _uxy_short_params(q1: int, q2: int, n: int, scale: float):
    """gamma = 1/(4m), t = pi/gamma^2: realizes UXY through the up branch."""
    m = max(1, math.ceil(1.0 / scale))  # gamma <= scale / 4
    gamma_val = 1.0 / (4.0 * m)
    t = math.pi / gamma_val**2
    gamma = np.zeros(n)
    gamma[q1] = gamma[q2] = gamma_val
    return gamma, t, "z"


def _uxy_paper_even_c(scale: float) -> int:
    """Smallest even c with 7/(2c) <= scale/28 (balances third-order cost)."""
    return 2 * math.ceil(98.0 / scale / 2.0)


# ---------------------------------------------------------------------------
# decomposition into the universal primitive set {rz, rx, uxy}

def _h_gates(q: int) -> list[Gate]:
    half = math.pi / 2
    return [Gate("rx", (q,), half), Gate("rz", (q,), half), Gate("rx", (q,), half)]


def decompose(gate: Gate) -> list[Gate]:
    """Expand a gate into the primitive set {rz, rx, uxy}.

    The composed unitary equals the gate up to global phase; cnot uses
    exactly two uxy gates plus single-qubit rotations, iswap is uxy twice,
    swap is three cnots.
    """
    k = gate.kind
    if k in PRIMITIVE_KINDS:
        return [gate]
    if k == "t":
        return [Gate("rz", gate.targets, math.pi / 4)]
    if k == "s":
        return [Gate("rz", gate.targets, math.pi / 2)]
    if k == "z":
        return [Gate("rz", gate.targets, math.pi)]
    if k == "x":
        return [Gate("rx", gate.targets, math.pi)]
    if k == "h":
        return _h_gates(gate.targets[0])
    if k == "iswap":
        return [Gate("uxy", gate.targets), Gate("uxy", gate.targets)]
    if k == "cnot":
        a, b = gate.targets
        seq = [Gate("rz", (a,), math.pi / 2), Gate("rx", (b,), math.pi / 2)]
        seq += _h_gates(a)
        seq += [Gate("rx", (a,), math.pi), Gate("uxy", (a, b)),
                Gate("rx", (a,), math.pi), Gate("uxy", (a, b))]
        seq += _h_gates(a)
        return seq
    if k == "swap":
        a, b = gate.targets
        out: list[Gate] = []
        for c in (Gate("cnot", (a, b)), Gate("cnot", (b, a)), Gate("cnot", (a, b))):
            out += decompose(c)
        return out
    raise ValueError(f"cannot decompose gate kind {k!r}")


def gate_matrix(gate: Gate, width: int) -> np.ndarray:
    """Defining unitary of a gate embedded in the full circuit width."""
    from .linalg import I2, X, Z

    th = gate.angle
    singles = {
        "rz": lambda: np.diag([np.exp(-1j * th / 2), np.exp(1j * th / 2)]),
        "rx": lambda: math.cos(th / 2) * I2 - 1j * math.sin(th / 2) * X,
        "h": lambda: HADAMARD,
        "t": lambda: np.diag([1.0, np.exp(1j * math.pi / 4)]),
        "s": lambda: np.diag([1.0, 1j]),
        "x": lambda: X,
        "z": lambda: Z,
    }
    if gate.kind in singles:
        return embed(singles[gate.kind](), gate.targets, width)
    doubles = {
        "uxy": UXY,
        "iswap": UXY @ UXY,
        "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
        "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    }
    return embed(doubles[gate.kind], gate.targets, width)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Direct product of the circuit's defining gate matrices."""
    U = np.eye(2**circuit.width, dtype=complex)
    for g in circuit.gates:
        U = gate_matrix(g, circuit.width) @ U
    return U


# ---------------------------------------------------------------------------
# compilation

def _compute_round_params(prim: Gate, alpha: KeySymbol, width: int, scale: float):
    """Parameters whose net effective action under key ``alpha`` is ``prim``.

    A key of 1 flips the evolution sign, so the emitted parameters realize
    the primitive's inverse through the up branch in that case.
    """
    if prim.kind in ("rz", "rx"):
        theta = prim.angle if alpha == KeySymbol.K0 else -prim.angle
        synth = synth_rz if prim.kind == "rz" else synth_rx
        return synth(theta, prim.targets[0], width, g=scale / 2)
    if prim.kind == "uxy":
        q1, q2 = prim.targets
        if alpha == KeySymbol.K0:
            return _uxy_short_params(q1, q2, width, scale)
        return synth_uxy(q1, q2, _uxy_paper_even_c(scale), width)
    raise ValueError(f"not a primitive: {prim.kind!r}")


def compile_circuit(
    circuit: Circuit,
    honeypot_fraction: float,
    pad_fraction: float,
    rng: np.random.Generator,
    coupling_scale: float = DEFAULT_COUPLING_SCALE,
) -> Schedule:
    """Compile a circuit into a keyed round schedule.

    Every gate is decomposed into primitives; each primitive becomes one
    compute round with alpha = beta drawn uniformly from {0, 1} and the
    evolution-sign fold applied.  Honeypot and pad rounds are inserted at
    uniform positions until the requested fractions of the total length
    are reached, carrying decoy parameters drawn from the compute rounds'
    own distribution.
    """
    if not (0 <= honeypot_fraction < 1 and 0 <= pad_fraction < 1):
        raise ValueError("fractions must lie in [0, 1)")
    if honeypot_fraction + pad_fraction >= 1:
        raise ValueError("fractions must sum to less than 1")
    prims: list[tuple[Gate, int]] = []
    for idx, gate in enumerate(circuit.gates):
        prims += [(p, idx) for p in decompose(gate)]

    rounds: list[Round] = []
    for prim, ref in prims:
        alpha = KeySymbol.K0 if rng.integers(0, 2) == 0 else KeySymbol.K1
        gamma, t, axis = _compute_round_params(prim, alpha, circuit.width, coupling_scale)
        rounds.append(Round(gamma, t, axis, alpha, alpha, "compute", gate_ref=ref))

    m0 = len(prims)
    keep = 1.0 - honeypot_fraction - pad_fraction
    m_total = max(m0, round(m0 / keep))
    n_honeypot = round(m_total * honeypot_fraction)
    n_pad = max(m_total - m0 - n_honeypot, 0)

    def decoy_params():
        if m0:
            src = prims[rng.integers(0, m0)][0]
            a = KeySymbol.K0 if rng.integers(0, 2) == 0 else KeySymbol.K1
            return _compute_round_params(src, a, circuit.width, coupling_scale)
        theta = rng.uniform(0.0, TWO_PI)
        return synth_rz(theta, int(rng.integers(0, circuit.width)), circuit.width,
                        g=coupling_scale / 2)

    for role, count in (("honeypot", n_honeypot), ("pad", n_pad)):
        for _ in range(count):
            gamma, t, axis = decoy_params()
            if role == "honeypot":
                a, b = ((KeySymbol.KPLUS, KeySymbol.KMINUS)
                        if rng.integers(0, 2) == 0
                        else (KeySymbol.KMINUS, KeySymbol.KPLUS))
            else:
                a, b = ((KeySymbol.K0, KeySymbol.K1)
                        if rng.integers(0, 2) == 0
                        else (KeySymbol.K1, KeySymbol.K0))
            pos = int(rng.integers(0, len(rounds) + 1))
            rounds.insert(pos, Round(gamma, t, axis, a, b, role))

    return Schedule(circuit.width, tuple(rounds))


def rekey(schedule: Schedule, rng: np.random.Generator) -> Schedule:
    """Redraw every round's keys without touching the classical parameters.

    Any consistent re-keying yields a valid schedule over the same message
    sequence, which is exactly the server-side ambiguity the keys provide.
    """
    new_rounds = []
    for r in schedule.rounds:
        if r.role == "honeypot":
            a, b = ((KeySymbol.KPLUS, KeySymbol.KMINUS)
                    if rng.integers(0, 2) == 0
                    else (KeySymbol.KMINUS, KeySymbol.KPLUS))
        elif r.role == "pad":
            a, b = ((KeySymbol.K0, KeySymbol.K1)
                    if rng.integers(0, 2) == 0
                    else (KeySymbol.K1, KeySymbol.K0))
        else:
            a = KeySymbol.K0 if rng.integers(0, 2) == 0 else KeySymbol.K1
            b = a
        new_rounds.append(replace(r, alpha=a, beta=b))
    return Schedule(schedule.width, tuple(new_rounds))


def round_effective_gate(rnd: Round, h0: float = 1.0) -> np.ndarray:
    """Net bath gate a round applies at the effective level, given its key.

    exp(-i s H_up t) with s = +1 for key 0 and -1 for key 1, conjugated to
    the round's axis.  Identity-proportional offsets are dropped (global
    phase at the bath level).
    """
    n = rnd.gamma.size
    p = antisymmetric_params(rnd.gamma, h0, "z")
    h_up = build_effective_closed(p, "up")
    sign = 1.0 if rnd.alpha in (KeySymbol.K0, KeySymbol.KPLUS) else -1.0
    U = expm_hermitian(sign * h_up, rnd.t)
    if rnd.axis == "x":
        R = kron_all([HADAMARD] * n)
        U = R @ U @ R
    return U


def expected_unitary(schedule: Schedule, h0: float = 1.0) -> np.ndarray:
    """Client-side reference: product of contributing rounds' net gates."""
    U = np.eye(2**schedule.width, dtype=complex)
    for r in schedule.rounds:
        if omega(r.alpha, r.beta):
            U = round_effective_gate(r, h0) @ U
    return U


# ---------------------------------------------------------------------------
# circuit text format

class CircuitParseError(ValueError):
    """Parse failure carrying the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_circuit(text: str, width: int | None = None) -> Circuit:
    """Parse the one-gate-per-line circuit format.

    Each line is a lowercase mnemonic, its target indices, and an angle for
    rz/rx; '#' starts a comment.  Width is inferred as max target + 1
    unless given.
    """
    gates: list[Gate] = []
    max_target = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind not in GATE_ARITY:
            raise CircuitParseError(line_no, f"unknown gate {kind!r}")
        arity = GATE_ARITY[kind]
        needs_angle = kind in _ANGLED
        expected = arity + (1 if needs_angle else 0)
        if len(parts) - 1 != expected:
            raise CircuitParseError(
                line_no,
                f"{kind} expects {arity} target(s)"
                + (" and an angle" if needs_angle else "")
                + f", got {len(parts) - 1} argument(s)",
            )
        try:
            targets = tuple(int(x) for x in parts[1:1 + arity])
        except ValueError:
            raise CircuitParseError(line_no, f"bad target index in {parts[1:1 + arity]}") from None
        angle = None
        if needs_angle:
            try:
                angle = float(parts[1 + arity])
            except ValueError:
                raise CircuitParseError(line_no, f"bad angle {parts[1 + arity]!r}") from None
        try:
            gates.append(Gate(kind, targets, angle))
        except ValueError as exc:
            raise CircuitParseError(line_no, str(exc)) from None
        max_target = max(max_target, *targets)
    inferred = max(max_target + 1, 1)
    if width is None:
        width = inferred
    elif width < inferred:
        raise ValueError(f"width {width} too small for targets up to {max_target}")
    return Circuit(width, tuple(gates))

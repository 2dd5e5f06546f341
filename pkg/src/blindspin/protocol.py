"""Client/server protocol engine over a simulated spin register.

One register of n+1 spins carries the whole interaction: site 0 is the
central spin the client prepares and the server acts on, sites 1..n are
the bath the computation lives in.  "Sending" the spin is ownership
transfer; attacks are operators the server applies on receipt, before it
simulates the evolution.

Three drivers:

- run_protocol1: unchecked delegation (computational keys only, one full
  evolution per round, no mid-round pulse, no aborts);
- run_protocol2: checked delegation (two half evolutions around a client
  pulse, projective key check on return, abort on mismatch);
- run_protocol3: compile a circuit with honeypots/pads, then protocol 2.

Execution modes share one code path: "effective" applies the controlled
block evolution (exact protocol semantics), "full" applies the exact
central-spin propagator (physical semantics with perturbative leakage).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compiler import (
    Circuit,
    KeySymbol,
    Round,
    Schedule,
    compile_circuit,
    omega,
)
from .linalg import HADAMARD, I2, X, Y, check_density, kron_all
from .spinmodel import (
    antisymmetric_params,
    approx_controlled_evolution,
    build_central_hamiltonian,
)

BEHAVIOR_KINDS = (
    "honest",
    "measure_z",
    "measure_x",
    "measure_random",
    "intercept_resend",
    "tamper_time",
    "skip_evolution",
)


@dataclass
class ServerBehavior:
    """Pluggable server action set; rng defaults to the run's stream."""

    kind: str = "honest"
    time_factor: float = 1.0
    rng: np.random.Generator | None = None

    def __post_init__(self):
        if self.kind not in BEHAVIOR_KINDS:
            raise ValueError(f"unknown behavior {self.kind!r}")


def honest() -> ServerBehavior:
    return ServerBehavior("honest")


@dataclass
class RoundRecord:
    index: int
    role: str
    gamma: tuple[float, ...]
    t: float
    axis: str
    pulse: str
    check: str  # pass | fail | not-checked
    attacks: tuple[str, ...] = ()


@dataclass
class ProtocolOutcome:
    status: str  # completed | aborted
    abort_index: int | None
    bath: np.ndarray | None
    transcript: list[RoundRecord] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status == "completed"


_KEY_VECTORS = {
    KeySymbol.K0: np.array([1, 0], dtype=complex),
    KeySymbol.K1: np.array([0, 1], dtype=complex),
    KeySymbol.KPLUS: np.array([1, 1], dtype=complex) / np.sqrt(2),
    KeySymbol.KMINUS: np.array([1, -1], dtype=complex) / np.sqrt(2),
}

PULSES = {
    "identity": I2,
    "pi_x": -1j * X,
    "pi_y": -1j * Y,
}


def prepare_key_state(a: KeySymbol) -> np.ndarray:
    """Single-qubit state for a key symbol: |0>, |1>, |+> or |->."""
    return _KEY_VECTORS[a].copy()


def client_pulse_for(a: KeySymbol, b: KeySymbol) -> str:
    """Mid-round pulse turning the returned spin from |a>-track to |b>-track.

    identity on compute rounds, a pi pulse about x on pad rounds, a pi
    pulse about y on honeypot rounds.
    """
    omega(a, b)  # validates the pairing
    if a == b:
        return "identity"
    if a.computational:
        return "pi_x"
    return "pi_y"


# ---------------------------------------------------------------------------
# register mechanics

def _set_central(central: np.ndarray, bath: np.ndarray) -> np.ndarray:
    return np.kron(central, bath)


def _measure_central(joint: np.ndarray, basis_state: np.ndarray,
                     rng: np.random.Generator):
    """Project site 0 onto {basis_state, orthogonal}. Returns (hit, bath)."""
    d = joint.size // 2
    amp = joint.reshape(2, d)
    proj = basis_state.conj() @ amp
    p_hit = float(np.real(np.vdot(proj, proj)))
    p_hit = min(max(p_hit, 0.0), 1.0)
    if rng.random() < p_hit:
        return True, proj / np.sqrt(p_hit)
    orth = np.array([-np.conj(basis_state[1]), np.conj(basis_state[0])])
    rest = orth.conj() @ amp
    norm = np.linalg.norm(rest)
    return False, rest / norm


def _apply_central(joint: np.ndarray, u2: np.ndarray) -> np.ndarray:
    d = joint.size // 2
    return (u2 @ joint.reshape(2, d)).reshape(-1)


def _random_bloch_basis(rng: np.random.Generator) -> np.ndarray:
    """Spin-up eigenstate of a Haar-uniform Bloch direction, as a 2-vector."""
    z = rng.uniform(-1.0, 1.0)
    phi = rng.uniform(0.0, 2 * np.pi)
    th = np.arccos(z)
    return np.array([np.cos(th / 2), np.exp(1j * phi) * np.sin(th / 2)])


def _attack(behavior: ServerBehavior, joint: np.ndarray,
            rng: np.random.Generator, round_basis: list) -> tuple[np.ndarray, str | None]:
    """Server action on receiving the central spin, before any evolution."""
    kind = behavior.kind
    if kind in ("honest", "tamper_time", "skip_evolution"):
        return joint, None
    arng = behavior.rng if behavior.rng is not None else rng
    if kind == "measure_z":
        basis, label = np.array([1, 0], dtype=complex), "z"
    elif kind == "measure_x":
        basis, label = _KEY_VECTORS[KeySymbol.KPLUS], "x"
    elif kind == "measure_random":
        if arng.integers(0, 2) == 0:
            basis, label = np.array([1, 0], dtype=complex), "z"
        else:
            basis, label = _KEY_VECTORS[KeySymbol.KPLUS], "x"
    else:  # intercept_resend: one Haar-random basis per round
        if not round_basis:
            round_basis.append(_random_bloch_basis(arng))
        basis, label = round_basis[0], "bloch"
    hit, bathpart = _measure_central(joint, basis, arng)
    if hit:
        out = np.kron(basis, bathpart)
    else:
        orth = np.array([-np.conj(basis[1]), np.conj(basis[0])])
        out = np.kron(orth, bathpart)
    return out, f"measure_{label}->{0 if hit else 1}"


class _EvolutionCache:
    """Per-run cache of propagator factories keyed on round parameters."""

    def __init__(self, mode: str, h0: float):
        if mode not in ("effective", "full"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.h0 = h0
        self._eigs: dict = {}
        self._units: dict = {}

    def unitary(self, rnd: Round, tau: float) -> np.ndarray:
        key = (rnd.gamma.tobytes(), rnd.axis, float(tau))
        u = self._units.get(key)
        if u is not None:
            return u
        p = antisymmetric_params(rnd.gamma, self.h0, rnd.axis)
        if self.mode == "effective":
            u = approx_controlled_evolution(p, tau)
        else:
            ekey = (rnd.gamma.tobytes(), rnd.axis)
            eig = self._eigs.get(ekey)
            if eig is None:
                H = build_central_hamiltonian(p)
                eig = np.linalg.eigh(H)
                self._eigs[ekey] = eig
            w, v = eig
            u = (v * np.exp(-1j * w * tau)) @ v.conj().T
        self._units[key] = u
        return u


def _round_frame(axis: str) -> np.ndarray:
    """Client-side central-spin frame for the round's field axis."""
    return I2 if axis == "z" else HADAMARD


def _run_rounds(
    schedule: Schedule,
    psi0: np.ndarray,
    behavior: ServerBehavior,
    rng: np.random.Generator,
    mode: str,
    h0: float,
    checked: bool,
) -> ProtocolOutcome:
    bath = np.asarray(psi0, dtype=complex).copy()
    if bath.size != 2**schedule.width:
        raise ValueError("initial bath state does not match schedule width")
    cache = _EvolutionCache(mode, h0)
    transcript: list[RoundRecord] = []
    for k, rnd in enumerate(schedule.rounds, start=1):
        frame = _round_frame(rnd.axis)
        attacks: list[str] = []
        round_basis: list = []
        tau_half = rnd.t * (0.5 if checked else 1.0)
        if behavior.kind == "tamper_time":
            tau_half *= behavior.time_factor

        joint = _set_central(frame @ prepare_key_state(rnd.alpha), bath)
        joint, act = _attack(behavior, joint, rng, round_basis)
        if act:
            attacks.append(act)
        if behavior.kind != "skip_evolution":
            joint = cache.unitary(rnd, tau_half) @ joint

        if checked:
            pulse_name = client_pulse_for(rnd.alpha, rnd.beta)
            pulse = frame @ PULSES[pulse_name] @ frame.conj().T
            joint = _apply_central(joint, pulse)
            joint, act = _attack(behavior, joint, rng, round_basis)
            if act:
                attacks.append(act)
            if behavior.kind != "skip_evolution":
                joint = cache.unitary(rnd, tau_half) @ joint
            hit, bath = _measure_central(joint, frame @ prepare_key_state(rnd.beta), rng)
            check = "pass" if hit else "fail"
        else:
            pulse_name = "identity"
            # client discards the returned spin: measure it out in the
            # round frame (an unraveling of the partial trace)
            hit, bath = _measure_central(joint, frame @ prepare_key_state(KeySymbol.K0), rng)
            check = "not-checked"

        transcript.append(RoundRecord(
            index=k, role=rnd.role, gamma=tuple(rnd.gamma), t=rnd.t,
            axis=rnd.axis, pulse=pulse_name, check=check, attacks=tuple(attacks),
        ))
        if check == "fail":
            return ProtocolOutcome("aborted", k, None, transcript)
    return ProtocolOutcome("completed", None, bath, transcript)


def run_protocol1(
    schedule: Schedule,
    psi0: np.ndarray,
    behavior: ServerBehavior,
    rng: np.random.Generator,
    mode: str = "full",
    h0: float = 1.0,
) -> ProtocolOutcome:
    """Unchecked blind delegation: one full evolution per round, no aborts.

    Restricted to computational keys; the returned spin is discarded.
    """
    for r in schedule.rounds:
        if not (r.alpha.computational and r.beta.computational):
            raise ValueError("protocol 1 allows computational keys only")
    return _run_rounds(schedule, psi0, behavior, rng, mode, h0, checked=False)


def run_protocol2(
    schedule: Schedule,
    psi0: np.ndarray,
    behavior: ServerBehavior,
    rng: np.random.Generator,
    mode: str = "full",
    h0: float = 1.0,
) -> ProtocolOutcome:
    """Checked blind delegation with mid-round pulses and key checks.

    Each round: prepare |alpha>, half evolution, pulse to the |beta>
    track, half evolution, projective check against |beta>; abort on the
    first failed check.  Aborts are outcomes, not errors.
    """
    return _run_rounds(schedule, psi0, behavior, rng, mode, h0, checked=True)


def run_protocol3(
    circuit: Circuit,
    fractions: tuple[float, float],
    psi0: np.ndarray,
    behavior: ServerBehavior,
    rng: np.random.Generator,
    mode: str = "effective",
    h0: float = 1.0,
    coupling_scale: float = 0.1,
) -> tuple[ProtocolOutcome, Schedule]:
    """Compile with honeypot/pad embedding, then run the checked protocol."""
    honeypot_fraction, pad_fraction = fractions
    schedule = compile_circuit(circuit, honeypot_fraction, pad_fraction, rng,
                               coupling_scale=coupling_scale)
    outcome = run_protocol2(schedule, psi0, behavior, rng, mode, h0)
    return outcome, schedule


# ---------------------------------------------------------------------------
# blindness and detection statistics

def server_view_density(
    key_probs: dict[KeySymbol, float],
    samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Empirical average of the key states the server receives."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    symbols = list(key_probs.keys())
    probs = np.array([key_probs[s] for s in symbols], dtype=float)
    if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("key_probs must be a probability distribution")
    rho = np.zeros((2, 2), dtype=complex)
    counts = rng.multinomial(samples, probs)
    for sym, cnt in zip(symbols, counts):
        v = prepare_key_state(sym)
        rho += cnt * np.outer(v, v.conj())
    return check_density(rho / samples)


def detection_probability(
    behavior: ServerBehavior,
    schedule: Schedule,
    trials: int,
    rng: np.random.Generator,
    mode: str = "effective",
    h0: float = 1.0,
    psi0: np.ndarray | None = None,
) -> float:
    """Fraction of runs the server survives (completion rate) under attack."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if psi0 is None:
        psi0 = np.zeros(2**schedule.width, dtype=complex)
        psi0[0] = 1.0
    completed = 0
    for _ in range(trials):
        out = run_protocol2(schedule, psi0, behavior, rng, mode, h0)
        completed += out.completed
    return completed / trials


# ---------------------------------------------------------------------------
# transcript serialization (one JSON object per line)

def transcript_lines(outcome: ProtocolOutcome) -> list[str]:
    """Line-delimited transcript; field names are part of the format."""
    import json

    lines = [json.dumps({
        "record": "outcome",
        "status": outcome.status,
        "abort_index": outcome.abort_index,
        "rounds": len(outcome.transcript),
    })]
    for rec in outcome.transcript:
        lines.append(json.dumps({
            "record": "round",
            "index": rec.index,
            "role": rec.role,
            "gamma": list(rec.gamma),
            "t": rec.t,
            "axis": rec.axis,
            "pulse": rec.pulse,
            "check": rec.check,
            "attacks": list(rec.attacks),
        }))
    return lines


def write_transcript(path, outcome: ProtocolOutcome) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(transcript_lines(outcome)) + "\n")

"""Command-line driver: run experiments and emit reproducible reports.

Reports are line-delimited JSON with a versioned header; the body is a
deterministic function of the configuration and seed (timestamps go to
stderr only, so report files diff cleanly).  The global seed fans out to
per-component streams through numpy's SeedSequence.spawn, in a fixed
order: compile/run stream first, then one stream per extra experiment.

Exit codes: 0 success, 2 usage/configuration error, 3 circuit parse or
file error, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .compiler import (
    Circuit,
    CircuitParseError,
    Gate,
    compile_circuit,
    expected_unitary,
    parse_circuit,
)
from .linalg import operator_norm, state_fidelity
from .protocol import (
    ServerBehavior,
    run_protocol2,
    transcript_lines,
)
from .spinmodel import (
    antisymmetric_params,
    build_effective_closed,
    build_effective_exact,
    build_effective_numeric,
    evolution_error,
)
from .verification import (
    SimonInstance,
    simon_run,
    verify_permutation,
    verify_stabilizer,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VERIFY = 4

REPORT_VERSION = 1

BEHAVIOR_CHOICES = {
    "honest": "honest",
    "measure-z": "measure_z",
    "measure-x": "measure_x",
    "measure-random": "measure_random",
    "intercept-resend": "intercept_resend",
    "tamper-time": "tamper_time",
    "skip-evolution": "skip_evolution",
}


@dataclass
class RunConfig:
    seed: int = 0
    n: int = 3
    eta: float = 0.1
    h0: float = 1.0
    honeypot_fraction: float = 0.3
    pad_fraction: float = 0.2
    mode: str = "effective"
    trials: int = 1
    behavior: str = "honest"
    tamper_factor: float = 0.5
    out: str | None = None

    def validate(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (0 <= self.honeypot_fraction < 1 and 0 <= self.pad_fraction < 1
                and self.honeypot_fraction + self.pad_fraction < 1):
            raise ValueError("fractions must lie in [0, 1) and sum below 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.h0 == 0:
            raise ValueError("h0 must be nonzero (degenerate central field)")
        if self.mode not in ("effective", "full"):
            raise ValueError("mode must be 'effective' or 'full'")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


class Report:
    """Accumulates header + metric rows; serializes to JSON lines."""

    def __init__(self, kind: str, config: RunConfig):
        self.rows: list[dict] = [{
            "report": kind,
            "format_version": REPORT_VERSION,
            "package_version": __version__,
            "config": {k: v for k, v in vars(config).items() if k != "out"},
        }]

    def add(self, metric: str, value, **context):
        row = {"metric": metric, "value": value}
        row.update(context)
        self.rows.append(row)

    def dump(self, path: str | None):
        text = "\n".join(json.dumps(r, sort_keys=True) for r in self.rows) + "\n"
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)
        import datetime

        print(f"# report written ({datetime.datetime.now(datetime.timezone.utc).isoformat()})",
              file=sys.stderr)


def _behavior_from(config: RunConfig, rng: np.random.Generator) -> ServerBehavior:
    return ServerBehavior(BEHAVIOR_CHOICES[config.behavior],
                          time_factor=config.tamper_factor, rng=rng)


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------
# sw-check

def cmd_sw_check(config: RunConfig) -> int:
    report = Report("sw-check", config)
    rng, = _streams(config.seed, 1)
    # antisymmetry residuals over random parameter draws
    worst = 0.0
    for _ in range(config.trials):
        gamma = rng.uniform(-1.0, 1.0, config.n)
        gamma *= config.eta / max(config.n * np.mean(np.abs(gamma)), 1e-12)
        p = antisymmetric_params(gamma, config.h0)
        resid = operator_norm(build_effective_closed(p, "up")
                              + build_effective_closed(p, "down"))
        worst = max(worst, resid)
    report.add("antisymmetry_max_residual", worst, trials=config.trials,
               n=config.n, eta=config.eta, seed=config.seed)

    # closed form against the numeric second-order evaluation and the
    # exact block diagonalization, on a fixed random direction
    direction = rng.uniform(0.5, 1.0, config.n) * rng.choice([-1.0, 1.0], config.n)
    direction /= config.n * np.mean(np.abs(direction))
    etas = [config.eta, config.eta / 2, config.eta / 4]
    exact_resid = []
    for eta in etas:
        p = antisymmetric_params(eta * direction, config.h0)
        closed = build_effective_closed(p, "up")
        numeric = build_effective_numeric(p, "up")
        exact = build_effective_exact(p, "up")
        report.add("closed_vs_numeric_residual", operator_norm(closed - numeric), eta=eta)
        exact_resid.append(operator_norm(closed - exact))
        report.add("closed_vs_exact_residual", exact_resid[-1], eta=eta)
    for a, b, e1, e2 in zip(exact_resid, exact_resid[1:], etas, etas[1:]):
        report.add("closed_vs_exact_halving_ratio", a / b if b else float("inf"),
                   eta_from=e1, eta_to=e2)

    # controlled-evolution error ladder, undressed and dressed
    for dressed in (False, True):
        errs = []
        for eta in etas:
            p = antisymmetric_params(eta * direction, config.h0)
            errs.append(evolution_error(p, 1.0, dressed=dressed))
            report.add("evolution_error", errs[-1], eta=eta, t=1.0, dressed=dressed)
        orders = [np.log2(a / b) for a, b in zip(errs, errs[1:]) if b > 0]
        if orders:
            report.add("evolution_error_measured_order", float(min(orders)),
                       dressed=dressed, etas=etas)
    report.dump(config.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def cmd_run(circuit_path: str, config: RunConfig, transcript_path: str | None) -> int:
    try:
        with open(circuit_path) as fh:
            circuit = parse_circuit(fh.read(), width=config.n)
    except FileNotFoundError:
        print(f"error: circuit file not found: {circuit_path}", file=sys.stderr)
        return EXIT_PARSE
    except (CircuitParseError, ValueError) as exc:
        print(f"error: {circuit_path}: {exc}", file=sys.stderr)
        return EXIT_PARSE

    report = Report("run", config)
    compile_rng, run_rng = _streams(config.seed, 2)
    behavior = _behavior_from(config, run_rng)
    schedule = compile_circuit(circuit, config.honeypot_fraction, config.pad_fraction,
                               compile_rng, coupling_scale=config.eta)
    oracle = expected_unitary(schedule)
    psi0 = np.zeros(2**circuit.width, dtype=complex)
    psi0[0] = 1.0
    target = oracle @ psi0

    completed = 0
    fidelities = []
    last_outcome = None
    for _ in range(config.trials):
        outcome = run_protocol2(schedule, psi0, behavior, run_rng, mode=config.mode)
        last_outcome = outcome
        if outcome.completed:
            completed += 1
            fidelities.append(state_fidelity(outcome.bath, target))
    rate = completed / config.trials
    sigma = float(np.sqrt(rate * (1 - rate) / config.trials)) if config.trials > 1 else 0.0
    report.add("rounds", len(schedule.rounds), compute=sum(
        1 for r in schedule.rounds if r.role == "compute"),
        honeypot=sum(1 for r in schedule.rounds if r.role == "honeypot"),
        pad=sum(1 for r in schedule.rounds if r.role == "pad"))
    report.add("completion_rate", rate, trials=config.trials, binomial_sigma=sigma,
               seed=config.seed)
    if fidelities:
        report.add("final_state_fidelity_mean", float(np.mean(fidelities)),
                   trials=len(fidelities), seed=config.seed)
        report.add("final_state_fidelity_min", float(np.min(fidelities)),
                   trials=len(fidelities), seed=config.seed)
    if transcript_path and last_outcome is not None:
        with open(transcript_path, "w") as fh:
            fh.write("\n".join(transcript_lines(last_outcome)) + "\n")
        report.add("transcript_file", transcript_path)
    report.dump(config.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(kind: str, config: RunConfig) -> int:
    report = Report(f"verify-{kind}", config)
    rng, aux = _streams(config.seed, 2)
    behavior = _behavior_from(config, aux)
    fractions = (config.honeypot_fraction, config.pad_fraction)
    failed = False

    if kind == "permutation":
        bits = [int(b) for b in rng.integers(0, 2, config.n)]
        if all(b == bits[0] for b in bits):
            bits[0] ^= 1  # make the permutation observable
        word = []
        while len(word) < 5:
            a, b = rng.choice(config.n, 2, replace=False) if config.n > 1 else (0, 0)
            if config.n > 1:
                word.append((int(a), int(b)))
            else:
                break
        rep = verify_permutation(config.n, word, bits, rng, mode=config.mode,
                                 behavior=behavior, trials=config.trials,
                                 fractions=fractions, coupling_scale=config.eta)
        report.add("passed", rep.passed, trials=rep.trials, failures=rep.failures,
                   expected="".join(map(str, rep.expected_bits)),
                   measured="".join(map(str, rep.last_measured)), seed=config.seed)
        failed = not rep.passed
    elif kind == "stabilizer":
        width = max(config.n, 2)
        gates = [Gate("h", (0,))] + [Gate("cnot", (0, q)) for q in range(1, width)]
        circuit = Circuit(width, tuple(gates))
        rep = verify_stabilizer(circuit, config.trials, rng, mode=config.mode,
                                behavior=behavior, fractions=fractions,
                                coupling_scale=config.eta)
        report.add("passed", rep.passed, shots=rep.shots,
                   deterministic_total=rep.deterministic_total,
                   deterministic_matches=rep.deterministic_matches,
                   deterministic_agreement=rep.deterministic_agreement,
                   random_total=rep.random_total, random_ones=rep.random_ones,
                   chi_square=rep.chi_square, aborted=rep.aborted_runs,
                   seed=config.seed)
        failed = not rep.passed
    elif kind == "simon":
        nbits = min(max(config.n // 2, 1), 3)
        s = tuple(int(b) for b in rng.integers(0, 2, nbits))
        if not any(s):
            s = (1,) * nbits
        inst = SimonInstance.from_secret(nbits, s)
        recovered = simon_run(inst, rng, mode=config.mode, behavior=behavior,
                              fractions=fractions, coupling_scale=config.eta)
        match = recovered == inst.s
        report.add("passed", bool(match), secret="".join(map(str, inst.s)),
                   recovered="".join(map(str, recovered)), nbits=nbits,
                   seed=config.seed)
        failed = not match
    else:
        print(f"error: unknown verification kind {kind!r}", file=sys.stderr)
        return EXIT_USAGE

    report.dump(config.out)
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--n", type=int, default=3, help="bath spin count")
    sub.add_argument("--eta", type=float, default=0.1,
                     help="coupling-scale ceiling in units of h0")
    sub.add_argument("--h0", type=float, default=1.0, help="central field")
    sub.add_argument("--mode", choices=["effective", "full"], default="effective")
    sub.add_argument("--trials", type=int, default=1)
    sub.add_argument("--honeypots", type=float, default=0.3, dest="honeypot_fraction",
                     help="honeypot round fraction")
    sub.add_argument("--pads", type=float, default=0.2, dest="pad_fraction",
                     help="pad round fraction")
    sub.add_argument("--behavior", choices=sorted(BEHAVIOR_CHOICES), default="honest")
    sub.add_argument("--tamper-factor", type=float, default=0.5)
    sub.add_argument("--out", default=None, help="report path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindspin",
        description="central-spin blind delegation: effective-model checks, "
                    "protocol runs, and server verification",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    p_sw = subs.add_parser("sw-check", help="effective-Hamiltonian consistency report")
    _add_common(p_sw)
    p_run = subs.add_parser("run", help="compile a circuit file and run the checked protocol")
    p_run.add_argument("circuit", help="circuit file (one gate per line)")
    p_run.add_argument("--transcript", default=None, help="write last run's transcript here")
    _add_common(p_run)
    p_ver = subs.add_parser("verify", help="server verification procedures")
    p_ver.add_argument("kind", choices=["permutation", "stabilizer", "simon"])
    _add_common(p_ver)
    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed, n=args.n, eta=args.eta, h0=args.h0,
        honeypot_fraction=args.honeypot_fraction, pad_fraction=args.pad_fraction,
        mode=args.mode, trials=args.trials, behavior=args.behavior,
        tamper_factor=args.tamper_factor, out=args.out,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _config_from(args)
    try:
        config.validate()
    except ValueError as exc:
        parser.error(str(exc))  # exits with EXIT_USAGE
    if args.command == "sw-check":
        return cmd_sw_check(config)
    if args.command == "run":
        return cmd_run(args.circuit, config, args.transcript)
    return cmd_verify(args.kind, config)


if __name__ == "__main__":
    sys.exit(main())

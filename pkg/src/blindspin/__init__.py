"""Blind delegated quantum computation on a central-spin simulator."""

__version__ = "0.1.0"

from .compiler import (
    Circuit,
    CircuitParseError,
    Gate,
    KeySymbol,
    Round,
    Schedule,
    UXY,
    compile_circuit,
    decompose,
    expected_unitary,
    omega,
    parse_circuit,
    rekey,
    synth_rx,
    synth_rz,
    synth_uxy,
    uxy_generator,
)
from .linalg import (
    embed,
    expm_hermitian,
    fidelity_unitary,
    kron,
    operator_norm,
    partial_trace,
    state_fidelity,
    trace_distance,
)
from .protocol import (
    ProtocolOutcome,
    RoundRecord,
    ServerBehavior,
    client_pulse_for,
    detection_probability,
    honest,
    prepare_key_state,
    run_protocol1,
    run_protocol2,
    run_protocol3,
    server_view_density,
)
from .spinmodel import (
    CentralSpinParams,
    antisymmetric_params,
    approx_controlled_evolution,
    build_central_hamiltonian,
    build_effective_closed,
    build_effective_exact,
    build_effective_numeric,
    choose_antisymmetric_fields,
    evolution_error,
    t1_generator,
)
from .verification import (
    SimonInstance,
    StabilizerTableau,
    gf2_nullspace,
    simon_run,
    tableau_apply,
    tableau_measure,
    verify_permutation,
    verify_stabilizer,
)

"""Simulation of GHZ-state synthesis by a displaced thermal cavity field.

N two-level atoms interact resonantly with one cavity mode. A square loop of
field displacements and atomic quarter-turn rotations, interleaved with
Tavis-Cummings evolution, imprints a phase quadratic in the collective spin
while the field, however hot or strongly displaced, ends up factored out.
"""

from .analysis import (
    DecoherenceParams,
    Metrics,
    compute_metrics,
    decoherence_budget,
    evaluate,
    ghz_fidelity,
    product_form_distance,
    robustness_fidelity,
    robustness_fidelity_via_states,
    sweep,
)
from .dynamics import JointShape, propagate
from .protocol import (
    ConfigError,
    Engine,
    ProtocolConfig,
    RunResult,
    analytic_final_state,
    build_schedule,
    extract_two_qubit_phases,
    loop_geometry,
    run,
)

__version__ = "0.1.0"

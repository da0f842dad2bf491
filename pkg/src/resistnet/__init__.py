"""Effective-resistance metrics on weighted networks."""

from .network import (
    INFINITY,
    Exhaustion,
    InfiniteNetworkSpec,
    Network,
    NetworkError,
    ball_exhaustion,
    dump_network,
    dumps_network,
    full_subnetwork,
    generate,
    load_network,
    loads_network,
    validate,
    wired_subnetwork,
)
from .forms import (
    CurrentFlow,
    LaplacianBlocks,
    PotentialFunction,
    SolverError,
    assemble_laplacian,
    dissipation,
    divergence,
    drop,
    energy,
    energy_kernel_element,
    solve_dipole,
    transition_kernel,
)
from .resistance import (
    ResistanceReport,
    check_metric_axioms,
    effective_resistance,
    resistance_matrix,
    resistance_report,
)

__version__ = "0.1.0"

__all__ = [
    "INFINITY",
    "Exhaustion",
    "InfiniteNetworkSpec",
    "Network",
    "NetworkError",
    "ball_exhaustion",
    "dump_network",
    "dumps_network",
    "full_subnetwork",
    "generate",
    "load_network",
    "loads_network",
    "validate",
    "wired_subnetwork",
    "CurrentFlow",
    "LaplacianBlocks",
    "PotentialFunction",
    "SolverError",
    "assemble_laplacian",
    "dissipation",
    "divergence",
    "drop",
    "energy",
    "energy_kernel_element",
    "solve_dipole",
    "transition_kernel",
    "ResistanceReport",
    "check_metric_axioms",
    "effective_resistance",
    "resistance_matrix",
    "resistance_report",
]

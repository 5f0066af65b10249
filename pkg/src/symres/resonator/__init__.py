"""Mode reduction, discretisation and pole detection for the model hyperbolic balls."""
from .continuation import (CSV_COLUMNS, PipelineResult, Pole, ResolventSolution, ResonanceReport,
                           continue_resolvent_apply, decoupling_pipeline, reports_to_csv, reports_to_svg,
                           resonance_scan, scalar_decay, tracefree_bump)
from .grid import MU_EDGE, CollocationGrid
from .modes import (MU_CENTER, AssemblyError, ModeError, ModeSystem, component_labels, mode_reduce,
                    rank_slices, reduced_operator, surface_operator)
from .pencil import (METHODS, PencilError, PencilMatrix, SingularSystemError, assemble_P_mode, eigs_near, restricted_residue,
                     scan_sigma_min, sigma_min, solve_pencil)

__all__ = [
    "CSV_COLUMNS", "PipelineResult", "Pole", "ResolventSolution", "ResonanceReport", "continue_resolvent_apply",
    "decoupling_pipeline", "reports_to_csv", "reports_to_svg", "resonance_scan", "scalar_decay", "tracefree_bump",
    "MU_EDGE", "CollocationGrid", "MU_CENTER", "AssemblyError", "ModeError", "ModeSystem", "component_labels",
    "mode_reduce", "rank_slices", "reduced_operator", "surface_operator", "METHODS", "PencilError",
    "PencilMatrix", "SingularSystemError", "assemble_P_mode", "eigs_near", "restricted_residue", "scan_sigma_min",
    "sigma_min", "solve_pencil",
]

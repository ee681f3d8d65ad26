"""Coupling resonance functions of finite-dimensional self-adjoint pairs."""

from .continuation import (
    BranchFamily,
    BranchPoint,
    DivergenceReport,
    PathSpec,
    classify_approach,
    locate_branch_points,
    match_spectra,
    monodromy,
    trace_branches,
)
from .numerics import (
    EigenResult,
    general_eigen,
    hermitian_eigen,
    singular_values,
    solve_shifted,
)
from .problem import (
    EnsembleSpec,
    ResonanceProblem,
    build_ensemble,
    load_problem,
    serialize,
    validate,
)
from .resonance import (
    HerglotzReport,
    ResonanceSet,
    TransferSample,
    WeylReport,
    coupling_consistency,
    herglotz_sum,
    resonances_at,
    shift_identity_residual,
    shifted_transfer_at,
    transfer_at,
    weyl_report,
)
from .scan import Region, ScanReport, absorbing_sweep, grid_scan

__version__ = "0.1.0"

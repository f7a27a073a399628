"""Limited-memory SR1 trust-region optimization with an exact subproblem solver."""

from .dataset import Dataset, load_dataset, parse_idx, read_idx_file, subset, to_idx_bytes
from .errors import (
    ConfigError,
    DataError,
    LineSearchError,
    NumericalError,
    RankDeficiencyError,
    SingularMatrixError,
    Sr1trustError,
)
from .lbfgs import LBFGSMemory, minimize_lbfgs, two_loop_direction
from .lsr1 import CompactSR1, PairBuffer, assemble_compact, lambda_hat_and_gamma, try_update
from .network import NetObjective, NetworkSpec, forward, init_params, loss_and_grad, param_count
from .stochastic import (
    BatchSchedule,
    MomentumState,
    minimize_stochastic,
    momentum_graft,
    sample_overlapping_batch,
    stall_and_grow,
)
from .subproblem import (
    SpectralData,
    SubproblemSolution,
    secular_phi,
    secular_root,
    solve_shifted,
    solve_subproblem,
    spectral_prep,
)
from .trust_region import (
    FunctionObjective,
    Objective,
    RunResult,
    TraceRecord,
    TRConfig,
    minimize,
    strong_wolfe_search,
    tr_radius_update,
)

__version__ = "0.1.0"

__all__ = [
    "BatchSchedule",
    "CompactSR1",
    "ConfigError",
    "DataError",
    "Dataset",
    "FunctionObjective",
    "LBFGSMemory",
    "LineSearchError",
    "MomentumState",
    "NetObjective",
    "NetworkSpec",
    "NumericalError",
    "Objective",
    "PairBuffer",
    "RankDeficiencyError",
    "RunResult",
    "SingularMatrixError",
    "SpectralData",
    "Sr1trustError",
    "SubproblemSolution",
    "TRConfig",
    "TraceRecord",
    "assemble_compact",
    "forward",
    "init_params",
    "lambda_hat_and_gamma",
    "load_dataset",
    "loss_and_grad",
    "minimize",
    "minimize_lbfgs",
    "minimize_stochastic",
    "momentum_graft",
    "param_count",
    "parse_idx",
    "read_idx_file",
    "sample_overlapping_batch",
    "secular_phi",
    "secular_root",
    "solve_shifted",
    "solve_subproblem",
    "spectral_prep",
    "stall_and_grow",
    "strong_wolfe_search",
    "subset",
    "to_idx_bytes",
    "tr_radius_update",
    "try_update",
    "two_loop_direction",
]

"""SPDHG, deterministic PDHG, SPDHG-mu and comparison baselines."""

from .baselines import fb_vc_cd_run, sdca_run, svrg_run
from .spdhg import (RunConfig, RunResult, check_sampler_identities, dual_candidate, pdhg_run,
                    primal_update, run, spdhg_mu_run, spdhg_step, strong_convexity_constants)
from .steps import (DEFAULT_GAMMA, StepReport, StepSizeError, default_step_sizes,
                    fb_vc_cd_step_sizes, pdhg_step_sizes, spdhg_mu_step_sizes,
                    validate_step_sizes)
from .types import (DivergenceError, ErgodicAccumulator, InapplicableError, ReferenceSolution,
                    SaddleProblem, SolverState, StepSizes)

__all__ = [
    "RunConfig", "RunResult", "run", "pdhg_run", "spdhg_mu_run", "spdhg_step",
    "primal_update", "dual_candidate", "check_sampler_identities", "strong_convexity_constants",
    "fb_vc_cd_run", "svrg_run", "sdca_run",
    "DEFAULT_GAMMA", "StepReport", "StepSizeError", "default_step_sizes", "fb_vc_cd_step_sizes",
    "pdhg_step_sizes", "spdhg_mu_step_sizes", "validate_step_sizes",
    "DivergenceError", "ErgodicAccumulator", "InapplicableError", "ReferenceSolution",
    "SaddleProblem", "SolverState", "StepSizes",
]

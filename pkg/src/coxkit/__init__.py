"""coxkit: exact MCMC inference for Cox processes with probit-link GP
intensities, in space and in space-time."""

from .errors import (
    CoxkitError,
    InputError,
    NumericalError,
    RejectionCapError,
    UnsupportedConfigError,
)
from .kernel_gp import (
    CovFactor,
    GpFieldSampler,
    GpHyper,
    SchurState,
    SpatialCov,
    build_cov_factor,
    chol_with_jitter,
    gp_conditional,
    gp_logpdf,
    kernel_eval,
    schur_extend,
)
from .skew_normal import (
    ConstraintRegion,
    SkewNormalSpec,
    sample_constrained_gaussian,
    sample_skew_normal,
    sn_log_density,
)
from .point_process import (
    PointPattern,
    Region,
    ThinnedRealization,
    read_pattern,
    sim_cox_thinning,
    sim_homogeneous_pp,
    write_pattern,
)
from .dynamic_gp import (
    DgpProcessCov,
    DgpSpec,
    Seasonal,
    dgp_joint_conditional,
    dgp_logpdf,
    evolve,
    seasonal_predictor,
)
from .mcmc_spatiotemporal import (
    LambdaStructure,
    PredictionResult,
    StChainState,
    StData,
    StPriorSpec,
    initial_state_st,
    predict,
    run_gibbs_st,
    sample_gp_all_times,
    sample_lambda_all,
    sample_theta_st,
    sample_thinned_all_times,
)
from .mcmc_spatial import (
    ChainOutput,
    GibbsConfig,
    IntensityGrid,
    LambdaPrior,
    Param,
    PriorSpec,
    ProcessPrior,
    SpatialChainState,
    SpatialData,
    augment_grid,
    estimate_integral,
    initial_state,
    run_gibbs,
    sample_gp_block,
    sample_lambda_star,
    sample_theta,
    sample_thinned_block,
    sample_trunc_poisson,
)

__version__ = "0.1.0"

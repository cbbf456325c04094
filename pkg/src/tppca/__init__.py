"""Robust probabilistic PCA under multivariate t distributions.

Generative samplers for three hierarchical t models, maximum-likelihood
estimators for each (closed-form Gaussian PPCA, EM for the shared-scale
marginal model, Monte Carlo EM with per-observation Gibbs chains for the
two-scale family), the first-principal-angle subspace metric, and a seeded
simulation harness.
"""

__version__ = "0.1.0"

from .params import (  # noqa: F401
    Dataset,
    DofSpec,
    FitResult,
    ModelParams,
    NuSetting,
    TraceEntry,
    validate_params,
)
from .distributions import (  # noqa: F401
    GammaParams,
    MvtParams,
    digamma,
    gamma_posterior,
    mvt_logpdf,
    sample_gamma,
    sample_mvn,
    sample_mvt,
)
from .metrics import Subspace, first_principal_angle, orthonormalize  # noqa: F401
from .generators import (  # noqa: F401
    GeneratedSample,
    GeneratedSamples,
    OutlierSpec,
    check_scale_matrix_limit,
    equicorrelation,
    gen_cl,
    gen_conditional,
    gen_experiment,
    gen_marginal,
)
from .standard import (  # noqa: F401
    EigenDecomposition,
    fit_standard,
    posterior_mean_z,
)
from .marginal_t import (  # noqa: F401
    EmControl,
    MarginalEStep,
    estep_marginal,
    fit_marginal_em,
    loglik_marginal,
    mstep_marginal,
)
from .cl_mcem import (  # noqa: F401
    CLExpectationSet,
    GibbsChainState,
    McemControl,
    expected_complete_loglik,
    fit_cl_mcem,
    fit_conditional_t,
    gibbs_sweep,
    mc_expectations,
    mstep_cl,
    u1_conditional,
    u2_conditional,
    z_conditional,
)
from .io import (  # noqa: F401
    load_dataset,
    load_params,
    save_dataset,
    save_params,
)
from .estimators import (  # noqa: F401
    CLTPPCA,
    ConditionalTPPCA,
    MarginalTPPCA,
    StandardPPCA,
)

__all__ = [
    "CLExpectationSet",
    "CLTPPCA",
    "ConditionalTPPCA",
    "Dataset",
    "DofSpec",
    "EigenDecomposition",
    "EmControl",
    "FitResult",
    "GammaParams",
    "GeneratedSample",
    "GeneratedSamples",
    "GibbsChainState",
    "MarginalEStep",
    "MarginalTPPCA",
    "McemControl",
    "ModelParams",
    "MvtParams",
    "NuSetting",
    "OutlierSpec",
    "StandardPPCA",
    "Subspace",
    "TraceEntry",
    "check_scale_matrix_limit",
    "digamma",
    "equicorrelation",
    "estep_marginal",
    "expected_complete_loglik",
    "first_principal_angle",
    "fit_cl_mcem",
    "fit_conditional_t",
    "fit_marginal_em",
    "fit_standard",
    "gamma_posterior",
    "gen_cl",
    "gen_conditional",
    "gen_experiment",
    "gen_marginal",
    "gibbs_sweep",
    "load_dataset",
    "load_params",
    "loglik_marginal",
    "mc_expectations",
    "mstep_cl",
    "mstep_marginal",
    "mvt_logpdf",
    "orthonormalize",
    "posterior_mean_z",
    "sample_gamma",
    "sample_mvn",
    "sample_mvt",
    "save_dataset",
    "save_params",
    "u1_conditional",
    "u2_conditional",
    "validate_params",
    "z_conditional",
]

"""Central dependence subspace estimation for conditional copulas.

Estimates the smallest covariate projection that carries the conditional
dependence between a pair of responses, via pseudo-response regression and
adaptive outer products of local-linear gradients, and ships a Monte Carlo
harness that reproduces the simulation study at desk scale.
"""

from .copulas import CopulaParam, sample_pair, sample_pairs, spearman_of, tau_to_param
from .data import Dataset, GroundTruth, Scenario, read_dataset_csv, write_dataset_csv
from .errors import (
    ContractViolation,
    DegenerateNeighborhood,
    EstimationFailed,
    UnsupportedMarginMode,
)
from .kernels import KernelSpec, k_cdf, k_eval, product_kernel
from .linalg import (
    EigenDecomposition,
    SubspaceBasis,
    eig_sym,
    pinv_sym,
    subspace_distance,
    weighted_ls,
)
from .local_linear import LocalLinearFit, ProjectionContext, ll_fit, smoothed_cdf_fit
from .margins import (
    MarginModel,
    margins_known,
    margins_nonparametric,
    margins_parametric,
    pseudo_observations,
)
from .measures import (
    PseudoResponses,
    build_pseudo_responses,
    g_blomqvist,
    g_gini,
    g_spearman,
    g_tau_kernel,
    g_waerden,
)
from .opg import (
    BandwidthSchedule,
    OpgResult,
    TrimmingSet,
    adaptive_opg,
    default_schedule,
    opg_matrix,
    opg_single_pass,
    stabilizer_scale,
    trimming_from_quantiles,
)
from .simulation import (
    ParametricFit,
    ReplicateResult,
    fit_parametric_baseline,
    generate,
    run_replicate,
    tau_link,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

"""Seeded simulator of decentralized stochastic optimization.

Gossip-mixing agent networks minimizing a shared nonconvex logistic
objective with momentum tracking and baseline methods, under noisy and
systematically biased gradient oracles.
"""

from .algorithms import (
    ALGORITHMS,
    BIASED_DMT,
    DSGD,
    DSGDM,
    GT_DSGD,
    AgentNetworkState,
    AlgoConfig,
    init_state,
    parameter_guard,
    step_biased_dmt,
    step_dsgd,
    step_dsgdm,
    step_gt_dsgd,
    stepper,
)
from .data import (
    IID_SHUFFLE,
    LABEL_SORTED,
    Partition,
    SparseSample,
    build_objectives,
    dump_libsvm,
    estimate_heterogeneity,
    parse_libsvm,
    partition,
    synthetic_blobs,
)
from .errors import (
    ConfigurationError,
    ContractViolationError,
    MetricsError,
    ParseError,
    TopologyError,
)
from .metrics import IterationRecord, ensure_finite, record, running_average_grad_norm
from .objective import (
    GlobalObjective,
    RegularizedLogisticObjective,
    estimate_smoothness,
    global_loss_and_gradient,
    local_gradient,
    local_loss,
)
from .oracle import (
    AbsoluteGaussianMean,
    AdditiveGaussian,
    Exact,
    MiniBatch,
    NoBias,
    OracleSpec,
    RelativeScale,
    TopK,
    agent_streams,
    bias_bounds,
    measure_oracle,
    mean_shift,
    sample,
)
from .runner import (
    RunConfig,
    RunResult,
    emit_csv,
    emit_plot_script,
    grid_search,
    load_config,
    parse_config,
    preset_configs,
    read_csv,
    run,
)
from .topology import (
    MixingMatrix,
    build_mixing_matrix,
    compute_spectral_gap,
    contraction_check,
    parse_edge_list,
)

__version__ = "0.1.0"

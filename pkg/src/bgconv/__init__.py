"""Group and balanced group convolutions as explicit linear operators, with
least-squares approximability estimates against the standard convolution."""

from .conv import (
    BalancedConv,
    GroupedConv,
    MultiChannelSignal,
    PaddingMode,
    SignalShape,
    StandardConv,
    balanced_from_standard,
    check_young,
    conv_single,
    extract_block_diagonal,
    forward_balanced,
    forward_group,
    forward_standard,
    intergroup_mean,
    param_l2_norm,
)
from .cost import CostBreakdown, LayerSpec, LayerVariant, op_count, param_count
from .errors import (
    ConfigurationError,
    DimensionError,
    InsufficientPointsError,
    NumericalFailure,
    UnderdeterminedError,
)
from .estimator import (
    ApproximabilityReport,
    DesignSystem,
    InputPool,
    TrialResult,
    Variant,
    bound_ratio,
    build_design,
    check_lemma2_montecarlo,
    estimate_E,
    evaluate_cells,
    fit_slope,
    solve_trial,
    theorem_bound,
)
from .sampling import (
    InputDistribution,
    SeedSpec,
    TrialOperators,
    WeightInit,
    init_standard_conv,
    sample_input,
    sample_input_pool,
)

__version__ = "0.1.0"

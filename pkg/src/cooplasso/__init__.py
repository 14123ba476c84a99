"""Sign-coherent group-sparse regression.

The cooperative penalty applies the weighted group norm separately to the
positive and negative parts of each coefficient group, shrinking toward
solutions whose groups are sign-coherent.  The package bundles the solver
(linear and logistic losses, active-set algorithm, warm-started paths),
the lasso / group / sparse-group comparators, closed-form orthonormal
oracles, analytic and cross-validated model selection, support-recovery
diagnostics, a synthetic benchmark, ordinal contrast coding and a CLI.
"""

from .diagnostics import (
    IrrepReport,
    RecoveryReport,
    TruthSpec,
    build_separating_truth,
    check_assumptions,
    empirical_recovery,
    weighting_matrix,
)
from .encoding import (
    OrdinalSpec,
    backward_difference_codings,
    encode,
    level_effects,
)
from .errors import (
    CoopLassoError,
    DimensionMismatch,
    EmptyGroup,
    FoldTooSmall,
    InputError,
    LineSearchFailure,
    NonBinaryResponse,
    NonFiniteLoss,
    NonPositiveWeight,
    NumericalError,
    OlsUnavailable,
    OverlappingGroups,
    SigmaRequired,
    SingularSupportBlock,
    UncoveredIndex,
    UnknownLevel,
)
from .glm import Dataset, LossSpec, loss_and_gradient, prepare
from .groups import (
    GroupPartition,
    SignSplit,
    default_weights,
    phi,
    sign_split,
    validate_partition,
)
from .model_select import (
    SelectionReport,
    cross_validate,
    df_coop,
    df_group,
    df_lasso,
    information_criteria,
    ridge_reference,
)
from .ortho import (
    coop_closed_form,
    group_closed_form,
    lasso_closed_form,
    sgl_closed_form,
)
from .penalty import (
    KktReport,
    PenaltySpec,
    kkt_check,
    lambda_max,
    norm_value,
    prox,
    subdifferential_contains_zero,
)
from .simulate import (
    MetricsRow,
    WaveScenario,
    evaluate,
    generate,
    run_benchmark,
)
from .solver import (
    ActiveSets,
    FitResult,
    PathResult,
    fit,
    fit_reference,
    path,
    solve_active_subproblem,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Differentially private distribution testing with advice.

Identity and closeness testers that exploit a public advice distribution,
the flattening machinery and private l2 verification behind the closeness
tester, hard-instance samplers with an explicit low-Hamming coupling, and a
seeded Monte Carlo harness for error-rate experiments.
"""

__version__ = "0.1.0"

from .dist_core import (  # noqa: F401
    Outcome,
    Pmf,
    SampleMultiset,
    draw_fixed,
    draw_poissonized,
    l2_norm_sq,
    tv_distance,
)
from .dp import (  # noqa: F401
    PrivacyBudget,
    SensitivityBound,
    exhaustive_sensitivity,
    laplace_sample,
    privatize,
)
from .identity import (  # noqa: F401
    AdviceSpec,
    Branch,
    IdentityInstance,
    augmented_identity_test,
    baseline_private_identity_test,
    branch_select,
    identity_test,
    scheffe_set,
    sigma_statistic,
)
from .flattening import (  # noqa: F401
    BalanceParams,
    Bucketing,
    DatasetSplit,
    balance_map,
    collision_l2_estimate,
    collision_l2_sensitivity,
    flattened_l2_true,
    l2_stage_budget,
    private_l2_test,
    step1_buckets,
    step2_buckets,
)
from .closeness import (  # noqa: F401
    ClosenessSchedule,
    augmented_closeness_test,
    baseline_private_closeness_test,
    core_private_closeness_test,
    schedule,
    two_sample_collision_statistic,
)
from .hard_instances import (  # noqa: F401
    HardFamily,
    advice_phat,
    couple_diamond,
    p_bullet,
    p_diamond,
)
from .harness import (  # noqa: F401
    ExperimentConfig,
    SummaryRow,
    run_experiment,
    sweep,
)

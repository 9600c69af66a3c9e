"""Minimum transmit power for SINR targets in multi-antenna downlinks.

The package has three layers:

* geometry and power: seeded channel sampling, subspace projections,
  exact and approximate minimum-power solutions, and the beamforming
  realization with the same total (``channel``, ``power``);
* user selection: norm-based, greedy-orthogonal, angle-based, random,
  and exhaustive rules (``selection``);
* analysis and experiments: closed-form / quadrature average powers,
  seeded Monte Carlo sweeps, and validation of one against the other
  (``analytic``, ``experiment``, ``cli``).
"""

__version__ = "0.1.0"

from .analytic import (
    DistributionSpec,
    alpha,
    avg_power_aus_two,
    avg_power_lower_bound_two,
    avg_power_nus,
    avg_power_rus,
    avg_power_sus,
    cdf,
    mean_inverse,
    pdf,
)
from .channel import ChannelSet, SeedSpec, sample_channel_set, sin_sq_angle, squared_norm
from .errors import (
    BudgetError,
    ConfigError,
    DimensionError,
    DivergenceError,
    DomainError,
    FullSpaceError,
    InfeasibleGeometryError,
    RankDeficiencyError,
)
from .experiment import (
    ExperimentConfig,
    ResultRow,
    ValidationRow,
    run_point,
    run_sweep,
    validate_rows,
)
from .power import (
    PowerSolution,
    SinrTargets,
    approx_min_power,
    downlink_dual_solution,
    evaluate_sinr,
    exact_min_power,
)
from .selection import (
    SelectionResult,
    select_aus,
    select_exhaustive,
    select_nus,
    select_rus,
    select_sus,
)

__all__ = [
    "__version__",
    "ChannelSet",
    "SeedSpec",
    "sample_channel_set",
    "sin_sq_angle",
    "squared_norm",
    "DistributionSpec",
    "alpha",
    "cdf",
    "pdf",
    "mean_inverse",
    "avg_power_nus",
    "avg_power_sus",
    "avg_power_aus_two",
    "avg_power_rus",
    "avg_power_lower_bound_two",
    "SinrTargets",
    "PowerSolution",
    "exact_min_power",
    "approx_min_power",
    "downlink_dual_solution",
    "evaluate_sinr",
    "SelectionResult",
    "select_nus",
    "select_sus",
    "select_aus",
    "select_rus",
    "select_exhaustive",
    "ExperimentConfig",
    "ResultRow",
    "ValidationRow",
    "run_point",
    "run_sweep",
    "validate_rows",
    "BudgetError",
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "FullSpaceError",
    "InfeasibleGeometryError",
    "RankDeficiencyError",
]

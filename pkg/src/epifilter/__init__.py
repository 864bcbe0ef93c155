"""Agent-based SEIR epidemic model coupled with a particle filter for R_t estimation."""

__version__ = "0.1.0"

from .assimilation import (
    ErrorModel,
    FilterDivergenceError,
    Observation,
    effective_particles,
    resample,
    should_resample,
    sigma_h,
    update_weights,
    weighted_summary,
)
from .distributions import (
    DiscreteDistribution,
    RngStream,
    sample_discrete,
    sample_multinomial,
    sample_truncated_normal,
    two_point_integer_distribution,
)
from .epimodel import (
    CompartmentState,
    DynamicParams,
    Ensemble,
    FixedParams,
    Particle,
    compute_rt,
    evolve_params,
    spawn_infections,
    step_ensemble,
    step_particle,
)
from .experiment import (
    DailySummary,
    ExperimentConfig,
    forecast_analysis_divergence,
    init_particles,
    run,
    run_sweep,
)
from .observations import ObservationSeries, load_observations

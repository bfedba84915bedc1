"""SIS epidemics on degree-capped dynamic contact networks.

Deterministic effective-degree ODEs, next-generation-matrix thresholds,
and a matched event-driven stochastic simulator, with network generators
and a sweep/figure CLI on top.
"""

from .errors import (
    ConfigError,
    DomainError,
    GenerationError,
    IntegrationError,
    NumericalError,
    ParameterizationError,
    UndefinedEquilibriumError,
)
from .state import (
    CompartmentIndex,
    DegreeDistribution,
    ModelParams,
    NetworkStats,
    StateVector,
    equilibrium_mean_degree,
    initial_state,
    network_stats,
    omega_for_target_degree,
)
from .ode import (
    MixingCoefficients,
    Trajectory,
    compute_mixing,
    integrate,
    rhs,
    sample_grid,
)
from .ngm import (
    DfeState,
    DiseaseStateIndex,
    NgmMatrices,
    assemble_F,
    assemble_V,
    build_ngm,
    dfe_from_distribution,
    jacobian_oracle,
    meanfield_r0,
    r0,
    static_r0,
)
from .simulate import (
    EnsembleResult,
    Graph,
    SimState,
    empirical_degree_distribution,
    ensemble,
    run,
    step,
    total_rates,
)
from .netgen import (
    configuration_model,
    negative_binomial_degrees,
    regular_random,
    seed_infection,
)

__version__ = "0.1.0"

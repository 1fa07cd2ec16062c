"""Monte Carlo pricing in LIBOR market models driven by a normal inverse Gaussian process."""

from .driver import (
    CumulantDomainError,
    LevyDriverSpec,
    NigParams,
    QuadratureError,
    jump_integral_quadrature,
    nig_cumulant,
    nig_levy_density,
    nig_mean,
    nig_variance,
    sample_increment,
    sample_increments,
)
from .drift import (
    DriftCost,
    DriftEvaluator,
    DriftInputs,
    DriftMode,
    DriftSizeError,
    drift_cost,
    elementary_symmetric,
    elementary_symmetric_all,
    jump_drift,
    jump_drift_first_order,
    jump_drift_full,
    jump_drift_second_order,
    total_drift,
)
from .market import (
    InitialCurve,
    MarketModel,
    TenorStructure,
    ValidationReport,
    VolatilityStructure,
    check_conditions,
    initial_forward_rates,
    libor_weight,
    reference_model,
    validate_model,
)
from .pricing import (
    Caplet,
    Fra,
    McEstimate,
    NoSolutionError,
    RateObservation,
    Swaption,
    black76_price,
    caplet_payoff,
    fra_payoff,
    implied_vol,
    swaption_payoff,
)
from .simulation import (
    LiborEngine,
    RngPolicy,
    RunSpec,
    Scheme,
    SimulationError,
    SimulationGrid,
    run_experiment,
    run_simulation,
)

__version__ = "0.1.0"

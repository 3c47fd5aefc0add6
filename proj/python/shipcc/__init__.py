"""Ship carbon-capture plant simulation, hybrid models and economic MPC."""

from ._core import (
    NX,
    NZ,
    NU,
    NY,
    Error,
    ConfigError,
    InputDomainError,
    StepFailure,
    ControlInput,
    Disturbance,
    PlantOutput,
    InputBox,
    PlantParameters,
    IntegratorConfig,
    EconomicConfig,
    TrackingConfig,
    SteadyState,
    Trajectory,
    RunConfig,
    flue_gas_rates,
    heat_supply,
    seawater_outlet_temperature,
    plant_dae,
    outputs,
    capture_rate,
    consistent_initialize,
    dae_step,
    simulate_open_loop,
    nominal_steady_state,
    economic_cost,
    tracking_cost,
    load_config,
    parse_config,
    simulate,
    gen_data,
    train,
    evaluate,
    experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""RIS-aided uplink massive MIMO with hardware impairments: analytic rates, Monte-Carlo checks and GA phase design."""

__version__ = "0.1.0"

from .analytic import (
    RateBreakdown,
    RateModel,
    asymptotic_rate,
    cross_moment,
    derived_constants,
    e_hwi,
    e_interf,
    e_noise,
    e_signal,
    f_k,
    fourth_moment_per_antenna,
    rate,
    rates,
)
from .channel import (
    ChannelRealization,
    PhaseVector,
    ScenarioGeometry,
    SystemConfig,
    effective_channel,
    los_channels,
    sample_realization,
    steering_vector,
)
from .errors import ConfigError, DimensionError, ScenarioParseError
from .experiments import SweepResult, emit, run_sweep
from .ga import GaConfig, GaResult, fitness_min_rate, fitness_sum_rate, ga_optimize
from .montecarlo import McEstimate, estimate_ergodic_rate, estimate_moment, estimate_moments
from .scenario import Scenario, ScenarioFile, build_scenario, default_scenario

"""Dual-waveguide pinching-antenna secure transmission toolkit.

Provides scenario geometry, line-of-sight channel construction, two-stage
optimization (swarm-based antenna placement followed by convex-approximation
beamforming / artificial-noise design), baselines, and a batch experiment
harness with CSV output.
"""

from .scenario import (
    SystemParams,
    WaveguideLayout,
    Scenario,
    Placement,
    derive_params,
    sample_scenario,
    feed_point,
    pin_position,
    expected_sq_vertical_distance,
    uniform_shift_expectation,
)
from .channel import (
    ChannelModel,
    EffectiveChannels,
    BeamSet,
    inwaveguide_gain,
    freespace_gain,
    effective_channel,
    effective_channels,
    rate_lu,
    rate_eve,
    secrecy_rate,
    ssr,
    see,
)
from .placement import (
    PsoConfig,
    PlacementResult,
    project_feasible,
    heuristic_beams,
    fitness,
    feapso,
    exhaustive_search,
    fixed_baseline_placement,
)
from .conic import ConicProblem, ConicSolution, ConeBlock, solve
from .sca import ScaConfig, ScaState, ScaResult, init_state, sca_optimize
from .harness import (
    ExperimentConfig,
    RunRecord,
    run_experiment,
    empirical_cdf,
    write_csv,
    read_csv,
)

__all__ = [
    "SystemParams", "WaveguideLayout", "Scenario", "Placement",
    "derive_params", "sample_scenario", "feed_point", "pin_position",
    "expected_sq_vertical_distance", "uniform_shift_expectation",
    "ChannelModel", "EffectiveChannels", "BeamSet",
    "inwaveguide_gain", "freespace_gain", "effective_channel",
    "effective_channels", "rate_lu", "rate_eve", "secrecy_rate", "ssr", "see",
    "PsoConfig", "PlacementResult", "project_feasible", "heuristic_beams",
    "fitness", "feapso", "exhaustive_search", "fixed_baseline_placement",
    "ConicProblem", "ConicSolution", "ConeBlock", "solve",
    "ScaConfig", "ScaState", "ScaResult", "init_state", "sca_optimize",
    "ExperimentConfig", "RunRecord", "run_experiment", "empirical_cdf",
    "write_csv", "read_csv",
]

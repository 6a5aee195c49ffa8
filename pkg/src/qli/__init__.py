"""Time-interleaved co-propagation of decoy-state BB84 with classical DWDM traffic."""
__version__ = "0.1.0"

from .channel import (
    DecoyConfig,
    DetectorSpec,
    SystemSpec,
    TallyCounts,
    expected_gains,
    gain_qber_analytic,
    sift,
    simulate_pulses,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DomainError,
    InvalidChannelError,
    InvalidPlanError,
    ModelBreakdownError,
    ModelWarning,
    QLIError,
    UndefinedBoundError,
)
from .fiber import FiberSpec, PathBudget, RamanTable, noise_prob_per_gate, raman_noise_power, walk_off_delay
from .keyrate import KeyRateInput, KeyRateOutput, h2, optimize_intensities, skr
from .scenario import Scenario, ScenarioResult, calibrate, plan, run_scenario, sweep_launch_power
from .timing import FramePlan, NoiseProfile, carve_pattern, in_window_fraction, spread_profile, validate_plan
from .units import ChannelPlan, ClassicalChannel, dbm_to_mw, itu_channel_frequency, mw_to_dbm

__all__ = [
    "CalibrationError",
    "ChannelPlan",
    "ClassicalChannel",
    "ConfigError",
    "DecoyConfig",
    "DetectorSpec",
    "DomainError",
    "FiberSpec",
    "FramePlan",
    "InvalidChannelError",
    "InvalidPlanError",
    "KeyRateInput",
    "KeyRateOutput",
    "ModelBreakdownError",
    "ModelWarning",
    "NoiseProfile",
    "PathBudget",
    "QLIError",
    "RamanTable",
    "Scenario",
    "ScenarioResult",
    "SystemSpec",
    "TallyCounts",
    "UndefinedBoundError",
    "calibrate",
    "carve_pattern",
    "dbm_to_mw",
    "expected_gains",
    "gain_qber_analytic",
    "h2",
    "in_window_fraction",
    "itu_channel_frequency",
    "mw_to_dbm",
    "noise_prob_per_gate",
    "optimize_intensities",
    "plan",
    "raman_noise_power",
    "run_scenario",
    "sift",
    "simulate_pulses",
    "skr",
    "spread_profile",
    "sweep_launch_power",
    "validate_plan",
    "walk_off_delay",
]

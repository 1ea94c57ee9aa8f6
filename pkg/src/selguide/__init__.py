"""Selective classifier-free guidance on an exact Gaussian-mixture denoiser."""

from .errors import (
    ConfigError,
    DegenerateFit,
    DimensionMismatch,
    EmptySet,
    InvalidGuidance,
    InvalidMixture,
    InvalidScheduleConfig,
    InvalidSweep,
    SeedMismatch,
    SelguideError,
    UnknownLabel,
)
from .experiments import BenchResult, SweepResult, TuneResult, bench, gs_tune, window_sweep
from .guidance import GuidanceSpec, cfg_combine, in_skip_window, selective_eps
from .metrics import DivergenceReport, SavingsModel, endpoint_mse, fit_unet_fraction, predicted_saving, sliced_w2
from .oracle import CostModel, MixtureModel, NoisePrediction, VirtualClock, default_mixture, gm_epsilon, simulated_eval
from .sampler import RunConfig, Trajectory, reverse_step_ddim, reverse_step_ddpm, run_batch, run_sampling
from .schedule import ScheduleParams, build_schedule

__version__ = "0.1.0"

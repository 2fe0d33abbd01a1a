"""diarymc: Bayesian analysis of bleeding diaries.

Parses daily B/S/N diaries, extracts alternating episode sequences, fits a
hierarchical model with latent severity states by Gibbs sampling, and
simulates the fitted process for generic and subject-level predictions.
"""

from ._kernels import BACKEND
from .diary import (
    DiaryDataset,
    DiarySeries,
    DayStatus,
    Episode,
    EpisodeSequence,
    NonNClass,
    Phase,
    extract_episodes,
    parse_dataset,
    summarize_subject,
    write_dataset,
    write_episode_csv,
)
from .model import (
    FIXED_N1_RATE,
    ModelParams,
    PriorConfig,
    ReducedParams,
    SharingConfig,
    duration_loglik,
    init_params,
    load_params,
    prior_logpdf,
    save_params,
    sequence_loglik_complete,
    validate_params,
)
from .predict import (
    AmenorrheaSpec,
    Trajectory,
    TrajectoryStart,
    condition_subject_latents,
    occupancy_proportions,
    predict_subject_future,
    prob_N_at_times,
    residual_relapse_time,
    simulate_trajectories,
    simulate_trajectory,
    summarize_times,
    time_to_cumulative_amenorrhea,
    two_step_summary,
)
from .sampler import (
    ChainConfig,
    PosteriorDraws,
    SufficientStats,
    accumulate_sufficient_stats,
    diagnostics,
    gibbs_run,
    initial_assignment,
    latent_full_conditional,
    load_draws,
    save_draws,
    sweep_latents,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AmenorrheaSpec",
    "ChainConfig",
    "DayStatus",
    "DiaryDataset",
    "DiarySeries",
    "Episode",
    "EpisodeSequence",
    "FIXED_N1_RATE",
    "ModelParams",
    "NonNClass",
    "Phase",
    "PosteriorDraws",
    "PriorConfig",
    "ReducedParams",
    "SharingConfig",
    "SufficientStats",
    "Trajectory",
    "TrajectoryStart",
    "accumulate_sufficient_stats",
    "condition_subject_latents",
    "diagnostics",
    "duration_loglik",
    "extract_episodes",
    "gibbs_run",
    "init_params",
    "initial_assignment",
    "latent_full_conditional",
    "load_draws",
    "load_params",
    "occupancy_proportions",
    "parse_dataset",
    "predict_subject_future",
    "prior_logpdf",
    "prob_N_at_times",
    "residual_relapse_time",
    "save_draws",
    "save_params",
    "sequence_loglik_complete",
    "simulate_trajectories",
    "simulate_trajectory",
    "summarize_subject",
    "summarize_times",
    "sweep_latents",
    "time_to_cumulative_amenorrhea",
    "two_step_summary",
    "validate_params",
    "write_dataset",
    "write_episode_csv",
]

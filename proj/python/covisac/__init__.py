"""Covert ISAC beamforming designs (fully digital and hybrid) and experiment sweeps."""

from ._covisac import (
    ChannelSet,
    Error,
    PerformanceReport,
    SensingScene,
    SystemConfig,
    default_scene,
    detection_error_exact,
    detection_probability,
    draw_channels,
    kl_divergence,
    mc_willie_detector,
    numeric_kl,
    rows_to_csv,
    run_experiment,
    solve_fdbf,
    solve_gamma_cap,
    solve_hbf,
)

__all__ = [
    "ChannelSet",
    "Error",
    "PerformanceReport",
    "SensingScene",
    "SystemConfig",
    "default_scene",
    "detection_error_exact",
    "detection_probability",
    "draw_channels",
    "kl_divergence",
    "mc_willie_detector",
    "numeric_kl",
    "rows_to_csv",
    "run_experiment",
    "solve_fdbf",
    "solve_gamma_cap",
    "solve_hbf",
]

from ._core import (
    CalibrationError,
    ConfigError,
    ModeBank,
    ModelError,
    ReplayError,
    build_nonoverlap,
    build_overlap,
    canonical_config,
    config_hash,
    load_bank_file,
    log1p_exp,
    log_likelihood_ratio,
    monitor_trajectory,
    plan_random,
    plan_sort,
    run_benchmark,
    arl_bracket,
)

__all__ = [name for name in dir() if not name.startswith("_")]

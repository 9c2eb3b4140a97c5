"""Python access to the rlpp core library."""

from ._rlpp import (  # noqa: F401
    ConfigError,
    RacelineError,
    Raceline,
    RacingEnv,
    admm_solve,
    compute_gae,
    evaluate,
    load_raceline,
    pp_steering,
    synthesize_track,
    teacher_gain,
    teacher_lookahead,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]

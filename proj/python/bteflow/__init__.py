"""Finite-volume phonon transport pipeline."""

from ._bteflow import (
    Config,
    Error,
    ParseError,
    Pipeline,
    RunResult,
    RuntimeFailure,
    ValidationError,
    band_count,
    cli,
    directions,
    generate_material_table,
)

__all__ = [
    "Config",
    "Error",
    "ParseError",
    "Pipeline",
    "RunResult",
    "RuntimeFailure",
    "ValidationError",
    "band_count",
    "cli",
    "directions",
    "generate_material_table",
    "load",
    "run",
]


def load(path, **overrides):
    """Builds a pipeline from a config file, applying attribute overrides first."""
    config = Config.load(str(path))
    for key, value in overrides.items():
        if not hasattr(config, key):
            raise AttributeError(f"unknown config attribute '{key}'")
        setattr(config, key, value)
    return Pipeline(config)


def run(path, nsteps=None, backend=None, workers=None, **overrides):
    return load(path, **overrides).run(nsteps=nsteps, backend=backend, workers=workers)

"""Second class particles in attractive one-dimensional particle systems."""

import json as _json

from ._core import (
    Error,
    Model,
    bar_nu,
    closed_form_sym_zr,
    coupling_exists,
    flux,
    hat_nu,
    marginal,
    model_names,
    parabolic,
    riemann,
    scp_limit_cdf,
    set_threads,
    simulate_scp,
    violation_witness,
)
from ._core import run_experiment as _run_experiment


def run_experiment(config):
    """Run an experiment from a config dict (or JSON text); returns the report dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_run_experiment(text))


__all__ = [
    "Error",
    "Model",
    "bar_nu",
    "closed_form_sym_zr",
    "coupling_exists",
    "flux",
    "hat_nu",
    "marginal",
    "model_names",
    "parabolic",
    "riemann",
    "run_experiment",
    "scp_limit_cdf",
    "set_threads",
    "simulate_scp",
    "violation_witness",
]

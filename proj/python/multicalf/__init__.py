"""Two-policy Lyapunov-style switching: bounds, simulations and acceptance checks."""

import json

from ._multicalf import (
    BatchError,
    ClassKInf,
    ConfigError,
    ContractError,
    KLCertificate,
    compute_tau_f,
    config_hash,
    corollary_lower_bound,
    criterion_count,
    summability,
    tail_product,
    tail_product_detailed,
    wilson_interval,
)
from . import _multicalf

__all__ = [
    "BatchError",
    "ClassKInf",
    "ConfigError",
    "ContractError",
    "KLCertificate",
    "compute_tau_f",
    "config_hash",
    "corollary_lower_bound",
    "criterion_count",
    "run_config",
    "run_criterion",
    "summability",
    "tail_product",
    "tail_product_detailed",
    "verify_bounds",
    "wilson_interval",
]


def run_config(path, seed=None, output=None, workers=None):
    """Run every batch of a config file; returns the summary document."""
    return json.loads(_multicalf.run_config(str(path), seed, None if output is None else str(output), workers))


def verify_bounds(path):
    """Tail products, corollary bounds and spatial quantities for a config file."""
    return json.loads(_multicalf.verify_bounds(str(path)))


def run_criterion(criterion, params=None, workers=1, base_dir="."):
    """Run one acceptance criterion; `params` overrides its pinned defaults."""
    return _multicalf.run_criterion(int(criterion), json.dumps(params or {}), workers, str(base_dir))

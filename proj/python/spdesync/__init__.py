"""Synchronization by noise for the renormalized stochastic Allen-Cahn equation on the 2-torus."""

import csv
import io
import json

from ._spdesync import (
    BlowUpError,
    ConfigError,
    DegenerateFit,
    SpdeSyncError,
    besov_norm_p,
    besov_norm_sup,
    default_config,
    evolve,
    experiments,
    member_seed,
    phi_besov,
)
from ._spdesync import run_experiment as _run_experiment

__all__ = [
    "BlowUpError",
    "ConfigError",
    "DegenerateFit",
    "SpdeSyncError",
    "besov_norm_p",
    "besov_norm_sup",
    "default_config",
    "evolve",
    "experiments",
    "member_seed",
    "phi_besov",
    "rows",
    "run_experiment",
]


def run_experiment(config="", kind="", threads=0):
    """Run one experiment from INI text. Returns a dict with the checks,
    metrics, CSV text and parsed summary."""
    result = _run_experiment(config, kind, threads)
    result["summary"] = json.loads(result["summary_json"])
    return result


def rows(result):
    """CSV rows of a result as dicts with float `t` and `value`."""
    out = []
    for row in csv.DictReader(io.StringIO(result["csv"])):
        row["t"] = float(row["t"])
        row["value"] = float(row["value"])
        out.append(row)
    return out

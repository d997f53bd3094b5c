"""Alpha-investing ledger, baseline procedures and simulation harness."""

import csv
import io
import json

from ._core import (
    AwareError,
    ConfigError,
    DegenerateInputError,
    DomainError,
    SessionService,
    benjamini_hochberg,
    bonferroni,
    chi2_gof,
    chi2_homogeneity,
    chi2_sf,
    describe_policy,
    forward_stop,
    fwer_inflation,
    ln_gamma,
    pcer,
    run_stream,
    simulate_csv,
    t_sf,
    welch_t_test,
)


def simulate(**config):
    """Runs a simulation and returns one dict per procedure.

    Keys follow the CLI config file: m, null_prop, n_per_group, effect_lo,
    effect_hi, sample_fraction, reps, seed, alpha, eta, threads, procedures.
    """
    rows = csv.DictReader(io.StringIO(simulate_csv(json.dumps(config))))
    out = []
    for row in rows:
        out.append({k: (v if k == "procedure" else float(v)) for k, v in row.items()})
    return out


__all__ = [
    "AwareError",
    "ConfigError",
    "DegenerateInputError",
    "DomainError",
    "SessionService",
    "benjamini_hochberg",
    "bonferroni",
    "chi2_gof",
    "chi2_homogeneity",
    "chi2_sf",
    "describe_policy",
    "forward_stop",
    "fwer_inflation",
    "ln_gamma",
    "pcer",
    "run_stream",
    "simulate",
    "simulate_csv",
    "t_sf",
    "welch_t_test",
]

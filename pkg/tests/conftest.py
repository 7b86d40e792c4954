"""Shared fixtures; the expensive replicated experiments are session-scoped."""

import numpy as np
import pytest

from cepmc import GaussianParams, RunConfig, run_cepmc, run_gr_pmc, run_lr_pmc
from cepmc.harness import derive_seed
from cepmc.problems import make_s3

TABLE_MASTER_SEED = 777
TABLE_REPS = 100


def replicate_table_method(problem, method_fn, master_seed=TABLE_MASTER_SEED,
                           reps=TABLE_REPS, n=25, k=100, t=20, rho=0.1):
    """Replicated estimates with the structural-benchmark sizes."""
    config = RunConfig(n_proposals=n, samples_per_proposal=k, trials=t, rho=rho,
                       seed=master_seed)
    estimates = []
    for rep in range(reps):
        rng = np.random.default_rng(derive_seed(master_seed, rep))
        init = [GaussianParams(m, np.eye(problem.dim))
                for m in rng.standard_normal((n, problem.dim))]
        result, _ = method_fn(problem, config, init, rng)
        estimates.append(result.estimate)
    return np.array(estimates)


@pytest.fixture(scope="session")
def s3_table_estimates():
    """100-replication estimates on the four-branch problem for all methods."""
    problem = make_s3()
    return {
        "reference": problem.reference,
        "cepmc": replicate_table_method(problem, run_cepmc),
        "lr_pmc": replicate_table_method(problem, run_lr_pmc),
        "gr_pmc": replicate_table_method(problem, run_gr_pmc),
    }

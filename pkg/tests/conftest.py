"""Shared fixtures for the acceptance suite.

The baseline-ordering and beta-sweep criteria run on one synthetic online
logistic configuration; the optimum track and the beta=0.01 runs are
computed once and shared.
"""

import numpy as np
import pytest

from tvhsgt.algorithms import (
    AlgoConfig,
    TopologyPlan,
    compute_optimum_track,
    run_horizon,
)
from tvhsgt.network import complete_digraph
from tvhsgt.oracles import DriftSpec, LogisticOracle, make_synthetic_binary_shards

ORDERING_SEEDS = tuple(range(1, 11))


class OrderingBench:
    """Online logistic benchmark in the noise-floor-dominated regime.

    Whitened high-curvature design with slow feature-rotation drift; batch
    100 per round over 400-sample shards. Methods are compared by the
    final time-averaged regret, seed-averaged.
    """

    n, d, T = 10, 20, 2000
    alpha = 0.001

    def __init__(self):
        self.shards = make_synthetic_binary_shards(
            self.n, 400, self.d, seed=7, separation=2.0,
            feature_scale=40.0, whitened=True,
        )
        self.drift = DriftSpec(rotate_rate=1e-3)
        self.track = compute_optimum_track(self.oracle(0), self.T, tol=1e-10)
        self._cache = {}

    def oracle(self, sample_seed):
        return LogisticOracle(
            self.shards, batch_size=100, reg=1e-5, drift=self.drift,
            data_seed=7, sample_seed=sample_seed,
        )

    def final_regrets(self, method, beta):
        key = (method, beta)
        if key not in self._cache:
            values = []
            for seed in ORDERING_SEEDS:
                plan = TopologyPlan(
                    base=complete_digraph(self.n), keep_prob=0.9, seed=seed
                )
                cfg = AlgoConfig(alpha=self.alpha, beta=beta, method=method)
                res = run_horizon(
                    cfg, plan, self.oracle(seed), self.T,
                    optimum_track=self.track, probe_seed=seed,
                )
                values.append(res.metrics[-1].regret_avg)
            self._cache[key] = np.array(values)
        return self._cache[key]


@pytest.fixture(scope="session")
def ordering_bench():
    return OrderingBench()

"""Miscoverage over time for the three region constructions.

A reduced version of the two-qubit experiment (fewer runs and a smaller
pool, so it finishes in about a minute). Miscoverage is cumulative: a run
counts as a miss at time t if the truth fell outside the region at any
time up to t. The anytime-valid set stays below alpha; the Gaussian
credible region does not.

Full-size runs go through the command line, e.g.

    avqst run --out out/ --progress
"""

import numpy as np

from avqst import ExperimentConfig, run_experiment

cfg = ExperimentConfig(qubits=2, horizon=60, runs=60, pool_size=1024, seed=3)
stats = run_experiment(cfg, progress=lambda done, total: print(f"\r{done}/{total}", end=""))
print()

print("method    t   miscoverage   median size   median distance")
for m in stats.methods:
    for t in (10, 30, 60):
        mi, ai, ti = stats.index(m, cfg.alpha, t)
        print(f"{m:6s} {t:4d}   {stats.miscoverage[mi, ai, ti]:9.3f}   "
              f"{stats.size_median[mi, ai, ti]:11.4f}   {stats.dist_median[mi, ti]:10.3f}")

se = np.sqrt(cfg.alpha * (1 - cfg.alpha) / cfg.runs)
print(f"\nalpha = {cfg.alpha}, binomial standard error at {cfg.runs} runs = {se:.3f}")

"""Anytime-valid confidence sets from a likelihood-ratio martingale.

For a candidate state rho the tracker keeps

    log R_t(rho) = sum_s log tr(Pi_s rho_hat_{s-1}) - sum_s log tr(Pi_s rho),

where rho_hat_{s-1} is any estimate built from data before shot s. At the
true state R_t is a nonnegative martingale with mean one, so by Ville's
inequality the set {rho : R_t(rho) <= 1/alpha} holds the truth at every t
simultaneously with probability at least 1 - alpha.

The set size is estimated as the fraction of a Hilbert-Schmidt candidate
pool that the set contains.
"""

import numpy as np

from avqst import (CandidatePool, MartingaleTracker, MeasurementRecord, avqst_contains, make_rng,
                   maximally_mixed, mle_estimate, product_povm, qubit_sic_povm, sample_outcome)
from avqst.quantum import haar_random_pure, projector

alpha = 0.1
rng = make_rng(11)
povm = product_povm(qubit_sic_povm(), 2)
truth = projector(haar_random_pure(4, rng))

tracker = MartingaleTracker.new(dim=4)
pool = CandidatePool.sample(4096, 4, "hilbert-schmidt", rng)
record = MeasurementRecord(4)
predictor = maximally_mixed(4)

print("   t  log R(truth)  truth inside  set size")
for t in range(1, 101):
    x = sample_outcome(truth, povm, rng)
    effect = povm.effects[x]
    # the predictor used here was computed from shots 1..t-1 only
    tracker = tracker.step(effect, predictor)
    pool = pool.step(effect)
    record = record.append(povm, x)
    predictor = mle_estimate(record, initial=predictor).state
    if t % 20 == 0 or t in (1, 5, 10):
        print(f"{t:4d}  {tracker.log_martingale(truth):11.3f}  "
              f"{str(avqst_contains(tracker, truth, alpha)):>12}  {pool.avqst_fraction(tracker, alpha):8.4f}")
print(f"threshold ln(1/alpha) = {np.log(1 / alpha):.3f}")

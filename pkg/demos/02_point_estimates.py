"""Point estimates from sequential data: MLE and the particle posterior mean.

Both estimators are refreshed after every shot. The MLE is warm-started from
the previous estimate; the particle cloud is reweighted and, when its
effective sample size drops below half, resampled and jittered.
"""

import numpy as np

from avqst import (MeasurementRecord, SisConfig, init_particles, make_rng, mle_estimate,
                   posterior_mean, product_povm, qubit_sic_povm, sample_outcome, trace_distance,
                   update_particles)
from avqst.estimators import effective_sample_size
from avqst.quantum import haar_random_pure, projector

rng = make_rng(7)
povm = product_povm(qubit_sic_povm(), 2)
truth = projector(haar_random_pure(4, rng))

record = MeasurementRecord(4)
sis = SisConfig(particles=1000)
ensemble = init_particles(sis.particles, 4, rng)
mle = None

print("   t   d(MLE)  d(mean)   ESS")
for t in range(1, 201):
    x = sample_outcome(truth, povm, rng)
    record = record.append(povm, x)
    mle = mle_estimate(record, initial=None if mle is None else mle.state)
    ensemble = update_particles(ensemble, povm.effects[x], record, sis, rng)
    if t in (1, 10, 25, 50, 100, 200):
        mean = posterior_mean(ensemble)
        print(f"{t:4d}   {trace_distance(mle.state, truth):.3f}   "
              f"{trace_distance(mean, truth):.3f}   {effective_sample_size(ensemble):6.1f}")

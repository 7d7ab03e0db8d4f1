"""Anytime-valid quantum state tomography.

Sequential POVM simulation, MLE and particle-posterior point estimates, and
likelihood-ratio test-martingale confidence sets whose coverage holds
uniformly over time.
"""

from .confidence import (CandidatePool, CredibleRegionModel, LrRegionModel, MartingaleTracker,
                         avqst_contains, avqst_covered_fraction, bqst_contains, bqst_region,
                         log_threshold, lrqst_contains, lrqst_region, one_step_multiplier,
                         wilks_threshold)
from .config import ExperimentConfig
from .errors import (AvqstError, CapacityError, ConfigError, DegeneratePosteriorError,
                     NumericError, PredictorContractError, SynchronizationError,
                     ValidationError)
from .estimators import (MleConfig, MleResult, ParticleEnsemble, SisConfig,
                         effective_sample_size, init_particles, log_likelihood, mle_estimate,
                         posterior_mean, update_particles)
from .harness import (AggregateStats, RunResult, alpha_sweep, export_bloch_trajectory,
                      export_csv, export_sweep_csv, run_experiment, run_single)
from .measurement import (MeasurementRecord, Povm, born_probabilities, product_povm,
                          qubit_sic_povm, sample_outcome, validate_povm)
from .quantum import (bloch_coordinates, check_density, density_from_bloch, haar_random_pure,
                      hermitian_eigen, hs_random_density, maximally_mixed, mix_with_identity,
                      project_to_density, tensor, trace_distance)
from .seeding import derive_seed, make_rng

__version__ = "0.1.0"

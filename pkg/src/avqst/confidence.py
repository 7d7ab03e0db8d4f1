"""Anytime-valid confidence sets and the two baseline regions.

The anytime-valid set at time ``t`` keeps every state whose log likelihood
ratio against the plug-in predictions stays below ``ln(1/alpha)``:

    log R_t(rho) = sum_{s<=t} ln tr(Pi_{X_s} rhohat_{s-1}) - sum_{s<=t} ln tr(Pi_{X_s} rho).

Under the true state ``R_t`` is a nonnegative martingale with mean one, so by
Ville's inequality the true state stays inside every set simultaneously with
probability at least ``1 - alpha``, whatever the predictors are, provided each
``rhohat_{s-1}`` depends on data before ``X_s`` only.

Everything is kept in the log domain.

Baselines:

* :class:`CredibleRegionModel`, a Gaussian fit to the particle posterior in
  Bloch coordinates with a Mahalanobis radius covering ``1 - alpha`` of the
  particle weight;
* :class:`LrRegionModel`, the fixed-sample likelihood-ratio region
  ``log L_T(MLE) - log L_T(rho) <= lambda``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg, stats

from .errors import (DegeneratePosteriorError, NumericError, PredictorContractError,
                     SynchronizationError, ValidationError)
from .estimators import (MleConfig, effective_sample_size, log_likelihood, mle_estimate)
from .quantum import (bloch_coordinates, hs_random_density, haar_random_pure, maximally_mixed,
                      projector, pure_bloch_coordinates)

MEASURES = ("hilbert-schmidt", "haar-pure")


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def log_threshold(alpha):
    """``ln(1/alpha)``, the membership threshold on ``log R_t``."""
    return float(-np.log(_check_alpha(alpha)))


def one_step_multiplier(effects, predictor, truth):
    """``sum_x tr(Pi_x rho*) tr(Pi_x rhohat) / tr(Pi_x rho*)``; equals ``tr(rhohat)``.

    Outcomes with ``tr(Pi_x rho*) = 0`` never occur and are skipped.
    """
    flat = np.asarray(effects, dtype=complex).reshape(len(effects), -1).conj()
    p_true = (flat @ np.asarray(truth, dtype=complex).ravel()).real
    p_pred = (flat @ np.asarray(predictor, dtype=complex).ravel()).real
    seen = p_true > 0
    return float(np.sum(p_true[seen] * (p_pred[seen] / p_true[seen])))


@dataclass(frozen=True, eq=False)
class MartingaleTracker:
    """Accumulated numerator of the likelihood ratio plus the effect history."""

    dim: int
    numerator: float = 0.0
    history: tuple = field(default_factory=tuple)

    @classmethod
    def new(cls, initial_estimate=None, dim=None):
        """Fresh tracker; ``initial_estimate`` defaults to ``I/D`` and must be full rank."""
        if initial_estimate is None:
            if dim is None:
                raise ValidationError("need a dimension or an initial estimate")
            initial_estimate = maximally_mixed(dim)
        rho0 = np.asarray(initial_estimate, dtype=complex)
        if np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T))[0] <= 0:
            raise ValidationError("initial estimate must be strictly positive definite")
        return cls(dim=rho0.shape[0])

    @property
    def t(self):
        return len(self.history)

    def step(self, effect, predictor):
        """Advance by one observed ``effect``.

        ``predictor`` must be the estimate formed from the data strictly
        before this observation; passing a later estimate voids the coverage
        guarantee.
        """
        effect = np.asarray(effect, dtype=complex)
        if effect.shape != (self.dim, self.dim):
            raise ValidationError(f"effect shape {effect.shape} does not match dimension {self.dim}")
        q = float(np.vdot(effect, np.asarray(predictor, dtype=complex)).real)
        if not q > 0:
            raise PredictorContractError(
                f"predictor assigns probability {q:.3g} to the outcome observed at t={self.t + 1}")
        return MartingaleTracker(self.dim, self.numerator + np.log(q), self.history + (effect,))

    def effects(self):
        if not self.history:
            return np.zeros((0, self.dim, self.dim), dtype=complex)
        return np.stack(self.history)

    def log_martingale(self, rho):
        """``log R_t(rho)``; ``+inf`` when the data exclude ``rho``."""
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim, self.dim):
            raise ValidationError(f"state shape {rho.shape} does not match dimension {self.dim}")
        if not self.history:
            return 0.0
        E = self.effects()
        p = (E.reshape(self.t, -1).conj() @ rho.ravel()).real
        if np.any(p <= 0):
            return np.inf
        return float(self.numerator - np.sum(np.log(p)))

    def log_martingales(self, states):
        """Vectorized :meth:`log_martingale` over a stack of states ``(K, D, D)``."""
        states = np.asarray(states, dtype=complex)
        if not self.history:
            return np.zeros(states.shape[0])
        E = self.effects().reshape(self.t, -1).conj()
        p = states.reshape(states.shape[0], -1) @ E.T
        p = p.real
        with np.errstate(divide="ignore"):
            logs = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
        return self.numerator - logs.sum(axis=1)

    def contains(self, rho, alpha):
        """Membership in the anytime-valid set (boundary included)."""
        thr = log_threshold(alpha)
        return bool(self.log_martingale(rho) <= thr)


def avqst_contains(tracker, rho, alpha):
    return tracker.contains(rho, alpha)


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """Sampled states with cumulative log-likelihoods, for set-size estimates.

    Stepping the pool once per observation keeps every quantity O(K) per step.
    """

    candidates: np.ndarray
    log_likelihoods: np.ndarray
    measure: str = "hilbert-schmidt"
    t: int = 0

    def __post_init__(self):
        c = np.asarray(self.candidates, dtype=complex)
        ll = np.asarray(self.log_likelihoods, dtype=float)
        if c.ndim != 3 or ll.shape != (c.shape[0],):
            raise ValidationError("candidates must be (K, D, D) with one log-likelihood each")
        for name, arr in (("candidates", c), ("log_likelihoods", ll)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def sample(cls, k, dim, measure, rng):
        if k < 1:
            raise ValidationError(f"pool size must be >= 1, got {k}")
        if measure == "hilbert-schmidt":
            cands = hs_random_density(dim, dim, rng, size=k)
        elif measure == "haar-pure":
            cands = projector(haar_random_pure(dim, rng, size=k))
        else:
            raise ValidationError(f"unknown candidate measure {measure!r}; choose from {MEASURES}")
        return cls(cands, np.zeros(k), measure)

    @classmethod
    def from_states(cls, states, measure="explicit"):
        states = np.asarray(states, dtype=complex)
        if states.ndim == 2:
            states = states[None]
        return cls(states, np.zeros(states.shape[0]), measure)

    @property
    def dim(self):
        return self.candidates.shape[1]

    def __len__(self):
        return self.candidates.shape[0]

    def step(self, effect):
        effect = np.asarray(effect, dtype=complex)
        if effect.shape != (self.dim, self.dim):
            raise ValidationError(f"effect shape {effect.shape} does not match dimension {self.dim}")
        p = (self.candidates.reshape(len(self), -1) @ effect.conj().ravel()).real
        with np.errstate(divide="ignore"):
            inc = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
        out = CandidatePool(self.candidates, self.log_likelihoods + inc, self.measure, self.t + 1)
        if "bloch" in self.__dict__:
            out.__dict__["bloch"] = self.__dict__["bloch"]
        return out

    def log_martingales(self, tracker):
        if tracker.t != self.t:
            raise SynchronizationError(f"tracker at t={tracker.t} but pool at t={self.t}")
        return tracker.numerator - self.log_likelihoods

    def avqst_mask(self, tracker, alpha):
        return self.log_martingales(tracker) <= log_threshold(alpha)

    def avqst_fraction(self, tracker, alpha):
        return float(np.mean(self.avqst_mask(tracker, alpha)))

    @cached_property
    def bloch(self):
        coords = bloch_coordinates(self.candidates)
        coords.setflags(write=False)
        return coords


def avqst_covered_fraction(pool, tracker, alpha):
    return pool.avqst_fraction(tracker, alpha)


def weighted_lower_quantile(values, weights, q):
    """Smallest value ``v`` with ``sum(weights[values <= v]) >= q``."""
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(np.asarray(weights, dtype=float)[order])
    i = int(np.searchsorted(cw, q * cw[-1] - 1e-12, side="left"))
    return float(np.asarray(values)[order][min(i, len(order) - 1)])


@dataclass(frozen=True, eq=False)
class GaussianFit:
    """Weighted Gaussian fit of a particle cloud in Bloch coordinates."""

    mean: np.ndarray
    covariance: np.ndarray
    cholesky: np.ndarray = field(repr=False)
    particle_distances: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    def distances(self, coords):
        diff = np.atleast_2d(coords) - self.mean
        z = linalg.solve_triangular(self.cholesky, diff.T, lower=True, check_finite=False)
        return np.sqrt(np.sum(z * z, axis=0))

    def region(self, alpha):
        alpha = _check_alpha(alpha)
        tau = weighted_lower_quantile(self.particle_distances, self.weights, 1 - alpha)
        return CredibleRegionModel(self.mean, self.covariance, tau, self)


def fit_gaussian(coords, weights, ridge=1e-9):
    coords = np.asarray(coords, dtype=float)
    w = np.asarray(weights, dtype=float)
    mean = w @ coords
    diff = coords - mean
    cov = (diff.T * w) @ diff
    cov = 0.5 * (cov + cov.T) + ridge * np.eye(coords.shape[1])
    try:
        L = linalg.cholesky(cov, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericError(f"posterior covariance is singular beyond the ridge: {exc}") from exc
    fit = GaussianFit(mean, cov, L, None, w)
    object.__setattr__(fit, "particle_distances", fit.distances(coords))
    return fit


def fit_posterior_gaussian(ensemble, ridge=1e-9):
    if effective_sample_size(ensemble) < 2:
        raise DegeneratePosteriorError("effective sample size below 2; cannot fit a credible region")
    return fit_gaussian(pure_bloch_coordinates(ensemble.states), ensemble.weights, ridge)


@dataclass(frozen=True, eq=False)
class CredibleRegionModel:
    """Mahalanobis ball ``{v : (v - mean)^T cov^{-1} (v - mean) <= tau^2}`` in Bloch space."""

    mean: np.ndarray
    covariance: np.ndarray
    tau: float
    fit: GaussianFit = field(repr=False, default=None)

    def __post_init__(self):
        if self.fit is None:
            cov = np.asarray(self.covariance, dtype=float)
            try:
                L = linalg.cholesky(cov, lower=True)
            except linalg.LinAlgError as exc:
                raise NumericError(f"covariance is not positive definite: {exc}") from exc
            object.__setattr__(self, "fit", GaussianFit(np.asarray(self.mean, float), cov, L))

    def distance(self, rho):
        return float(self.fit.distances(bloch_coordinates(rho))[0])

    def contains(self, rho):
        return self.distance(rho) <= self.tau

    def contains_coords(self, coords):
        return self.fit.distances(coords) <= self.tau


def bqst_region(ensemble, alpha, ridge=1e-9):
    return fit_posterior_gaussian(ensemble, ridge).region(alpha)


def bqst_contains(model, rho):
    return model.contains(rho)


def wilks_threshold(alpha, dim):
    """Log-domain threshold ``chi2_{D^2-1}^{-1}(1 - alpha) / 2``."""
    return float(stats.chi2.ppf(1 - _check_alpha(alpha), dim * dim - 1) / 2)


@dataclass(frozen=True)
class LrRegionModel:
    """``{rho : mle_log_likelihood - log L_T(rho) <= threshold}`` for a record of length ``t``."""

    mle_log_likelihood: float
    threshold: float
    mode: str
    t: int

    def __post_init__(self):
        if not self.threshold >= 0:
            raise ValidationError(f"log-domain threshold must be >= 0, got {self.threshold}")

    @classmethod
    def from_mle(cls, mle_log_likelihood, alpha, dim, t, threshold=None):
        if threshold is None:
            return cls(float(mle_log_likelihood), wilks_threshold(alpha, dim), "wilks-default", t)
        return cls(float(mle_log_likelihood), float(threshold), "user-supplied", t)

    def contains_log_likelihood(self, ll):
        return np.asarray(self.mle_log_likelihood - np.asarray(ll)) <= self.threshold

    def contains(self, rho, record):
        if len(record) != self.t:
            raise SynchronizationError(f"model built at t={self.t}, record has length {len(record)}")
        return bool(self.contains_log_likelihood(log_likelihood(rho, record)))


def lrqst_region(record, alpha, threshold=None, mle_config=MleConfig(), initial=None):
    """Fixed-sample likelihood-ratio region at the end of ``record``.

    ``threshold=None`` selects the Wilks default; otherwise the value is used
    as the log-domain threshold directly. The MLE is evaluated unmixed.
    """
    if len(record) == 0:
        raise ValidationError("likelihood-ratio region needs a non-empty record")
    cfg = MleConfig(mle_config.epsilon, mle_config.max_iterations, mle_config.tolerance, 0.0)
    res = mle_estimate(record, cfg, initial)
    return LrRegionModel.from_mle(res.log_likelihood, alpha, record.dim, len(record), threshold)


def lrqst_contains(model, rho, record):
    return model.contains(rho, record)

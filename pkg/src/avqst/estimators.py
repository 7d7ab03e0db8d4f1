"""Point estimators: maximum likelihood and a sequential importance sampler.

The MLE uses the diluted fixed-point iteration

    rho <- N[(I + eps R) rho (I + eps R)],   R = sum_x n_x Pi_x / tr(Pi_x rho),

with ``n_x`` the outcome counts and ``N`` trace normalization.
``eps`` is halved whenever a step would lower the likelihood, so accepted
iterates are monotone.

The Bayesian estimator is a weighted cloud of pure-state particles under a
Haar prior, reweighted by each observation's Born probability and rejuvenated
by systematic resampling plus Metropolis-Hastings moves when the effective
sample size drops.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePosteriorError, NumericError, ValidationError
from .quantum import haar_random_pure, maximally_mixed, mix_with_identity


def effect_probabilities(effects, rho):
    """``tr(E_k rho)`` for a stack of effects ``(k, D, D)`` and one state."""
    effects = np.asarray(effects, dtype=complex)
    k = effects.shape[0]
    return (effects.reshape(k, -1).conj() @ np.asarray(rho, dtype=complex).ravel()).real


def pure_effect_probabilities(effects, psi):
    """``<psi_n|E_k|psi_n>`` for states ``(N, D)``, returned with shape ``(N, k)``."""
    psi = np.asarray(psi, dtype=complex)
    # (k, N, D): row n of E_k^T applied to conj(psi_n)
    v = psi.conj()[None, :, :] @ effects
    return np.einsum("knd,nd->nk", v, psi).real


def log_likelihood(rho, record):
    """Natural log-likelihood of the record under ``rho``; ``-inf`` if any outcome is impossible."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (record.dim, record.dim):
        raise ValidationError(f"state shape {rho.shape} does not match record dimension {record.dim}")
    effects, counts = record.grouped
    if counts.size == 0:
        return 0.0
    p = effect_probabilities(effects, rho)
    if np.any(p <= 0):
        return -np.inf
    return float(counts @ np.log(p))


@dataclass(frozen=True)
class MleConfig:
    epsilon: float = 0.5
    max_iterations: int = 200
    tolerance: float = 1e-9
    gamma: float = 1e-3

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValidationError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be > 0")
        if not 0 <= self.gamma < 1:
            raise ValidationError(f"gamma must lie in [0, 1), got {self.gamma}")


@dataclass(frozen=True, eq=False)
class MleResult:
    state: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    raw_state: np.ndarray = field(repr=False, default=None)


_MIN_EPSILON = 1e-12


def mle_estimate(record, config=MleConfig(), initial=None):
    """Maximum-likelihood density matrix for ``record``.

    ``initial`` warm-starts the iteration; it is used only if its likelihood
    is at least that of the maximally mixed state. The returned
    ``state`` is mixed toward ``I/D`` with weight ``config.gamma``;
    ``raw_state`` is the unmixed iterate and ``log_likelihood`` refers to
    ``state``.
    """
    if len(record) == 0:
        raise ValidationError("MLE needs a non-empty record")
    dim = record.dim
    effects, counts = record.grouped
    k = effects.shape[0]
    flat = effects.reshape(k, -1)
    flat_conj = flat.conj()
    eye = np.eye(dim)

    def loglik(rho):
        p = (flat_conj @ rho.ravel()).real
        if p.min() <= 0:
            return -np.inf, p
        return float(counts @ np.log(p)), p

    rho = maximally_mixed(dim)
    ll, p = loglik(rho)
    if initial is not None:
        start = np.asarray(initial, dtype=complex)
        ll0, p0 = loglik(start)
        if ll0 >= ll:
            rho, ll, p = start, ll0, p0

    eps = config.epsilon
    converged = False
    it = 0
    while it < config.max_iterations:
        R = ((counts / p) @ flat).reshape(dim, dim)
        A = eye + eps * R
        new = A @ rho @ A
        new = 0.5 * (new + new.conj().T)
        new /= new.trace().real
        ll_new, p_new = loglik(new)
        if not ll_new >= ll:
            eps *= 0.5
            if eps < _MIN_EPSILON:
                converged = True
                break
            continue
        it += 1
        gain = ll_new - ll
        rho, ll, p = new, ll_new, p_new
        if gain < config.tolerance:
            converged = True
            break

    if not np.isfinite(ll):
        raise NumericError("MLE iteration reached a state with zero likelihood")
    state = mix_with_identity(rho, config.gamma)
    return MleResult(state=state, log_likelihood=log_likelihood(state, record), iterations=it,
                     converged=converged, raw_state=rho)


@dataclass(frozen=True)
class SisConfig:
    particles: int = 1000
    ess_threshold: float = 0.5
    move_steps: int = 3
    move_scale: float = 0.1

    def __post_init__(self):
        if self.particles < 2:
            raise ValidationError("particle count must be >= 2")
        if not 0 < self.ess_threshold <= 1:
            raise ValidationError(f"ess_threshold must lie in (0, 1], got {self.ess_threshold}")
        if self.move_steps < 0:
            raise ValidationError("move_steps must be >= 0")
        if not self.move_scale > 0:
            raise ValidationError("move_scale must be > 0")


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """Weighted pure-state particles ``(N, D)`` with their record log-likelihoods."""

    states: np.ndarray
    weights: np.ndarray
    log_likelihoods: np.ndarray = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=complex)
        w = np.asarray(self.weights, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise ValidationError("an ensemble needs at least two particles")
        if w.shape != (states.shape[0],):
            raise ValidationError("one weight per particle required")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValidationError("weights must be nonnegative and sum to 1")
        ll = (np.zeros(states.shape[0]) if self.log_likelihoods is None
              else np.asarray(self.log_likelihoods, dtype=float))
        for name, arr in (("states", states), ("weights", w), ("log_likelihoods", ll)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self):
        return self.states.shape[1]

    def __len__(self):
        return self.states.shape[0]


def init_particles(n, dim, rng):
    """``n`` Haar-random pure particles with uniform weights."""
    if n < 2:
        raise ValidationError(f"particle count must be >= 2, got {n}")
    return ParticleEnsemble(haar_random_pure(dim, rng, size=n), np.full(n, 1.0 / n))


def effective_sample_size(ensemble):
    w = ensemble.weights
    return float(w.sum() ** 2 / np.sum(w * w))


def posterior_mean(ensemble):
    """``sum_i w_i |psi_i><psi_i|``."""
    psi = ensemble.states
    rho = (psi.T * ensemble.weights) @ psi.conj()
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def systematic_resample(weights, rng):
    """Indices drawn by systematic (single-offset stratified) resampling."""
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def metropolis_accept(log_target_current, log_target_proposal, rng):
    """Accept mask for symmetric-proposal Metropolis-Hastings: ``u < exp(diff)``."""
    diff = np.asarray(log_target_proposal, dtype=float) - np.asarray(log_target_current, dtype=float)
    u = rng.random(diff.shape)
    with np.errstate(invalid="ignore"):
        return np.log(u) < diff


def record_log_likelihoods(psi, record):
    """Full-record log-likelihood of each pure state in ``psi`` ``(N, D)``."""
    effects, counts = record.grouped
    if counts.size == 0:
        return np.zeros(psi.shape[0])
    p = pure_effect_probabilities(effects, psi)
    with np.errstate(divide="ignore"):
        logs = np.log(np.maximum(p, 0.0))
    return logs @ counts


def _perturb(psi, scale, rng):
    noise = rng.standard_normal(psi.shape + (2,))
    prop = psi + scale * (noise[..., 0] + 1j * noise[..., 1]) / np.sqrt(2)
    return prop / np.linalg.norm(prop, axis=1, keepdims=True)


def resample_move(ensemble, record, config, rng):
    """Systematic resampling followed by ``config.move_steps`` MH sweeps.

    The target is the exact posterior: Haar prior times the likelihood of the
    full record. The proposal (Gaussian amplitude kick, then normalization) is
    symmetric, so acceptance uses the likelihood ratio alone.
    """
    idx = systematic_resample(ensemble.weights, rng)
    psi = ensemble.states[idx]
    ll = ensemble.log_likelihoods[idx]
    for _ in range(config.move_steps):
        prop = _perturb(psi, config.move_scale, rng)
        ll_prop = record_log_likelihoods(prop, record)
        acc = metropolis_accept(ll, ll_prop, rng)
        psi = np.where(acc[:, None], prop, psi)
        ll = np.where(acc, ll_prop, ll)
    n = len(ensemble)
    return ParticleEnsemble(psi, np.full(n, 1.0 / n), ll)


def update_particles(ensemble, effect, record, config=SisConfig(), rng=None):
    """Bayes update of the ensemble by one observed ``effect``.

    ``record`` must already contain the observation; it is only used as the
    move target when the ensemble is rejuvenated.
    """
    effect = np.asarray(effect, dtype=complex)
    if effect.shape != (ensemble.dim, ensemble.dim):
        raise ValidationError(f"effect shape {effect.shape} does not match ensemble dimension {ensemble.dim}")
    p = pure_effect_probabilities(effect[None], ensemble.states)[:, 0]
    p = np.maximum(p, 0.0)
    w = ensemble.weights * p
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise DegeneratePosteriorError(f"all particle weights vanished at t={len(record)}")
    w = w / total
    with np.errstate(divide="ignore"):
        ll = ensemble.log_likelihoods + np.log(p)
    out = ParticleEnsemble(ensemble.states, _renormalized(w), ll)
    if effective_sample_size(out) < config.ess_threshold * len(out):
        if rng is None:
            raise ValidationError("resampling requires a random generator")
        out = resample_move(out, record, config, rng)
    return out


def _renormalized(w):
    w = w / w.sum()
    # one more pass pins the sum to 1 within an ulp or two
    return w / w.sum()

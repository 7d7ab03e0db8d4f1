"""Monte Carlo experiments: miscoverage and normalized set size over time.

Each run draws a Haar-random pure true state, measures it once per step with
the product SIC-POVM, and tracks three regions side by side:

``av``   the anytime-valid likelihood-ratio set,
``bqst`` the Gaussian credible region of the particle posterior,
``lr``   the fixed-sample likelihood-ratio region recomputed at every step.

Coverage of the true state is checked at every step so the cumulative flag
("covered at all times so far") is exact even when only a subset of times is
recorded. Set sizes are fractions of a sampled candidate pool.

Run ``i`` of an experiment with master seed ``s`` uses the seed
``derive_seed(s, i)``; its sub-streams (true state, outcomes, particles,
pool, fixed predictor) use ``derive_seed(run_seed, k)`` for ``k = 0..4``.
Runs therefore do not depend on scheduling, and parallel and serial
execution agree bit for bit.
"""

import csv
import io
import json
import logging
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .confidence import (CandidatePool, MartingaleTracker, fit_posterior_gaussian, log_threshold,
                         wilks_threshold)
from .errors import AvqstError, ValidationError
from .estimators import (init_particles, log_likelihood, mle_estimate, posterior_mean,
                         update_particles)
from .measurement import MeasurementRecord, product_povm, qubit_sic_povm, sample_outcome
from .quantum import (bloch_coordinates, density_from_bloch, haar_random_pure, maximally_mixed,
                      mix_with_identity, projector, trace_distance)
from .seeding import derive_seed, make_rng

log = logging.getLogger(__name__)

RESULTS_COLUMNS = ("method", "t", "alpha", "miscoverage", "size_p25", "size_median", "size_p75",
                   "dist_p25", "dist_median", "dist_p75", "runs")
SWEEP_COLUMNS = ("method", "alpha", "t_eval", "miscoverage", "size_median", "runs")

_TRUTH, _OUTCOMES, _PARTICLES, _POOL, _FIXED = range(5)


@dataclass(frozen=True, eq=False)
class Snapshot:
    """State of one simulated run after ``t`` observations."""

    t: int
    truth: np.ndarray
    record: MeasurementRecord
    tracker: MartingaleTracker
    truth_pool: CandidatePool
    pool: Optional[CandidatePool]
    predictor: np.ndarray
    ensemble: object = None
    mle_raw: Optional[np.ndarray] = None
    mle_raw_log_likelihood: float = None


def _rng(run_seed, stream):
    return make_rng(derive_seed(run_seed, stream))


def simulate(config, run_index):
    """Yield a :class:`Snapshot` for ``t = 0, 1, ..., horizon``.

    At step ``t`` the tracker is advanced with the predictor built from
    outcomes ``1..t-1``; only then are the estimators updated.
    """
    cfg = config
    dim = cfg.dim
    run_seed = derive_seed(cfg.seed, run_index)
    povm = product_povm(qubit_sic_povm(), cfg.qubits)
    truth = projector(haar_random_pure(dim, _rng(run_seed, _TRUTH)))
    outcome_rng = _rng(run_seed, _OUTCOMES)
    particle_rng = _rng(run_seed, _PARTICLES)

    need_mle = cfg.predictor == "mle" or "lr" in cfg.methods
    need_particles = cfg.predictor == "posterior-mean" or "bqst" in cfg.methods

    pool = (CandidatePool.sample(cfg.pool_size, dim, cfg.pool_measure, _rng(run_seed, _POOL))
            if cfg.pool_size > 0 else None)
    truth_pool = CandidatePool.from_states(truth)
    ensemble = init_particles(cfg.sis.particles, dim, particle_rng) if need_particles else None

    if cfg.predictor == "fixed":
        if cfg.fixed_state == "haar":
            fixed = projector(haar_random_pure(dim, _rng(run_seed, _FIXED)))
            predictor = mix_with_identity(fixed, cfg.mle.gamma)
        else:
            predictor = maximally_mixed(dim)
    else:
        predictor = maximally_mixed(dim)

    record = MeasurementRecord(dim)
    tracker = MartingaleTracker.new(predictor)
    mle_state = mle_raw = mle_ll = None

    yield Snapshot(0, truth, record, tracker, truth_pool, pool, predictor, ensemble)
    for t in range(1, cfg.horizon + 1):
        try:
            x = sample_outcome(truth, povm, outcome_rng)
            effect = povm.effects[x]
            record = record.append(povm, x)
            tracker = tracker.step(effect, predictor)
            truth_pool = truth_pool.step(effect)
            if pool is not None:
                pool = pool.step(effect)
            if need_mle:
                res = mle_estimate(record, cfg.mle, initial=mle_state)
                mle_state, mle_raw = res.state, res.raw_state
                mle_ll = log_likelihood(mle_raw, record)
            if need_particles:
                ensemble = update_particles(ensemble, effect, record, cfg.sis, particle_rng)
            if cfg.predictor == "mle":
                predictor = mle_state
            elif cfg.predictor == "posterior-mean":
                predictor = mix_with_identity(posterior_mean(ensemble), cfg.mle.gamma)
        except AvqstError as exc:
            exc.step = t
            raise
        yield Snapshot(t, truth, record, tracker, truth_pool, pool, predictor, ensemble,
                       mle_raw, mle_ll)


@dataclass(frozen=True, eq=False)
class RunResult:
    """Per-run metrics; array axes are (method, alpha, recorded time)."""

    run_index: int
    truth_bloch: np.ndarray
    methods: tuple
    alphas: tuple
    times: tuple
    covered: np.ndarray
    instant: np.ndarray
    size: np.ndarray
    distance: np.ndarray
    # log R_t at the true state for every t = 1..horizon (av only; nan otherwise)
    truth_log_martingale: np.ndarray = field(repr=False, default=None)

    def to_bytes(self):
        buf = io.BytesIO()
        np.savez(buf, truth=self.truth_bloch, covered=self.covered, instant=self.instant,
                 size=self.size, distance=self.distance, lm=self.truth_log_martingale,
                 meta=np.array(json.dumps([self.run_index, self.methods, self.alphas,
                                           self.times])))
        return buf.getvalue()


def _lr_thresholds(cfg, alphas):
    if cfg.lr_threshold is not None:
        return np.full(len(alphas), float(cfg.lr_threshold))
    return np.array([wilks_threshold(a, cfg.dim) for a in alphas])


def run_single(config, run_index, alphas=None, times=None):
    """Simulate one run and evaluate every enabled method at each ``alpha``."""
    cfg = config
    alphas = tuple(alphas) if alphas is not None else (cfg.alpha,)
    times = tuple(times) if times is not None else cfg.times()
    methods = tuple(cfg.methods)
    nm, na, nt = len(methods), len(alphas), len(times)
    log_thr = np.array([log_threshold(a) for a in alphas])
    lr_thr = _lr_thresholds(cfg, alphas)
    slot = {t: i for i, t in enumerate(times)}

    covered = np.ones((nm, na, nt), dtype=bool)
    instant = np.ones((nm, na, nt), dtype=bool)
    size = np.full((nm, na, nt), np.nan)
    distance = np.full((nm, nt), np.nan)
    truth_lm = np.full(cfg.horizon, np.nan)
    cum = np.ones((nm, na), dtype=bool)
    running_max = None
    truth_bloch = None

    t = 0
    try:
        for snap in simulate(cfg, run_index):
            t = snap.t
            if t == 0:
                truth_bloch = bloch_coordinates(snap.truth)
                continue
            now = np.ones((nm, na), dtype=bool)
            fit = None
            av_logr = None
            if cfg.intersect and snap.pool is not None and "av" in methods:
                cur = snap.pool.log_martingales(snap.tracker)
                running_max = cur if running_max is None else np.maximum(running_max, cur)
            for mi, m in enumerate(methods):
                if m == "av":
                    av_logr = float(snap.truth_pool.log_martingales(snap.tracker)[0])
                    truth_lm[t - 1] = av_logr
                    now[mi] = av_logr <= log_thr
                elif m == "bqst":
                    fit = fit_posterior_gaussian(snap.ensemble, cfg.bqst_ridge)
                    taus = np.array([fit.region(a).tau for a in alphas])
                    d = fit.distances(truth_bloch)[0]
                    now[mi] = d <= taus
                else:
                    gap = snap.mle_raw_log_likelihood - snap.truth_pool.log_likelihoods[0]
                    now[mi] = gap <= lr_thr
            cum &= now
            if t not in slot:
                continue
            j = slot[t]
            covered[:, :, j] = cum
            instant[:, :, j] = now
            for mi, m in enumerate(methods):
                if m == "av":
                    distance[mi, j] = trace_distance(snap.predictor, snap.truth)
                elif m == "bqst":
                    distance[mi, j] = trace_distance(posterior_mean(snap.ensemble), snap.truth)
                else:
                    distance[mi, j] = trace_distance(snap.mle_raw, snap.truth)
                if snap.pool is None:
                    continue
                if m == "av":
                    logr = running_max if cfg.intersect else snap.pool.log_martingales(snap.tracker)
                    size[mi, :, j] = np.mean(logr[None, :] <= log_thr[:, None], axis=1)
                elif m == "bqst":
                    d = fit.distances(snap.pool.bloch)
                    taus = np.array([fit.region(a).tau for a in alphas])
                    size[mi, :, j] = np.mean(d[None, :] <= taus[:, None], axis=1)
                else:
                    gap = snap.mle_raw_log_likelihood - snap.pool.log_likelihoods
                    size[mi, :, j] = np.mean(gap[None, :] <= lr_thr[:, None], axis=1)
    except AvqstError as exc:
        # errors raised while simulating step t carry it; evaluation errors use the loop's t
        raise _with_context(exc, f"run {run_index}, t={getattr(exc, 'step', t)}") from exc

    return RunResult(run_index, truth_bloch, methods, alphas, times, covered, instant, size,
                     distance, truth_lm)


def _with_context(exc, context):
    try:
        return type(exc)(f"{context}: {exc}")
    except TypeError:
        return AvqstError(f"{context}: {exc}")


@dataclass(frozen=True, eq=False)
class AggregateStats:
    """Across-run summaries; array axes are (method, alpha, recorded time)."""

    methods: tuple
    alphas: tuple
    times: tuple
    runs: int
    miscoverage: np.ndarray
    size_p25: np.ndarray
    size_median: np.ndarray
    size_p75: np.ndarray
    dist_p25: np.ndarray
    dist_median: np.ndarray
    dist_p75: np.ndarray

    def index(self, method, alpha=None, t=None):
        mi = self.methods.index(method)
        ai = 0 if alpha is None else _find(self.alphas, alpha)
        ti = None if t is None else self.times.index(t)
        return mi, ai, ti

    def series(self, name, method, alpha=None):
        mi, ai, _ = self.index(method, alpha)
        arr = getattr(self, name)
        return arr[mi] if arr.ndim == 2 else arr[mi, ai]


def _find(values, x):
    for i, v in enumerate(values):
        if abs(v - x) <= 1e-12:
            return i
    raise KeyError(x)


def aggregate(results):
    if not results:
        raise AvqstError("no successful runs to aggregate")
    results = sorted(results, key=lambda r: r.run_index)
    first = results[0]
    covered = np.stack([r.covered for r in results])
    size = np.stack([r.size for r in results])
    dist = np.stack([r.distance for r in results])
    with warnings.catch_warnings():
        # all-nan slices occur when no candidate pool is configured
        warnings.simplefilter("ignore", RuntimeWarning)
        s25, s50, s75 = np.nanpercentile(size, [25, 50, 75], axis=0)
        d25, d50, d75 = np.nanpercentile(dist, [25, 50, 75], axis=0)
    return AggregateStats(first.methods, first.alphas, first.times, len(results),
                          np.mean(~covered, axis=0), s25, s50, s75, d25, d50, d75)


def resolve_workers(workers=None):
    """Explicit count, else ``AVQST_THREADS`` (0 = auto), else all CPUs."""
    if workers is None:
        env = os.environ.get("AVQST_THREADS")
        workers = int(env) if env not in (None, "") else 0
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def _run_task(args):
    config, index, alphas, times = args
    return run_single(config, index, alphas, times)


def run_all(config, alphas=None, times=None, workers=None, progress=None):
    """All runs of ``config``, ordered by run index."""
    config.validate()
    workers = resolve_workers(workers)
    tasks = [(config, i, alphas, times) for i in range(config.runs)]
    results = []
    if workers == 1 or config.runs == 1:
        for i, task in enumerate(tasks):
            results.append(_run_task(task))
            if progress:
                progress(i + 1, config.runs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(_run_task, tasks, chunksize=max(1, config.runs // (4 * workers)))):
                results.append(res)
                if progress:
                    progress(i + 1, config.runs)
    return results


def run_experiment(config, workers=None, progress=None):
    """Aggregate statistics at ``config.alpha`` over ``config.runs`` runs."""
    return aggregate(run_all(config, workers=workers, progress=progress))


def alpha_sweep(config, alphas=None, workers=None, progress=None):
    """One pass over the runs evaluated at every ``alpha``, at ``config.eval_times()``.

    All alphas share the same measurement randomness; only thresholds differ.
    """
    alphas = tuple(alphas) if alphas is not None else tuple(config.alphas)
    for a in alphas:
        log_threshold(a)
    return aggregate(run_all(config, alphas=alphas, times=config.eval_times(), workers=workers,
                             progress=progress))


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def results_rows(stats):
    for mi, m in enumerate(stats.methods):
        for ai, a in enumerate(stats.alphas):
            for ti, t in enumerate(stats.times):
                yield (m, t, a, stats.miscoverage[mi, ai, ti], stats.size_p25[mi, ai, ti],
                       stats.size_median[mi, ai, ti], stats.size_p75[mi, ai, ti],
                       stats.dist_p25[mi, ti], stats.dist_median[mi, ti], stats.dist_p75[mi, ti],
                       stats.runs)


def export_csv(stats, path):
    atomic_write_text(path, _csv_text(RESULTS_COLUMNS, results_rows(stats)))


def sweep_rows(stats):
    for ti, t in enumerate(stats.times):
        for mi, m in enumerate(stats.methods):
            for ai, a in enumerate(stats.alphas):
                yield (m, a, t, stats.miscoverage[mi, ai, ti], stats.size_median[mi, ai, ti],
                       stats.runs)


def export_sweep_csv(stats, path):
    atomic_write_text(path, _csv_text(SWEEP_COLUMNS, sweep_rows(stats)))


def read_csv(path):
    """Parse an exported CSV back into dicts with numeric fields converted."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        parsed = {}
        for k, v in row.items():
            if k == "method":
                parsed[k] = v
            elif k in ("t", "t_eval", "runs"):
                parsed[k] = int(v)
            else:
                parsed[k] = float(v)
        out.append(parsed)
    return out


def bloch_grid(resolution):
    """Lattice points of the Bloch ball in normalized coordinates (radius ``1/sqrt(2)``)."""
    r = 1 / np.sqrt(2)
    axis = np.linspace(-r, r, resolution)
    pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    return pts[np.linalg.norm(pts, axis=1) <= r * (1 + 1e-12)]


def bloch_trajectory(config, run_index=None, resolution=None, times=None):
    """Records describing the regions of one single-qubit run (see :func:`export_bloch_trajectory`)."""
    if config.qubits != 1:
        raise ValidationError(f"Bloch trajectories need qubits=1, got {config.qubits}")
    methods = tuple(config.methods)
    if "bqst" not in methods:
        methods = methods + ("bqst",)
    cfg = config.with_updates(methods=methods, pool_size=0).validate()
    run_index = cfg.bloch_run if run_index is None else run_index
    resolution = cfg.bloch_resolution if resolution is None else resolution
    times = set(cfg.bloch_times if times is None else times)
    late = sorted(t for t in times if not 0 <= t <= cfg.horizon)
    if late:
        raise ValidationError(f"bloch_times: {late} outside 0..horizon={cfg.horizon}")
    pts = bloch_grid(resolution)
    grid_states = density_from_bloch(pts, dim=2)
    thr = log_threshold(cfg.alpha)

    records = []
    for snap in simulate(cfg, run_index):
        if snap.t not in times:
            continue
        t = snap.t
        records.append(_point("truth", t, bloch_coordinates(snap.truth)))
        records.append(dict(_point("estimate", t, bloch_coordinates(snap.predictor)),
                            estimator=cfg.predictor))
        pm = posterior_mean(snap.ensemble)
        records.append(dict(_point("estimate", t, bloch_coordinates(pm)),
                            estimator="posterior-mean"))
        in_av = snap.tracker.log_martingales(grid_states) <= thr
        region = fit_posterior_gaussian(snap.ensemble, cfg.bqst_ridge).region(cfg.alpha)
        in_bqst = region.contains_coords(pts)
        for p, a, b in zip(pts, in_av, in_bqst):
            rec = _point("grid", t, p)
            rec["in_av"] = bool(a)
            rec["in_bqst"] = bool(b)
            records.append(rec)
    return records


def _point(kind, t, v):
    return {"kind": kind, "t": int(t), "x": float(v[0]), "y": float(v[1]), "z": float(v[2])}


def export_bloch_trajectory(config, path, run_index=None, resolution=None, times=None):
    """Write JSON-lines Bloch-ball classifications for a single-qubit run.

    Records are ``kind=truth`` and ``kind=estimate`` (one per estimator) per
    recorded ``t``, then one ``kind=grid`` record per lattice point with
    ``in_av`` and ``in_bqst`` flags. Coordinates are normalized Bloch
    coordinates, so pure states have norm ``1/sqrt(2)``.
    """
    records = bloch_trajectory(config, run_index, resolution, times)
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    atomic_write_text(path, text)
    return records


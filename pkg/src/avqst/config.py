"""Experiment configuration with JSON (de)serialization.

The JSON form mirrors :class:`ExperimentConfig` field names; ``mle`` and
``sis`` are nested objects. Unknown keys are rejected.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import ConfigError, ValidationError
from .estimators import MleConfig, SisConfig

METHODS = ("av", "bqst", "lr")
PREDICTORS = ("mle", "posterior-mean", "fixed")
FIXED_STATES = ("maximally-mixed", "haar")
MEASURES = ("hilbert-schmidt", "haar-pure")


def default_record_times(horizon):
    """Every step up to 200; beyond that a log-spaced grid of about 100 points."""
    if horizon <= 200:
        return list(range(1, horizon + 1))
    grid = {int(round(10 ** e)) for e in _linspace(0.0, math.log10(horizon), 100)}
    return sorted(t for t in grid | {horizon} if 1 <= t <= horizon)


def _linspace(a, b, n):
    return [a + (b - a) * i / (n - 1) for i in range(n)]


@dataclass(frozen=True)
class ExperimentConfig:
    qubits: int = 2
    horizon: int = 100
    alpha: float = 0.1
    alphas: tuple = (0.05, 0.1, 0.2, 0.3, 0.5)
    runs: int = 500
    pool_size: int = 4096
    pool_measure: str = "hilbert-schmidt"
    # None resolves from qubits: 1000 particles up to D=4, 4000 beyond
    sis: SisConfig = None
    mle: MleConfig = field(default_factory=MleConfig)
    predictor: str = "mle"
    fixed_state: str = "haar"
    methods: tuple = METHODS
    seed: int = 0
    record_times: tuple = None
    sweep_times: tuple = None
    intersect: bool = False
    lr_threshold: float = None
    bqst_ridge: float = 1e-9
    bloch_run: int = 0
    bloch_times: tuple = (0, 5, 22, 50, 100)
    bloch_resolution: int = 21

    def __post_init__(self):
        if self.sis is None:
            n = 4000 if isinstance(self.qubits, int) and self.qubits >= 3 else 1000
            object.__setattr__(self, "sis", SisConfig(particles=n))

    @property
    def dim(self):
        return 2**self.qubits

    def times(self):
        return tuple(self.record_times) if self.record_times is not None else tuple(
            default_record_times(self.horizon))

    def eval_times(self):
        return tuple(self.sweep_times) if self.sweep_times is not None else (self.horizon,)

    def problems(self):
        """All invalid fields, as messages naming the field."""
        out = []
        if not isinstance(self.qubits, int) or not 1 <= self.qubits <= 8:
            out.append(f"qubits: must be an integer in [1, 8], got {self.qubits!r}")
        if not isinstance(self.horizon, int) or self.horizon < 1:
            out.append(f"horizon: must be an integer >= 1, got {self.horizon!r}")
        if not _is_alpha(self.alpha):
            out.append(f"alpha: must lie in (0, 1), got {self.alpha!r}")
        if not self.alphas or not all(_is_alpha(a) for a in self.alphas):
            out.append(f"alphas: every entry must lie in (0, 1), got {self.alphas!r}")
        if not isinstance(self.runs, int) or self.runs < 1:
            out.append(f"runs: must be an integer >= 1, got {self.runs!r}")
        if not isinstance(self.pool_size, int) or self.pool_size < 0:
            out.append(f"pool_size: must be an integer >= 0, got {self.pool_size!r}")
        if self.pool_measure not in MEASURES:
            out.append(f"pool_measure: must be one of {MEASURES}, got {self.pool_measure!r}")
        if self.predictor not in PREDICTORS:
            out.append(f"predictor: must be one of {PREDICTORS}, got {self.predictor!r}")
        if self.fixed_state not in FIXED_STATES:
            out.append(f"fixed_state: must be one of {FIXED_STATES}, got {self.fixed_state!r}")
        if not self.methods or any(m not in METHODS for m in self.methods) \
                or len(set(self.methods)) != len(self.methods):
            out.append(f"methods: must be a non-empty subset of {METHODS}, got {self.methods!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            out.append(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")
        horizon = self.horizon if isinstance(self.horizon, int) else 0
        if self.record_times is not None and (
                not self.record_times or any(not isinstance(t, int) or not 1 <= t <= horizon
                                             for t in self.record_times)):
            out.append("record_times: must be a non-empty subset of 1..horizon")
        if self.sweep_times is not None and (
                not self.sweep_times or any(not isinstance(t, int) or not 1 <= t <= horizon
                                            for t in self.sweep_times)):
            out.append("sweep_times: must be a non-empty subset of 1..horizon")
        if self.lr_threshold is not None and not (isinstance(self.lr_threshold, (int, float))
                                                      and self.lr_threshold >= 0):
            out.append(f"lr_threshold: must be >= 0 or null, got {self.lr_threshold!r}")
        if not self.bqst_ridge > 0:
            out.append(f"bqst_ridge: must be > 0, got {self.bqst_ridge!r}")
        if not isinstance(self.bloch_run, int) or self.bloch_run < 0:
            out.append(f"bloch_run: must be an integer >= 0, got {self.bloch_run!r}")
        if any(not isinstance(t, int) or t < 0 for t in self.bloch_times):
            out.append("bloch_times: must be non-negative integers")
        if not isinstance(self.bloch_resolution, int) or self.bloch_resolution < 2:
            out.append(f"bloch_resolution: must be an integer >= 2, got {self.bloch_resolution!r}")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    def with_updates(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError([f"{k}: unknown key" for k in unknown])
        kw = {}
        for k, v in data.items():
            if v is None and k in ("mle", "sis"):
                continue
            if k == "mle":
                kw[k] = _sub_config(MleConfig, v, "mle")
            elif k == "sis":
                kw[k] = _sub_config(SisConfig, v, "sis")
            elif isinstance(v, list):
                kw[k] = tuple(v)
            else:
                kw[k] = v
        return cls(**kw)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        return cls.from_dict(data)


def _is_alpha(a):
    return isinstance(a, (int, float)) and not isinstance(a, bool) and 0 < a < 1


def _sub_config(kind, data, prefix):
    if isinstance(data, kind):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: must be an object")
    names = {f.name for f in fields(kind)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError([f"{prefix}.{k}: unknown key" for k in unknown])
    try:
        return kind(**data)
    except (ValidationError, TypeError) as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def apply_override(config, key, raw):
    """Apply ``key=value`` (value parsed as JSON, falling back to a string)."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    data = config.to_dict()
    parts = key.split(".")
    target = data
    for p in parts[:-1]:
        if not isinstance(target.get(p), dict):
            raise ConfigError(f"{key}: unknown key")
        target = target[p]
    if parts[-1] not in target:
        raise ConfigError(f"{key}: unknown key")
    target[parts[-1]] = value
    return ExperimentConfig.from_dict(data)

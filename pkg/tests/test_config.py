import json

import pytest

from avqst.config import ExperimentConfig, apply_override, default_record_times
from avqst.errors import ConfigError


def test_default_valid():
    cfg = ExperimentConfig().validate()
    assert cfg.dim == 4 and cfg.times() == tuple(range(1, 101))


def test_record_times_long_horizon():
    times = default_record_times(10**4)
    assert times[0] == 1 and times[-1] == 10**4
    assert len(times) <= 101 and times == sorted(set(times))


def test_json_round_trip():
    cfg = ExperimentConfig(qubits=1, alphas=(0.1, 0.2), record_times=(1, 5), lr_threshold=2.0)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="colour: unknown key"):
        ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(ConfigError, match="mle.eps: unknown key"):
        ExperimentConfig.from_dict({"mle": {"eps": 0.1}})


def test_all_problems_listed():
    cfg = ExperimentConfig(alpha=1.5, runs=0, methods=("av", "zz"))
    fields = [p.split(":")[0] for p in cfg.problems()]
    assert fields == ["alpha", "runs", "methods"]
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    assert len(info.value.problems) == 3


def test_record_times_outside_horizon():
    assert ExperimentConfig(horizon=10, record_times=(5, 11)).problems()[0].startswith(
        "record_times")


def test_overrides():
    cfg = apply_override(ExperimentConfig(), "alpha", "0.05")
    assert cfg.alpha == 0.05
    cfg = apply_override(cfg, "mle.epsilon", "0.25")
    assert cfg.mle.epsilon == 0.25
    cfg = apply_override(cfg, "predictor", "posterior-mean")
    assert cfg.predictor == "posterior-mean"
    cfg = apply_override(cfg, "methods", '["av"]')
    assert cfg.methods == ("av",)
    with pytest.raises(ConfigError, match="nope: unknown key"):
        apply_override(cfg, "nope", "1")
    with pytest.raises(ConfigError, match="mle.nope: unknown key"):
        apply_override(cfg, "mle.nope", "1")


def test_malformed_json():
    with pytest.raises(ConfigError, match="malformed JSON"):
        ExperimentConfig.from_json("{")


def test_nested_validation():
    with pytest.raises(ConfigError, match="sis"):
        ExperimentConfig.from_dict({"sis": {"particles": 0}})


def test_to_dict_is_json():
    d = json.loads(ExperimentConfig().to_json())
    assert d["mle"]["gamma"] == 1e-3 and d["methods"] == ["av", "bqst", "lr"]


def test_particle_default_by_dimension():
    assert ExperimentConfig().sis.particles == 1000
    assert ExperimentConfig(qubits=4).sis.particles == 4000
    assert ExperimentConfig.from_dict({"qubits": 4, "sis": None}).sis.particles == 4000

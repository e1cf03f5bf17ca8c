import pytest

from fbrad.config import describe_defaults, load_config
from fbrad.errors import ValidationError


def test_defaults():
    cfg = load_config(seed=3)
    ens = cfg.ensemble()
    assert (ens.M, ens.K, ens.subsample_fraction, ens.W) == (17, 2, 0.75, 32)
    assert ens.method == "fbr" and ens.threshold_mode == "paper_iqr" and ens.seed == 3
    assert cfg.training().epochs == 50


def test_file_then_overrides(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[ensemble]\nmembers = 9\nwindow = 16\n[split]\nstacked_fractions = 1/3, 1/3, 1/3\n")
    cfg = load_config(p, {"ensemble.members": "5"})
    assert cfg["ensemble"]["members"] == 5 and cfg["ensemble"]["window"] == 16
    assert cfg["split"]["stacked_fractions"] == pytest.approx((1 / 3,) * 3)


def test_plain_forces_single_member():
    assert load_config(overrides={"ensemble.method": "plain"}).ensemble().M == 1


def test_detector_hyperparameters_flow_through():
    cfg = load_config(overrides={"dense_autoencoder.hidden": "12,6", "lstm_forecaster.hidden": "7"})
    assert cfg.detector_spec("dense_autoencoder").hyperparameters["hidden"] == [12, 6]
    assert cfg.experiment().stacked_specs[2].hyperparameters["hidden"] == 7


@pytest.mark.parametrize("overrides", [
    {"ensemble.colour": "red"},
    {"nonsense.key": "1"},
])
def test_unknown_keys(overrides):
    with pytest.raises(ValidationError, match="unknown"):
        load_config(overrides=overrides)


def test_unknown_key_in_file(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[training]\nepochs = 3\nmomentum = 0.9\n")
    with pytest.raises(ValidationError, match="training.momentum"):
        load_config(p)


@pytest.mark.parametrize("key,value", [
    ("ensemble.members", "many"),
    ("ensemble.method", "boosting"),
    ("ensemble.subsample", "1.5"),
    ("run.modes", "fbr,magic"),
    ("ensemble.detectors", "conv_autoencoder"),
])
def test_invalid_values(key, value):
    with pytest.raises(ValidationError):
        load_config(overrides={key: value})


def test_describe_lists_every_section():
    text = describe_defaults()
    for sec in ("[ensemble]", "[training]", "[stacking]", "[run]"):
        assert sec in text

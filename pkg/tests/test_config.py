from pathlib import Path

import pytest
import yaml

from core.config_loader import (
    RunConfig,
    Settings,
    UnknownConfigKeysError,
    dump_run_config,
    load_run_config,
    parse_run_config,
)
from core.config_validator import RunConfigValidator, SettingsValidator
from core.errors import ParameterError
from tools.models import BoxDomain, ParetoRadius

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def test_defaults_are_valid():
    config = load_run_config()
    RunConfigValidator(config).validate()
    assert config.schema_version == 1
    assert config.perforation.alpha == 4.0


def test_unknown_key_is_reported_with_its_path():
    with pytest.raises(UnknownConfigKeysError) as info:
        parse_run_config({"process": {"bogus": 1}})
    assert info.value.keys == ["process.bogus"]
    assert "process.bogus" in str(info.value)


def test_overrides_replace_every_eps_list():
    config = load_run_config(overrides={"eps": [0.2, 0.1], "seed": 11, "alpha": 5.0, "n_seeds": 3})
    assert config.perforation.eps == [0.2, 0.1]
    assert config.cutoff.eps == [0.2, 0.1]
    assert config.slln.eps == [0.2, 0.1]
    assert config.proxy.eps == [0.2, 0.1]
    assert config.process.seed == 11
    assert config.process.n_seeds == 3
    assert config.perforation.alpha == 5.0


def test_unsupported_override_is_rejected():
    with pytest.raises(ParameterError):
        load_run_config(overrides={"gamma": 1.0})


def test_yaml_round_trip(tmp_path):
    config = load_run_config(overrides={"eps": [0.3, 0.2, 0.1], "output_dir": str(tmp_path)})
    path = tmp_path / "resolved.yaml"
    path.write_text(dump_run_config(config), encoding="utf-8")
    assert load_run_config(path) == config


def test_box_domain_and_pareto_law_parse():
    config = parse_run_config(
        {
            "domain": {"shape": "box", "half_widths": [0.5, 0.5, 0.5]},
            "process": {"radius_law": {"law": "pareto", "shape": 6.0}},
        }
    )
    assert isinstance(config.domain, BoxDomain)
    assert isinstance(config.process.radius_law, ParetoRadius)
    assert config.moment_exponent() == 6.0


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(ParameterError):
        load_run_config(tmp_path / "absent.yaml")
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ParameterError):
        load_run_config(bad)


@pytest.mark.parametrize(
    "raw",
    [
        {"perforation": {"eps": [0.05, 0.1]}},
        {"slln": {"eps": [0.1, 0.1]}},
        {"cutoff": {"eps": []}},
        {"proxy": {"eps": [0.2, -0.1]}},
        {"perforation": {"alpha": 2.0}},
        {"cutoff": {"q": 3.0}},
        {"slln": {"m": [-1.0]}},
    ],
)
def test_validator_rejects(raw):
    with pytest.raises(ParameterError):
        RunConfigValidator(parse_run_config(raw)).validate()


def test_inadmissible_pareto_needs_explicit_opt_in():
    raw = {"process": {"radius_law": {"law": "pareto", "shape": 1.5}}}
    with pytest.raises(ParameterError, match="kappa"):
        RunConfigValidator(parse_run_config(raw)).validate()
    raw["perforation"] = {"allow_inadmissible": True}
    RunConfigValidator(parse_run_config(raw)).validate()


def test_box_domain_is_flagged(caplog):
    config = parse_run_config({"domain": {"shape": "box"}})
    with caplog.at_level("WARNING", logger="core.config_validator"):
        RunConfigValidator(config).validate()
    assert "C2" in caplog.text


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("MC_SAMPLES", "5000")
    monkeypatch.setenv("LOG_LEVEL", "DEBUG")
    settings = Settings()
    assert settings.MC_SAMPLES == 5000
    assert settings.LOG_LEVEL == "DEBUG"


@pytest.mark.parametrize(
    "field, value",
    [("OUTPUT_DIR", ""), ("MAX_GRID_CELLS", 0), ("SOLVER_RTOL", -1e-8), ("SWEEP_WORKERS", 0)],
)
def test_settings_validator(field, value):
    with pytest.raises(ValueError):
        SettingsValidator(Settings(**{field: value})).validate()


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    config = load_run_config(path)
    RunConfigValidator(config).validate()
    assert isinstance(config, RunConfig)
    assert yaml.safe_load(dump_run_config(config))["schema_version"] == 1

"""Tests for run configuration parsing and discovery."""

import copy
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from trade_tails.config import (
    ENV_VAR,
    RunConfig,
    config_hash,
    config_to_dict,
    default_config_path,
    load_config,
    parse_config,
    with_overrides,
)
from trade_tails.errors import ConfigError
from trade_tails.process import GaussianJump, TwoPointJump
from trade_tails.timing import IIM, ITM


def switching_document():
    """Two regimes with jumps under ITM timing."""
    return {
        "model": {
            "regimes": [
                {
                    "drift": 0.05,
                    "variance": 0.5,
                    "jump_intensity": 1.0,
                    "jump": {"kind": "gaussian", "mean": -0.1, "variance": 0.04},
                },
                {
                    "drift": -0.05,
                    "variance": 1.0,
                    "jump_intensity": 0.5,
                    "jump": {"kind": "two_point", "first": 0.2, "second": -0.3, "probability": 0.4},
                },
            ],
            "generator": [[-1.0, 1.0], [2.0, -2.0]],
            "transition_jumps": [
                [None, {"probability": 0.5, "jump": {"kind": "degenerate", "size": 0.1}}],
                [None, None],
            ],
            "initial": [0.25, 0.75],
        },
        "timing": {
            "kind": "itm",
            "arrival_rates": [0.5, 2.0],
            "weights": [0.4, 0.6],
            "completion_rates": [1.0],
        },
        "analysis": {"alpha_max": 30, "tail": "lower", "tolerances": {"alpha": 0.05}},
        "simulation": {"count": 5000, "seed": 3, "streams": 4},
    }


class TestParseConfig:
    """Tests for parse_config."""

    def test_minimal(self, config_document):
        """Test defaults are filled in for a minimal document."""
        config = parse_config(config_document)
        assert isinstance(config.timing, IIM)
        assert config.model.size == 1
        assert config.analysis.tail == "upper"
        assert config.analysis.tolerances.scale == 0.25
        assert config.simulation.streams == 2

    def test_full_document(self):
        """Test every block of a full document."""
        config = parse_config(switching_document())
        assert isinstance(config.timing, ITM)
        assert config.timing.completion_rates == (1.0,)
        assert isinstance(config.model.regimes[0].jump, GaussianJump)
        assert config.model.regimes[1].jump == TwoPointJump(0.2, -0.3, 0.4)
        assert config.model.transition_jumps[0][1].probability == 0.5
        np.testing.assert_array_equal(config.model.initial, [0.25, 0.75])
        assert config.analysis.tail == "lower"
        assert config.analysis.alpha_max == 30.0
        assert config.analysis.tolerances.alpha == 0.05
        assert config.analysis.tolerances.scale == 0.25

    @pytest.mark.parametrize(
        "mutate,path",
        [
            (lambda d: d["model"].pop("generator"), "model.generator"),
            (lambda d: d["model"].update(colour="red"), "model.colour"),
            (lambda d: d["model"]["regimes"][0].update(variance=-1.0), "model.regimes[0].variance"),
            (lambda d: d["model"]["regimes"][1]["jump"].update(kind="cauchy"), "model.regimes[1].jump.kind"),
            (lambda d: d["model"]["generator"].pop(), "model.generator"),
            (lambda d: d["model"]["generator"][0].__setitem__(1, "x"), "model.generator[0][1]"),
            (lambda d: d["timing"].update(kind="poisson"), "timing.kind"),
            (lambda d: d["timing"]["arrival_rates"].__setitem__(0, 0.0), "timing.arrival_rates[0]"),
            (lambda d: d["timing"].update(weights=[0.5]), "timing.weights"),
            (lambda d: d["timing"].update(successes=2), "timing.successes"),
            (lambda d: d["analysis"].update(tail="both"), "analysis.tail"),
            (lambda d: d["analysis"]["tolerances"].update(alpha=0.0), "analysis.tolerances.alpha"),
            (lambda d: d["simulation"].update(count=0), "simulation.count"),
            (lambda d: d["simulation"].update(streams=10_000), "simulation.streams"),
            (lambda d: d["simulation"].update(seed=-1), "simulation.seed"),
            (lambda d: d["simulation"].update(grid_spacing=0.5), "simulation.grid_spacing"),
            (lambda d: d.update(extra={}), "extra"),
        ],
    )
    def test_field_paths(self, mutate, path):
        """Test errors name the offending field."""
        document = switching_document()
        mutate(document)
        with pytest.raises(ConfigError) as info:
            parse_config(document)
        assert info.value.path == path

    def test_model_errors_are_config_errors(self):
        """Test an invalid generator surfaces as a model config error."""
        document = switching_document()
        document["model"]["generator"] = [[-1.0, 0.5], [2.0, -2.0]]
        with pytest.raises(ConfigError) as info:
            parse_config(document)
        assert info.value.path == "model"

    def test_timing_errors_are_config_errors(self):
        """Test unsorted arrival rates surface as a timing config error."""
        document = switching_document()
        document["timing"]["arrival_rates"] = [2.0, 0.5]
        with pytest.raises(ConfigError) as info:
            parse_config(document)
        assert info.value.path == "timing"

    def test_iim_grid_spacing(self, config_document):
        """Test the simulation grid spacing reaches IIM timing."""
        config_document["simulation"]["grid_spacing"] = 0.5
        assert parse_config(config_document).timing.grid_spacing == 0.5

    def test_probability_bounds(self, config_document):
        """Test probabilities must lie strictly inside (0, 1)."""
        config_document["timing"]["probabilities"] = [1.0]
        with pytest.raises(ConfigError) as info:
            parse_config(config_document)
        assert info.value.path == "timing.probabilities[0]"

    def test_boolean_is_not_a_number(self, config_document):
        """Test booleans are rejected where numbers are expected."""
        config_document["model"]["regimes"][0]["drift"] = True
        with pytest.raises(ConfigError):
            parse_config(config_document)


class TestCanonicalForm:
    """Tests for the canonical document and its hash."""

    def test_round_trip(self):
        """Test the canonical document parses back to an equal config."""
        config = parse_config(switching_document())
        assert parse_config(config_to_dict(config)) == config

    def test_defaults_materialized(self, config_document):
        """Test an explicit default hashes like an omitted one."""
        explicit = copy.deepcopy(config_document)
        explicit["analysis"] = {"tail": "upper"}
        explicit["timing"]["successes"] = 1
        assert config_hash(parse_config(explicit)) == config_hash(parse_config(config_document))

    def test_hash_changes(self, config_document):
        """Test a changed seed changes the hash."""
        base = parse_config(config_document)
        assert config_hash(with_overrides(base, seed=8)) != config_hash(base)

    def test_hash_is_hex_sha256(self, config_document):
        """Test the hash format."""
        digest = config_hash(parse_config(config_document))
        assert len(digest) == 64
        int(digest, 16)


class TestOverrides:
    """Tests for command-line overrides."""

    def test_seed_and_samples(self, config_document):
        """Test seed and sample count overrides."""
        config = with_overrides(parse_config(config_document), seed=99, samples=1234)
        assert config.simulation.seed == 99
        assert config.simulation.count == 1234
        assert config.simulation.streams == 2

    def test_tolerance_json(self, config_document):
        """Test tolerance overrides merge with the file values."""
        config = with_overrides(parse_config(config_document), tolerance_json='{"scale": 0.5}')
        assert config.analysis.tolerances.scale == 0.5
        assert config.analysis.tolerances.alpha == 0.10

    def test_invalid_tolerance_json(self, config_document):
        """Test malformed tolerance JSON is a config error."""
        with pytest.raises(ConfigError):
            with_overrides(parse_config(config_document), tolerance_json="{alpha:")

    def test_unknown_tolerance(self, config_document):
        """Test unknown tolerance keys are rejected."""
        with pytest.raises(ConfigError):
            with_overrides(parse_config(config_document), tolerance_json='{"gamma": 1}')

    def test_invalid_samples(self, config_document):
        """Test a nonpositive sample override is rejected."""
        with pytest.raises(ConfigError):
            with_overrides(parse_config(config_document), samples=0)


class TestLoadConfig:
    """Tests for load_config and discovery."""

    def test_json_file(self, config_file):
        """Test loading a JSON file."""
        assert isinstance(load_config(config_file), RunConfig)

    def test_yaml_file(self, tmp_path, config_document):
        """Test loading the same document written as YAML."""
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(config_document))
        json_path = tmp_path / "config.json"
        json_path.write_text(json.dumps(config_document))
        assert load_config(path) == load_config(json_path)

    def test_missing_file(self, tmp_path):
        """Test an unreadable path is a config error."""
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_unparsable_file(self, tmp_path):
        """Test malformed content is a config error."""
        path = tmp_path / "broken.json"
        path.write_text("model: [unclosed")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_environment_variable(self, monkeypatch, config_file):
        """Test the environment variable is used when no path is given."""
        monkeypatch.setenv(ENV_VAR, str(config_file))
        assert default_config_path() == Path(config_file).absolute()
        assert isinstance(load_config(), RunConfig)

    def test_nothing_found(self, monkeypatch, tmp_path):
        """Test a missing default is a config error."""
        monkeypatch.delenv(ENV_VAR, raising=False)
        monkeypatch.setattr(Path, "home", lambda: tmp_path)
        monkeypatch.setenv("APPDATA", str(tmp_path))
        with pytest.raises(ConfigError):
            load_config()

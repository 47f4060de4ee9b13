import pytest

from config.config import get_parameter, load_run_file
from src.common.exceptions import ConfigError
from src.services.run_config import RunConfig
from src.services.transforms import BLOCK_ORDER


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestGetParameter:
    def test_nested_lookup(self):
        assert get_parameter("run.k") == 30
        assert get_parameter("run.dilations") == [1, 3, 5]

    def test_missing_with_default(self):
        assert get_parameter("run.nothing", 7) == 7

    def test_missing_without_default(self):
        with pytest.raises(KeyError, match="run.nothing"):
            get_parameter("run.nothing")


class TestRunFile:
    def test_key_value_lines(self, tmp_path):
        path = write(tmp_path / "run.cfg", "# tiny run\ntau=100\nk=10\ndetectors=correlation,spatial\nbatch-size=8\n")
        values = load_run_file(path)
        assert values == {"tau": 100, "k": 10, "detectors": ["correlation", "spatial"], "batch_size": 8}

    def test_yaml_mapping(self, tmp_path):
        path = write(tmp_path / "run.yaml", "tau: 100\ndilations: [1, 2, 4]\n")
        assert load_run_file(path) == {"tau": 100, "dilations": [1, 2, 4]}

    def test_yaml_must_be_mapping(self, tmp_path):
        with pytest.raises(ValueError):
            load_run_file(write(tmp_path / "list.yaml", "- 1\n- 2\n"))


class TestRunConfig:
    def test_defaults_from_package_config(self):
        config = RunConfig().validate()
        assert (config.tau, config.k, config.stride) == (500, 30, 10)
        assert config.detectors == BLOCK_ORDER
        assert config.effective_train_stride() == 30

    def test_precedence(self, tmp_path):
        path = write(tmp_path / "run.cfg", "tau=100\nk=10\nepochs=3\n")
        config = RunConfig.from_sources(path, {"epochs": 5, "k": None})
        assert (config.tau, config.k, config.epochs) == (100, 10, 5)

    def test_all_detectors_keyword(self):
        assert RunConfig(detectors="all").detectors == BLOCK_ORDER

    def test_hyperparameters_keep_block_order(self):
        hp = RunConfig(detectors=("spatial", "correlation")).validate().hyperparameters(m=4)
        assert hp.detectors == ("correlation", "spatial")
        assert hp.m == 4

    def test_unknown_setting(self):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_sources(overrides={"window": 3})
        assert info.value.field == "window"

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_sources(str(tmp_path / "missing.cfg"))
        assert info.value.field == "config"

    @pytest.mark.parametrize(
        "overrides,field",
        [
            ({"k": 31}, "k"),
            ({"k": 500}, "k"),
            ({"tau": 60, "k": 30, "stride": 40}, "stride"),
            ({"batch_size": 1}, "batch_size"),
            ({"epochs": 0}, "epochs"),
            ({"learning_rate": 0.0}, "learning_rate"),
            ({"lstm_kernel": 4}, "lstm_kernel"),
            ({"detectors": ("correlation", "spectral")}, "detectors"),
            ({"detectors": ("temporal", "temporal")}, "detectors"),
            ({"loss": "l2-only"}, "loss"),
            ({"dilations": (1, 3)}, "dilations"),
            ({"dilations": (3, 1, 5)}, "dilations"),
            ({"tau": 40, "k": 30, "stride": 2}, "tau"),
            ({"workers": 0}, "workers"),
            ({"seed": "x"}, "seed"),
        ],
    )
    def test_invalid_values_name_the_field(self, overrides, field):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_sources(overrides=overrides)
        assert info.value.field == field

    def test_small_span_allowed_without_spatial(self):
        config = RunConfig.from_sources(overrides={"tau": 40, "k": 30, "stride": 2, "detectors": "correlation,temporal"})
        assert config.detectors == ("correlation", "temporal")

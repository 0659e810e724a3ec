import pytest

from lpcoreset.config import RunConfig, build_config, load_config, parse_config_text
from lpcoreset.exceptions import ConfigError


class TestParseConfigText:
    def test_comments_and_blanks(self):
        text = "# run\np = 3\n\neps=0.25  # tighter\ngen = gaussian\n"
        assert parse_config_text(text) == {"p": "3", "eps": "0.25", "gen": "gaussian"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="Line 2"):
            parse_config_text("p=3\nverbose\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("colour=red\n")


class TestLoadConfig:
    def test_reads_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed=7\neps_grid=0.4,0.2\n", encoding="utf-8")
        assert load_config(str(path)) == {"seed": "7", "eps_grid": "0.4,0.2"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.cfg"))


class TestBuildConfig:
    def test_types_converted(self):
        config = build_config(
            {"gen": "gaussian", "n": "200", "p": "3", "eps_grid": "0.4, 0.2", "compare_lewis": "yes"}, {}
        )
        assert config.n == 200 and config.p == 3.0
        assert config.eps_grid == [0.4, 0.2]
        assert config.compare_lewis is True
        assert config.alpha == "auto"

    def test_flags_override_file(self):
        config = build_config({"gen": "gaussian", "seed": "1", "alpha": "0.5"}, {"seed": 9, "eps": None})
        assert config.seed == 9
        assert config.eps == 0.5
        assert config.alpha == 0.5

    def test_unknown_flag(self):
        with pytest.raises(ConfigError):
            build_config({}, {"gen": "gaussian", "colour": "red"})

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="Bad value"):
            build_config({"gen": "gaussian", "n": "many"}, {})


class TestValidate:
    @pytest.mark.parametrize(
        "overrides",
        [
            {},
            {"gen": "gaussian", "input": "a.csv"},
            {"gen": "gaussian", "trials": 0},
            {"gen": "gaussian", "eps": 1.0},
            {"gen": "gaussian", "delta": 0.0},
            {"gen": "gaussian", "p": 0.5},
            {"gen": "gaussian", "method": "greedy"},
            {"gen": "gaussian", "kind": "cosine"},
            {"gen": "gaussian", "flatten": "sideways"},
            {"gen": "gaussian", "check": "vibes"},
            {"gen": "gaussian", "recursive": "greedy"},
            {"gen": "gaussian", "alpha": -1.0},
            {"gen": "gaussian", "eps_grid": [0.5, 1.5]},
            {"gen": "gaussian", "command": "verify"},
            {"gen": "gaussian", "command": "plot"},
        ],
    )
    def test_rejected(self, overrides):
        with pytest.raises(ConfigError):
            RunConfig(**overrides).validate()

    def test_gaussian_check_needs_no_matrix(self):
        config = RunConfig(command="verify", check="gaussian", n=512, d=2, p=1.5).validate()
        assert config.input is None and config.gen is None

    def test_gaussian_check_rejects_input(self):
        with pytest.raises(ConfigError):
            RunConfig(command="verify", check="gaussian", input="a.csv").validate()

    def test_other_commands_still_need_a_matrix(self):
        with pytest.raises(ConfigError):
            RunConfig(command="verify", check="total_sens").validate()

    def test_accepted(self):
        config = RunConfig(gen="gaussian", command="verify", check="gaussian", n=512, d=2, p=1.5).validate()
        assert config.to_dict()["check"] == "gaussian"

    def test_generator_spec(self):
        spec = RunConfig(gen="low_rank_sparse", n=30, d=4, k=2, s=5, seed=3).generator_spec()
        assert (spec.family, spec.n, spec.d, spec.k, spec.s, spec.seed) == ("low_rank_sparse", 30, 4, 2, 5, 3)
        assert RunConfig(input="a.csv").generator_spec() is None

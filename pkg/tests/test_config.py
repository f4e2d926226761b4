import pytest

from distpg.config import ConfigError, ExperimentConfig, format_config, parse_config

TABLE_STYLE = """
# main experiment parameters
env = mountaincar
agents = 3
graph = star
batch_M = 10
minibatch_B = 5
epoch_len_K = 2
gamma = 0.999
alpha = 0.0025
hidden = 64
horizon = 1000
epochs_S = 200        # 200 * (10 + 2*5) = 4000 trajectories per agent
adam = true
repetitions = 20
"""


def test_reference_parameters_accepted():
    cfg = parse_config(TABLE_STYLE)
    assert cfg.batch_M == 10 and cfg.minibatch_B == 5 and cfg.epoch_len_K == 2
    assert cfg.gamma == 0.999 and cfg.alpha == 0.0025
    assert cfg.hidden == 64 and cfg.horizon == 1000
    assert cfg.epochs_S * (cfg.batch_M + cfg.epoch_len_K * cfg.minibatch_B) == 4000
    assert cfg.adam is True


def test_empty_file_gives_defaults():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()


def test_comments_and_blank_lines():
    cfg = parse_config("\n# comment only\n  \nagents = 5  # inline\n")
    assert cfg.agents == 5


def test_gamma_out_of_range_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("gamma = 1.5")
    assert "line 1" in str(err.value)


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError) as err:
        parse_config("agents = 3\nlearning_rate = 0.1\n")
    assert "line 2" in str(err.value)
    assert "learning_rate" in str(err.value)


def test_type_mismatch_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("agents = three")
    assert "line 1" in str(err.value)


def test_bad_syntax_rejected():
    with pytest.raises(ConfigError):
        parse_config("agents 3")
    with pytest.raises(ConfigError):
        parse_config("agents =")


def test_bool_words():
    assert parse_config("adam = TRUE").adam is True
    assert parse_config("adam = no").adam is False
    with pytest.raises(ConfigError):
        parse_config("adam = maybe")


def test_bad_variant_rejected():
    with pytest.raises(ConfigError):
        parse_config("variant = sgd")


def test_custom_graph_requires_edges():
    with pytest.raises(ConfigError):
        parse_config("graph = custom")
    cfg = parse_config("graph = custom\nedges = 0-1,1-2,2-0")
    assert cfg.edges == "0-1,1-2,2-0"


def test_env_policy_pairing_enforced():
    with pytest.raises(ConfigError):
        parse_config("env = mountaincar\npolicy = tabular")
    with pytest.raises(ConfigError):
        parse_config("env = tabular\npolicy = gaussian_mlp")
    cfg = parse_config("env = tabular\npolicy = tabular")
    assert cfg.env == "tabular"


def test_goal_positions_validation():
    cfg = parse_config("agents = 2\ngoal_positions = 0.3,0.4")
    assert cfg.goal_positions == "0.3,0.4"
    with pytest.raises(ConfigError):
        parse_config("agents = 3\ngoal_positions = 0.3,0.4")
    with pytest.raises(ConfigError):
        parse_config("goal_positions = high")


def test_oracle_gradients_requires_tabular():
    with pytest.raises(ConfigError):
        parse_config("oracle_gradients = true")
    cfg = parse_config("env = tabular\npolicy = tabular\noracle_gradients = true")
    assert cfg.oracle_gradients


def test_negative_values_rejected():
    for text in ("alpha = -0.1", "agents = 0", "repetitions = 0", "seed = -1",
                 "policy_sigma = 0"):
        with pytest.raises(ConfigError):
            parse_config(text)


def test_format_config_round_trip():
    cfg = parse_config(TABLE_STYLE)
    assert parse_config(format_config(cfg)) == cfg

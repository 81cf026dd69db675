import pytest
from hypothesis import given, strategies as st

from dgrom.config import ConfigError, RunConfig, load_config, parse_config


def test_defaults_reproduce_reference_scenario():
    cfg = RunConfig()
    assert cfg.param_box == ((0.4, 0.6), (0.2, 0.4))
    assert cfg.mu_bar == (0.5, 0.3)
    assert (cfg.degree, cfg.n_snapshots, cfg.n_test) == (2, 100, 10)
    assert parse_config("") == cfg


@given(
    nu=st.floats(1e-3, 1e3),
    c11=st.floats(1e-2, 1e4),
    k=st.integers(0, 4),
    seed=st.integers(0, 2**64 - 1),
    ns=st.integers(1, 500),
    ns_list=st.lists(st.integers(1, 50), min_size=1, max_size=6),
    flags=st.tuples(st.booleans(), st.booleans()),
    mode=st.sampled_from(["constant", "scaled"]),
)
def test_round_trip(nu, c11, k, seed, ns, ns_list, flags, mode):
    cfg = RunConfig(nu=nu, c11_value=c11, c11_mode=mode, refinement=k, seed=seed, n_snapshots=ns,
                    n_basis_list=tuple(ns_list), alpha_scaling=flags[0], nu_scaled_volume=flags[1],
                    output_dir="results/run a")
    assert parse_config(cfg.to_text()) == cfg


def test_syntax_features(tmp_path):
    text = "# comment\nseed = 7\nn_basis_list = 1-3, 5\nparam_box = 0.4 0.6 0.2 0.4  # inline\nalpha_scaling = yes\n"
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.seed == 7 and cfg.n_basis_list == (1, 2, 3, 5) and cfg.alpha_scaling


@pytest.mark.parametrize("text, match", [
    ("seed = 1\nbogus = 3\n", "line 2: unknown key 'bogus'"),
    ("nu = fast\n", "line 1: bad value for 'nu'"),
    ("mu_bar = 0.5\n", "mu_bar"),
    ("alpha_scaling = maybe\n", "alpha_scaling"),
    ("nu = -1\n", "positive"),
    ("c11_mode = huge\n", "c11_mode"),
    ("degree = 3\n", "degree"),
    ("param_box = 0.6 0.4 0.2 0.4\n", "param_box"),
    ("velocity_pod = polar\n", "velocity_pod"),
    ("[section]\n", "malformed"),
])
def test_errors_name_the_problem(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_penalty_rule():
    assert RunConfig(c11_mode="constant", c11_value=50).penalty(0.1) == 50
    assert RunConfig(c11_value=10).penalty(0.2) == pytest.approx(10 * 4 / 0.2)

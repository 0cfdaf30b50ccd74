import pytest
from hypothesis import given, settings, strategies as st

from openbook_spectra.config import ExperimentConfig, load_config
from openbook_spectra.errors import ConfigError


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    again = ExperimentConfig.loads(cfg.dumps())
    assert again == cfg
    assert again.digest() == cfg.digest()


@given(V=st.floats(0.1, 10, allow_nan=False), delta=st.floats(1e-4, 0.0099),
       rs=st.lists(st.floats(20, 5000), min_size=1, max_size=5), N=st.integers(200, 10**5),
       preset=st.sampled_from(["existence", "eta"]))
@settings(max_examples=40, deadline=None)
def test_round_trip_lossless(V, delta, rs, N, preset):
    cfg = ExperimentConfig(V=V, delta=delta, r_values=rs, grid_N=N, window_preset=preset)
    assert ExperimentConfig.loads(cfg.dumps()) == cfg


@pytest.mark.parametrize("text,field", [
    ("[run]\ngrid_N = 10\n", "run.grid_N"),
    ("[profiles]\ndelta = 0.5\n", "profiles.delta"),
    ("[run]\nwindow_preset = prop\n", "run.window_preset"),
    ("[run]\nr_values = 5\n", "run.r_values"),
    ("[flow]\nflow_r_min = 500\n", "flow.flow_R_values"),
])
def test_field_level_errors(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        ExperimentConfig.loads(text)


def test_unknown_section_and_key():
    with pytest.raises(ConfigError, match="unknown section"):
        ExperimentConfig.loads("[nope]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown key run.bogus"):
        ExperimentConfig.loads("[run]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        ExperimentConfig.loads("[run]\ngrid_N = many\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))
    assert load_config(None) == ExperimentConfig()


def test_partial_file_keeps_defaults(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[run]\nr_values = 150, 250\n")
    cfg = load_config(str(p))
    assert cfg.r_values == [150.0, 250.0]
    assert cfg.grid_N == ExperimentConfig().grid_N

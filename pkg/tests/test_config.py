import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from magneto_qed.config import CONFIG_SCHEMA, build_grid, build_model, load_config, omega_grid, parse_config
from magneto_qed.errors import ConfigError
from magneto_qed.media import BandRegion, ClosedFormRegion

from .conftest import BENCHMARKS

MINIMAL = "medium:\n  regions:\n    - name: vacuum\n"


def test_minimal_config_is_fully_defaulted():
    cfg = parse_config(MINIMAL)
    assert cfg.hbar == 1.0 and cfg.c == 1.0
    assert cfg["grid"]["points"] == [1, 1, 1]
    assert cfg.tolerances["sumrule"] == 0.02
    assert cfg.command("modes")["format"] == "json"
    model = build_model(cfg)
    assert isinstance(model.regions[0], ClosedFormRegion) and model.regions[0].is_vacuum


def test_dielectric_benchmark_parses():
    cfg = load_config(BENCHMARKS / "dm1.yaml")
    (term,) = build_model(cfg).regions[0].terms
    assert (term.block, term.f, term.w0, term.gamma) == ("ee", 0.5, 1.0, 0.1)
    assert cfg.command("sumrule")["refine"] == [1, 2, 4]
    grid = build_grid(cfg)
    assert grid.points == (3, 1, 1) and grid.box[0] == pytest.approx(2 * np.pi)


@pytest.mark.parametrize("name", ["vacuum", "dm1", "me_n1", "n3", "stack"])
def test_every_benchmark_builds(name):
    cfg = load_config(BENCHMARKS / f"{name}.yaml")
    build_model(cfg)
    build_grid(cfg)


def test_band_region_with_gauge_seed():
    text = """
medium:
  regions:
    - name: me
      kind: bands
      bands:
        - electric: {f: 0.5, w0: 1.0, gamma: 0.1}
          magnetic: {f: 0.2, w0: 1.0, gamma: 0.1}
          gauge_seed: 3
"""
    region = build_model(parse_config(text)).regions[0]
    assert isinstance(region, BandRegion)
    u = region.bands[0].gauge
    assert np.allclose(u.conj().T @ u, np.eye(3)) and not np.allclose(u, np.eye(3))


@pytest.mark.parametrize(
    "text, where",
    [
        (MINIMAL.replace("vacuum", "d\n      lorentz:\n        - {f: 0.5, w0: 1.0, gamma: 0}"), "medium.regions[0].lorentz[0].gamma"),
        (MINIMAL + "colour: blue\n", "<root>"),
        (MINIMAL + "grid:\n  points: [3, 1]\n", "grid.points"),
        (MINIMAL + "units:\n  hbar: -1\n", "units.hbar"),
        ("grid: {}\n", "<root>"),
        (MINIMAL + "commands:\n  modes:\n    format: xml\n", "commands.modes.format"),
        (MINIMAL + "medium:\n  regions: []\n", "medium.regions"),
    ],
)
def test_invalid_configs_name_the_offending_path(text, where):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert str(err.value).startswith(where)


@pytest.mark.parametrize(
    "text",
    [
        "medium:\n  regions:\n    - name: a\n    - name: a\n",
        MINIMAL + "  layout:\n    - {region: nowhere}\n",
        MINIMAL + "  layout:\n    - {region: vacuum, axis: 0, lo: 0.6, hi: 0.4}\n",
        MINIMAL + "grid:\n  omega: {min: 2.0, max: 1.0}\n",
        MINIMAL + "grid:\n  omega: {values: [1.0, 0.5]}\n",
        "medium:\n  regions:\n    - {name: b, kind: bands}\n",
        "- a list\n",
        "medium: [unclosed\n",
    ],
)
def test_semantic_errors_are_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_exponent_floats_are_numbers():
    cfg = parse_config(MINIMAL + "tolerances:\n  kk: 1e-5\n")
    assert cfg.tolerances["kk"] == 1e-5


def test_refined_frequency_grid_nests():
    cfg = parse_config(MINIMAL + "grid:\n  omega: {min: 0.1, max: 10.0, points: 9}\n")
    coarse, fine = omega_grid(cfg), omega_grid(cfg, 4)
    assert fine.size == 33 and np.allclose(fine[::4], coarse)


@pytest.mark.parametrize("name", ["dm1", "me_n1", "stack"])
def test_echo_round_trips(name):
    cfg = load_config(BENCHMARKS / f"{name}.yaml")
    again = parse_config(cfg.echo())
    assert again.data == cfg.data
    assert again.echo() == cfg.echo()


@given(
    st.floats(1e-3, 10.0),
    st.floats(1e-2, 5.0),
    st.floats(1e-3, 2.0),
    st.sampled_from(["ee", "mm"]),
)
def test_lorentz_parameters_survive_round_trip(f, w0, gamma, block):
    data = {"medium": {"regions": [{"name": "d", "lorentz": [{"block": block, "f": f, "w0": w0, "gamma": gamma}]}]}}
    cfg = parse_config(yaml.safe_dump(data))
    (term,) = build_model(parse_config(cfg.echo())).regions[0].terms
    assert (term.block, term.f, term.w0, term.gamma) == (block, f, w0, gamma)


def test_schema_requires_medium():
    assert CONFIG_SCHEMA["required"] == ["medium"]
    assert CONFIG_SCHEMA["additionalProperties"] is False

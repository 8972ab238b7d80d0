import numpy as np
import pytest

from pixvem import agglomeration, geometry, study
from pixvem.exceptions import ConfigError


@pytest.mark.parametrize("text, value", [("1/64", 1 / 64), ("2^-6", 1 / 64), ("0.125", 0.125), (0.5, 0.5)])
def test_parse_size(text, value):
    assert study.parse_size(text) == value


def test_parse_size_rejects_garbage():
    with pytest.raises(ConfigError):
        study.parse_size("an eighth")


@pytest.mark.parametrize("bad", [
    {"H": []},
    {"H": [0.3]},
    {"H": ["1/8"], "tau_hat": [0.3]},
    {"H": ["1/8"], "k": [0]},
    {"H": ["1/8"], "method": "other"},
    {"H": ["1/8"], "gamma": -1.0},
    {"H": ["1/8"], "colour": "red"},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        study.StudyConfig.from_dict(bad)


def test_presets_present_and_valid():
    names = study.preset_names()
    for name in ("test1a-quick", "test1a", "table1", "bean"):
        assert name in names
    for name in names:
        study.StudyConfig.from_dict(study.load_preset(name))
    with pytest.raises(ConfigError):
        study.load_preset("nope")


def test_preset_layouts():
    t1 = study.StudyConfig.from_dict(study.load_preset("table1"))
    assert t1.method == "fem_nitsche" and len(t1.k) * len(t1.H) == 15
    full = study.StudyConfig.from_dict(study.load_preset("test1a"))
    assert len(full.k) * len(full.tau_hat) == 5  # five plotted series


def test_quick_preset_rows_and_slopes(tmp_path):
    cfg = study.load_preset("test1a-quick")
    cfg["csv"] = str(tmp_path / "q.csv")
    res = study.run_study(cfg)
    assert len(res.records) == 6
    for (_, k, _), sl in res.slopes.items():
        assert sl["e1"] == pytest.approx(k, abs=0.2)
    assert (tmp_path / "q.csv").read_text().count("\n") == 7


def test_graded_single_level_is_uniform():
    case = geometry.builtin_case("bean")
    a = study.build_mesh(case.domain, 0.25, 0.25)
    b = study.build_mesh(case.domain, 0.25, 0.25, graded=((0.0, 0.0), 1))
    assert np.array_equal(a.labels, b.labels)


def test_build_mesh_graded_sizes():
    case = geometry.builtin_case("bean")
    mesh = study.build_mesh(case.domain, 0.25, 0.25, graded=((0.0, 0.0), 3))
    assert mesh.h == pytest.approx(0.25 * 0.25 / 4)
    assert mesh.H_nominal == pytest.approx(0.25 / 4)
    assert {el.block_size for el in mesh.elements} >= {0.25 / 4, 0.25}


def test_fem_study_runs():
    res = study.run_study({"method": "fem_bdt", "case": "test1b", "k": [1], "H": ["1/8", "1/16"]})
    assert len(res.records) == 2 and res.records[0].h == 0.125


def test_mesh_builder_rejects_non_integer_ratio():
    with pytest.raises(ConfigError):
        study.ratio_from_tau(0.3)
    assert isinstance(study.build_mesh(geometry.disk_domain(), 0.25, 0.25), agglomeration.PolyMesh)

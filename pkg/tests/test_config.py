import json
import math

import pytest

from ioncavity.config import ConfigError, GlobalConfig, load_config


def test_empty_config_gives_paper_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    cfg = load_config(path)
    assert cfg.tree["cavity"]["t2_ppm"] == 90.0
    assert cfg.tree["cavity"]["scatter_absorb_ppm"] == 23.0
    assert cfg.tree["emitter"]["gamma_total_mhz"] == 11.49
    cavity = cfg.build_cavity()
    assert cavity.w0 * 1e6 == pytest.approx(12.3, abs=0.1)
    scheme = cfg.build_scheme()
    assert scheme.gamma_g / (2 * math.pi) / 1e6 == pytest.approx(0.45,
                                                                 abs=0.005)


def test_none_path_gives_defaults():
    cfg = load_config(None)
    assert cfg.tree == GlobalConfig.from_dict({}).tree


def test_blank_file_equals_empty_object(tmp_path):
    path = tmp_path / "blank.json"
    path.write_text("\n")
    assert load_config(path).config_hash() == load_config(None).config_hash()


def test_negative_t2_names_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"cavity": {"t2_ppm": -5}}))
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert "cavity.t2_ppm" in str(err.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as err:
        GlobalConfig.from_dict({"cavity": {"t3_ppm": 1.0}})
    assert "cavity.t3_ppm" in str(err.value)


def test_parse_error_carries_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"cavity": {"t2_ppm": }}')
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert "line 1" in str(err.value)


def test_hash_round_trip(tmp_path):
    cfg = GlobalConfig.from_dict({"cavity": {"t2_ppm": 120.0}, "seed": 3})
    path = tmp_path / "roundtrip.json"
    path.write_text(cfg.canonical_json())
    again = load_config(path)
    assert again.config_hash() == cfg.config_hash()
    # hash insensitive to key order in the source file
    shuffled = {"seed": 3, "cavity": {"t2_ppm": 120.0}}
    assert GlobalConfig.from_dict(shuffled).config_hash() == cfg.config_hash()


def test_hash_sensitive_to_values():
    a = GlobalConfig.from_dict({})
    b = GlobalConfig.from_dict({"cavity": {"t2_ppm": 91.0}})
    assert a.config_hash() != b.config_hash()


def test_branching_sum_validated():
    with pytest.raises(ConfigError):
        GlobalConfig.from_dict({"emitter": {"branching": {"s12": 0.5}}})


def test_unstable_geometry_validated():
    with pytest.raises(ConfigError) as err:
        GlobalConfig.from_dict({"cavity": {"length_mm": 25.0}})
    assert "length_mm" in str(err.value)


def test_drive_builders():
    cfg = GlobalConfig.from_dict({"drive": {"rabi_mhz": 14.2,
                                            "rabi2_mhz": 16.8}})
    drive = cfg.build_drive(zeeman_split=2 * math.pi * 7.1044e6)
    assert len(drive.components) == 2
    assert drive.rabi_total == pytest.approx(
        2 * math.pi * math.hypot(14.2, 16.8) * 1e6, rel=1e-12)
    mono = GlobalConfig.from_dict({}).build_drive()
    assert len(mono.components) == 1


def test_train_windows():
    cfg = GlobalConfig.from_dict({})
    windows = cfg.train_windows()
    assert len(windows) == 15
    assert windows[0] == (0.0, 200.0)
    assert windows[1][0] == 260.0

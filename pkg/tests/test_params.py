import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repchain.params import (FIG4, FIG8, PRESETS, SEC2C, ChainConfig, ConfigError, SystemParams, binary_entropy,
                             bb84_rate, db_to_linear, linear_to_db, load_config, solve_q_threshold)


def test_db_examples():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(10.0) == pytest.approx(0.1, rel=1e-15)
    assert db_to_linear(1.0) == pytest.approx(0.7943282347, abs=1e-10)


@given(st.floats(0, 100), st.floats(0, 100))
def test_db_additivity(a, b):
    assert db_to_linear(a + b) == pytest.approx(db_to_linear(a) * db_to_linear(b), rel=1e-12)


@given(st.floats(0, 200))
def test_db_round_trip(x):
    assert linear_to_db(db_to_linear(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


def test_binary_entropy_examples():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0


def test_binary_entropy_symmetric():
    xs = np.random.default_rng(1).uniform(0, 1, 1000)
    for x in xs:
        assert abs(binary_entropy(x) - binary_entropy(1 - x)) < 1e-14


def test_q_threshold_defining_property():
    q = solve_q_threshold()
    assert abs(binary_entropy(q) - 0.5) < 1e-12
    assert solve_q_threshold() == q
    assert bb84_rate(q) == pytest.approx(0.0, abs=1e-12)
    assert bb84_rate(0.2) == 0.0


def test_chain_config_transmittances():
    c = ChainConfig(100.0, 4)
    assert c.elementary_length_km == 25.0
    assert c.half_link_transmittance(0.2) == pytest.approx(10 ** (-0.2 * 12.5 / 10))
    assert c.transmittance(0.2) == pytest.approx(0.01)
    assert c.levels == 3
    assert ChainConfig(10.0, 3).levels is None
    assert ChainConfig(10.0, 1).levels == 1


@pytest.mark.parametrize("field,value", [
    ("eta_e", 0.0), ("eta_r", 1.2), ("p_dark_d", -1e-3), ("p_dark_e", 1.0), ("alpha_db_per_km", 0.0),
    ("m_modes", 0), ("m_modes", 2.5), ("t_q_seconds", -1.0), ("p1", 1.5), ("lambda_m", 0.0),
])
def test_rejects_out_of_range(field, value):
    with pytest.raises(ConfigError, match=field):
        FIG4.replace(**{field: value})


def test_rejects_overfull_source():
    with pytest.raises(ConfigError, match="p1 \\+ p2"):
        FIG4.replace(p1=0.9, p2=0.2)


def test_chain_config_rejects():
    with pytest.raises(ConfigError):
        ChainConfig(-1.0, 2)
    with pytest.raises(ConfigError):
        ChainConfig(10.0, 0)


def test_presets():
    assert FIG4.lambda_m_db == pytest.approx(1.0)
    assert (FIG4.m_modes, FIG4.t_q_seconds, FIG4.alpha_db_per_km) == (1000, 50e-9, 0.15)
    assert SEC2C.p_dark_d == 0 and SEC2C.p_dark_e == 3e-5
    assert FIG8.p_dark_r == 1e-6 and FIG8.p1 == 0.9
    assert set(PRESETS) == {"fig4", "fig8", "sec2c"}


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(FIG4.to_dict()))
    assert load_config(path) == FIG4


def test_load_config_accepts_db(tmp_path):
    data = FIG4.to_dict()
    del data["lambda_m"]
    data["lambda_m_db"] = 1.0
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    assert load_config(path).lambda_m == pytest.approx(FIG4.lambda_m, rel=1e-15)


@pytest.mark.parametrize("mutate,msg", [
    (lambda d: d.update(bogus=1), "unknown"),
    (lambda d: d.pop("eta_e"), "missing"),
    (lambda d: d.update(eta_e="high"), "number"),
    (lambda d: d.update(lambda_m_db=1.0), "either"),
])
def test_load_config_errors(tmp_path, mutate, msg):
    data = FIG4.to_dict()
    mutate(data)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match=msg):
        load_config(path)


def test_load_config_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(arr)


def test_q_threshold_reference_value():
    assert round(solve_q_threshold(), 4) == 0.1104


def test_reference_threshold_residual():
    assert abs(binary_entropy(0.1104) - 0.5) < 5e-4

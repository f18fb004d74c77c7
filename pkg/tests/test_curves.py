import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repchain.curves import CurveSet, RateCurve, dumps_json, fmt, parse_header, table_csv
from repchain.params import FIG4, FIG8, ConfigError


def test_rate_curve_validation():
    RateCurve([0, 1, 2], [1, 2, 3], "a", FIG4)
    with pytest.raises(ValueError):
        RateCurve([0, 2, 1], [1, 2, 3], "a", FIG4)
    with pytest.raises(ValueError):
        RateCurve([0, 1], [1, 2, 3], "a", FIG4)
    with pytest.raises(ValueError):
        RateCurve([0, 0], [1, 2], "a", FIG4)


def test_curve_set_validation():
    a = RateCurve([0, 1], [1, 2], "a", FIG4)
    with pytest.raises(ValueError):
        CurveSet("x", (a, RateCurve([0, 2], [1, 2], "b", FIG4)), FIG4)
    with pytest.raises(ValueError):
        CurveSet("x", (a, a), FIG4)
    with pytest.raises(ValueError):
        CurveSet("x", (), FIG4)


@pytest.mark.parametrize("params", [FIG4, FIG8.replace(p2=0.01)])
def test_header_round_trip(params):
    cs = CurveSet.from_columns("length_km", [0.0, 5.0], {"R": [1.0, math.inf]}, params,
                               {"l_max_km": {"1": 401.3}, "unbounded": []})
    text = cs.to_csv()
    back, meta = parse_header(text)
    assert back == params
    assert meta == {"l_max_km": {"1": 401.3}, "unbounded": []}
    assert text.splitlines()[-1] == "5,inf"


def test_parse_header_requires_params():
    with pytest.raises(ConfigError):
        parse_header("# repchain 0.1.0\nx,y\n")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_floats(v):
    assert float(fmt(v)) == v


def test_fmt_special_values():
    assert (fmt(math.nan), fmt(math.inf), fmt(-math.inf)) == ("nan", "inf", "-inf")
    assert fmt(np.int64(3)) == "3" and fmt(True) == "true"


def test_json_handles_numpy_and_nonfinite():
    payload = json.loads(dumps_json({"a": np.arange(3), "b": np.float64(math.inf), "c": (1.5,)}))
    assert payload == {"a": [0, 1, 2], "b": "inf", "c": [1.5]}


def test_table_csv():
    text = table_csv({"n": [8, 2], "p": [0.1, 0.2]}, FIG8, {"rule": "10km"})
    assert text.splitlines()[-3:] == ["n,p", "8,0.10000000000000001", "2,0.20000000000000001"]
    with pytest.raises(ValueError):
        table_csv({"n": [1], "p": [0.1, 0.2]}, FIG8)

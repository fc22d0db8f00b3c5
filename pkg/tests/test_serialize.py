import json
import math
from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from bertrand_lab.serialize import canonical_json, csv_text, format_float


def test_float_format_is_17_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"
    assert format_float(math.inf) == "inf"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_canonical_json_sorted_and_parseable():
    text = canonical_json({"b": [1, 2.5, None], "a": {"z": True, "y": Fraction(3, 2)}, "c": math.inf})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": {"y": "3/2", "z": True}, "b": [1, 2.5, None], "c": "inf"}
    assert canonical_json({"a": 1}) == canonical_json({"a": 1})


def test_csv_text():
    out = csv_text(("x", "y", "z"), [(0.1, None, "closed"), (1, True, 2.0)])
    assert out == "x,y,z\n0.10000000000000001,,closed\n1,true,2\n"

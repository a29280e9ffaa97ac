from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from mibgap import formats
from mibgap.formats import FormatError
from mibgap.generators import random_system
from mibgap.mpta import odd_even
from mibgap.semilinear import LinearSet
from mibgap.system import Assignment

INST = Path(__file__).resolve().parents[1] / "instances"


@pytest.mark.parametrize("path", sorted(INST.glob("*.json")), ids=lambda p: p.name)
def test_instances_byte_stable(path):
    text = path.read_text()
    assert formats.dumps(formats.loads(text)) == text


@pytest.mark.parametrize("name", ["trivial_sat.json", "trivial_unsat.json", "strip_2d.json",
                                  "doubleexp_n2.json", "ledger_reference.json"])
def test_system_round_trip(name):
    doc = formats.load(INST / name)
    s = formats.system_from_json(doc)
    assert formats.system_from_json(formats.loads(formats.dumps(formats.system_to_json(s)))) == s


@given(st.integers(0, 10 ** 6))
def test_random_system_round_trip(seed):
    s = random_system(seed)
    text = formats.dumps(formats.system_to_json(s))
    assert formats.system_from_json(formats.loads(text)) == s
    assert formats.dumps(formats.loads(text)) == text


def test_number_literals_rejected():
    with pytest.raises(FormatError):
        formats.loads('{"m": 1}')
    with pytest.raises(FormatError):
        formats.loads('{"m": 0.5}')
    with pytest.raises(FormatError):
        formats.loads("{not json")


def test_rationals():
    assert formats.rat("-3/4") == F(-3, 4)
    assert formats.integer("12") == 12
    with pytest.raises(FormatError):
        formats.integer("1/2")
    with pytest.raises(FormatError):
        formats.rat("x")


def test_schema_errors():
    good = formats.load(INST / "trivial_sat.json")
    for mutate in (lambda d: d.update(kind="mpta"),
                   lambda d: d.pop("rows"),
                   lambda d: d.update(m="2"),
                   lambda d: d.update(form="weird"),
                   lambda d: d["rows"][0].update(b=["1", "2"])):
        doc = formats.loads(formats.dumps(good))
        mutate(doc)
        with pytest.raises(FormatError):
            formats.system_from_json(doc)


def test_assignment_round_trip():
    a = Assignment((2, 5), (F(1), F(7, 16), F(1, 8)))
    assert formats.assignment_from_json(formats.loads(formats.dumps(formats.assignment_to_json(a)))) == a
    with pytest.raises(FormatError):
        formats.assignment_from_json({"x": ["1/2"], "y": []})


def test_pieces_round_trip():
    ps = [LinearSet((1, 2, 3, 4, 5, 6), ((1, 0, 0, 0, 0, 0),))]
    doc = formats.loads(formats.dumps(formats.pieces_to_json(ps, 2, "exact")))
    back, d, tag = formats.pieces_from_json(doc)
    assert back == ps and d == 2 and tag == "exact"
    doc["pieces"][0]["base"] = ["1"]
    with pytest.raises(FormatError):
        formats.pieces_from_json(doc)


def test_mpta_round_trip():
    a = odd_even()
    doc = formats.loads(formats.dumps(formats.mpta_to_json(a)))
    assert formats.mpta_from_json(doc) == a
    doc["edges"][0]["guard"] = [["w", ">=", "1"]]
    with pytest.raises(FormatError):
        formats.mpta_from_json(doc)


def test_odd_even_file_matches_builder():
    assert formats.mpta_from_json(formats.load(INST / "odd_even_mpta.json")) == odd_even()

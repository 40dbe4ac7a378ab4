import json
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpinstruments import examples
from cpinstruments.algebra import AlgebraSpec
from cpinstruments.errors import ParseError, ShapeError
from cpinstruments.generators import random_kraus_instrument
from cpinstruments.instrument import instrument_difference, zero_equivalence
from cpinstruments.serialization import (dumps, parse_certificate, parse_instrument,
                                         serialize_instrument)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture(name):
    with open(os.path.join(FIXTURES, name), "rb") as fh:
        return fh.read()


def test_bundled_lueders_fixture():
    # [DERIVED] Kraus operators sqrt(mu(i)) written out by hand for t = 1/4
    ins = parse_instrument(fixture("luders-t.json"))
    assert instrument_difference(ins, examples.luders_t(0.25)) < 1e-15


def test_empty_maps_give_zero_instrument():
    ins = parse_instrument(fixture("zero.json"))
    assert ins.n == 3 and ins.spec == AlgebraSpec([1, 2])
    assert zero_equivalence(ins) == (True, True, True)


def test_malformed_complex_scalar():
    with pytest.raises(ParseError) as info:
        parse_instrument(fixture("bad-scalar.json"))
    assert info.value.path == "maps[0].choi[0][0][0]"


def test_wrong_kraus_shape():
    with pytest.raises(ShapeError):
        parse_instrument(fixture("bad-shape.json"))


def test_json_syntax_error_has_line():
    with pytest.raises(ParseError) as info:
        parse_instrument(fixture("bad-json.json"))
    assert info.value.line == 4


@pytest.mark.parametrize("doc, path", [
    ({"algebra": {"blocks": [1]}, "output_dim": 1, "outcomes": 1, "maps": []}, ""),
    ({"version": 2, "algebra": {"blocks": [1]}, "output_dim": 1, "outcomes": 1, "maps": []}, "version"),
    ({"version": 1, "algebra": {"blocks": []}, "output_dim": 1, "outcomes": 1, "maps": []}, "algebra.blocks"),
    ({"version": 1, "algebra": {"blocks": [1]}, "output_dim": 1, "outcomes": 0, "maps": []}, "outcomes"),
    ({"version": 1, "algebra": {"blocks": [1]}, "output_dim": 1, "outcomes": 1,
      "maps": [{"outcome": 1, "form": "stinespring"}]}, "maps[0].form"),
])
def test_field_errors_carry_paths(doc, path):
    with pytest.raises(ParseError) as info:
        parse_instrument(json.dumps(doc))
    assert info.value.path == path


def test_outcome_out_of_range_is_a_shape_error():
    doc = {"version": 1, "algebra": {"blocks": [1]}, "output_dim": 1, "outcomes": 1,
           "maps": [{"outcome": 2, "form": "choi", "choi": [[[[1.0, 0.0]]]]}]}
    with pytest.raises(ShapeError):
        parse_instrument(json.dumps(doc))


@pytest.mark.parametrize("name", sorted(examples.EXAMPLES))
def test_roundtrip_is_identity(name):
    text = serialize_instrument(examples.example(name))
    again = serialize_instrument(parse_instrument(text))
    assert again == text


@given(st.integers(0, 2**32 - 1))
def test_roundtrip_preserves_bits(seed):
    rng = np.random.default_rng(seed)
    ins = random_kraus_instrument(rng, AlgebraSpec([2, 1]), 2, 2)
    back = parse_instrument(serialize_instrument(ins))
    for a, b in zip(ins.maps, back.maps):
        for x, y in zip(a.choi_blocks, b.choi_blocks):
            assert np.array_equal(x, y)


def test_float_formatting():
    assert dumps([0.1, 1.0, 1e-20, 3]) == "[0.10000000000000001, 1.0, 9.9999999999999995e-21, 3]\n"
    with pytest.raises(ValueError):
        dumps([float("nan")])


def test_certificate_parse_errors():
    with pytest.raises(ParseError):
        parse_certificate('{"version": 1, "kind": "bogus", "payload": {}}')
    with pytest.raises(ParseError):
        parse_certificate('{"version": 1, "kind": "rn"}')

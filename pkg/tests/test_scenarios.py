from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twistedk.deligne import check_matrix_cocycle
from twistedk.expr import Var, diff, evaluate
from twistedk.fileformat import ScenarioFormatError, dumps, loads, to_document, validate
from twistedk.scenarios import (
    Su2Scenario,
    TripleParams,
    build_su2,
    build_synthetic_triple,
    smoothstep,
    smoothstep_coefficients,
    su2_cross_term,
)


def test_smoothstep_endpoints_and_flatness():
    s = smoothstep(Var("t"))
    t = np.array([-0.5, 0.0, 0.5, 1.0, 1.5])
    np.testing.assert_allclose(evaluate(s, {"t": t}), [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-14)
    e = s
    for _ in range(4):
        e = diff(e, "t")
        np.testing.assert_allclose(evaluate(e, {"t": np.array([0.0, 1.0])}), [0.0, 0.0], atol=1e-9)
    assert smoothstep_coefficients(1) == [0, 0, 3, -2]


@given(st.floats(0.0, 1.0))
def test_smoothstep_is_monotone(t):
    assert float(evaluate(diff(smoothstep(Var("t")), "t"), {"t": t})) >= -1e-12


@pytest.mark.parametrize("k,j", [(3, Fraction(1)), (2, Fraction(1, 2)), (1, Fraction(0)), (4, Fraction(1, 3))])
def test_su2_rejects_inadmissible(k, j):
    with pytest.raises(ValueError):
        Su2Scenario(k, j)


def test_cross_term_depends_on_overlap():
    sep = su2_cross_term(Su2Scenario(3))
    gen = su2_cross_term(Su2Scenario(3, separate=False))
    assert sep == pytest.approx(0.0, abs=1e-14)
    assert 0.0 < gen < 1.0


def _fixpoint(scn):
    text = dumps(to_document(scn))
    again = loads(text)
    return text, dumps(to_document(again)), again


@pytest.mark.parametrize("s", [Su2Scenario(3), Su2Scenario(5, Fraction(3, 2), n=2, separate=False), Su2Scenario(2, n=0)])
def test_su2_roundtrip_fixpoint(s):
    text, again_text, _ = _fixpoint(build_su2(s))
    assert text == again_text


def test_triple_roundtrip_fixpoint():
    text, again_text, again = _fixpoint(build_synthetic_triple(TripleParams(matrix_rank=0)))
    assert text == again_text
    assert again.homotopy is not None and again.cut_bundles and again.pu_alt is not None


def test_triple_with_matrix_roundtrip():
    scn = build_synthetic_triple(TripleParams(matrix_rank=2))
    text, again_text, again = _fixpoint(scn)
    assert text == again_text
    assert check_matrix_cocycle(again.matrix, deligne=again.deligne).passed


def _doc():
    return to_document(build_su2(Su2Scenario(3)))


def test_schema_rejects_missing_section():
    doc = _doc()
    del doc["deligne"]
    with pytest.raises(ScenarioFormatError):
        validate(doc)


def test_schema_rejects_wrong_version():
    doc = _doc()
    doc["format"] = 2
    with pytest.raises(ScenarioFormatError):
        loads(json.dumps(doc))


def test_bad_expression_is_a_format_error():
    doc = _doc()
    doc["partition"][0] = "1 - ramp(theta"
    with pytest.raises(ScenarioFormatError):
        loads(json.dumps(doc))


def test_unknown_variable_is_a_format_error():
    doc = _doc()
    doc["partition"][0] = "1 - q"
    with pytest.raises(ScenarioFormatError):
        loads(json.dumps(doc))


def test_unknown_chart_reference():
    doc = _doc()
    doc["deligne"]["B"][0]["chart"] = 7
    with pytest.raises(ScenarioFormatError):
        loads(json.dumps(doc))


def test_invalid_json():
    with pytest.raises(ScenarioFormatError):
        loads("{not json")

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import forms
from twistedk.atlas import (
    Atlas,
    CechCochain,
    MissingOverlapError,
    Overlap,
    PartitionOfUnity,
    cech_delta,
    check_partition,
    global_integrate,
    max_residual,
)
from twistedk.exterior import Chart, Form
from twistedk.expr import parse, to_string
from twistedk.report import CheckFailure
from twistedk.scenarios import triple_atlas, triple_partition

ATLAS = triple_atlas()


def test_triple_transitions_are_consistent():
    assert ATLAS.check_transitions().passed


def test_triple_partition_passes():
    rep = check_partition(ATLAS, triple_partition(ATLAS))
    assert rep.passed, rep.residuals


def test_partition_faults_are_detected():
    pu = triple_partition(ATLAS)
    shifted = PartitionOfUnity({**pu.functions, 0: parse("0.01") + pu.functions[0]})
    assert not check_partition(ATLAS, shifted).passed
    negative = PartitionOfUnity({0: parse("1.5"), 1: parse("-0.5"), 2: parse("0")})
    rep = check_partition(ATLAS, negative)
    assert rep.residuals["negativity"] > 0.1


@st.composite
def cochains0(draw):
    return CechCochain(0, {(i,): draw(forms(chart, max_terms=2)) for i, chart in ATLAS.charts.items()})


@st.composite
def cochains1(draw):
    return CechCochain(1, {(i, j): draw(forms(ATLAS.charts[j], max_terms=2)) for i, j in ATLAS.pairs()})


@settings(max_examples=25, deadline=None)
@given(cochains0())
def test_delta_squared_on_zero_cochains(c):
    dd = cech_delta(ATLAS, cech_delta(ATLAS, c))
    assert max(max_residual(ATLAS, dd.values).values()) < 1e-10


@settings(max_examples=25, deadline=None)
@given(cochains1())
def test_delta_of_one_cochain_lives_on_triple(c):
    out = cech_delta(ATLAS, c)
    assert set(out.values) == {(0, 1, 2)}


def test_cochain_validation():
    with pytest.raises(ValueError):
        CechCochain(0, {(0,): Form.zero(ATLAS.charts[1])})
    with pytest.raises(ValueError):
        CechCochain(1, {(1, 0): Form.zero(ATLAS.charts[0])})


def _interval_atlas():
    c0 = Chart(0, ("x",), ((0.0, 2.0),))
    c1 = Chart(1, ("s",), ((0.0, 2.0),))
    # s = x - 1 on the overlap 1 < x < 2
    ov = Overlap(0, 1, ((1.0, 2.0),), ((0.0, 1.0),), (parse("s + 1"),), (parse("x - 1"),))
    return Atlas({0: c0, 1: c1}, {(0, 1): ov})


def test_global_integrate_length_of_glued_interval():
    atlas = _interval_atlas()
    pu = PartitionOfUnity({0: parse("1 - ramp(x - 1)"), 1: parse("ramp(s)")})
    vol = {0: atlas.charts[0].d("x"), 1: atlas.charts[1].d("s")}
    assert check_partition(atlas, pu).passed
    assert global_integrate(atlas, vol, pu) == pytest.approx(3.0, abs=1e-12)


def test_global_integrate_rejects_disagreeing_representatives():
    atlas = _interval_atlas()
    pu = PartitionOfUnity({0: parse("1 - ramp(x - 1)"), 1: parse("ramp(s)")})
    vol = {0: atlas.charts[0].d("x"), 1: atlas.charts[1].d("s") * 2.0}
    with pytest.raises(CheckFailure):
        global_integrate(atlas, vol, pu)


def test_missing_overlap():
    atlas = _interval_atlas()
    with pytest.raises(MissingOverlapError):
        Atlas(atlas.charts, atlas.overlaps, ((0, 1, 2),))
    with pytest.raises(MissingOverlapError):
        atlas.overlap(0, 5)


def test_map_points_roundtrip():
    rng = np.random.default_rng(0)
    pts = ATLAS.sample((0, 2), 2, 50, rng)
    back = ATLAS.map_points(ATLAS.map_points(pts, 2, 0), 0, 2)
    assert np.max(np.abs(back - pts)) < 1e-12
    assert ATLAS.in_region(pts, (0, 2), 2).all()


def test_extended_atlas_appends_coordinate():
    ext = ATLAS.extended("t", (0.0, 1.0))
    assert all(c.coords[-1] == "t" for c in ext.charts.values())
    assert to_string(ext.transition(0, 1)[-1]) == "t"

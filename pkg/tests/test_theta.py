from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from twistedk.exterior import Form
from twistedk.report import CheckFailure
from twistedk.scenarios import (
    Su2Scenario,
    TripleParams,
    build_su2,
    build_synthetic_triple,
    perturb_bundle,
    su2_closed_form_theta0,
    su2_cross_term,
)
from twistedk.theta import (
    Cycle,
    DifferentialKCocycle,
    build_theta,
    chern_character_of_cocycle,
    correction_cut,
    correction_homotopy,
    correction_partition,
    defect_residual,
    eta_delta_residual,
    eta_zero_integral,
    globality_residual,
    mod1_distance,
    slice_cocycle,
)
from twistedk.expr import parse


@pytest.fixture(scope="module")
def triple():
    scn = build_synthetic_triple(TripleParams(matrix_rank=0))
    return scn, scn.twist()


def test_theta_glues_on_triple(triple):
    scn, tw = triple
    th = build_theta(scn.cocycle, tw, scn.pu)
    assert th.overlap_residual < 1e-8
    assert th.closure_residual < 1e-8
    assert max(eta_delta_residual(scn.cocycle, th.eta).values()) < 1e-8
    assert all(f.parity in ("odd", None) for f in th.theta.values())


def test_strict_theta_rejects_broken_cocycle(triple):
    scn, tw = triple
    bad = perturb_bundle(scn, (0, 1))
    with pytest.raises(CheckFailure):
        build_theta(bad.cocycle, tw, scn.pu)


def test_partition_correction(triple):
    scn, tw = triple
    a = build_theta(scn.cocycle, tw, scn.pu)
    b = build_theta(scn.cocycle, tw, scn.pu_alt)
    eta = correction_partition(scn.cocycle, tw, scn.pu, scn.pu_alt)
    assert defect_residual(scn.atlas, a.theta, b.theta, eta, tw) < 1e-8
    assert globality_residual(scn.atlas, eta) < 1e-9
    # the difference is not trivially zero
    rng = np.random.default_rng(0)
    pts = scn.atlas.sample((0, 1), 1, 50, rng)
    assert (a.theta[1] - b.theta[1]).max_abs(pts) > 1e-3


def test_cut_correction(triple):
    scn, tw = triple
    cc = correction_cut(scn.cocycle, scn.cut_bundles, tw, scn.pu)
    a = build_theta(scn.cocycle, tw, scn.pu)
    b = build_theta(cc.shifted, tw, scn.pu)
    assert cc.shift_residual < 1e-8
    assert defect_residual(scn.atlas, a.theta, b.theta, cc.eta, tw) < 1e-8


def test_homotopy_correction(triple):
    scn, tw = triple
    h = scn.homotopy
    family = h.family(scn.deligne)
    hc = correction_homotopy(family, tw, scn.pu, h.param, h.t0, h.t1)
    a = build_theta(slice_cocycle(family, scn.deligne, h.param, h.t0), tw, scn.pu)
    b = build_theta(slice_cocycle(family, scn.deligne, h.param, h.t1), tw, scn.pu)
    assert defect_residual(scn.atlas, a.theta, b.theta, hc.eta, tw) < 1e-7


def test_global_correction_form_shifts_theta(triple):
    scn, tw = triple
    base = build_theta(scn.cocycle, tw, scn.pu)
    g = Form.from_names(scn.atlas.charts[0], {"": "x*y", "y^z": "sin(x)"})
    eta = {i: scn.atlas.transport(g, i) for i in scn.atlas.charts}
    th = chern_character_of_cocycle(DifferentialKCocycle(scn.cocycle, tw, scn.pu, eta))
    assert defect_residual(scn.atlas, th.theta, base.theta, eta, tw) < 1e-10


def test_non_global_correction_rejected(triple):
    scn, tw = triple
    eta = {i: Form.scalar(c, parse(c.coords[0])) for i, c in scn.atlas.charts.items()}
    with pytest.raises(CheckFailure):
        chern_character_of_cocycle(DifferentialKCocycle(scn.cocycle, tw, scn.pu, eta))


@pytest.mark.parametrize("k,two_j", [(3, 0), (4, 1), (5, 3)])
def test_su2_closed_form_and_eta0(k, two_j):
    s = Su2Scenario(k, Fraction(two_j, 2))
    scn = build_su2(s)
    tw = scn.twist()
    th = build_theta(scn.cocycle, tw, scn.pu)
    pts = scn.atlas.sample((0,), 0, 100, np.random.default_rng(1))
    assert (th.theta[0] - su2_closed_form_theta0(scn)).max_abs(pts) < 1e-9
    res = eta_zero_integral(th, tw, scn.pu, scn.cycles)
    assert mod1_distance(res.value, -(two_j + 1) / k) < 1e-6


def test_su2_general_position_decomposition():
    s = Su2Scenario(4, Fraction(1, 2), n=2, separate=False)
    scn = build_su2(s)
    tw = scn.twist()
    res = eta_zero_integral(build_theta(scn.cocycle, tw, scn.pu), tw, scn.pu, scn.cycles)
    c = su2_cross_term(s)
    assert 0.0 < c < 1.0
    assert res.theta3_integral == pytest.approx(s.m + s.n * s.k * c, abs=1e-6)


def test_su2_without_bundle_is_trivial():
    scn = build_su2(Su2Scenario(3, n=0))
    tw = scn.twist()
    res = eta_zero_integral(build_theta(scn.cocycle, tw, scn.pu), tw, scn.pu, scn.cycles)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_eta0_needs_level(triple):
    scn, tw = triple
    th = build_theta(scn.cocycle, tw, scn.pu)
    with pytest.raises(ValueError):
        eta_zero_integral(th, tw, scn.pu)


def test_eta0_refuses_inexact_theta1():
    scn = build_su2(Su2Scenario(3))
    tw = scn.twist()
    th = build_theta(scn.cocycle, tw, scn.pu)
    c0 = scn.atlas.charts[0]
    th.theta[0] = th.theta[0] + c0.d("phi")  # closed, not exact around the phi circle
    cycle = Cycle(0, (parse("1.3"), parse("1"), parse("6.283185307179586*s")))
    with pytest.raises(CheckFailure):
        eta_zero_integral(th, tw, scn.pu, [cycle])


def test_mod1_distance():
    assert mod1_distance(0.99, 0.01) == pytest.approx(0.02)
    assert mod1_distance(-1 / 3, 2 / 3) == pytest.approx(0.0)

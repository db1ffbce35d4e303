from __future__ import annotations

import math

import numpy as np
import pytest

from strategies import sample_points
from twistedk.chern import (
    BundleCocycle,
    ConnectionBundle,
    MissingBundleError,
    VirtualBundle,
    a_hat_series,
    bianchi_residual,
    check_twisted_cocycle,
    chern_character,
    chern_character_bundle,
    curvature,
    det_cocycle_check,
    first_chern_form,
    levi_civita_s2,
    monopole,
    todd_series,
    trivialize_ranks,
    trivialized_det_check,
)
from twistedk.exterior import Chart, Form, exp_nilpotent, integrate_chart, wedge
from twistedk.scenarios import build_synthetic_triple, perturb_bundle, TripleParams

S2 = Chart(0, ("u", "phi"), ((0.0, math.pi), (0.0, 2.0 * math.pi)))
C3 = Chart(0, ("x", "y", "z"), ((-1.0, 1.0),) * 3)
PTS = sample_points(C3)


def _nonabelian():
    f = lambda names: Form.from_names(C3, names)
    A = ((f({"x": "y"}), f({"z": "0.3*sin(x)"})), (f({"y": "0.2*z"}), f({"x": "cos(y)", "z": "x"})))
    return ConnectionBundle(C3, A)


def test_line_bundle_character_is_exponential():
    L = ConnectionBundle.line(Form.from_names(C3, {"x": "y*z", "y": "sin(x)"}))
    c1 = first_chern_form(VirtualBundle.of(L))
    assert (chern_character_bundle(L) - exp_nilpotent(c1)).max_abs(PTS) < 1e-13


def test_character_is_additive_and_multiplicative():
    E = VirtualBundle.of(_nonabelian())
    L = Form.from_names(C3, {"z": "x*y"})
    lineb = VirtualBundle.of(ConnectionBundle.line(L))
    assert (chern_character(E + lineb) - chern_character(E) - chern_character(lineb)).max_abs(PTS) < 1e-13
    assert (chern_character(E.tensor_line(L)) - wedge(chern_character(E), chern_character(lineb))).max_abs(PTS) < 1e-12
    assert chern_character(E - E).max_abs(PTS) < 1e-14


def test_bianchi():
    assert bianchi_residual(_nonabelian(), PTS) < 1e-12


def test_curvature_of_nonabelian_has_quadratic_term():
    b = _nonabelian()
    F = curvature(b)
    assert not F[0][1].is_zero()


@pytest.mark.parametrize("m", range(-3, 4))
def test_riemann_roch_on_sphere(m):
    ch = chern_character_bundle(monopole(S2, "u", "phi", m))
    td = todd_series(curvature(levi_civita_s2(S2, "u", "phi")), S2)
    assert integrate_chart(wedge(ch, td).part(2)) == pytest.approx(m + 1, abs=1e-9)


def test_tangent_sphere_degree_and_ahat():
    T = levi_civita_s2(S2, "u", "phi")
    assert integrate_chart(first_chern_form(VirtualBundle.of(T))) == pytest.approx(2.0, abs=1e-12)
    # A-hat has no degree-2 part
    assert a_hat_series(curvature(T), S2).part(2).is_zero()


def test_triple_cocycle_relations_hold():
    scn = build_synthetic_triple(TripleParams(matrix_rank=0))
    tw = scn.twist()
    assert check_twisted_cocycle(scn.cocycle, tw).passed
    assert det_cocycle_check(scn.cocycle).passed
    assert trivialized_det_check(scn.cocycle).passed
    n = trivialize_ranks(scn.cocycle)
    for i, j in scn.atlas.pairs():
        assert n[i] - n[j] == scn.cocycle.rank(i, j)


@pytest.mark.parametrize("pair", [(0, 1), (1, 2), (0, 2)])
def test_injected_bundle_fault_is_detected(pair):
    scn = perturb_bundle(build_synthetic_triple(TripleParams(matrix_rank=0)), pair)
    assert check_twisted_cocycle(scn.cocycle).residuals["forms"] > 1e-3


def test_rank_fault_is_detected():
    scn = build_synthetic_triple(TripleParams(matrix_rank=0))
    E = dict(scn.cocycle.E)
    c2 = scn.atlas.charts[2]
    E[(0, 2)] = E[(0, 2)] + VirtualBundle.of(ConnectionBundle.trivial(c2))
    bad = BundleCocycle(scn.deligne, E, scn.cocycle.labels)
    rep = check_twisted_cocycle(bad)
    assert rep.residuals["ranks"] == 1.0
    assert not rep.passed


def test_incomplete_cocycle():
    scn = build_synthetic_triple(TripleParams(matrix_rank=0))
    E = dict(scn.cocycle.E)
    del E[(1, 2)]
    with pytest.raises(MissingBundleError):
        check_twisted_cocycle(BundleCocycle(scn.deligne, E, scn.cocycle.labels))


def test_omega_bar_is_antisymmetric():
    scn = build_synthetic_triple(TripleParams(matrix_rank=0))
    c = scn.cocycle
    pts = scn.atlas.sample((0, 2), 2, 40, np.random.default_rng(0))
    flipped = scn.atlas.transport(c.omega_bar(2, 0), 2)
    assert (c.omega_bar(0, 2) + flipped).max_abs(pts) < 1e-12

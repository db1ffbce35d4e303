from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from twistedk.atlas import Atlas, Overlap, global_integrate
from twistedk.deligne import (
    DeligneCocycle,
    MatrixCocycle,
    apply_coboundary,
    check_deligne,
    check_matrix_cocycle,
    compare_twists,
    curvature_H,
    extract_sigma,
)
from twistedk.exterior import Chart, Form
from twistedk.expr import Const, Var
from twistedk.report import CheckFailure
from twistedk.scenarios import (
    Su2Scenario,
    build_su2,
    perturb_matrix,
    triple_a,
    triple_atlas,
    triple_deligne,
    triple_h,
    triple_matrix_cocycle,
)

ATLAS = triple_atlas()


def test_trivial_cocycle_passes():
    rep = check_deligne(DeligneCocycle.trivial(ATLAS))
    assert rep.passed
    assert rep.worst == 0.0


def test_coboundary_passes_and_keeps_curvature():
    base = triple_deligne(ATLAS, coboundary=False)
    cob = apply_coboundary(base, triple_h(), triple_a(ATLAS))
    assert check_deligne(cob).passed
    assert compare_twists(curvature_H(base), curvature_H(cob)) < 1e-10


def test_perturbed_b_fails_condition3():
    c = triple_deligne(ATLAS)
    B = dict(c.B)
    B[1] = B[1] + Form.from_names(ATLAS.charts[1], {"x1^y1": "0.01*z1"})
    rep = check_deligne(DeligneCocycle(ATLAS, c.alpha, c.A, B))
    assert not rep.passed
    assert rep.residuals["condition3"] > 1e-3
    with pytest.raises(CheckFailure):
        curvature_H(DeligneCocycle(ATLAS, c.alpha, c.A, B))


def test_perturbed_a_fails_condition2():
    c = triple_deligne(ATLAS)
    A = dict(c.A)
    A[(0, 2)] = A[(0, 2)] + ATLAS.charts[2].d("a") * 0.01
    rep = check_deligne(DeligneCocycle(ATLAS, c.alpha, A, c.B))
    assert rep.residuals["condition2"] > 1e-3


def _four_charts():
    charts = {i: Chart(i, (f"x{i}",), ((0.0, 1.0),)) for i in range(4)}
    overlaps = {
        (i, j): Overlap(i, j, (None,), (None,), (Var(f"x{j}"),), (Var(f"x{i}"),))
        for i, j in itertools.combinations(range(4), 2)
    }
    return Atlas(charts, overlaps, tuple(itertools.combinations(range(4), 3)))


def test_condition1_detects_non_integral_sigma():
    atlas = _four_charts()
    good = DeligneCocycle(atlas, {(0, 1, 2): Const(2 * math.pi)})
    assert check_deligne(good).residuals["condition1"] < 1e-12
    bad = DeligneCocycle(atlas, {(0, 1, 2): Const(0.5)})
    assert check_deligne(bad).residuals["condition1"] == pytest.approx(0.5)


def test_a_must_live_on_last_chart():
    with pytest.raises(ValueError):
        DeligneCocycle(ATLAS, {}, {(0, 1): Form.zero(ATLAS.charts[0])})


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_su2_integral_of_h(k):
    scn = build_su2(Su2Scenario(k))
    tw = scn.twist()
    assert global_integrate(scn.atlas, tw.H, scn.pu) == pytest.approx(k, abs=1e-6)


@pytest.mark.parametrize("rank", [2, 3])
def test_matrix_cocycle_and_fault(rank):
    dl = triple_deligne(ATLAS)
    m = triple_matrix_cocycle(ATLAS, rank, triple_h())
    rep = check_matrix_cocycle(m, deligne=dl)
    assert rep.passed, rep.residuals
    bad = check_matrix_cocycle(perturb_matrix(m, (1, 2)), deligne=dl)
    assert bad.residuals["twisted"] > 1e-4


def test_extracted_sigma_has_unit_modulus():
    m = triple_matrix_cocycle(ATLAS, 2, triple_h())
    pts = ATLAS.sample((0, 1, 2), 2, 30, np.random.default_rng(2))
    assert np.max(np.abs(np.abs(extract_sigma(m, (0, 1, 2), pts)) - 1.0)) < 1e-12


def test_singular_f_raises():
    m = triple_matrix_cocycle(ATLAS, 2, triple_h())
    zero = [[(Const(0.0), Const(0.0))] * 2 for _ in range(2)]
    f = dict(m.f)
    f[(0, 1)] = zero
    with pytest.raises(np.linalg.LinAlgError):
        check_matrix_cocycle(MatrixCocycle(ATLAS, 2, m.g, f))

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings

from strategies import CHART3, CHART4, forms, sample_points
from twistedk.exterior import (
    Chart,
    ChartMismatchError,
    DegreeError,
    Form,
    d,
    d_minus_H,
    exp_nilpotent,
    integrate_chart,
    integrate_curve,
    pullback,
    wedge,
)
from twistedk.expr import Var, parse

PTS3 = sample_points(CHART3)
PTS4 = sample_points(CHART4)


def sign(p: int, q: int) -> int:
    return -1 if (p * q) % 2 else 1


@settings(max_examples=100, deadline=None)
@given(forms())
def test_dd_vanishes(a):
    assert d(d(a)).max_abs(PTS3) < 1e-10


@settings(max_examples=100, deadline=None)
@given(forms(degree=1), forms())
def test_leibniz_degree_one(a, b):
    lhs = d(wedge(a, b))
    rhs = wedge(d(a), b) - wedge(a, d(b))
    assert (lhs - rhs).max_abs(PTS3) < 1e-10


@settings(max_examples=100, deadline=None)
@given(forms(degree=1), forms(degree=2))
def test_graded_commutativity(a, b):
    assert (wedge(a, b) - wedge(b, a) * sign(1, 2)).max_abs(PTS3) < 1e-12


def test_wedge_of_basis_is_antisymmetric():
    dx, dy = CHART3.d("x"), CHART3.d("y")
    assert (wedge(dx, dy) + wedge(dy, dx)).is_zero()
    assert wedge(dx, dx).is_zero()


def test_form_names_roundtrip():
    f = Form.from_names(CHART3, {"": "x", "z^x": "y"})
    assert set(f.to_names()) == {"", "x^z"}
    assert float(np.asarray(f.evaluate(np.array([[0.0, 2.0, 0.0]]))[(0, 2)])[0]) == -2.0


def test_chart_mismatch():
    other = Chart(1, ("x", "y", "z"), CHART3.domain)
    with pytest.raises(ChartMismatchError):
        _ = CHART3.d("x") + other.d("x")


def test_d_minus_h_rejects_non_three_form():
    with pytest.raises(DegreeError):
        d_minus_H(CHART3.d("x"), CHART3.d("y"))


def test_integrate_volume_and_polynomial():
    vol = Form.from_names(CHART3, {"x^y^z": "1"})
    assert integrate_chart(vol) == pytest.approx(8.0, abs=1e-13)
    f = Form.from_names(CHART3, {"x^y^z": "x^2*y^2*z^2"})
    assert integrate_chart(f) == pytest.approx((2 / 3) ** 3, abs=1e-13)


def test_integrate_piecewise_is_exact_with_kink_splitting():
    c = Chart(0, ("x",), ((0.0, 1.0),))
    f = Form.from_names(c, {"x": "ramp(4*x - 1)"})  # 0 below 1/4, linear to 1/2, then 1
    exact = 0.125 + 0.5
    assert integrate_chart(f, quad_points=8) == pytest.approx(exact, abs=1e-14)
    assert abs(integrate_chart(f, quad_points=8, split_kinks=False) - exact) > 1e-6


def test_orientation_flips_sign():
    c = Chart(0, ("x", "y"), ((0.0, 1.0), (0.0, 2.0)), orientation=-1)
    assert integrate_chart(Form.from_names(c, {"x^y": "1"})) == pytest.approx(-2.0)


def test_pullback_commutes_with_d():
    src = Chart(0, ("u", "v"), ((0.5, 1.5), (0.0, 3.0)))
    tgt = CHART3
    a = Form.from_names(tgt, {"x": "y*z", "y^z": "exp(x)", "": "sin(x*y)"})
    transition = [parse("u*cos(v)"), parse("u*sin(v)"), parse("u^2")]
    pts = sample_points(src)
    assert (pullback(d(a), src, transition) - d(pullback(a, src, transition))).max_abs(pts) < 1e-12


def test_exp_nilpotent_matches_series():
    b = Form.from_names(CHART4, {"x^y": "x", "z^w": "y"})
    e = exp_nilpotent(b)
    expected = Form.scalar(CHART4, 1.0) + b + wedge(b, b) * 0.5
    assert (e - expected).max_abs(PTS4) < 1e-14


def test_d_minus_h_squares_to_zero_fixed_case():
    B = Form.from_names(CHART4, {"x^y": "z*w", "y^w": "sin(x)"})
    H = d(B)
    m = Form.from_names(CHART4, {"": "x*y", "z": "exp(w)", "x^y^z": "w"})
    assert d_minus_H(d_minus_H(m, H), H).max_abs(PTS4) < 1e-12


def stokes_box_residual(omega: Form) -> float:
    """Compare the integral of d(omega) over the chart box with the boundary flux."""
    chart = omega.chart
    interior = integrate_chart(d(omega))
    boundary = 0.0
    for k, name in enumerate(chart.coords):
        lo, hi = chart.domain[k]
        rest = [c for c in chart.coords if c != name]
        face = Chart(-1, tuple(rest), tuple(chart.domain[i] for i in range(chart.dim) if i != k))
        for value, outward in ((hi, 1), (lo, -1)):
            transition = [Var(c) if c != name else parse(repr(value)) for c in chart.coords]
            pulled = pullback(omega.part(chart.dim - 1), face, transition)
            boundary += outward * (-1) ** k * integrate_chart(pulled)
    return abs(interior - boundary)


def test_stokes_on_a_box():
    c = Chart(0, ("x", "y", "z"), ((0.0, 1.0), (-0.5, 0.7), (0.2, 1.3)))
    omega = Form.from_names(c, {"y^z": "x^2*sin(y)", "x^z": "exp(y*z)", "x^y": "cos(x+z)*y"})
    assert stokes_box_residual(omega) < 1e-6


def test_line_integral_of_exact_form_is_endpoint_difference():
    f = Form.scalar(CHART3, parse("x*y + z^3"))
    path = [parse("cos(s)"), parse("s^2"), parse("s")]
    val = integrate_curve(d(f), path)
    assert val == pytest.approx(math.cos(1.0) * 1.0 + 1.0 - 0.0, abs=1e-12)

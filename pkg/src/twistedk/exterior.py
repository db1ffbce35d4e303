"""Differential forms with expression coefficients on a single coordinate chart."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .expr import ONE, ZERO, Const, Expr, Var, add, as_expr, diff, evaluate, kinks, mul, neg, substitute

DEFAULT_QUAD_POINTS = 32
_EVAL_CHUNK = 1 << 16


class ChartMismatchError(ValueError):
    pass


class DegreeError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """A coordinate chart with a rectangular parameter domain."""

    id: int
    coords: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]
    orientation: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "domain", tuple((float(a), float(b)) for a, b in self.domain))
        if len(set(self.coords)) != len(self.coords):
            raise ValueError(f"chart {self.id}: coordinate names must be distinct")
        if len(self.domain) != len(self.coords):
            raise ValueError(f"chart {self.id}: domain has wrong dimension")
        for lo, hi in self.domain:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"chart {self.id}: bad interval [{lo}, {hi}]")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def var(self, name: str) -> Expr:
        if name not in self.coords:
            raise KeyError(name)
        return Var(name)

    def d(self, name: str) -> "Form":
        """The coordinate 1-form d(name)."""
        return Form(self, {(self.coords.index(name),): ONE})

    def env(self, points: np.ndarray) -> dict[str, np.ndarray]:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return {c: points[:, k] for k, c in enumerate(self.coords)}

    def extended(self, name: str, interval: tuple[float, float]) -> "Chart":
        return Chart(self.id, self.coords + (name,), self.domain + (tuple(interval),), self.orientation)


def _sort_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``idx`` (0 if an index repeats)."""
    if len(set(idx)) != len(idx):
        return 0, ()
    inversions = sum(1 for a in range(len(idx)) for b in range(a + 1, len(idx)) if idx[a] > idx[b])
    return (-1 if inversions % 2 else 1), tuple(sorted(idx))


class Form:
    """A (possibly inhomogeneous) differential form on a chart.

    ``terms`` maps strictly increasing coordinate-index tuples to coefficient
    expressions.  Degree-0 parts use the empty tuple.  Terms of degree above
    the chart dimension cannot occur.
    """

    __slots__ = ("chart", "terms")

    def __init__(self, chart: Chart, terms: Mapping[Sequence[int], object] | None = None):
        self.chart = chart
        acc: dict[tuple[int, ...], list[Expr]] = {}
        for idx, coeff in (terms or {}).items():
            idx = tuple(int(i) for i in idx)
            if any(i < 0 or i >= chart.dim for i in idx):
                raise IndexError(f"index {idx} out of range for chart {chart.id}")
            sign, key = _sort_sign(idx)
            if sign == 0:
                continue
            c = as_expr(coeff)
            acc.setdefault(key, []).append(c if sign > 0 else neg(c))
        out = {}
        for key in sorted(acc, key=lambda k: (len(k), k)):
            c = acc[key][0] if len(acc[key]) == 1 else add(*acc[key])
            if not c.is_zero:
                out[key] = c
        self.terms = out

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart) -> "Form":
        return cls(chart)

    @classmethod
    def scalar(cls, chart: Chart, value) -> "Form":
        return cls(chart, {(): as_expr(value)})

    @classmethod
    def from_names(cls, chart: Chart, terms: Mapping[str, object]) -> "Form":
        """Build from keys like ``"u^phi"`` (empty string for the 0-form part)."""
        out = {}
        for key, coeff in terms.items():
            names = [n.strip() for n in key.split("^")] if key.strip() else []
            out[tuple(chart.coords.index(n) for n in names)] = as_expr(coeff)
        return cls(chart, out)

    def to_names(self) -> dict[str, Expr]:
        return {"^".join(self.chart.coords[i] for i in k): c for k, c in self.terms.items()}

    # -- structure --------------------------------------------------------
    def degrees(self) -> list[int]:
        return sorted({len(k) for k in self.terms})

    @property
    def degree(self) -> int:
        """Degree of a homogeneous form (0 for the zero form)."""
        ds = self.degrees()
        if len(ds) > 1:
            raise DegreeError(f"inhomogeneous form with degrees {ds}")
        return ds[0] if ds else 0

    @property
    def parity(self) -> str | None:
        """'even', 'odd', None for the zero form, 'mixed' otherwise."""
        ps = {len(k) % 2 for k in self.terms}
        if not ps:
            return None
        if len(ps) > 1:
            return "mixed"
        return "even" if ps == {0} else "odd"

    def part(self, p: int) -> "Form":
        return Form(self.chart, {k: c for k, c in self.terms.items() if len(k) == p})

    def coefficient(self, idx: Sequence[int]) -> Expr:
        sign, key = _sort_sign(tuple(idx))
        if sign == 0:
            return ZERO
        c = self.terms.get(key, ZERO)
        return c if sign > 0 else neg(c)

    def is_zero(self) -> bool:
        return not self.terms

    # -- algebra ------------------------------------------------------------
    def _check(self, other: "Form"):
        if other.chart != self.chart:
            raise ChartMismatchError(f"forms live on charts {self.chart.id} and {other.chart.id}")

    def __add__(self, other):
        if not isinstance(other, Form):
            other = Form.scalar(self.chart, other)
        self._check(other)
        terms = {k: [c] for k, c in self.terms.items()}
        for k, c in other.terms.items():
            terms.setdefault(k, []).append(c)
        return Form(self.chart, {k: add(*cs) for k, cs in terms.items()})

    __radd__ = __add__

    def __neg__(self):
        return Form(self.chart, {k: neg(c) for k, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Form):
            other = Form.scalar(self.chart, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        """Multiplication by a scalar function; use :func:`wedge` for forms."""
        if isinstance(other, Form):
            return wedge(self, other)
        s = as_expr(other)
        return Form(self.chart, {k: mul(s, c) for k, c in self.terms.items()})

    def __rmul__(self, other):
        if isinstance(other, Form):
            return wedge(other, self)
        s = as_expr(other)
        return Form(self.chart, {k: mul(s, c) for k, c in self.terms.items()})

    def __xor__(self, other):
        return wedge(self, other)

    def substitute(self, mapping: Mapping[str, Expr]) -> "Form":
        """Substitute into coefficients only (no change of the basis forms)."""
        memo: dict = {}
        return Form(self.chart, {k: substitute(c, mapping, memo) for k, c in self.terms.items()})

    def on_chart(self, chart: Chart) -> "Form":
        """Reinterpret on ``chart`` whose leading coordinates coincide with ours."""
        if chart.coords[: self.chart.dim] != self.chart.coords:
            raise ChartMismatchError("target chart does not extend this chart")
        return Form(chart, self.terms)

    def d(self) -> "Form":
        return d(self)

    # -- numerics -----------------------------------------------------------
    def evaluate(self, points) -> dict[tuple[int, ...], np.ndarray]:
        env = self.chart.env(points)
        n = len(next(iter(env.values()))) if env else 1
        memo: dict = {}
        out = {}
        for k, c in self.terms.items():
            v = evaluate(c, env, memo)
            out[k] = np.broadcast_to(np.asarray(v, dtype=float), (n,))
        return out

    def max_abs(self, points) -> float:
        vals = self.evaluate(points)
        if not vals:
            return 0.0
        m = max(float(np.max(np.abs(v))) for v in vals.values())
        return m if math.isfinite(m) else math.inf

    def __repr__(self):
        inner = ", ".join(f"{k!r}: {c}" for k, c in self.to_names().items())
        return f"Form(chart={self.chart.id}, {{{inner}}})"


def scalar(chart: Chart, value) -> Form:
    return Form.scalar(chart, value)


def wedge(a: Form, b: Form) -> Form:
    if not isinstance(a, Form) or not isinstance(b, Form):
        raise TypeError("wedge expects two forms")
    a._check(b)
    out: dict[tuple[int, ...], list[Expr]] = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            sign, key = _sort_sign(ka + kb)
            if sign == 0:
                continue
            c = mul(ca, cb)
            out.setdefault(key, []).append(c if sign > 0 else neg(c))
    return Form(a.chart, {k: add(*cs) for k, cs in out.items()})


def d(f: Form) -> Form:
    """Exterior derivative by exact differentiation of the coefficients."""
    chart = f.chart
    out: dict[tuple[int, ...], list[Expr]] = {}
    memos = {name: {} for name in chart.coords}
    for key, c in f.terms.items():
        for v, name in enumerate(chart.coords):
            if v in key:
                continue
            dc = diff(c, name, memos[name])
            if dc.is_zero:
                continue
            sign, newkey = _sort_sign((v,) + key)
            out.setdefault(newkey, []).append(dc if sign > 0 else neg(dc))
    return Form(chart, {k: add(*cs) for k, cs in out.items()})


def pullback(f: Form, target: Chart, transition: Sequence[object]) -> Form:
    """Pull ``f`` back along a map ``target`` coords -> ``f.chart`` coords.

    ``transition[k]`` expresses the k-th source coordinate in terms of the
    target chart's coordinates.
    """
    src = f.chart
    transition = [as_expr(t) for t in transition]
    if len(transition) != src.dim:
        raise ValueError(f"transition has {len(transition)} components, chart {src.id} has dimension {src.dim}")
    mapping = dict(zip(src.coords, transition))
    dt = [d(Form.scalar(target, t)) for t in transition]
    memo: dict = {}
    result = Form.zero(target)
    for key, c in f.terms.items():
        piece = Form.scalar(target, substitute(c, mapping, memo))
        for idx in key:
            piece = wedge(piece, dt[idx])
        result = result + piece
    return result


def exp_nilpotent(b: Form) -> Form:
    """exp(b) for an even form with no degree-0 part, truncated by the chart dimension."""
    if b.part(0).terms:
        raise DegreeError("exp_nilpotent needs a form without a degree-0 part")
    if b.parity not in ("even", None):
        raise DegreeError("exp_nilpotent needs an even form")
    result = Form.scalar(b.chart, ONE)
    term = Form.scalar(b.chart, ONE)
    for n in range(1, b.chart.dim // 2 + 1):
        term = wedge(term, b) * Const(1.0 / n)
        if term.is_zero():
            break
        result = result + term
    return result


def exp_even(b: Form, dim: int | None = None) -> Form:
    """Truncated exponential 1 + b + b^b/2! + ... of a 2-form."""
    if b.terms and b.degrees() != [2]:
        raise DegreeError("exp_even expects a 2-form")
    out = exp_nilpotent(b)
    if dim is not None:
        out = Form(out.chart, {k: c for k, c in out.terms.items() if len(k) <= dim})
    return out


def d_minus_H(m: Form, H: Form) -> Form:
    """The twisted differential (d - H^) applied to ``m``."""
    if H.terms and H.degrees() != [3]:
        raise DegreeError("H must be a 3-form")
    return d(m) - wedge(H, m)


# -- quadrature -------------------------------------------------------------


def panel_grid(domain, n: int, breaks=None):
    """Tensor Gauss-Legendre rule with each axis split into panels at ``breaks[axis]``."""
    x, w = leggauss(n)
    nodes, weights = [], []
    for axis, (lo, hi) in enumerate(domain):
        cuts = [lo] + [b for b in (breaks[axis] if breaks else ()) if lo < b < hi] + [hi]
        ax_n, ax_w = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (b - a)
            ax_n.append(a + half * (x + 1.0))
            ax_w.append(half * w)
        nodes.append(np.concatenate(ax_n))
        weights.append(np.concatenate(ax_w))
    mesh = np.meshgrid(*nodes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wts = weights[0]
    for wk in weights[1:]:
        wts = np.multiply.outer(wts, wk)
    return pts, np.asarray(wts).ravel()


def integrate_chart(f: Form, weight=ONE, quad_points: int = DEFAULT_QUAD_POINTS, split_kinks: bool = True) -> float:
    """Integrate a top-degree form times ``weight`` over the chart's box.

    Tensor Gauss-Legendre with ``quad_points`` nodes per axis and panel.  With
    ``split_kinks`` each axis is cut where a ramp/box argument affine in that
    coordinate crosses 0 or 1, so piecewise-polynomial cutoffs integrate
    without losing accuracy at their junctions.
    """
    chart = f.chart
    if f.is_zero():
        return 0.0
    if f.degrees() != [chart.dim]:
        raise DegreeError(f"integrand must have degree {chart.dim}, has {f.degrees()}")
    integrand = mul(as_expr(weight), f.terms[tuple(range(chart.dim))])
    breaks = [kinks(integrand, c) for c in chart.coords] if split_kinks else None
    pts, wts = panel_grid(chart.domain, quad_points, breaks)
    total = 0.0
    for start in range(0, len(wts), _EVAL_CHUNK):
        chunk = pts[start : start + _EVAL_CHUNK]
        vals = np.broadcast_to(np.asarray(evaluate(integrand, chart.env(chunk)), dtype=float), (len(chunk),))
        total += float(np.dot(wts[start : start + _EVAL_CHUNK], vals))
    if not math.isfinite(total):
        raise FloatingPointError("non-finite integrand")
    return chart.orientation * total


def integrate_curve(f: Form, path: Sequence[object], param: str = "s", quad_points: int = 64) -> float:
    """Integrate a 1-form along a path s in [0, 1] -> chart coordinates."""
    path = [as_expr(p) for p in path]
    if len(path) != f.chart.dim:
        raise ValueError("path has wrong number of components")
    line = Chart(-1, (param,), ((0.0, 1.0),))
    pulled = pullback(f.part(1), line, path)
    if pulled.is_zero():
        return 0.0
    return integrate_chart(pulled, ONE, quad_points)


def basis_1forms(chart: Chart) -> list[Form]:
    return [chart.d(c) for c in chart.coords]


def forms_close(a: Form, b: Form, points) -> float:
    """Max pointwise coefficient difference."""
    return (a - b).max_abs(points)


def sum_forms(chart: Chart, forms: Iterable[Form]) -> Form:
    terms: dict[tuple[int, ...], list[Expr]] = {}
    for f in forms:
        if f.chart != chart:
            raise ChartMismatchError("sum over different charts")
        for k, c in f.terms.items():
            terms.setdefault(k, []).append(c)
    return Form(chart, {k: add(*cs) for k, cs in terms.items()})

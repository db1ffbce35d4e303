"""Degree-two Deligne cocycles, coboundaries, gerbe curvature and matrix cocycles.

Conventions (all forms real and pre-normalised):

* ``alpha[(i, j, k)]`` is an angle on chart k with sigma_ijk = exp(i alpha_ijk);
* ``A[(i, j)]`` is a 1-form on chart j, ``A_ji = -A_ij``;
* ``B[i]`` is a 2-form on chart i.

The cocycle conditions checked are::

    alpha_jkl - alpha_ikl + alpha_ijl - alpha_ijk  in 2 pi Z
    A_ij + A_jk - A_ik = d alpha_ijk / (2 pi)
    B_j - B_i = d A_ij
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .atlas import TOL_STRUCTURAL, Atlas
from .exterior import Form, d, scalar
from .expr import ZERO, Const, Expr, as_expr, evaluate
from .report import CheckFailure, CheckReport

TWO_PI = 2.0 * math.pi


@dataclass
class DeligneCocycle:
    atlas: Atlas
    alpha: dict[tuple[int, int, int], Expr] = field(default_factory=dict)
    A: dict[tuple[int, int], Form] = field(default_factory=dict)
    B: dict[int, Form] = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = {tuple(sorted(t)): as_expr(v) for t, v in self.alpha.items()}
        for (i, j), f in self.A.items():
            if not i < j or f.chart.id != j:
                raise ValueError(f"A{(i, j)} must have i < j and live on chart {j}")
        for i, f in self.B.items():
            if f.chart.id != i:
                raise ValueError(f"B{i} must live on chart {i}")

    @classmethod
    def trivial(cls, atlas: Atlas) -> "DeligneCocycle":
        return cls(atlas)

    def angle(self, t: tuple[int, int, int]) -> Expr:
        return self.alpha.get(tuple(t), ZERO)

    def b(self, i: int) -> Form:
        return self.B.get(i, Form.zero(self.atlas.charts[i]))

    def connection(self, i: int, j: int) -> Form:
        """A_ij as a 1-form on chart j, for either ordering."""
        if i == j:
            return Form.zero(self.atlas.charts[j])
        if i < j:
            return self.A.get((i, j), Form.zero(self.atlas.charts[j]))
        return -self.atlas.transport(self.connection(j, i), j)

    def line_c1(self, i: int, j: int) -> Form:
        """First Chern form of L_ij on chart j, i.e. dA_ij."""
        return d(self.connection(i, j))


@dataclass
class TwistData:
    cocycle: DeligneCocycle
    H: dict[int, Form]
    k: int | None = None

    @property
    def atlas(self) -> Atlas:
        return self.cocycle.atlas


def _sample(atlas: Atlas, ids, n: int, rng) -> np.ndarray:
    return atlas.sample(ids, ids[-1], n, rng)


def check_deligne(c: DeligneCocycle, samples: int = 100, tol: float = TOL_STRUCTURAL, seed: int = 0) -> CheckReport:
    atlas = c.atlas
    rng = np.random.default_rng(seed)
    rep = CheckReport("deligne", tol)
    rep.residuals.update({"condition1": 0.0, "condition2": 0.0, "condition3": 0.0})

    for quad in atlas.tuples(3):
        i, j, k, l = quad
        pts = _sample(atlas, quad, samples, rng)
        if not len(pts):
            continue
        env = atlas.charts[l].env(pts)
        total = np.zeros(len(pts))
        for sign, tri in ((1, (j, k, l)), (-1, (i, k, l)), (1, (i, j, l)), (-1, (i, j, k))):
            e = atlas.transport_scalar(c.angle(tri), tri[-1], l)
            total += sign * np.broadcast_to(np.asarray(evaluate(e, env), float), total.shape)
        rep.record("condition1", float(np.max(np.abs(total - TWO_PI * np.round(total / TWO_PI)))))

    for tri in atlas.triples:
        i, j, k = tri
        pts = _sample(atlas, tri, samples, rng)
        if not len(pts):
            continue
        lhs = atlas.transport(c.connection(i, j), k) + c.connection(j, k) - c.connection(i, k)
        rhs = d(scalar(atlas.charts[k], c.angle(tri))) * Const(1.0 / TWO_PI)
        rep.record("condition2", (lhs - rhs).max_abs(pts))

    for i, j in atlas.pairs():
        pts = _sample(atlas, (i, j), samples, rng)
        if not len(pts):
            continue
        diff = c.b(j) - atlas.transport(c.b(i), j) - d(c.connection(i, j))
        res = diff.max_abs(pts)
        rep.record("condition3", res)
        rep.details.setdefault("condition3_by_pair", {})[f"{i},{j}"] = res
    rep.vacuous = not atlas.pairs()
    return rep


def apply_coboundary(
    c: DeligneCocycle,
    h: Mapping[tuple[int, int], object] | None = None,
    a: Mapping[int, Form] | None = None,
) -> DeligneCocycle:
    """Multiply by the coboundary of (h_ij, a_i).

    ``h[(i, j)]`` is an angle function on chart j (i < j); ``a[i]`` a 1-form on
    chart i.  The shifts are alpha_ijk += h_ij - h_ik + h_jk,
    A_ij += dh_ij/(2 pi) + a_j - a_i and B_i += da_i.
    """
    atlas = c.atlas
    h = {k: as_expr(v) for k, v in (h or {}).items()}
    a = dict(a or {})

    def h_on(i: int, j: int, target: int) -> Expr:
        return atlas.transport_scalar(h.get((i, j), ZERO), j, target)

    alpha = dict(c.alpha)
    for tri in atlas.triples:
        i, j, k = tri
        shift = h_on(i, j, k) - h_on(i, k, k) + h_on(j, k, k)
        alpha[tri] = c.angle(tri) + shift

    A = {}
    for i, j in atlas.pairs():
        cj = atlas.charts[j]
        new = c.connection(i, j)
        if (i, j) in h:
            new = new + d(scalar(cj, h[(i, j)])) * Const(1.0 / TWO_PI)
        if j in a:
            new = new + a[j]
        if i in a:
            new = new - atlas.transport(a[i], j)
        A[(i, j)] = new

    B = {i: c.b(i) + (d(a[i]) if i in a else Form.zero(atlas.charts[i])) for i in atlas.charts}
    return DeligneCocycle(atlas, alpha, A, B)


def curvature_H(c: DeligneCocycle, samples: int = 100, tol: float = TOL_STRUCTURAL, k: int | None = None, check: bool = True) -> TwistData:
    if check:
        rep = check_deligne(c, samples, tol)
        if not rep.passed:
            raise CheckFailure("Deligne cocycle conditions fail", rep)
    atlas = c.atlas
    H = {i: d(c.b(i)) for i in atlas.charts}
    if check:
        rng = np.random.default_rng(1)
        for i, j in atlas.pairs():
            pts = _sample(atlas, (i, j), samples, rng)
            res = (atlas.transport(H[i], j) - H[j]).max_abs(pts) if len(pts) else 0.0
            if not res < tol:
                raise CheckFailure(f"H disagrees on overlap {(i, j)}: {res:.3g}")
        for i, chart in atlas.charts.items():
            pts = atlas.sample((i,), i, samples, rng)
            res = d(H[i]).max_abs(pts)
            if not res < tol:
                raise CheckFailure(f"dH != 0 on chart {i}: {res:.3g}")
    return TwistData(c, H, k)


def compare_twists(a: TwistData, b: TwistData, samples: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in a.atlas.charts:
        pts = a.atlas.sample((i,), i, samples, rng)
        worst = max(worst, (a.H[i] - b.H[i]).max_abs(pts))
    return worst


# -- finite-rank matrix cocycles ----------------------------------------------


ComplexEntry = tuple[Expr, Expr]


@dataclass
class MatrixCocycle:
    """Matrix-valued maps per pair i < j, written in chart-j coordinates.

    Entries are (real part, imaginary part) expression pairs.
    """

    atlas: Atlas
    rank: int
    g: dict[tuple[int, int], list[list[ComplexEntry]]]
    f: dict[tuple[int, int], list[list[ComplexEntry]]]

    def evaluate(self, which: str, pair: tuple[int, int], points: np.ndarray) -> np.ndarray:
        """Evaluate at points of chart ``pair[1]``; returns shape (N, r, r)."""
        table = self.g if which == "g" else self.f
        chart = self.atlas.charts[pair[1]]
        env = chart.env(points)
        memo: dict = {}
        n = len(points)
        out = np.empty((n, self.rank, self.rank), dtype=complex)
        rows = table[pair]
        for a in range(self.rank):
            for b in range(self.rank):
                re, im = rows[a][b]
                rv = np.broadcast_to(np.asarray(evaluate(re, env, memo), float), (n,))
                iv = np.broadcast_to(np.asarray(evaluate(im, env, memo), float), (n,))
                out[:, a, b] = rv + 1j * iv
        return out

    def at(self, which: str, i: int, j: int, points: np.ndarray, chart: int) -> np.ndarray:
        """Value of g_ij or f_ij at points given in ``chart`` coordinates (any ordering)."""
        if i < j:
            return self.evaluate(which, (i, j), self.atlas.map_points(points, chart, j))
        m = self.evaluate(which, (j, i), self.atlas.map_points(points, chart, i))
        if which == "g":
            return np.linalg.inv(m)
        raise KeyError("f is only stored for i < j")


def check_matrix_cocycle(
    m: MatrixCocycle,
    samples: int = 100,
    tol: float = TOL_STRUCTURAL,
    seed: int = 0,
    deligne: DeligneCocycle | None = None,
    singular_tol: float = 1e-10,
) -> CheckReport:
    """Check that g_ij g_jk g_ki is scalar and that f_ij (g_ij f_jk g_ij^-1) = f_ik."""
    atlas = m.atlas
    rng = np.random.default_rng(seed)
    rep = CheckReport("matrix cocycle", tol)
    rep.residuals.update({"unitarity": 0.0, "scalar": 0.0, "sigma_modulus": 0.0, "twisted": 0.0, "sigma_condition1": 0.0})
    eye = np.eye(m.rank)
    for i, j in atlas.pairs():
        pts = atlas.sample((i, j), j, samples, rng)
        g = m.evaluate("g", (i, j), pts)
        rep.record("unitarity", float(np.max(np.abs(g @ np.conj(np.swapaxes(g, 1, 2)) - eye))))
        f = m.evaluate("f", (i, j), pts)
        smin = np.linalg.svd(f, compute_uv=False)[:, -1]
        if np.min(smin) < singular_tol:
            raise np.linalg.LinAlgError(f"f{(i, j)} is singular at a sample point")

    sigma_samples: dict[tuple[int, int, int], tuple[np.ndarray, np.ndarray]] = {}
    for tri in atlas.triples:
        i, j, k = tri
        pts = atlas.sample(tri, k, samples, rng)
        if not len(pts):
            continue
        g_ij = m.at("g", i, j, pts, k)
        g_jk = m.at("g", j, k, pts, k)
        g_ki = m.at("g", k, i, pts, k)
        prod = g_ij @ g_jk @ g_ki
        sigma = np.trace(prod, axis1=1, axis2=2) / m.rank
        rep.record("scalar", float(np.max(np.abs(prod - sigma[:, None, None] * eye))))
        rep.record("sigma_modulus", float(np.max(np.abs(np.abs(sigma) - 1.0))))
        sigma_samples[tri] = (pts, sigma)

        f_ij = m.at("f", i, j, pts, k)
        f_jk = m.at("f", j, k, pts, k)
        f_ik = m.at("f", i, k, pts, k)
        lhs = f_ij @ g_ij @ f_jk @ np.linalg.inv(g_ij)
        res = float(np.max(np.abs(lhs - f_ik)))
        rep.record("twisted", res)
        rep.details.setdefault("twisted_by_triple", {})[f"{i},{j},{k}"] = res

        if deligne is not None and tri in deligne.alpha:
            alpha = np.asarray(evaluate(deligne.angle(tri), atlas.charts[k].env(pts)), float)
            rep.details.setdefault("alpha_consistency", {})[f"{i},{j},{k}"] = float(np.max(np.abs(sigma - np.exp(1j * alpha))))

    for quad in atlas.tuples(3):
        i, j, k, l = quad
        pts = atlas.sample(quad, l, samples, rng)
        if not len(pts):
            continue

        def sig(a, b, c):
            prod = m.at("g", a, b, pts, l) @ m.at("g", b, c, pts, l) @ m.at("g", c, a, pts, l)
            return np.trace(prod, axis1=1, axis2=2) / m.rank

        val = sig(j, k, l) / sig(i, k, l) * sig(i, j, l) / sig(i, j, k)
        rep.record("sigma_condition1", float(np.max(np.abs(val - 1.0))))
    rep.vacuous = not atlas.triples
    rep.details["sigma_samples"] = len(sigma_samples)
    return rep


def extract_sigma(m: MatrixCocycle, tri: tuple[int, int, int], points: np.ndarray) -> np.ndarray:
    i, j, k = tri
    prod = m.at("g", i, j, points, k) @ m.at("g", j, k, points, k) @ m.at("g", k, i, points, k)
    return np.trace(prod, axis1=1, axis2=2) / m.rank


"""Built-in scenarios: the two-chart model of SU(2) = S^3 and a three-chart local model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from numpy.polynomial.legendre import leggauss

from .atlas import Atlas, Overlap, PartitionOfUnity
from .chern import BundleCocycle, ConnectionBundle, VirtualBundle, monopole
from .deligne import DeligneCocycle, MatrixCocycle, TwistData, apply_coboundary, curvature_H
from .exterior import Chart, Form, d, wedge
from .expr import ONE, ZERO, Const, Expr, Var, add, cos, diff, evaluate, exp, log, mul, neg, power, ramp, sin
from .theta import Cycle, extend_deligne

SMOOTHSTEP_ORDER = 4


def smoothstep_coefficients(order: int = SMOOTHSTEP_ORDER) -> list[int]:
    """Integer coefficients c_p of S(t) = sum_p c_p t^p, the C^order smoothstep."""
    coeffs = [0] * (2 * order + 2)
    for n in range(order + 1):
        coeffs[order + 1 + n] = (-1) ** n * comb(order + n, n) * comb(2 * order + 1, order - n)
    return coeffs


def smoothstep(t: Expr, order: int = SMOOTHSTEP_ORDER) -> Expr:
    """0 for t <= 0, 1 for t >= 1, a polynomial in between (Horner form)."""
    r = ramp(t)
    coeffs = smoothstep_coefficients(order)
    acc: Expr = Const(float(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        acc = add(mul(acc, r), Const(float(c)))
    return acc


def step(x: Expr, lo: float, hi: float) -> Expr:
    """Smooth transition from 0 at ``lo`` to 1 at ``hi``."""
    return smoothstep(mul(add(x, Const(-lo)), Const(1.0 / (hi - lo))))


@dataclass
class Homotopy:
    param: str
    t0: float
    t1: float
    E: dict[tuple[int, int], VirtualBundle]

    def family(self, deligne: DeligneCocycle) -> BundleCocycle:
        ext = extend_deligne(deligne, self.param, (min(self.t0, self.t1), max(self.t0, self.t1)))
        return BundleCocycle(ext, dict(self.E))


@dataclass
class Scenario:
    name: str
    atlas: Atlas
    pu: PartitionOfUnity
    deligne: DeligneCocycle
    cocycle: BundleCocycle
    k: int | None = None
    cycles: list[Cycle] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    pu_alt: PartitionOfUnity | None = None
    cut_bundles: dict[int, VirtualBundle] | None = None
    homotopy: Homotopy | None = None
    matrix: MatrixCocycle | None = None
    _twist: TwistData | None = field(default=None, init=False, repr=False)

    def twist(self, check: bool = True) -> TwistData:
        if self._twist is None or check:
            self._twist = curvature_H(self.deligne, k=self.k, check=check)
        return self._twist


# -- SU(2) ---------------------------------------------------------------------

SU2_COORDS = ("theta", "u", "phi")


@dataclass(frozen=True)
class Su2Scenario:
    k: int
    j: Fraction = Fraction(0)
    n: int = 1
    separate: bool = True
    collar: tuple[float, float] = (1.0, 1.6)
    rho_ramp: tuple[float, float] = (1.1, 1.5)
    rho_ramp_alt: tuple[float, float] = (1.15, 1.45)
    bump_separated: tuple[float, float] = (1.9, 2.6)
    bump_general: tuple[float, float] = (0.9, 1.7)
    homotopy_strength: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "j", Fraction(self.j))
        if self.k < 2:
            raise ValueError("level k must be at least 2")
        two_j = 2 * self.j
        if two_j.denominator != 1 or not 0 <= two_j <= self.k - 2:
            raise ValueError(f"need 2j in {{0, ..., k-2}} = {{0, ..., {self.k - 2}}}, got 2j = {two_j}")
        if self.n < 0:
            raise ValueError("rank n must be nonnegative")
        lo, hi = self.collar
        if not (lo < self.rho_ramp[0] < self.rho_ramp[1] < hi and lo < self.rho_ramp_alt[0] < self.rho_ramp_alt[1] < hi):
            raise ValueError("partition ramps must sit inside the collar")

    @property
    def m(self) -> int:
        return int(2 * self.j + 1)

    @property
    def bump(self) -> tuple[float, float]:
        return self.bump_separated if self.separate else self.bump_general


def sigma_form(chart: Chart) -> Form:
    """Normalised area form sin(u) du^dphi / (4 pi) on the S^2 slices."""
    return Form.from_names(chart, {"u^phi": mul(sin(Var("u")), Const(1.0 / (4.0 * math.pi)))})


def su2_atlas(s: Su2Scenario) -> Atlas:
    lo, hi = s.collar
    c0 = Chart(0, SU2_COORDS, ((0.0, hi), (0.0, math.pi), (0.0, 2.0 * math.pi)))
    c1 = Chart(1, SU2_COORDS, ((lo, math.pi), (0.0, math.pi), (0.0, 2.0 * math.pi)))
    ident = tuple(Var(c) for c in SU2_COORDS)
    ov = Overlap(0, 1, ((lo, hi), None, None), ((lo, hi), None, None), ident, ident)
    return Atlas({0: c0, 1: c1}, {(0, 1): ov})


def su2_partition(ramp_interval: tuple[float, float]) -> PartitionOfUnity:
    rho1 = step(Var("theta"), *ramp_interval)
    return PartitionOfUnity({0: add(ONE, neg(rho1)), 1: rho1})


def su2_profile(s: Su2Scenario) -> Expr:
    """G0(theta): rises from 0 to 1 across the bump interval; g = G0' integrates to 1."""
    return step(Var("theta"), *s.bump)


def build_su2(s: Su2Scenario) -> Scenario:
    atlas = su2_atlas(s)
    c0, c1 = atlas.charts[0], atlas.charts[1]
    G0 = su2_profile(s)
    k = float(s.k)
    B0 = sigma_form(c0) * mul(Const(k), G0)
    B1 = sigma_form(c1) * mul(Const(k), add(G0, Const(-1.0)))
    A01 = Form.from_names(c1, {"phi": mul(Const(k / (4.0 * math.pi)), cos(Var("u")))})
    deligne = DeligneCocycle(atlas, {}, {(0, 1): A01}, {0: B0, 1: B1})

    E10 = _su2_e10(c0, s.m, s.n)
    E01 = _flip(E10, deligne, atlas)
    cocycle = BundleCocycle(deligne, {(0, 1): E01}, {0: 0.0, 1: 1.0})

    pu = su2_partition(s.rho_ramp)
    pu_alt = su2_partition(s.rho_ramp_alt)
    cut = {0: VirtualBundle.of(monopole(c0, "u", "phi", s.m))} if s.n else {}

    theta0 = 0.5 * sum(s.collar) + 0.0
    cycles = [
        Cycle(0, (add(Const(theta0), mul(Const(0.1), cos(mul(Const(2 * math.pi), Var("s"))))),
                  add(ONE, mul(Const(0.1), sin(mul(Const(2 * math.pi), Var("s"))))),
                  Const(1.0))),
        Cycle(0, (Const(theta0), Const(1.0), mul(Const(2 * math.pi), Var("s")))),
    ]
    meta = {"k": s.k, "j": str(s.j), "m": s.m, "n": s.n, "separate": s.separate}
    scn = Scenario("su2", atlas, pu, deligne, cocycle, s.k, cycles, meta, pu_alt, cut)
    scn.homotopy = _su2_homotopy(s, deligne)
    return scn


def _su2_e10(chart: Chart, m: int, n: int, extra: Expr | None = None) -> VirtualBundle:
    """Rank-n bundle on the collar with first Chern form m * sigma (empty for n = 0)."""
    if n == 0:
        return VirtualBundle.empty(chart)
    coeff = mul(Const(-m / (4.0 * math.pi)), cos(Var("u")))
    if extra is not None:
        coeff = add(coeff, extra)
    first = Form.from_names(chart, {"phi": coeff})
    forms = [first] + [Form.zero(chart)] * (n - 1)
    return VirtualBundle.of(ConnectionBundle.diagonal(forms))


def _flip(E10: VirtualBundle, deligne: DeligneCocycle, atlas: Atlas) -> VirtualBundle:
    """E_01 = -(L_10 (x) E_10), written on chart 1."""
    return (-E10.tensor_line(deligne.connection(1, 0))).transported(atlas, 1)


def _su2_homotopy(s: Su2Scenario, deligne: DeligneCocycle) -> Homotopy | None:
    if s.n == 0:
        return None
    ext = extend_deligne(deligne, "t", (0.0, 1.0))
    c0 = ext.atlas.charts[0]
    v = mul(Const(s.homotopy_strength), Var("t"), sin(Var("theta")), power(sin(Var("u")), 2))
    E10 = _su2_e10(c0, s.m, s.n, v)
    E01 = _flip(E10, ext, ext.atlas)
    return Homotopy("t", 0.0, 1.0, {(0, 1): E01})


def _composite_gauss(fn, breaks, n: int = 24) -> float:
    x, w = leggauss(n)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        total += float(np.dot(half * w, fn(a + half * (x + 1.0))))
    return total


def su2_cross_term(s: Su2Scenario) -> float:
    """c = integral of rho_1'(theta) G0(theta) d theta, by 1-D quadrature split at the profile breakpoints."""
    rho1 = step(Var("theta"), *s.rho_ramp)
    drho = diff(rho1, "theta")
    G0 = su2_profile(s)
    integrand = mul(drho, G0)
    breaks = sorted({0.0, math.pi, *s.rho_ramp, *s.bump})
    return _composite_gauss(lambda th: np.broadcast_to(evaluate(integrand, {"theta": th}), th.shape), breaks)


def su2_expected_eta0(s: Su2Scenario) -> float:
    if s.n == 0:
        return 0.0
    c = su2_cross_term(s)
    return (-(s.m + s.n * s.k * c) / s.k) % 1.0


def su2_closed_form_theta0(scn: Scenario) -> Form:
    """n drho_1 + drho_1 ^ w + n drho_1 ^ B_0 on chart 0, with w = c_1(E_10)."""
    atlas = scn.atlas
    c0 = atlas.charts[0]
    n = float(scn.meta["n"])
    m = float(scn.meta["m"]) if scn.meta["n"] else 0.0
    rho1 = scn.pu.on_chart(atlas, 1, 0)
    drho = d(Form.scalar(c0, rho1))
    omega = sigma_form(c0) * Const(m)
    return drho * Const(n) + wedge(drho, omega) + wedge(drho, scn.deligne.b(0)) * Const(n)


# -- three-chart local model ------------------------------------------------------


@dataclass(frozen=True)
class TripleParams:
    matrix_rank: int = 2
    coboundary: bool = True
    shear: float = 0.3


def triple_atlas(p: TripleParams = TripleParams()) -> Atlas:
    c0 = Chart(0, ("x", "y", "z"), ((0.0, 1.6), (-2.0, 2.0), (-2.0, 2.0)))
    c1 = Chart(1, ("x1", "y1", "z1"), ((0.0, 1.6), (-2.0, 2.0), (-2.0, 2.0)))
    c2 = Chart(2, ("a", "b", "c"), ((0.0, math.exp(1.6) - 1.0), (-1.0, 1.0), (-1.0, 1.0)))
    x, y, z = Var("x"), Var("y"), Var("z")
    x1, y1, z1 = Var("x1"), Var("y1"), Var("z1")
    a, b, c = Var("a"), Var("b"), Var("c")
    sh = Const(p.shear)
    ov01 = Overlap(
        0, 1,
        ((1.0, 1.6), None, None), ((0.0, 0.6), None, None),
        (add(x1, ONE), y1, z1), (add(x, Const(-1.0)), y, z),
    )
    ov02 = Overlap(
        0, 2,
        ((1.4, 1.6), None, None), ((0.0, math.exp(0.2) - 1.0), None, None),
        (add(Const(1.4), log(add(ONE, a))), add(b, mul(sh, c)), c),
        (add(exp(add(x, Const(-1.4))), Const(-1.0)), add(y, neg(mul(sh, z))), z),
    )
    ov12 = Overlap(
        1, 2,
        ((0.4, 1.6), None, None), ((0.0, math.exp(1.2) - 1.0), None, None),
        (add(Const(0.4), log(add(ONE, a))), add(b, mul(sh, c)), c),
        (add(exp(add(x1, Const(-0.4))), Const(-1.0)), add(y1, neg(mul(sh, z1))), z1),
    )
    return Atlas({0: c0, 1: c1, 2: c2}, {(0, 1): ov01, (0, 2): ov02, (1, 2): ov12}, ((0, 1, 2),))


def triple_partition(atlas: Atlas) -> PartitionOfUnity:
    """rho_0 = 1 - S((x - 1.1)/0.4), rho_2 = S((x - 1.45)/1.0), rho_1 the rest."""
    x = Var("x")
    rho0 = add(ONE, neg(step(x, 1.1, 1.5)))
    rho2 = step(x, 1.45, 2.45)
    f0 = rho0
    f2 = atlas.transport_scalar(rho2, 0, 2)
    f1 = atlas.transport_scalar(add(ONE, neg(rho0), neg(rho2)), 0, 1)
    return PartitionOfUnity({0: f0, 1: f1, 2: f2})


def triple_partition_alt(atlas: Atlas) -> PartitionOfUnity:
    x = Var("x")
    rho0 = add(ONE, neg(step(x, 1.15, 1.52)))
    rho2 = step(x, 1.42, 2.3)
    return PartitionOfUnity({
        0: rho0,
        1: atlas.transport_scalar(add(ONE, neg(rho0), neg(rho2)), 0, 1),
        2: atlas.transport_scalar(rho2, 0, 2),
    })


def _global_B(chart: Chart) -> Form:
    x, y, z = Var("x"), Var("y"), Var("z")
    return Form.from_names(chart, {
        "y^z": mul(power(x, 2), z),
        "x^z": mul(x, cos(y)),
        "x^y": mul(Const(0.2), sin(mul(x, z))),
    })


def triple_deligne(atlas: Atlas, coboundary: bool = True) -> DeligneCocycle:
    B0 = _global_B(atlas.charts[0])
    B = {i: atlas.transport(B0, i) for i in atlas.charts}
    c = DeligneCocycle(atlas, {}, {}, B)
    if not coboundary:
        return c
    return apply_coboundary(c, triple_h(), triple_a(atlas))


def triple_h() -> dict[tuple[int, int], Expr]:
    """Angle functions h_ij on chart j."""
    return {
        (0, 1): mul(Const(0.7), sin(mul(Var("x1"), Var("y1")))),
        (0, 2): add(mul(Const(0.4), Var("a"), Var("b")), mul(Const(0.3), cos(Var("c")))),
        (1, 2): mul(Const(0.5), Var("b"), exp(mul(Const(0.2), Var("a")))),
    }


def triple_a(atlas: Atlas) -> dict[int, Form]:
    c0, c1, c2 = (atlas.charts[i] for i in range(3))
    return {
        0: Form.from_names(c0, {"x": mul(Const(0.3), Var("y")), "z": sin(Var("x"))}),
        1: Form.from_names(c1, {"y1": mul(Const(0.2), Var("x1"), Var("z1"))}),
        2: Form.from_names(c2, {"b": cos(Var("a")), "c": mul(Const(0.1), Var("b"))}),
    }


def triple_bundles(atlas: Atlas, deligne: DeligneCocycle) -> dict[tuple[int, int], VirtualBundle]:
    c1, c2 = atlas.charts[1], atlas.charts[2]
    x1, y1, z1 = Var("x1"), Var("y1"), Var("z1")
    f = lambda names: Form.from_names(c1, names)
    A01 = (
        (f({"y1": mul(Const(0.3), x1)}), f({"z1": mul(Const(0.2), sin(z1))})),
        (f({"x1": Const(0.1), "z1": mul(Const(0.2), y1)}), f({"y1": mul(Const(-0.3), x1), "x1": mul(Const(0.1), cos(y1))})),
    )
    E01 = VirtualBundle.of(ConnectionBundle(c1, A01))
    a, b = Var("a"), Var("b")
    E12 = VirtualBundle.of(ConnectionBundle.line(Form.from_names(c2, {"b": mul(Const(0.4), a), "c": mul(Const(0.1), sin(b))})))
    E02 = E01.tensor_line(deligne.connection(2, 1)).transported(atlas, 2) + E12
    return {(0, 1): E01, (1, 2): E12, (0, 2): E02}


def triple_cut_bundles(atlas: Atlas) -> dict[int, VirtualBundle]:
    c0, c2 = atlas.charts[0], atlas.charts[2]
    E0 = ConnectionBundle.line(Form.from_names(c0, {"y": mul(Const(0.25), Var("z")), "x": mul(Const(0.1), Var("y"))}))
    E2 = ConnectionBundle.line(Form.from_names(c2, {"c": mul(Const(0.3), Var("a"))}))
    return {0: VirtualBundle.of(E0), 2: VirtualBundle.of(E2, -1)}


def triple_homotopy(atlas: Atlas, deligne: DeligneCocycle, bundles) -> Homotopy:
    """Deform E_12 and hence E_02 along t in [0, 1]."""
    ext = extend_deligne(deligne, "t", (0.0, 1.0))
    ea = ext.atlas
    c1, c2 = ea.charts[1], ea.charts[2]
    lift = lambda v, chart: v.map_forms(lambda g: g.on_chart(chart), chart)
    E01 = lift(bundles[(0, 1)], c1)
    t, a, b = Var("t"), Var("a"), Var("b")
    E12 = VirtualBundle.of(ConnectionBundle.line(Form.from_names(c2, {
        "b": mul(Const(0.4), a),
        "c": add(mul(Const(0.1), sin(b)), mul(Const(0.2), t, a, b)),
    })))
    E02 = E01.tensor_line(ext.connection(2, 1)).transported(ea, 2) + E12
    return Homotopy("t", 0.0, 1.0, {(0, 1): E01, (1, 2): E12, (0, 2): E02})


def build_synthetic_triple(p: TripleParams = TripleParams()) -> Scenario:
    atlas = triple_atlas(p)
    deligne = triple_deligne(atlas, p.coboundary)
    bundles = triple_bundles(atlas, deligne)
    cocycle = BundleCocycle(deligne, bundles, {0: 0.0, 1: 1.0, 2: 2.0})
    scn = Scenario(
        "synthetic-triple", atlas, triple_partition(atlas), deligne, cocycle, None, [],
        {"matrix_rank": p.matrix_rank}, triple_partition_alt(atlas), triple_cut_bundles(atlas),
    )
    scn.homotopy = triple_homotopy(atlas, deligne, bundles)
    if p.matrix_rank:
        scn.matrix = triple_matrix_cocycle(atlas, p.matrix_rank, triple_h())
    return scn


def perturb_bundle(scn: Scenario, pair: tuple[int, int], amount: float = 0.5) -> Scenario:
    """Tensor E_pair with an extra non-flat line; breaks the twisted cocycle relation."""
    atlas = scn.atlas
    chart = atlas.charts[pair[1]]
    coords = chart.coords
    extra = Form(chart, {(1,): mul(Const(amount), Var(coords[0]))})
    E = dict(scn.cocycle.E)
    E[pair] = E[pair].tensor_line(extra)
    bad = BundleCocycle(scn.deligne, E, dict(scn.cocycle.labels))
    return Scenario(scn.name, atlas, scn.pu, scn.deligne, bad, scn.k, scn.cycles, dict(scn.meta))


# -- complex matrix helpers for the finite-rank cocycle ---------------------------

CMatrix = list[list[tuple[Expr, Expr]]]


def _cmul(p, q):
    return add(mul(p[0], q[0]), neg(mul(p[1], q[1]))), add(mul(p[0], q[1]), mul(p[1], q[0]))


def cmatmul(X: CMatrix, Y: CMatrix) -> CMatrix:
    r = len(X)
    out = []
    for a in range(r):
        row = []
        for b in range(r):
            terms = [_cmul(X[a][c], Y[c][b]) for c in range(r)]
            row.append((add(*[t[0] for t in terms]), add(*[t[1] for t in terms])))
        out.append(row)
    return out


def cdagger(X: CMatrix) -> CMatrix:
    r = len(X)
    return [[(X[b][a][0], neg(X[b][a][1])) for b in range(r)] for a in range(r)]


def cdiag(entries) -> CMatrix:
    r = len(entries)
    return [[entries[a] if a == b else (ZERO, ZERO) for b in range(r)] for a in range(r)]


def phase(angle: Expr) -> tuple[Expr, Expr]:
    return cos(angle), sin(angle)


def givens(r: int, p: int, q: int, angle: Expr) -> CMatrix:
    out = cdiag([(ONE, ZERO)] * r)
    c, s = cos(angle), sin(angle)
    out[p][p] = (c, ZERO)
    out[q][q] = (c, ZERO)
    out[p][q] = (neg(s), ZERO)
    out[q][p] = (s, ZERO)
    return out


def _unitary(r: int, coords: tuple[str, ...], seed: float) -> CMatrix:
    x, y, z = (Var(c) for c in coords)
    U = cdiag([phase(mul(Const(seed * (a + 1) * 0.37), add(x, mul(Const(0.5 * a), y)))) for a in range(r)])
    for p in range(r - 1):
        angle = add(mul(Const(0.6 + 0.1 * p), sin(add(mul(Const(seed), x), z))), mul(Const(0.2), y))
        U = cmatmul(U, givens(r, p, p + 1, angle))
    return U


def _positive_diag(r: int, coords: tuple[str, ...], seed: float) -> tuple[CMatrix, CMatrix]:
    x, y, _ = (Var(c) for c in coords)
    vals = [add(ONE, mul(Const(0.2), sin(add(mul(Const(seed + a), x), y)))) for a in range(r)]
    D = cdiag([(v, ZERO) for v in vals])
    Dinv = cdiag([(power(v, -1), ZERO) for v in vals])
    return D, Dinv


def _pull(M: CMatrix, atlas: Atlas, src: int, dst: int) -> CMatrix:
    return [[(atlas.transport_scalar(re, src, dst), atlas.transport_scalar(im, src, dst)) for re, im in row] for row in M]


def triple_matrix_cocycle(atlas: Atlas, rank: int, beta: dict[tuple[int, int], Expr]) -> MatrixCocycle:
    """g_ij = exp(i beta_ij) h_i h_j^-1 and f_ij = u_i g_ij u_j^-1 g_ij^-1."""
    h, u, uinv = {}, {}, {}
    for i, chart in atlas.charts.items():
        h[i] = _unitary(rank, chart.coords, 1.0 + 0.5 * i)
        W = _unitary(rank, chart.coords, 2.3 - 0.4 * i)
        D, Dinv = _positive_diag(rank, chart.coords, 0.8 + 0.3 * i)
        u[i] = cmatmul(D, W)
        uinv[i] = cmatmul(cdagger(W), Dinv)
    g, f = {}, {}
    for i, j in atlas.pairs():
        hi = _pull(h[i], atlas, i, j)
        ph = phase(beta.get((i, j), ZERO))
        gij = cmatmul(cdiag([ph] * rank), cmatmul(hi, cdagger(h[j])))
        ui = _pull(u[i], atlas, i, j)
        g[(i, j)] = gij
        f[(i, j)] = cmatmul(cmatmul(ui, gij), cmatmul(uinv[j], cdagger(gij)))
    return MatrixCocycle(atlas, rank, g, f)


def perturb_matrix(m: MatrixCocycle, pair: tuple[int, int], amount: float = 0.01) -> MatrixCocycle:
    f = {k: [list(row) for row in v] for k, v in m.f.items()}
    re, im = f[pair][0][0]
    f[pair][0][0] = (add(re, Const(amount)), im)
    return MatrixCocycle(m.atlas, m.rank, dict(m.g), f)

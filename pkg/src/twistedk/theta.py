"""Assembly of the twisted Chern character form and its correction forms.

Starting from a cocycle of local bundles {E_ij} the even forms
w_bar_ij = exp(B_j) ch(E_ij) satisfy the additive Cech cocycle relation.  The
partition of unity produces local potentials eta_i = sum_k rho_k w_bar_ki with
delta(eta) = w_bar, and Theta_i = (d - H) eta_i glues to a global odd form.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .atlas import Atlas, CechCochain, PartitionOfUnity, cech_delta, global_integrate
from .chern import BundleCocycle, VirtualBundle, check_twisted_cocycle, chern_character
from .deligne import DeligneCocycle, TwistData
from .exterior import DEFAULT_QUAD_POINTS, Chart, Form, d_minus_H, exp_nilpotent, integrate_curve, sum_forms, wedge
from .expr import Const, Expr, substitute
from .report import CheckFailure, CheckReport

TOL_THETA = 1e-8
TOL_HOMOTOPY = 1e-7
TOL_EXACT = 1e-8


@dataclass
class ThetaResult:
    theta: dict[int, Form]
    eta: dict[int, Form]
    overlap_residual: float
    closure_residual: float
    by_pair: dict[str, float] = field(default_factory=dict)

    def part(self, p: int) -> dict[int, Form]:
        return {i: f.part(p) for i, f in self.theta.items()}

    def report(self, tol: float = TOL_THETA) -> CheckReport:
        rep = CheckReport("theta", tol)
        rep.record("overlap", self.overlap_residual)
        rep.record("closure", self.closure_residual)
        rep.details["by_pair"] = dict(self.by_pair)
        return rep


@dataclass
class DifferentialKCocycle:
    """Spectral data plus a global even correction form eta (one representative per chart)."""

    cocycle: BundleCocycle
    twist: TwistData
    pu: PartitionOfUnity
    eta: dict[int, Form] = field(default_factory=dict)

    @property
    def labels(self) -> dict[int, float]:
        return self.cocycle.labels


def build_eta_local(c: BundleCocycle, twist: TwistData, pu: PartitionOfUnity) -> dict[int, Form]:
    atlas = c.atlas
    out = {}
    for i, chart in atlas.charts.items():
        terms = []
        for k in atlas.charts:
            if k == i or (min(i, k), max(i, k)) not in atlas.overlaps:
                continue
            terms.append(c.omega_bar(k, i) * pu.on_chart(atlas, k, i))
        out[i] = sum_forms(chart, terms)
    return out


def eta_delta_residual(c: BundleCocycle, eta: Mapping[int, Form], samples: int = 100, seed: int = 0) -> dict[str, float]:
    """Max |delta(eta)_ij - w_bar_ij| over each overlap."""
    atlas = c.atlas
    delta = cech_delta(atlas, CechCochain(0, {(i,): f for i, f in eta.items()}))
    rng = np.random.default_rng(seed)
    out = {}
    for (i, j), f in delta.values.items():
        pts = atlas.sample((i, j), j, samples, rng)
        out[f"{i},{j}"] = (f - c.omega_bar(i, j)).max_abs(pts) if len(pts) else 0.0
    return out


def _theta_diagnostics(atlas: Atlas, theta: Mapping[int, Form], twist: TwistData, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    by_pair = {}
    for i, j in atlas.pairs():
        pts = atlas.sample((i, j), j, samples, rng)
        by_pair[f"{i},{j}"] = (atlas.transport(theta[i], j) - theta[j]).max_abs(pts) if len(pts) else 0.0
    closure = 0.0
    for i, chart in atlas.charts.items():
        pts = atlas.sample((i,), i, samples, rng)
        closure = max(closure, d_minus_H(theta[i], twist.H[i]).max_abs(pts))
    return by_pair, closure


def _assemble(atlas: Atlas, theta, eta, twist, samples, seed, tol, strict) -> ThetaResult:
    by_pair, closure = _theta_diagnostics(atlas, theta, twist, samples, seed)
    overlap = max(by_pair.values(), default=0.0)
    result = ThetaResult(theta, eta, overlap, closure, by_pair)
    if strict:
        for pair, res in by_pair.items():
            if not res < tol:
                raise CheckFailure(f"Theta disagrees on overlap ({pair}): residual {res:.3g}", result.report(tol))
    return result


def build_theta(
    c: BundleCocycle,
    twist: TwistData,
    pu: PartitionOfUnity,
    samples: int = 100,
    seed: int = 0,
    tol: float = TOL_THETA,
    strict: bool = True,
    check_inputs: bool = True,
) -> ThetaResult:
    if check_inputs:
        rep = check_twisted_cocycle(c, twist, samples=samples, seed=seed)
        if not rep.passed:
            raise CheckFailure("bundle cocycle fails the twisted cocycle relation", rep)
    eta = build_eta_local(c, twist, pu)
    theta = {i: d_minus_H(eta[i], twist.H[i]) for i in c.atlas.charts}
    return _assemble(c.atlas, theta, eta, twist, samples, seed, tol, strict)


def chern_character_of_cocycle(kc: DifferentialKCocycle, samples: int = 100, seed: int = 0, tol: float = TOL_THETA) -> ThetaResult:
    """Theta plus (d - H) of the stored correction form."""
    atlas = kc.cocycle.atlas
    rng = np.random.default_rng(seed)
    for i, j in atlas.pairs():
        if i in kc.eta and j in kc.eta:
            pts = atlas.sample((i, j), j, samples, rng)
            res = (atlas.transport(kc.eta[i], j) - kc.eta[j]).max_abs(pts)
            if not res < tol:
                raise CheckFailure(f"correction form is not global on overlap {(i, j)}: {res:.3g}")
    base = build_theta(kc.cocycle, kc.twist, kc.pu, samples, seed, tol)
    theta = {}
    for i, f in base.theta.items():
        extra = d_minus_H(kc.eta[i], kc.twist.H[i]) if i in kc.eta else Form.zero(f.chart)
        theta[i] = f + extra
    return _assemble(atlas, theta, base.eta, kc.twist, samples, seed, tol, True)


def defect_residual(
    atlas: Atlas,
    theta_a: Mapping[int, Form],
    theta_b: Mapping[int, Form],
    correction: Mapping[int, Form],
    twist: TwistData,
    samples: int = 100,
    seed: int = 0,
) -> float:
    """max |Theta_a - Theta_b - (d - H) correction| over chart samples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in atlas.charts:
        pts = atlas.sample((i,), i, samples, rng)
        diff = theta_a[i] - theta_b[i] - d_minus_H(correction[i], twist.H[i])
        worst = max(worst, diff.max_abs(pts))
    return worst


def globality_residual(atlas: Atlas, forms: Mapping[int, Form], samples: int = 100, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i, j in atlas.pairs():
        pts = atlas.sample((i, j), j, samples, rng)
        if len(pts):
            worst = max(worst, (atlas.transport(forms[i], j) - forms[j]).max_abs(pts))
    return worst


# -- correction forms ---------------------------------------------------------


def correction_partition(c: BundleCocycle, twist: TwistData, pu: PartitionOfUnity, pu_other: PartitionOfUnity) -> dict[int, Form]:
    """sum_k (rho_k - rho'_k) w_bar_kj on each chart j."""
    atlas = c.atlas
    out = {}
    for j, chart in atlas.charts.items():
        terms = []
        for k in atlas.charts:
            if k == j or (min(j, k), max(j, k)) not in atlas.overlaps:
                continue
            weight = pu.on_chart(atlas, k, j) - pu_other.on_chart(atlas, k, j)
            terms.append(c.omega_bar(k, j) * weight)
        out[j] = sum_forms(chart, terms)
    return out


def shifted_cocycle(c: BundleCocycle, local: Mapping[int, VirtualBundle]) -> BundleCocycle:
    """The cocycle F_ij = E_ij + E_j - L_ji (x) E_i obtained by moving the cuts."""
    atlas = c.atlas
    E = {}
    for i, j in atlas.pairs():
        new = c.stored(i, j)
        if j in local:
            new = new + local[j]
        if i in local:
            twisted = local[i].tensor_line(c.deligne.connection(j, i))
            new = new - twisted.transported(atlas, j)
        E[(i, j)] = new
    return BundleCocycle(c.deligne, E, dict(c.labels))


def shift_residual(c: BundleCocycle, shifted: BundleCocycle, local: Mapping[int, VirtualBundle], samples: int = 100, seed: int = 0) -> float:
    """Chern-form check of F_ij + L_ji (x) E_i = E_ij + E_j on every overlap."""
    atlas = c.atlas
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i, j in atlas.pairs():
        pts = atlas.sample((i, j), j, samples, rng)
        if not len(pts):
            continue
        lhs = shifted.omega(i, j)
        if i in local:
            lhs = lhs + chern_character(local[i].tensor_line(c.deligne.connection(j, i)).transported(atlas, j))
        rhs = c.omega(i, j)
        if j in local:
            rhs = rhs + chern_character(local[j])
        worst = max(worst, (lhs - rhs).max_abs(pts))
    return worst


@dataclass
class CutCorrection:
    eta: dict[int, Form]
    shifted: BundleCocycle
    shift_residual: float


def correction_cut(
    c: BundleCocycle,
    local: Mapping[int, VirtualBundle],
    twist: TwistData,
    pu: PartitionOfUnity,
    shifted: BundleCocycle | None = None,
    tol: float = TOL_THETA,
) -> CutCorrection:
    """sum_i rho_i exp(B_i) ch(E_i), written on every chart."""
    atlas = c.atlas
    if shifted is None:
        shifted = shifted_cocycle(c, local)
    res = shift_residual(c, shifted, local)
    if not res < tol:
        raise CheckFailure(f"shifted cocycle violates F_ij + L_ji E_i = E_ij + E_j: {res:.3g}")
    pieces = {i: wedge(exp_nilpotent(twist.cocycle.b(i)), chern_character(v)) for i, v in local.items()}
    out = {}
    for j, chart in atlas.charts.items():
        terms = []
        for i, piece in pieces.items():
            if i != j and (min(i, j), max(i, j)) not in atlas.overlaps:
                continue
            terms.append(atlas.transport(piece, j) * pu.on_chart(atlas, i, j))
        out[j] = sum_forms(chart, terms)
    return CutCorrection(out, shifted, res)


# -- homotopies -----------------------------------------------------------------


def extend_deligne(c: DeligneCocycle, name: str, interval: tuple[float, float]) -> DeligneCocycle:
    ext = c.atlas.extended(name, interval)
    A = {k: f.on_chart(ext.charts[k[1]]) for k, f in c.A.items()}
    B = {i: f.on_chart(ext.charts[i]) for i, f in c.B.items()}
    return DeligneCocycle(ext, dict(c.alpha), A, B)


def extend_twist(twist: TwistData, name: str, interval: tuple[float, float]) -> TwistData:
    ext = extend_deligne(twist.cocycle, name, interval)
    H = {i: f.on_chart(ext.atlas.charts[i]) for i, f in twist.H.items()}
    return TwistData(ext, H, twist.k)


def slice_form(f: Form, base: Chart, name: str, value: float) -> Form:
    """Restrict a form on an extended chart to the slice ``name = value``."""
    t_index = f.chart.coords.index(name)
    mapping = {name: Const(float(value))}
    memo: dict = {}
    terms = {}
    for key, coeff in f.terms.items():
        if t_index in key:
            continue
        terms[key] = substitute(coeff, mapping, memo)
    return Form(base, terms)


def slice_cocycle(family: BundleCocycle, base: DeligneCocycle, name: str, value: float) -> BundleCocycle:
    atlas = base.atlas
    E = {}
    for (i, j), v in family.E.items():
        chart = atlas.charts[j]
        E[(i, j)] = v.map_forms(lambda f, chart=chart: slice_form(f, chart, name, value), chart)
    return BundleCocycle(base, E, dict(family.labels))


@dataclass
class HomotopyCorrection:
    eta: dict[int, Form]
    theta_extended: ThetaResult


def correction_homotopy(
    family: BundleCocycle,
    twist: TwistData,
    pu: PartitionOfUnity,
    name: str,
    t0: float,
    t1: float,
    t_quad: int = 8,
    samples: int = 100,
) -> HomotopyCorrection:
    """-int_{t0}^{t1} of the dt-component of Theta on the t-extended atlas.

    ``family`` lives on ``twist``'s atlas extended by the coordinate ``name``
    (appended last).  The output satisfies
    Theta(t0) - Theta(t1) = (d - H) eta.
    """
    ext_twist = extend_twist(twist, name, (min(t0, t1), max(t0, t1)))
    if family.atlas.charts.keys() != ext_twist.atlas.charts.keys():
        raise ValueError("family must live on the extended atlas")
    ext_cocycle = BundleCocycle(ext_twist.cocycle, family.E, dict(family.labels))
    theta_ext = build_theta(ext_cocycle, ext_twist, pu, samples=samples)
    nodes, weights = leggauss(t_quad)
    half = 0.5 * (t1 - t0)
    ts = t0 + half * (nodes + 1.0)
    ws = half * weights
    out = {}
    for i, base in twist.atlas.charts.items():
        ext_chart = ext_twist.atlas.charts[i]
        t_index = ext_chart.coords.index(name)
        alpha_terms = {}
        for key, coeff in theta_ext.theta[i].terms.items():
            if key and key[-1] == t_index:
                alpha_terms[key[:-1]] = coeff
        alpha = Form(ext_chart, alpha_terms)
        pieces = [slice_form(alpha, base, name, t) * Const(-float(w)) for t, w in zip(ts, ws)]
        out[i] = sum_forms(base, pieces)
    return HomotopyCorrection(out, theta_ext)


# -- eta potential integral -------------------------------------------------------


@dataclass
class EtaZeroResult:
    value: float
    theta3_integral: float
    cycle_integrals: list[float]


@dataclass(frozen=True)
class Cycle:
    chart: int
    path: tuple[Expr, ...]
    param: str = "s"


def eta_zero_integral(
    th: ThetaResult,
    twist: TwistData,
    pu: PartitionOfUnity,
    cycles: Sequence[Cycle] = (),
    quad_points: int = DEFAULT_QUAD_POINTS,
    exact_tol: float = TOL_EXACT,
) -> EtaZeroResult:
    """(-(1/k) * integral of Theta_3) mod 1."""
    k = twist.k
    if not k:
        raise ValueError("eta_zero_integral needs a nonzero level k")
    cyc = []
    for cy in cycles:
        val = integrate_curve(th.theta[cy.chart].part(1), cy.path, cy.param)
        cyc.append(val)
        if not abs(val) < exact_tol:
            raise CheckFailure(f"Theta_1 is not exact: integral {val:.3g} over a declared cycle")
    atlas = twist.atlas
    integral = global_integrate(atlas, th.part(atlas.dim), pu, quad_points)
    value = (-integral / k) % 1.0
    if abs(value - 1.0) < 1e-12:
        value = 0.0
    return EtaZeroResult(value, integral, cyc)


def mod1_distance(a: float, b: float) -> float:
    x = (a - b) % 1.0
    return min(x, 1.0 - x)

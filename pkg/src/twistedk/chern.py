"""Chern-Weil forms of connection matrices and cocycles of local virtual bundles.

Connection matrices are real gl(r)-valued 1-forms already divided by the
2 pi i normalisation, so the Chern character is simply tr exp(F) with
F = dA + A^A.  A degree-m monopole on the unit sphere then has
integral of ch_2 equal to m.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .atlas import Atlas
from .deligne import DeligneCocycle, TwistData
from .exterior import Chart, Form, d, exp_nilpotent, sum_forms, wedge
from .expr import Const, Var, cos
from .report import CheckReport

TOL_COCYCLE = 1e-8

Matrix = tuple[tuple[Form, ...], ...]


@dataclass(frozen=True)
class ConnectionBundle:
    """A rank-r bundle with an r x r matrix of 1-forms on one chart."""

    chart: Chart
    A: Matrix

    def __post_init__(self):
        A = tuple(tuple(row) for row in self.A)
        r = len(A)
        if r < 1 or any(len(row) != r for row in A):
            raise ValueError("connection matrix must be square with rank >= 1")
        for row in A:
            for f in row:
                if f.chart != self.chart:
                    raise ValueError("connection entries must live on the bundle's chart")
                if f.terms and f.degrees() != [1]:
                    raise ValueError("connection entries must be 1-forms")
        object.__setattr__(self, "A", A)

    @property
    def rank(self) -> int:
        return len(self.A)

    @classmethod
    def trivial(cls, chart: Chart, rank: int = 1) -> "ConnectionBundle":
        z = Form.zero(chart)
        return cls(chart, tuple(tuple(z for _ in range(rank)) for _ in range(rank)))

    @classmethod
    def line(cls, a: Form) -> "ConnectionBundle":
        return cls(a.chart, ((a,),))

    @classmethod
    def diagonal(cls, forms: Sequence[Form]) -> "ConnectionBundle":
        chart = forms[0].chart
        z = Form.zero(chart)
        return cls(chart, tuple(tuple(forms[a] if a == b else z for b in range(len(forms))) for a in range(len(forms))))

    def tensor_line(self, a: Form) -> "ConnectionBundle":
        """Connection on L (x) E where L has connection 1-form ``a``."""
        return ConnectionBundle(self.chart, tuple(tuple(f + a if p == q else f for q, f in enumerate(row)) for p, row in enumerate(self.A)))

    def transported(self, atlas: Atlas, dst: int) -> "ConnectionBundle":
        if self.chart.id == dst:
            return self
        return ConnectionBundle(atlas.charts[dst], tuple(tuple(atlas.transport(f, dst) for f in row) for row in self.A))

    def map_forms(self, fn) -> "ConnectionBundle":
        A = tuple(tuple(fn(f) for f in row) for row in self.A)
        return ConnectionBundle(A[0][0].chart, A)


@dataclass(frozen=True)
class VirtualBundle:
    """Formal integer combination of connection bundles on one chart."""

    chart: Chart
    summands: tuple[tuple[int, ConnectionBundle], ...] = ()

    def __post_init__(self):
        summands = tuple((int(w), b) for w, b in self.summands if int(w) != 0)
        for _, b in summands:
            if b.chart != self.chart:
                raise ValueError("all summands must live on the same chart")
        object.__setattr__(self, "summands", summands)

    @classmethod
    def empty(cls, chart: Chart) -> "VirtualBundle":
        return cls(chart)

    @classmethod
    def of(cls, b: ConnectionBundle, weight: int = 1) -> "VirtualBundle":
        return cls(b.chart, ((weight, b),))

    @property
    def rank(self) -> int:
        return sum(w * b.rank for w, b in self.summands)

    def __add__(self, other: "VirtualBundle") -> "VirtualBundle":
        if other.chart != self.chart:
            raise ValueError("virtual bundles on different charts")
        return VirtualBundle(self.chart, self.summands + other.summands)

    def __neg__(self) -> "VirtualBundle":
        return VirtualBundle(self.chart, tuple((-w, b) for w, b in self.summands))

    def __sub__(self, other: "VirtualBundle") -> "VirtualBundle":
        return self + (-other)

    def tensor_line(self, a: Form) -> "VirtualBundle":
        return VirtualBundle(self.chart, tuple((w, b.tensor_line(a)) for w, b in self.summands))

    def transported(self, atlas: Atlas, dst: int) -> "VirtualBundle":
        if self.chart.id == dst:
            return self
        return VirtualBundle(atlas.charts[dst], tuple((w, b.transported(atlas, dst)) for w, b in self.summands))

    def map_forms(self, fn, chart: Chart | None = None) -> "VirtualBundle":
        summands = tuple((w, b.map_forms(fn)) for w, b in self.summands)
        return VirtualBundle(chart or (summands[0][1].chart if summands else self.chart), summands)


# -- Chern-Weil ---------------------------------------------------------------


def _matmul(X: Matrix, Y: Matrix, chart: Chart) -> Matrix:
    r = len(X)
    return tuple(
        tuple(sum_forms(chart, (wedge(X[a][c], Y[c][b]) for c in range(r))) for b in range(r)) for a in range(r)
    )


def curvature(b: ConnectionBundle) -> Matrix:
    """F = dA + A^A, entrywise."""
    AA = _matmul(b.A, b.A, b.chart)
    return tuple(tuple(d(b.A[p][q]) + AA[p][q] for q in range(b.rank)) for p in range(b.rank))


def trace(F: Matrix, chart: Chart) -> Form:
    return sum_forms(chart, (F[a][a] for a in range(len(F))))


def trace_powers(F: Matrix, chart: Chart, max_power: int) -> list[Form]:
    """[tr F, tr F^2, ..., tr F^max_power]."""
    out = []
    P = F
    for p in range(1, max_power + 1):
        if p > 1:
            P = _matmul(P, F, chart)
        out.append(trace(P, chart))
    return out


def chern_character_bundle(b: ConnectionBundle, dim: int | None = None) -> Form:
    chart = b.chart
    top = (dim if dim is not None else chart.dim) // 2
    F = curvature(b)
    parts = [Form.scalar(chart, b.rank)]
    for p, tp in enumerate(trace_powers(F, chart, top), start=1):
        parts.append(tp * Const(1.0 / math.factorial(p)))
    return _truncate(sum_forms(chart, parts), dim)


def chern_character(v: VirtualBundle, dim: int | None = None) -> Form:
    """Sum of weight * tr exp(F) over the summands."""
    return sum_forms(v.chart, (chern_character_bundle(b, dim) * Const(float(w)) for w, b in v.summands))


def first_chern_form(v: VirtualBundle) -> Form:
    return chern_character(v, 2).part(2)


def _truncate(f: Form, dim: int | None) -> Form:
    if dim is None:
        return f
    return Form(f.chart, {k: c for k, c in f.terms.items() if len(k) <= dim})


# log(x / (1 - e^-x)) = x/2 - x^2/24 + x^4/2880 - x^6/181440 + ...
_LOG_TODD = {1: 0.5, 2: -1.0 / 24.0, 3: 0.0, 4: 1.0 / 2880.0}
# log((x/2) / sinh(x/2)) = -x^2/24 + x^4/2880 - ...
_LOG_AHAT = {1: 0.0, 2: -1.0 / 24.0, 3: 0.0, 4: 1.0 / 2880.0}


def _multiplicative(F: Matrix, chart: Chart, dim: int | None, coeffs: Mapping[int, float], scale: float) -> Form:
    dim = chart.dim if dim is None else dim
    top = min(dim // 2, max(coeffs))
    if top == 0:
        return Form.scalar(chart, 1.0)
    powers = trace_powers(F, chart, top)
    log_series = sum_forms(chart, (powers[p - 1] * Const(scale * coeffs[p]) for p in range(1, top + 1) if coeffs[p]))
    return _truncate(exp_nilpotent(log_series), dim)


def todd_series(F: Matrix, chart: Chart, dim: int | None = None) -> Form:
    """Todd form exp(tr log(F / (1 - e^-F))), truncated at ``dim``."""
    return _multiplicative(F, chart, dim, _LOG_TODD, 1.0)


def a_hat_series(F: Matrix, chart: Chart, dim: int | None = None) -> Form:
    """A-hat form of a real skew curvature matrix: 1 - p1/24 + ... with p1 = tr(F^2)/2."""
    return _multiplicative(F, chart, dim, _LOG_AHAT, 0.5)


# -- cocycles of local bundles ------------------------------------------------


class MissingBundleError(KeyError):
    pass


@dataclass
class BundleCocycle:
    """E_ij for i < j (on chart j) plus the gerbe line bundles from the Deligne data.

    Entries with i > j follow the identification E_ij = -(L_ji (x) E_ji).
    """

    deligne: DeligneCocycle
    E: dict[tuple[int, int], VirtualBundle] = field(default_factory=dict)
    labels: dict[int, float] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        for (i, j), v in self.E.items():
            if not i < j:
                raise ValueError("store E_ij with i < j")
            if v.chart.id != j:
                raise ValueError(f"E{(i, j)} must live on chart {j}")
        if self.labels and len(set(self.labels.values())) != len(self.labels):
            raise ValueError("spectral cut labels must be distinct")

    @property
    def atlas(self) -> Atlas:
        return self.deligne.atlas

    def require_complete(self) -> None:
        for pair in self.atlas.pairs():
            if pair not in self.E:
                raise MissingBundleError(f"no bundle data on overlap {pair}")

    def stored(self, i: int, j: int) -> VirtualBundle:
        if (i, j) not in self.E:
            raise MissingBundleError(f"no bundle data on overlap {(i, j)}")
        return self.E[(i, j)]

    def bundle(self, i: int, j: int) -> VirtualBundle:
        """E_ij as a virtual bundle on chart j for either ordering."""
        if i < j:
            return self.stored(i, j)
        if i == j:
            return VirtualBundle.empty(self.atlas.charts[j])
        src = self.stored(j, i).tensor_line(self.deligne.connection(j, i))
        return (-src).transported(self.atlas, j)

    def rank(self, i: int, j: int) -> int:
        if i == j:
            return 0
        return self.stored(i, j).rank if i < j else -self.stored(j, i).rank

    def omega(self, i: int, j: int) -> Form:
        """ch(E_ij) on chart j."""
        key = ("omega", i, j)
        if key not in self._cache:
            self._cache[key] = chern_character(self.bundle(i, j))
        return self._cache[key]

    def omega_bar(self, i: int, j: int) -> Form:
        """exp(B_j) ch(E_ij) on chart j; antisymmetric in (i, j)."""
        key = ("omega_bar", i, j)
        if key not in self._cache:
            if i == j:
                val = Form.zero(self.atlas.charts[j])
            elif i < j:
                val = wedge(exp_nilpotent(self.deligne.b(j)), self.omega(i, j))
            else:
                val = -self.atlas.transport(self.omega_bar(j, i), j)
            self._cache[key] = val
        return self._cache[key]


def check_twisted_cocycle(c: BundleCocycle, twist: TwistData | None = None, samples: int = 100, tol: float = TOL_COCYCLE, seed: int = 0) -> CheckReport:
    """Residual of exp(B_j - B_k) w_ij + w_jk - w_ik and of the rank cocycle."""
    atlas = c.atlas
    c.require_complete()
    rng = np.random.default_rng(seed)
    rep = CheckReport("twisted cocycle", tol)
    rep.residuals.update({"forms": 0.0, "ranks": 0.0})
    by_triple = {}
    for tri in atlas.triples:
        i, j, k = tri
        pts = atlas.sample(tri, k, samples, rng)
        if not len(pts):
            continue
        shift = exp_nilpotent(atlas.transport(c.deligne.b(j), k) - c.deligne.b(k))
        res_form = wedge(shift, atlas.transport(c.omega(i, j), k)) + c.omega(j, k) - c.omega(i, k)
        res = res_form.max_abs(pts)
        by_triple[f"{i},{j},{k}"] = res
        rep.record("forms", res)
        rep.record("ranks", abs(c.rank(i, j) + c.rank(j, k) - c.rank(i, k)))
    rep.details["by_triple"] = by_triple
    rep.vacuous = not atlas.triples
    return rep


def det_cocycle_check(c: BundleCocycle, samples: int = 100, tol: float = TOL_COCYCLE, seed: int = 0) -> CheckReport:
    """c1-level determinant relation n_ij c1(L_kj) + c1(l_ij) + c1(l_jk) - c1(l_ik) = 0."""
    atlas = c.atlas
    c.require_complete()
    rng = np.random.default_rng(seed)
    rep = CheckReport("determinant gerbe", tol)
    rep.residuals["c1"] = 0.0
    for tri in atlas.triples:
        i, j, k = tri
        pts = atlas.sample(tri, k, samples, rng)
        if not len(pts):
            continue
        c1_L_kj = atlas.transport(c.deligne.line_c1(k, j), k)
        total = (
            c1_L_kj * Const(float(c.rank(i, j)))
            + atlas.transport(c.omega(i, j).part(2), k)
            + c.omega(j, k).part(2)
            - c.omega(i, k).part(2)
        )
        rep.record("c1", total.max_abs(pts))
    rep.vacuous = not atlas.triples
    return rep


def trivialize_ranks(c: BundleCocycle) -> dict[int, int]:
    """Integers n_i with n_ij = n_i - n_j, found along a spanning tree of the overlap graph."""
    atlas = c.atlas
    n: dict[int, int] = {}
    for root in atlas.ids:
        if root in n:
            continue
        n[root] = 0
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for b in atlas.ids:
                if b in n or (min(a, b), max(a, b)) not in atlas.overlaps:
                    continue
                n[b] = n[a] - c.rank(a, b)
                queue.append(b)
    for i, j in atlas.pairs():
        if n[i] - n[j] != c.rank(i, j):
            raise ValueError("ranks do not form a Cech cocycle")
    return n


def trivialized_det_check(c: BundleCocycle, samples: int = 100, tol: float = TOL_COCYCLE, seed: int = 0) -> CheckReport:
    """With n_ij = n_i - n_j, check that l'_ij = l_ij (x) L_ij^{n_i} is an honest cocycle."""
    atlas = c.atlas
    n = trivialize_ranks(c)
    rng = np.random.default_rng(seed)
    rep = CheckReport("trivialized determinant", tol)
    rep.residuals["c1"] = 0.0
    rep.details["n"] = {str(i): v for i, v in n.items()}

    def c1_prime(i: int, j: int, target: int) -> Form:
        f = c.omega(i, j).part(2) + c.deligne.line_c1(i, j) * Const(float(n[i]))
        return atlas.transport(f, target)

    for tri in atlas.triples:
        i, j, k = tri
        pts = atlas.sample(tri, k, samples, rng)
        if not len(pts):
            continue
        total = c1_prime(i, j, k) + c1_prime(j, k, k) - c1_prime(i, k, k)
        rep.record("c1", total.max_abs(pts))
    rep.vacuous = not atlas.triples
    return rep


def bianchi_residual(b: ConnectionBundle, points) -> float:
    return d(trace(curvature(b), b.chart)).max_abs(points)


def levi_civita_s2(chart: Chart, u: str, phi: str) -> ConnectionBundle:
    """Tangent bundle of the round unit sphere as a complex line bundle."""
    return ConnectionBundle.line(chart.d(phi) * (cos(Var(u)) * Const(-1.0 / (2.0 * math.pi))))


def monopole(chart: Chart, u: str, phi: str, m: float) -> ConnectionBundle:
    """Degree-m line bundle on the unit sphere: A = -m cos(u) dphi / (4 pi)."""
    return ConnectionBundle.line(chart.d(phi) * (cos(Var(u)) * Const(-float(m) / (4.0 * math.pi))))


def sum_bundles(chart: Chart, parts: Iterable[VirtualBundle]) -> VirtualBundle:
    out = VirtualBundle.empty(chart)
    for p in parts:
        out = out + p
    return out

"""Finite atlases: overlaps, transitions, partitions of unity and the Cech coboundary.

Data attached to an ascending chart tuple ``(i0, ..., iq)`` is always expressed
in the coordinates of the last chart ``iq``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .exterior import DEFAULT_QUAD_POINTS, Chart, Form, integrate_chart, pullback
from .expr import ZERO, Expr, Var, as_expr, evaluate, substitute, to_string
from .report import CheckFailure, CheckReport

Box = tuple[tuple[float, float] | None, ...]

TOL_STRUCTURAL = 1e-9
TOL_QUADRATURE = 1e-6
TOL_PARTITION = 1e-10
TOL_SUPPORT = 1e-12


class MissingOverlapError(KeyError):
    pass


@dataclass(frozen=True)
class Overlap:
    """Overlap of charts ``i < j``.

    ``to_i`` gives chart-i coordinates as expressions in chart-j coordinates;
    ``to_j`` is the inverse map.  ``box_i``/``box_j`` describe the overlap in
    each chart; ``None`` entries leave a coordinate unconstrained.
    """

    i: int
    j: int
    box_i: Box
    box_j: Box
    to_i: tuple[Expr, ...]
    to_j: tuple[Expr, ...]

    def __post_init__(self):
        if not self.i < self.j:
            raise ValueError("overlaps are stored with i < j")
        object.__setattr__(self, "to_i", tuple(as_expr(e) for e in self.to_i))
        object.__setattr__(self, "to_j", tuple(as_expr(e) for e in self.to_j))
        object.__setattr__(self, "box_i", _norm_box(self.box_i))
        object.__setattr__(self, "box_j", _norm_box(self.box_j))


def _norm_box(box) -> Box:
    return tuple(None if b is None else (float(b[0]), float(b[1])) for b in box)


def _intersect(domain, boxes: Iterable[Box]) -> list[tuple[float, float]] | None:
    lo = [a for a, _ in domain]
    hi = [b for _, b in domain]
    for box in boxes:
        for k, b in enumerate(box):
            if b is not None:
                lo[k] = max(lo[k], b[0])
                hi[k] = min(hi[k], b[1])
    if any(l >= h for l, h in zip(lo, hi)):
        return None
    return list(zip(lo, hi))


@dataclass
class Atlas:
    charts: dict[int, Chart]
    overlaps: dict[tuple[int, int], Overlap]
    triples: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        self.charts = dict(sorted(self.charts.items()))
        self.triples = tuple(tuple(sorted(t)) for t in self.triples)
        for (i, j), ov in self.overlaps.items():
            if (ov.i, ov.j) != (i, j):
                raise ValueError(f"overlap key {(i, j)} does not match its data")
            for cid, box, trans, target in ((i, ov.box_i, ov.to_j, j), (j, ov.box_j, ov.to_i, i)):
                if len(box) != self.charts[cid].dim:
                    raise ValueError(f"overlap {(i, j)}: box for chart {cid} has wrong dimension")
                if len(trans) != self.charts[target].dim:
                    raise ValueError(f"overlap {(i, j)}: transition into chart {target} has wrong arity")
        for t in self.triples:
            for a, b in itertools.combinations(t, 2):
                if (a, b) not in self.overlaps:
                    raise MissingOverlapError(f"triple {t} needs overlap {(a, b)}")

    @property
    def ids(self) -> list[int]:
        return list(self.charts)

    @property
    def dim(self) -> int:
        return next(iter(self.charts.values())).dim

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.overlaps)

    def tuples(self, q: int) -> list[tuple[int, ...]]:
        """Ascending chart tuples of length q+1 with declared common overlap."""
        if q == 0:
            return [(i,) for i in self.charts]
        if q == 1:
            return self.pairs()
        if q == 2:
            return sorted(self.triples)
        return [
            t
            for t in itertools.combinations(self.ids, q + 1)
            if all(s in self.triples for s in itertools.combinations(t, 3))
        ]

    def overlap(self, a: int, b: int) -> Overlap:
        key = (min(a, b), max(a, b))
        if key not in self.overlaps:
            raise MissingOverlapError(f"no overlap between charts {a} and {b}")
        return self.overlaps[key]

    def transition(self, src: int, dst: int) -> tuple[Expr, ...]:
        """Chart ``src`` coordinates as expressions in chart ``dst`` coordinates."""
        if src == dst:
            return tuple(self.charts[src].var(c) for c in self.charts[src].coords)
        ov = self.overlap(src, dst)
        return ov.to_i if src < dst else ov.to_j

    def transport(self, f: Form, dst: int) -> Form:
        """Pull a form on ``f.chart`` back into chart ``dst``."""
        src = f.chart.id
        if src == dst:
            return f
        if f.chart != self.charts[src]:
            raise ValueError("form is not on an atlas chart")
        return pullback(f, self.charts[dst], self.transition(src, dst))

    def transport_scalar(self, e: Expr, src: int, dst: int) -> Expr:
        if src == dst:
            return e
        return substitute(e, dict(zip(self.charts[src].coords, self.transition(src, dst))))

    def map_points(self, points: np.ndarray, src: int, dst: int) -> np.ndarray:
        """Map sample points given in chart ``src`` coordinates into chart ``dst``."""
        if src == dst:
            return np.asarray(points, dtype=float)
        env = self.charts[src].env(points)
        memo: dict = {}
        cols = [np.broadcast_to(np.asarray(evaluate(e, env, memo), float), (len(points),)) for e in self.transition(dst, src)]
        return np.stack(cols, axis=1)

    def region(self, ids: Sequence[int], in_chart: int) -> list[tuple[float, float]] | None:
        """Bounding box (in chart ``in_chart``) of the common overlap of ``ids``."""
        boxes = []
        for other in ids:
            if other == in_chart:
                continue
            ov = self.overlap(other, in_chart)
            boxes.append(ov.box_i if in_chart == ov.i else ov.box_j)
        return _intersect(self.charts[in_chart].domain, boxes)

    def sample(self, ids: Sequence[int], in_chart: int, n: int, rng: np.random.Generator, margin: float = 1e-6) -> np.ndarray:
        region = self.region(ids, in_chart)
        if region is None:
            return np.empty((0, self.charts[in_chart].dim))
        lo = np.array([a for a, _ in region])
        hi = np.array([b for _, b in region])
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(n, len(region)))

    def in_region(self, points: np.ndarray, ids: Sequence[int], in_chart: int) -> np.ndarray:
        region = self.region(ids, in_chart)
        if region is None:
            return np.zeros(len(points), dtype=bool)
        mask = np.ones(len(points), dtype=bool)
        for k, (a, b) in enumerate(region):
            mask &= (points[:, k] > a) & (points[:, k] < b)
        return mask

    def extended(self, name: str, interval: tuple[float, float]) -> "Atlas":
        """Product of the atlas with an interval coordinate ``name`` appended last."""
        charts = {i: c.extended(name, interval) for i, c in self.charts.items()}
        t = Var(name)
        overlaps = {
            k: Overlap(ov.i, ov.j, ov.box_i + (None,), ov.box_j + (None,), ov.to_i + (t,), ov.to_j + (t,))
            for k, ov in self.overlaps.items()
        }
        return Atlas(charts, overlaps, self.triples)

    def check_transitions(self, n: int = 100, seed: int = 0) -> CheckReport:
        """Round-trip and triple-composition consistency of the transition maps."""
        rng = np.random.default_rng(seed)
        rep = CheckReport("transitions", TOL_STRUCTURAL)
        for i, j in self.pairs():
            pts = self.sample((i, j), j, n, rng)
            back = self.map_points(self.map_points(pts, j, i), i, j)
            rep.record(f"roundtrip{(i, j)}", float(np.max(np.abs(back - pts))) if len(pts) else 0.0)
        for i, j, k in self.triples:
            pts = self.sample((i, j, k), k, n, rng)
            if not len(pts):
                continue
            direct = self.map_points(pts, k, i)
            via = self.map_points(self.map_points(pts, k, j), j, i)
            rep.record(f"compose{(i, j, k)}", float(np.max(np.abs(direct - via))))
        return rep


# -- partitions of unity ------------------------------------------------------


@dataclass
class PartitionOfUnity:
    """One function per chart, each written in its own chart's coordinates."""

    functions: dict[int, Expr]

    def __post_init__(self):
        self.functions = {int(i): as_expr(f) for i, f in sorted(self.functions.items())}

    def on_chart(self, atlas: Atlas, k: int, i: int) -> Expr:
        """rho_k written in chart-i coordinates (zero if the charts do not meet)."""
        if k == i:
            return self.functions[k]
        try:
            return atlas.transport_scalar(self.functions[k], k, i)
        except MissingOverlapError:
            return ZERO


def check_partition(atlas: Atlas, pu: PartitionOfUnity, samples: int = 400, seed: int = 0) -> CheckReport:
    rep = CheckReport("partition", TOL_PARTITION)
    rng = np.random.default_rng(seed)
    if set(pu.functions) != set(atlas.charts):
        raise ValueError("partition must have one function per chart")
    min_rho = math.inf
    support = 0.0
    for i, chart in atlas.charts.items():
        lo = np.array([a for a, _ in chart.domain])
        hi = np.array([b for _, b in chart.domain])
        pts = rng.uniform(lo, hi, size=(samples, chart.dim))
        # also probe every overlap region densely
        extra = [atlas.sample((i, o), i, samples // 4, rng) for o in atlas.charts if o != i and (min(i, o), max(i, o)) in atlas.overlaps]
        pts = np.concatenate([pts] + extra) if extra else pts
        env = chart.env(pts)
        total = np.zeros(len(pts))
        for k in atlas.charts:
            if k != i and (min(i, k), max(i, k)) not in atlas.overlaps:
                continue
            vals = np.broadcast_to(np.asarray(evaluate(pu.on_chart(atlas, k, i), env), float), (len(pts),))
            total = total + vals
            min_rho = min(min_rho, float(np.min(vals)))
            if k != i:
                outside = ~atlas.in_region(pts, (k, i), i)
                if np.any(outside):
                    support = max(support, float(np.max(np.abs(vals[outside]))))
        rep.record("sum", float(np.max(np.abs(total - 1.0))))
    rep.record("negativity", max(0.0, -min_rho))
    rep.details["min_rho"] = min_rho
    rep.limits["support"] = TOL_SUPPORT
    rep.record("support", support)
    return rep


# -- Cech cochains ------------------------------------------------------------


@dataclass
class CechCochain:
    """Forms indexed by ascending chart tuples of length q+1, each on the last chart."""

    q: int
    values: dict[tuple[int, ...], Form] = field(default_factory=dict)

    def __post_init__(self):
        for t, f in self.values.items():
            if len(t) != self.q + 1 or list(t) != sorted(set(t)):
                raise ValueError(f"bad cochain index {t}")
            if f.chart.id != t[-1]:
                raise ValueError(f"value on {t} must live on chart {t[-1]}")


def cech_delta(atlas: Atlas, c: CechCochain) -> CechCochain:
    """(delta c)_{i0..i(q+1)} = sum_m (-1)^m c_{i0..^im..i(q+1)}, in the last chart."""
    out: dict[tuple[int, ...], Form] = {}
    for t in atlas.tuples(c.q + 1):
        last = t[-1]
        acc = Form.zero(atlas.charts[last])
        for m in range(len(t)):
            sub = t[:m] + t[m + 1 :]
            if sub not in c.values:
                continue
            term = atlas.transport(c.values[sub], last)
            acc = acc + term if m % 2 == 0 else acc - term
        out[t] = acc
    return CechCochain(c.q + 1, out)


def max_residual(atlas: Atlas, forms: Mapping[tuple[int, ...], Form], n: int = 100, seed: int = 0) -> dict[tuple[int, ...], float]:
    """Max coefficient magnitude of each tuple-indexed form on its overlap region."""
    rng = np.random.default_rng(seed)
    out = {}
    for t, f in forms.items():
        pts = atlas.sample(t, t[-1], n, rng)
        out[t] = f.max_abs(pts) if len(pts) else 0.0
    return out


# -- global integration ---------------------------------------------------------


def global_integrate(
    atlas: Atlas,
    per_chart: Mapping[int, Form],
    pu: PartitionOfUnity,
    quad_points: int = DEFAULT_QUAD_POINTS,
    tol: float = 1e-8,
    samples: int = 100,
    seed: int = 0,
) -> float:
    """Integrate a global top form given by per-chart representatives."""
    rng = np.random.default_rng(seed)
    for i, j in atlas.pairs():
        if i not in per_chart or j not in per_chart:
            continue
        pts = atlas.sample((i, j), j, samples, rng)
        if not len(pts):
            continue
        res = (atlas.transport(per_chart[i], j) - per_chart[j]).max_abs(pts)
        if not res < tol:
            rep = CheckReport("overlap agreement", tol, {f"{(i, j)}": res})
            raise CheckFailure(f"representatives disagree on overlap {(i, j)}: residual {res:.3g}", rep)
    total = 0.0
    for i in atlas.charts:
        if i in per_chart:
            total += integrate_chart(per_chart[i], pu.functions[i], quad_points)
    return total


def describe(atlas: Atlas) -> str:
    lines = []
    for c in atlas.charts.values():
        lines.append(f"chart {c.id}: {c.coords} on {c.domain}")
    for ov in atlas.overlaps.values():
        lines.append(f"overlap {(ov.i, ov.j)}: to_i = {[to_string(e) for e in ov.to_i]}")
    return "\n".join(lines)

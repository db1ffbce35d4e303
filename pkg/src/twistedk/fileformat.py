"""JSON scenario files: validation, loading and deterministic serialisation."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .atlas import Atlas, Overlap, PartitionOfUnity
from .chern import BundleCocycle, ConnectionBundle, VirtualBundle
from .deligne import DeligneCocycle, MatrixCocycle
from .exterior import Chart, Form
from .expr import Expr, ExprSyntaxError, parse, to_string
from .scenarios import Homotopy, Scenario
from .theta import Cycle, extend_deligne

FORMAT_VERSION = 1


class ScenarioFormatError(ValueError):
    """Schema, grammar or reference error in a scenario document."""


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("twistedk").joinpath("scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(doc: Any) -> None:
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioFormatError(f"schema violation at {where}: {exc.message}") from None


# -- writing ------------------------------------------------------------------------


def _box(box) -> list:
    return [None if b is None else [b[0], b[1]] for b in box]


def _form(f: Form) -> dict[str, str]:
    return {k: to_string(c) for k, c in f.to_names().items()}


def _summands(v: VirtualBundle) -> list[dict]:
    return [
        {"weight": w, "rank": b.rank, "connection": [[_form(f) for f in row] for row in b.A]}
        for w, b in v.summands
    ]


def _partition(atlas: Atlas, pu: PartitionOfUnity) -> list[str]:
    return [to_string(pu.functions[i]) for i in atlas.charts]


def _matrices(table) -> list[dict]:
    out = []
    for pair in sorted(table):
        rows = table[pair]
        out.append({
            "pair": list(pair),
            "re": [[to_string(e[0]) for e in row] for row in rows],
            "im": [[to_string(e[1]) for e in row] for row in rows],
        })
    return out


def to_document(scn: Scenario) -> dict:
    atlas = scn.atlas
    doc: dict[str, Any] = {"format": FORMAT_VERSION}
    meta: dict[str, Any] = {"name": scn.name, "k": scn.k}
    if scn.cocycle.labels:
        meta["labels"] = {str(i): float(v) for i, v in sorted(scn.cocycle.labels.items())}
    if scn.meta:
        meta["info"] = dict(scn.meta)
    doc["meta"] = meta
    doc["atlas"] = {
        "charts": [
            {"id": c.id, "coords": list(c.coords), "domain": [[a, b] for a, b in c.domain], "orientation": c.orientation}
            for c in atlas.charts.values()
        ],
        "overlaps": [
            {
                "i": ov.i,
                "j": ov.j,
                "domain_in_i": _box(ov.box_i),
                "domain_in_j": _box(ov.box_j),
                "to_i": [to_string(e) for e in ov.to_i],
                "to_j": [to_string(e) for e in ov.to_j],
            }
            for ov in (atlas.overlaps[k] for k in atlas.pairs())
        ],
        "triples": [list(t) for t in atlas.triples],
    }
    doc["partition"] = _partition(atlas, scn.pu)
    if scn.pu_alt is not None:
        doc["partition_alt"] = _partition(atlas, scn.pu_alt)
    dl = scn.deligne
    doc["deligne"] = {
        "sigma": [{"triple": list(t), "angle": to_string(e)} for t, e in sorted(dl.alpha.items())],
        "A": [{"pair": list(p), "form": _form(f)} for p, f in sorted(dl.A.items())],
        "B": [{"chart": i, "form": _form(f)} for i, f in sorted(dl.B.items())],
    }
    doc["bundles"] = [{"pair": list(p), "summands": _summands(v)} for p, v in sorted(scn.cocycle.E.items())]
    if scn.cut_bundles is not None:
        doc["cut_bundles"] = [{"chart": i, "summands": _summands(v)} for i, v in sorted(scn.cut_bundles.items())]
    if scn.homotopy is not None:
        h = scn.homotopy
        doc["homotopy"] = {
            "param": h.param,
            "interval": [h.t0, h.t1],
            "bundles": [{"pair": list(p), "summands": _summands(v)} for p, v in sorted(h.E.items())],
        }
    if scn.cycles:
        doc["cycles"] = [{"chart": c.chart, "param": c.param, "path": [to_string(e) for e in c.path]} for c in scn.cycles]
    if scn.matrix is not None:
        doc["matrix_cocycle"] = {"rank": scn.matrix.rank, "g": _matrices(scn.matrix.g), "f": _matrices(scn.matrix.f)}
    return doc


def dumps(doc: Mapping) -> str:
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def save(scn: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(to_document(scn)), encoding="utf-8")


# -- reading ------------------------------------------------------------------------


class _Reader:
    def __init__(self, doc: Mapping):
        self.doc = doc

    def expr(self, text: str, variables: Sequence[str], where: str) -> Expr:
        try:
            return parse(text, variables)
        except ExprSyntaxError as exc:
            raise ScenarioFormatError(f"{where}: {exc}") from None

    def chart(self, atlas: Atlas, cid: int, where: str) -> Chart:
        if cid not in atlas.charts:
            raise ScenarioFormatError(f"{where}: unknown chart {cid}")
        return atlas.charts[cid]

    def form(self, chart: Chart, data: Mapping[str, str], where: str) -> Form:
        terms = {}
        for key, text in data.items():
            names = [n.strip() for n in key.split("^")] if key.strip() else []
            unknown = [n for n in names if n not in chart.coords]
            if unknown:
                raise ScenarioFormatError(f"{where}: unknown coordinate(s) {unknown} in key {key!r}")
            if len(set(names)) != len(names):
                raise ScenarioFormatError(f"{where}: repeated coordinate in key {key!r}")
            idx = tuple(chart.coords.index(n) for n in names)
            if idx in terms:
                raise ScenarioFormatError(f"{where}: duplicate key {key!r}")
            terms[idx] = self.expr(text, chart.coords, f"{where}[{key!r}]")
        try:
            return Form(chart, terms)
        except (ValueError, IndexError) as exc:
            raise ScenarioFormatError(f"{where}: {exc}") from None

    def atlas(self) -> Atlas:
        data = self.doc["atlas"]
        charts = {}
        for c in data["charts"]:
            if c["id"] in charts:
                raise ScenarioFormatError(f"duplicate chart id {c['id']}")
            try:
                charts[c["id"]] = Chart(c["id"], tuple(c["coords"]), tuple(tuple(d) for d in c["domain"]), c.get("orientation", 1))
            except ValueError as exc:
                raise ScenarioFormatError(str(exc)) from None
        overlaps = {}
        for o in data["overlaps"]:
            i, j = o["i"], o["j"]
            where = f"overlap ({i},{j})"
            if i not in charts or j not in charts:
                raise ScenarioFormatError(f"{where}: unknown chart")
            if not i < j:
                raise ScenarioFormatError(f"{where}: need i < j")
            if (i, j) in overlaps:
                raise ScenarioFormatError(f"{where}: duplicate overlap")
            to_i = tuple(self.expr(t, charts[j].coords, f"{where}.to_i") for t in o["to_i"])
            to_j = tuple(self.expr(t, charts[i].coords, f"{where}.to_j") for t in o["to_j"])
            box_i = tuple(None if b is None else tuple(b) for b in o["domain_in_i"])
            box_j = tuple(None if b is None else tuple(b) for b in o["domain_in_j"])
            overlaps[(i, j)] = Overlap(i, j, box_i, box_j, to_i, to_j)
        try:
            return Atlas(charts, overlaps, tuple(tuple(t) for t in data["triples"]))
        except (ValueError, KeyError) as exc:
            raise ScenarioFormatError(f"atlas: {exc}") from None

    def partition(self, atlas: Atlas, key: str) -> PartitionOfUnity:
        items = self.doc[key]
        if len(items) != len(atlas.charts):
            raise ScenarioFormatError(f"{key}: need one function per chart")
        return PartitionOfUnity({
            cid: self.expr(text, chart.coords, f"{key}[{n}]")
            for n, (text, (cid, chart)) in enumerate(zip(items, atlas.charts.items()))
        })

    def deligne(self, atlas: Atlas) -> DeligneCocycle:
        data = self.doc["deligne"]
        alpha, A, B = {}, {}, {}
        for s in data["sigma"]:
            t = tuple(s["triple"])
            if tuple(sorted(t)) not in atlas.triples:
                raise ScenarioFormatError(f"sigma: {t} is not a declared triple")
            alpha[t] = self.expr(s["angle"], atlas.charts[max(t)].coords, f"sigma{t}")
        for a in data["A"]:
            i, j = a["pair"]
            if (i, j) not in atlas.overlaps:
                raise ScenarioFormatError(f"A: ({i},{j}) is not a declared overlap")
            A[(i, j)] = self.form(atlas.charts[j], a["form"], f"A({i},{j})")
        for b in data["B"]:
            chart = self.chart(atlas, b["chart"], "B")
            B[b["chart"]] = self.form(chart, b["form"], f"B({b['chart']})")
        return DeligneCocycle(atlas, alpha, A, B)

    def summands(self, chart: Chart, items, where: str) -> VirtualBundle:
        out = []
        for n, s in enumerate(items):
            r = s["rank"]
            rows = s["connection"]
            if len(rows) != r or any(len(row) != r for row in rows):
                raise ScenarioFormatError(f"{where}[{n}]: connection must be {r}x{r}")
            A = tuple(tuple(self.form(chart, f, f"{where}[{n}]") for f in row) for row in rows)
            try:
                out.append((s["weight"], ConnectionBundle(chart, A)))
            except ValueError as exc:
                raise ScenarioFormatError(f"{where}[{n}]: {exc}") from None
        return VirtualBundle(chart, tuple(out))

    def pair_bundles(self, atlas: Atlas, items, where: str) -> dict[tuple[int, int], VirtualBundle]:
        out = {}
        for e in items:
            i, j = e["pair"]
            if (i, j) not in atlas.overlaps:
                raise ScenarioFormatError(f"{where}: ({i},{j}) is not a declared overlap")
            out[(i, j)] = self.summands(atlas.charts[j], e["summands"], f"{where}({i},{j})")
        return out

    def matrices(self, atlas: Atlas, items, rank: int, where: str):
        out = {}
        for m in items:
            i, j = m["pair"]
            if (i, j) not in atlas.overlaps:
                raise ScenarioFormatError(f"{where}: ({i},{j}) is not a declared overlap")
            coords = atlas.charts[j].coords
            re, im = m["re"], m["im"]
            if len(re) != rank or len(im) != rank or any(len(r) != rank for r in re + im):
                raise ScenarioFormatError(f"{where}({i},{j}): matrices must be {rank}x{rank}")
            out[(i, j)] = [
                [(self.expr(re[a][b], coords, where), self.expr(im[a][b], coords, where)) for b in range(rank)]
                for a in range(rank)
            ]
        return out


def from_document(doc: Mapping) -> Scenario:
    validate(doc)
    r = _Reader(doc)
    atlas = r.atlas()
    pu = r.partition(atlas, "partition")
    pu_alt = r.partition(atlas, "partition_alt") if "partition_alt" in doc else None
    deligne = r.deligne(atlas)
    meta = doc["meta"]
    labels = {int(k): float(v) for k, v in meta.get("labels", {}).items()}
    try:
        cocycle = BundleCocycle(deligne, r.pair_bundles(atlas, doc["bundles"], "bundles"), labels)
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from None
    cut = None
    if "cut_bundles" in doc:
        cut = {}
        for e in doc["cut_bundles"]:
            chart = r.chart(atlas, e["chart"], "cut_bundles")
            cut[e["chart"]] = r.summands(chart, e["summands"], f"cut_bundles({e['chart']})")
    homotopy = None
    if "homotopy" in doc:
        h = doc["homotopy"]
        t0, t1 = h["interval"]
        if t0 == t1:
            raise ScenarioFormatError("homotopy interval is empty")
        if any(h["param"] in c.coords for c in atlas.charts.values()):
            raise ScenarioFormatError("homotopy parameter clashes with a chart coordinate")
        ext = extend_deligne(deligne, h["param"], (min(t0, t1), max(t0, t1)))
        homotopy = Homotopy(h["param"], float(t0), float(t1), r.pair_bundles(ext.atlas, h["bundles"], "homotopy.bundles"))
    cycles = []
    for n, c in enumerate(doc.get("cycles", [])):
        chart = r.chart(atlas, c["chart"], "cycles")
        if len(c["path"]) != chart.dim:
            raise ScenarioFormatError(f"cycles[{n}]: path needs {chart.dim} components")
        cycles.append(Cycle(c["chart"], tuple(r.expr(p, (c["param"],), f"cycles[{n}]") for p in c["path"]), c["param"]))
    matrix = None
    if "matrix_cocycle" in doc:
        mc = doc["matrix_cocycle"]
        rank = mc["rank"]
        matrix = MatrixCocycle(atlas, rank, r.matrices(atlas, mc["g"], rank, "g"), r.matrices(atlas, mc["f"], rank, "f"))
        missing = [p for p in atlas.pairs() if p not in matrix.g or p not in matrix.f]
        if missing:
            raise ScenarioFormatError(f"matrix_cocycle: missing pairs {missing}")
    scn = Scenario(meta["name"], atlas, pu, deligne, cocycle, meta.get("k"), cycles, dict(meta.get("info", {})), pu_alt, cut, homotopy, matrix)
    return scn


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from None
    return from_document(doc)


def load(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read {path}: {exc}") from None
    return loads(text)

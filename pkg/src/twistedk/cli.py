"""Command-line entry point.

Exit codes: 0 when every requested check passes, 1 when a check fails and 2
when the input cannot be read or does not validate.

Scenario files are JSON documents validated against ``scenario.schema.json``
(shipped inside the package; see ``twistedk.fileformat.schema()``).  Every
function is an expression string over the owning chart's coordinates.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from collections.abc import Sequence
from fractions import Fraction
from typing import Any

import numpy as np

from . import chern, deligne, lie, theta
from .atlas import TOL_QUADRATURE, check_partition, global_integrate
from .exterior import Chart, integrate_chart, wedge
from .expr import ExprSyntaxError
from .fileformat import ScenarioFormatError, dumps, load, save
from .report import CheckFailure, CheckReport
from .scenarios import (
    Scenario,
    Su2Scenario,
    TripleParams,
    build_su2,
    build_synthetic_triple,
    su2_closed_form_theta0,
    su2_cross_term,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def fmt_float(x: float) -> float | str:
    if isinstance(x, bool):
        return x
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return float(f"{x:.12g}")


def normalise(obj: Any) -> Any:
    """Round floats to 12 significant digits, recursively, keeping key order."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalise(v) for v in obj]
    return str(obj)


class Run:
    """Collects checks and values for one command."""

    def __init__(self, command: str, tol: float | None):
        self.command = command
        self.tol = tol
        self.checks: list[CheckReport] = []
        self.values: dict[str, Any] = {}

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol

    def add(self, rep: CheckReport) -> CheckReport:
        if self.tol is not None:
            rep.tolerance = self.tol
            rep.limits = {}
        self.checks.append(rep)
        return rep

    def scalar_check(self, name: str, residual: float, default_tol: float, **details) -> CheckReport:
        rep = CheckReport(name, self.tolerance(default_tol), {"residual": float(residual)}, dict(details))
        self.checks.append(rep)
        return rep

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return normalise({
            "command": self.command,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "values": self.values,
        })


def render_text(doc: dict) -> str:
    lines = [f"{doc['command']}: {'PASS' if doc['passed'] else 'FAIL'}"]
    for c in doc["checks"]:
        res = ", ".join(f"{k}={v}" for k, v in c["residuals"].items())
        flag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"  [{flag}] {c['check']} (tol {c['tolerance']}): {res}")
    for k, v in doc["values"].items():
        lines.append(f"  {k} = {json.dumps(v)}")
    return "\n".join(lines) + "\n"


# -- command bodies ---------------------------------------------------------------


def _load(args) -> Scenario:
    return load(args.file)


def _twist(scn: Scenario, run: Run):
    rep = run.add(deligne.check_deligne(scn.deligne, tol=run.tolerance(deligne.TOL_STRUCTURAL)))
    if not rep.passed:
        return None
    return scn.twist(check=True)


def cmd_check_deligne(args, run: Run) -> None:
    scn = _load(args)
    rep = run.add(deligne.check_deligne(scn.deligne, tol=run.tolerance(deligne.TOL_STRUCTURAL)))
    if rep.passed and scn.k:
        tw = scn.twist()
        run.values["H_integral"] = global_integrate(scn.atlas, tw.H, scn.pu, args.quad)


def cmd_check_cocycle(args, run: Run) -> None:
    scn = _load(args)
    tol = run.tolerance(chern.TOL_COCYCLE)
    run.add(check_partition(scn.atlas, scn.pu))
    run.add(chern.check_twisted_cocycle(scn.cocycle, tol=tol))
    run.add(chern.det_cocycle_check(scn.cocycle, tol=tol))


def cmd_check_matrix(args, run: Run) -> None:
    scn = _load(args)
    if scn.matrix is None:
        raise InputError("scenario has no matrix_cocycle section")
    run.add(deligne.check_matrix_cocycle(scn.matrix, tol=run.tolerance(deligne.TOL_STRUCTURAL), deligne=scn.deligne))


def _theta(scn: Scenario, run: Run, pu=None):
    tw = _twist(scn, run)
    if tw is None:
        return None, None
    rep = run.add(chern.check_twisted_cocycle(scn.cocycle, tw, tol=run.tolerance(chern.TOL_COCYCLE)))
    if not rep.passed:
        return tw, None
    th = theta.build_theta(scn.cocycle, tw, pu or scn.pu, strict=False, check_inputs=False)
    return tw, th


def cmd_theta(args, run: Run) -> None:
    scn = _load(args)
    run.add(check_partition(scn.atlas, scn.pu))
    tw, th = _theta(scn, run)
    if th is None:
        return
    tol = run.tolerance(theta.TOL_THETA)
    delta = theta.eta_delta_residual(scn.cocycle, th.eta)
    run.scalar_check("eta coboundary", max(delta.values(), default=0.0), theta.TOL_THETA, by_pair=delta)
    rep = th.report(tol)
    run.add(rep)
    run.values["theta_overlap_residual"] = th.overlap_residual
    run.values["theta_closure_residual"] = th.closure_residual


def _eta0(scn: Scenario, run: Run, tw, th, quad: int) -> float | None:
    if not scn.k:
        raise InputError("eta0 needs a nonzero level k in meta.k")
    try:
        res = theta.eta_zero_integral(th, tw, scn.pu, scn.cycles, quad)
    except CheckFailure as exc:
        run.scalar_check("theta_1 exactness", math.inf, theta.TOL_EXACT, message=str(exc))
        return None
    run.scalar_check("theta_1 exactness", max((abs(v) for v in res.cycle_integrals), default=0.0), theta.TOL_EXACT)
    run.values["theta3_integral"] = res.theta3_integral
    run.values["eta0_integral"] = res.value
    return res.value


def cmd_eta0(args, run: Run) -> None:
    scn = _load(args)
    tw, th = _theta(scn, run)
    if th is None:
        return
    run.add(th.report(run.tolerance(theta.TOL_THETA)))
    _eta0(scn, run, tw, th, args.quad)


def _corrections(scn: Scenario, kind: str, run: Run, tw) -> None:
    atlas = scn.atlas
    if kind == "partition":
        if scn.pu_alt is None:
            raise InputError("scenario has no partition_alt section")
        run.add(check_partition(atlas, scn.pu_alt))
        a = theta.build_theta(scn.cocycle, tw, scn.pu, strict=False, check_inputs=False)
        b = theta.build_theta(scn.cocycle, tw, scn.pu_alt, strict=False, check_inputs=False)
        eta = theta.correction_partition(scn.cocycle, tw, scn.pu, scn.pu_alt)
        run.scalar_check("partition defect", theta.defect_residual(atlas, a.theta, b.theta, eta, tw), theta.TOL_THETA)
        run.scalar_check("partition correction globality", theta.globality_residual(atlas, eta), 1e-9)
    elif kind == "cut":
        if scn.cut_bundles is None:
            raise InputError("scenario has no cut_bundles section")
        cc = theta.correction_cut(scn.cocycle, scn.cut_bundles, tw, scn.pu)
        a = theta.build_theta(scn.cocycle, tw, scn.pu, strict=False, check_inputs=False)
        b = theta.build_theta(cc.shifted, tw, scn.pu, strict=False, check_inputs=False)
        run.scalar_check("cut shift relation", cc.shift_residual, theta.TOL_THETA)
        run.scalar_check("cut defect", theta.defect_residual(atlas, a.theta, b.theta, cc.eta, tw), theta.TOL_THETA)
        run.scalar_check("cut correction globality", theta.globality_residual(atlas, cc.eta), 1e-9)
    elif kind == "homotopy":
        h = scn.homotopy
        if h is None:
            raise InputError("scenario has no homotopy section")
        family = h.family(scn.deligne)
        hc = theta.correction_homotopy(family, tw, scn.pu, h.param, h.t0, h.t1)
        a = theta.build_theta(theta.slice_cocycle(family, scn.deligne, h.param, h.t0), tw, scn.pu, strict=False)
        b = theta.build_theta(theta.slice_cocycle(family, scn.deligne, h.param, h.t1), tw, scn.pu, strict=False)
        run.scalar_check("homotopy defect", theta.defect_residual(atlas, a.theta, b.theta, hc.eta, tw), theta.TOL_HOMOTOPY)
        run.scalar_check("homotopy correction globality", theta.globality_residual(atlas, hc.eta), theta.TOL_HOMOTOPY)
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(kind)


def cmd_corrections(args, run: Run) -> None:
    scn = _load(args)
    tw = _twist(scn, run)
    if tw is None:
        return
    rep = run.add(chern.check_twisted_cocycle(scn.cocycle, tw, tol=run.tolerance(chern.TOL_COCYCLE)))
    if rep.passed:
        _corrections(scn, args.kind, run, tw)


def _full_suite(scn: Scenario, run: Run, quad: int) -> tuple:
    run.add(check_partition(scn.atlas, scn.pu))
    tw, th = _theta(scn, run)
    if th is None:
        return tw, th
    run.add(chern.det_cocycle_check(scn.cocycle, tol=run.tolerance(chern.TOL_COCYCLE)))
    delta = theta.eta_delta_residual(scn.cocycle, th.eta)
    run.scalar_check("eta coboundary", max(delta.values(), default=0.0), theta.TOL_THETA)
    run.add(th.report(run.tolerance(theta.TOL_THETA)))
    run.values["theta_overlap_residual"] = th.overlap_residual
    run.values["theta_closure_residual"] = th.closure_residual
    return tw, th


def cmd_su2(args, run: Run) -> None:
    try:
        s = Su2Scenario(args.k, Fraction(args.j), args.n, not args.no_separate)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    scn = build_su2(s)
    if args.emit:
        save(scn, args.emit)
    tw, th = _full_suite(scn, run, args.quad)
    if th is None:
        return
    h_int = global_integrate(scn.atlas, tw.H, scn.pu, args.quad)
    run.values["H_integral"] = h_int
    run.scalar_check("integral of H = k", abs(h_int - s.k), TOL_QUADRATURE)
    pts = scn.atlas.sample((0,), 0, 200, np.random.default_rng(0))
    run.scalar_check("closed form of Theta_0", (th.theta[0] - su2_closed_form_theta0(scn)).max_abs(pts), 1e-9)
    value = _eta0(scn, run, tw, th, args.quad)
    if value is None:
        return
    if s.n == 0:
        expected = 0.0
        c = 0.0
    else:
        c = su2_cross_term(s)
        expected = (-(s.m + s.n * s.k * c) / s.k) % 1.0
    run.values["expected_eta0"] = expected
    run.scalar_check("eta0 against -(m + n k c)/k mod 1", theta.mod1_distance(value, expected), TOL_QUADRATURE)
    if not s.separate:
        lhs = run.values["theta3_integral"]
        rhs = (s.m + s.n * s.k * c) if s.n else 0.0
        run.values["decomposition_check"] = {"theta3_integral": lhs, "m_plus_nkc": rhs, "c": c}
        run.scalar_check("decomposition identity", abs(lhs - rhs), TOL_QUADRATURE)
    else:
        run.values["decomposition_check"] = {"cross_term_c": c}


def cmd_synthetic_triple(args, run: Run) -> None:
    scn = build_synthetic_triple(TripleParams(matrix_rank=args.matrix_rank))
    if args.emit:
        save(scn, args.emit)
    tw, th = _full_suite(scn, run, args.quad)
    if th is None:
        return
    run.add(chern.trivialized_det_check(scn.cocycle))
    for kind in ("partition", "cut", "homotopy"):
        _corrections(scn, kind, run, tw)
    if scn.matrix is not None:
        run.add(deligne.check_matrix_cocycle(scn.matrix, tol=run.tolerance(deligne.TOL_STRUCTURAL), deligne=scn.deligne))


def cmd_lie(args, run: Run) -> None:
    if args.series.upper() != "A":
        raise InputError("only the A series is implemented")
    if args.rank < 1 or args.k < 1:
        raise InputError("rank and k must be positive")
    rs = lie.RootSystemA(args.rank)
    if args.subset:
        try:
            subset = tuple(int(x) for x in args.subset.split(","))
            weight = lie.level_weight(args.rank, args.k, subset)
        except ValueError as exc:
            raise InputError(f"bad subset: {exc}") from None
        run.values["subset"] = list(subset)
        run.values["dimension"] = lie.weyl_dim(rs, weight)
    table = lie.congruence_table(rs, args.k)
    run.values["dimensions"] = {",".join(map(str, s)): dim for s, dim in table}
    bound = lie.cyclic_order_bound(rs, args.k)
    run.values["bound"] = bound
    known = lie.known_cyclic_order(args.rank, args.k)
    if known is not None:
        run.values["known_order"] = known
        run.scalar_check("known order divides the bound", float(bound % known), 0.5)
        worst = max(((dim - 1) % known for _, dim in table), default=0)
        run.scalar_check("dim = 1 mod known order", float(worst), 0.5)
    if args.j is not None:
        if args.rank != 2:
            raise InputError("--j applies to SU(3) (rank 2) only")
        try:
            value, b = lie.su3_brane_degree_check(args.k, Fraction(args.j))
        except lie.InadmissibleError as exc:
            raise InputError(str(exc)) from None
        run.values["brane_degree_mod_bound"] = value


def cmd_rr_sphere(args, run: Run) -> None:
    chart = Chart(0, ("u", "phi"), ((0.0, math.pi), (0.0, 2.0 * math.pi)))
    L = chern.monopole(chart, "u", "phi", args.m)
    T = chern.levi_civita_s2(chart, "u", "phi")
    ch = chern.chern_character_bundle(L)
    td = chern.todd_series(chern.curvature(T), chart)
    integral = integrate_chart(wedge(ch, td).part(2), quad_points=args.quad)
    run.values["integral"] = integral
    run.values["expected"] = args.m + 1
    run.values["c1_TS2"] = integrate_chart(chern.first_chern_form(chern.VirtualBundle.of(T)), quad_points=args.quad)
    run.scalar_check("Riemann-Roch on S^2", abs(integral - (args.m + 1)), 1e-9)


# -- argument parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="override every check tolerance")
    common.add_argument("--quad", type=int, default=32, help="Gauss-Legendre points per axis and panel")
    common.add_argument("--report", choices=("json", "text"), default="text")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")

    p = argparse.ArgumentParser(prog="twistedk", description="Twisted differential K-theory cocycle toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_file(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("file")
        sp.set_defaults(fn=fn)
        return sp

    with_file("check-deligne", cmd_check_deligne, "check the Deligne cocycle conditions")
    with_file("check-cocycle", cmd_check_cocycle, "check the twisted bundle cocycle and determinant relations")
    with_file("check-matrix", cmd_check_matrix, "check the finite-rank matrix cocycle")
    with_file("theta", cmd_theta, "assemble Theta and report agreement/closure residuals")
    with_file("eta0", cmd_eta0, "eta-potential integral -(1/k) int Theta_3 mod 1")
    sp = with_file("corrections", cmd_corrections, "verify a correction form")
    sp.add_argument("--kind", choices=("partition", "cut", "homotopy"), required=True)

    sp = sub.add_parser("su2", parents=[common], help="run the built-in SU(2) scenario")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--j", type=str, default="0", help="spin, e.g. 0, 1/2, 1")
    sp.add_argument("--n", type=int, default=1, help="rank of the overlap bundle")
    sp.add_argument("--no-separate", action="store_true", help="put the H bump under the partition ramp")
    sp.add_argument("--emit", default=None, help="also write the scenario JSON here")
    sp.set_defaults(fn=cmd_su2)

    sp = sub.add_parser("synthetic-triple", parents=[common], help="run the built-in three-chart scenario")
    sp.add_argument("--matrix-rank", type=int, default=2, choices=(0, 2, 3, 4))
    sp.add_argument("--emit", default=None)
    sp.set_defaults(fn=cmd_synthetic_triple)

    sp = sub.add_parser("lie", parents=[common], help="Weyl dimensions and the cyclic-order bound")
    sp.add_argument("--series", default="A")
    sp.add_argument("--rank", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--subset", default=None, help="comma-separated fundamental weight indices")
    sp.add_argument("--j", default=None, help="SU(3) brane spin")
    sp.set_defaults(fn=cmd_lie)

    sp = sub.add_parser("rr-sphere", parents=[common], help="integral of ch(L_m) Td(S^2)")
    sp.add_argument("--m", type=int, required=True)
    sp.set_defaults(fn=cmd_rr_sphere)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    run = Run(args.command, args.tol)
    try:
        args.fn(args, run)
    except (ScenarioFormatError, InputError, ExprSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CheckFailure as exc:
        if exc.report is not None:
            run.add(exc.report)
        else:
            run.scalar_check("precondition", math.inf, 0.0, message=str(exc))
    doc = run.as_dict()
    text = dumps(doc) if args.report == "json" else render_text(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if run.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Twisted differential K-theory cocycles on explicit chart atlases."""

from __future__ import annotations

from .atlas import Atlas, Overlap, PartitionOfUnity, cech_delta, check_partition, global_integrate
from .chern import (
    BundleCocycle,
    ConnectionBundle,
    VirtualBundle,
    check_twisted_cocycle,
    chern_character,
    det_cocycle_check,
    trivialized_det_check,
)
from .deligne import DeligneCocycle, MatrixCocycle, TwistData, check_deligne, check_matrix_cocycle, curvature_H
from .exterior import Chart, Form, d, d_minus_H, integrate_chart, wedge
from .expr import parse, to_string
from .fileformat import load, loads, save
from .report import CheckFailure, CheckReport
from .scenarios import Scenario, Su2Scenario, build_su2, build_synthetic_triple
from .theta import build_theta, eta_zero_integral

__version__ = "0.1.0"

__all__ = [
    "Atlas", "BundleCocycle", "Chart", "CheckFailure", "CheckReport", "ConnectionBundle",
    "DeligneCocycle", "Form", "MatrixCocycle", "Overlap", "PartitionOfUnity", "Scenario",
    "Su2Scenario", "TwistData", "VirtualBundle", "build_su2", "build_synthetic_triple",
    "build_theta", "cech_delta", "check_deligne", "check_matrix_cocycle", "check_partition",
    "check_twisted_cocycle", "chern_character", "curvature_H", "d", "d_minus_H",
    "det_cocycle_check", "eta_zero_integral", "global_integrate", "integrate_chart", "load",
    "loads", "parse", "save", "to_string", "trivialized_det_check", "wedge",
]

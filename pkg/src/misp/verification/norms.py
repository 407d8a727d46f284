"""Error norms against the manufactured solution and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from ..femcore import VOIGT_METRIC, quadrature, reference_domain
from ..mesh import quality_report
from ..solve import Solution
from .manufactured import ManufacturedCase

# The triangle default is the interior 3-point rule; the published triangle
# error table was measured with it, the quadrilateral one with accurate rules.
DEFAULT_ERROR_DEGREE = {3: 2, 4: 10}

NORM_NAMES = ("err_w_h1", "err_beta_h1", "err_M_l2", "err_gamma_l2", "err_gamma_weighted")
NORM_LABELS = {
    "err_w_h1": "|w-w_h|_1",
    "err_beta_h1": "|beta-beta_h|_1",
    "err_M_l2": "||M-M_h||_0",
    "err_gamma_l2": "||gamma-gamma_h||_0",
    "err_gamma_weighted": "(t+h)||gamma-gamma_h||_0",
}


@dataclass(frozen=True)
class ErrorRow:
    element: str
    mesh: str
    t: float
    n: int
    h: float
    err_w_h1: float
    err_beta_h1: float
    err_M_l2: float
    err_gamma_l2: float
    err_gamma_weighted: float

    def as_dict(self) -> dict:
        return asdict(self)


def error_norms(
    solution: Solution,
    case: ManufacturedCase,
    degree: int | None = None,
    element: str = "",
) -> ErrorRow:
    """The five tabulated error measures for one solve.

    The shear weight (t + h) uses h = max element diameter. ``degree=None``
    picks the per-family default from ``DEFAULT_ERROR_DEGREE``.
    """
    mesh = solution.mesh
    nv = mesh.vertices_per_element
    if degree is None:
        degree = DEFAULT_ERROR_DEGREE[nv]
    rule = quadrature(reference_domain(nv), degree)
    geom, f = solution.evaluate(rule.points, rule.weights)
    x, y = geom.x[..., 0], geom.x[..., 1]
    dx = geom.dx

    def l2(diff):
        sq = diff**2
        sq = sq.reshape(sq.shape[0], sq.shape[1], -1).sum(-1)
        return math.sqrt(float(np.sum(sq * dx)))

    e_gw = case.grad_w(x, y) - f["grad_w"]
    e_gb = case.grad_beta(x, y) - f["grad_beta"]
    e_M = case.moment(x, y) - f["M"]
    e_g = case.gamma(x, y) - f["gamma"]
    err_M = math.sqrt(float(np.einsum("epa,ab,epb,ep->", e_M, VOIGT_METRIC, e_M, dx)))
    err_gamma = l2(e_g)
    h = quality_report(mesh).h
    t = solution.material.t
    return ErrorRow(
        element=element,
        mesh=mesh.name,
        t=t,
        n=mesh.n,
        h=1.0 / mesh.n if mesh.n else h,
        err_w_h1=l2(e_gw),
        err_beta_h1=l2(e_gb),
        err_M_l2=err_M,
        err_gamma_l2=err_gamma,
        err_gamma_weighted=(t + h) * err_gamma,
    )


def convergence_rate(errors: Sequence[float]) -> float:
    """Average rate log2(e_1 / e_k) / (k - 1) over a sequence of halvings of h."""
    e = np.asarray(errors, dtype=float)
    if e.size < 2:
        raise ValueError("need at least two error values for a rate")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be positive and finite")
    return float(np.log2(e[0] / e[-1]) / (e.size - 1))

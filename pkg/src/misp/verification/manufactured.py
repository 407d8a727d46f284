"""Polynomial manufactured solution for the clamped unit-square plate.

beta_1 = 100 y^3 (y-1)^3 x^2 (x-1)^2 (2x-1)
beta_2 = 100 x^3 (x-1)^3 y^2 (y-1)^2 (2y-1)
w      = 100 [ x^3 (x-1)^3 y^3 (y-1)^3 / 3
               - 2 t^2 / (5 (1-nu)) ( y^3 (y-1)^3 x (x-1) (5x^2-5x+1)
                                     + x^3 (x-1)^3 y (y-1) (5y^2-5y+1) ) ]

The load g is obtained symbolically from -lam t^-2 div(grad w - beta) = g,
and the closed form commonly quoted with this example is kept alongside
for comparison only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp

from ..femcore import MaterialParams

X, Y = sp.symbols("x y", real=True)


class ManufacturedSolutionError(RuntimeError):
    pass


def _exprs(material: MaterialParams):
    E, nu, t = (sp.nsimplify(material.E), sp.nsimplify(material.nu),
                sp.nsimplify(material.t))
    kappa = sp.nsimplify(material.kappa)
    x, y = X, Y
    beta1 = 100 * y**3 * (y - 1) ** 3 * x**2 * (x - 1) ** 2 * (2 * x - 1)
    beta2 = 100 * x**3 * (x - 1) ** 3 * y**2 * (y - 1) ** 2 * (2 * y - 1)
    w = 100 * (
        sp.Rational(1, 3) * x**3 * (x - 1) ** 3 * y**3 * (y - 1) ** 3
        - 2 * t**2 / (5 * (1 - nu)) * (
            y**3 * (y - 1) ** 3 * x * (x - 1) * (5 * x**2 - 5 * x + 1)
            + x**3 * (x - 1) ** 3 * y * (y - 1) * (5 * y**2 - 5 * y + 1)
        )
    )
    lam = kappa * E / (2 * (1 + nu))
    Dc = E / (12 * (1 - nu**2))
    eps = sp.Matrix([[sp.diff(beta1, x), (sp.diff(beta1, y) + sp.diff(beta2, x)) / 2],
                     [(sp.diff(beta1, y) + sp.diff(beta2, x)) / 2, sp.diff(beta2, y)]])
    Deps = Dc * ((1 - nu) * eps + nu * eps.trace() * sp.eye(2))
    M = (-Deps).applyfunc(sp.expand)
    shear_strain = sp.Matrix([sp.diff(w, x) - beta1, sp.diff(w, y) - beta2])
    gamma = (lam / t**2 * shear_strain).applyfunc(sp.expand)
    g = sp.expand(-(sp.diff(gamma[0], x) + sp.diff(gamma[1], y)))
    g_quoted = 200 * E / (1 - nu**2) * (
        x**3 * (x - 1) ** 3 * (5 * y**2 - 5 * y + 1)
        + y**3 * (y - 1) ** 3 * (5 * x**2 - 5 * x + 1)
        + x * (x - 1) * y * (y - 1) * (5 * x**2 - 5 * x + 1) * (5 * y**2 - 5 * y + 1)
    )
    return dict(w=w, beta1=beta1, beta2=beta2, M=M, gamma=gamma, g=g,
                g_quoted=g_quoted, lam=lam)


def _lamb(expr):
    f = sp.lambdify((X, Y), expr, "numpy")

    def call(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), np.broadcast(x, y).shape)

    return call


@dataclass(eq=False)
class ManufacturedCase:
    """Exact fields for a given material/thickness with numpy evaluators.

    Vector fields return arrays with a trailing axis of length 2, the moment
    returns Voigt (xx, yy, xy), gradients are [..., i, j] = d f_i / d x_j.
    """

    material: MaterialParams
    symbolic: dict = field(repr=False)

    @cached_property
    def _fns(self):
        s = self.symbolic
        w, b1, b2 = s["w"], s["beta1"], s["beta2"]
        M = s["M"]
        fns = {
            "w": _lamb(w),
            "w_x": _lamb(sp.diff(w, X)), "w_y": _lamb(sp.diff(w, Y)),
            "b1": _lamb(b1), "b2": _lamb(b2),
            "M_xx": _lamb(M[0, 0]), "M_yy": _lamb(M[1, 1]), "M_xy": _lamb(M[0, 1]),
            "gam_x": _lamb(s["gamma"][0]), "gam_y": _lamb(s["gamma"][1]),
            "g": _lamb(s["g"]), "g_quoted": _lamb(s["g_quoted"]),
        }
        for name, expr in (("b1", b1), ("b2", b2)):
            fns[name + "_x"] = _lamb(sp.diff(expr, X))
            fns[name + "_y"] = _lamb(sp.diff(expr, Y))
        return fns

    def w(self, x, y):
        return self._fns["w"](x, y)

    def grad_w(self, x, y):
        return np.stack([self._fns["w_x"](x, y), self._fns["w_y"](x, y)], -1)

    def beta(self, x, y):
        return np.stack([self._fns["b1"](x, y), self._fns["b2"](x, y)], -1)

    def grad_beta(self, x, y):
        f = self._fns
        return np.stack([
            np.stack([f["b1_x"](x, y), f["b1_y"](x, y)], -1),
            np.stack([f["b2_x"](x, y), f["b2_y"](x, y)], -1),
        ], -2)

    def moment(self, x, y):
        f = self._fns
        return np.stack([f["M_xx"](x, y), f["M_yy"](x, y), f["M_xy"](x, y)], -1)

    def gamma(self, x, y):
        return np.stack([self._fns["gam_x"](x, y), self._fns["gam_y"](x, y)], -1)

    def load(self, x, y):
        return self._fns["g"](x, y)

    def quoted_load(self, x, y):
        return self._fns["g_quoted"](x, y)

    def strong_residuals(self, x, y):
        """Residuals of both plate equations computed from the symbolic
        fields, with their term scales, as (r_a (.., 2), scale_a, r_b, scale_b)."""
        s = self.symbolic
        M, gam = s["M"], s["gamma"]
        div_M = [sp.diff(M[0, 0], X) + sp.diff(M[0, 1], Y),
                 sp.diff(M[1, 0], X) + sp.diff(M[1, 1], Y)]
        ra = np.stack([_lamb(div_M[i] - gam[i])(x, y) for i in range(2)], -1)
        sa = np.maximum(np.abs(np.stack([_lamb(div_M[i])(x, y) for i in range(2)], -1)),
                        np.abs(np.stack([_lamb(gam[i])(x, y) for i in range(2)], -1)))
        div_g = sp.diff(gam[0], X) + sp.diff(gam[1], Y)
        rb = _lamb(div_g + s["g"])(x, y)
        sb = np.abs(self.load(x, y))
        return ra, sa, rb, sb


def manufactured_case(material: MaterialParams, check: bool = True) -> ManufacturedCase:
    """Build the exact solution; optionally verify the strong form at sample points."""
    case = ManufacturedCase(material, _exprs(material))
    if check:
        rng = np.random.default_rng(0)
        pts = rng.uniform(0.0, 1.0, size=(50, 2))
        ra, sa, rb, sb = case.strong_residuals(pts[:, 0], pts[:, 1])
        rel_a = np.abs(ra) / np.maximum(sa, 1e-300)
        rel_b = np.abs(rb) / np.maximum(sb, 1e-300)
        worst = max(rel_a.max(), rel_b.max())
        if worst > 1e-8:
            k = int(np.argmax(np.maximum(rel_a.max(-1), rel_b)))
            raise ManufacturedSolutionError(
                f"strong-form residual {worst:.3e} at ({pts[k, 0]:.4f}, {pts[k, 1]:.4f})"
            )
    return case

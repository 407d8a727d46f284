"""Sparse solve of the condensed system and recovery of moments and shear."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import GlobalSystem, moment_basis_from_geometry
from .femcore import element_geometry

RESIDUAL_TOL = 1e-10


class SolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Factorization:
    """Symmetric-mode LU of an SPD matrix; with no off-diagonal pivoting the
    diagonal of U equals D in S = L D L^T, so positive pivots certify SPD."""

    lu: spla.SuperLU
    min_pivot: float
    max_pivot: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs)


def factorize(S) -> Factorization:
    S = sp.csc_matrix(S)
    try:
        lu = spla.splu(
            S,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise SolveError(f"factorization failed: {exc}") from exc
    pivots = lu.U.diagonal()
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise SolveError("factorization used off-diagonal pivots; matrix is not SPD")
    pmin, pmax = float(pivots.min()), float(pivots.max())
    if pmin <= 0.0:
        raise SolveError(f"matrix is not positive definite (smallest pivot {pmin:.3e})")
    return Factorization(lu, pmin, pmax)


def solve_spd(S, F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if not np.any(F):
        return np.zeros_like(F)
    fac = factorize(S)
    u = fac.solve(F)
    res = np.linalg.norm(S @ u - F)
    if res > RESIDUAL_TOL * np.linalg.norm(F):
        # one step of iterative refinement before giving up
        u = u + fac.solve(F - S @ u)
        res = np.linalg.norm(S @ u - F)
    if res > RESIDUAL_TOL * np.linalg.norm(F):
        raise SolveError(
            f"residual {res:.3e} exceeds {RESIDUAL_TOL:g} * |F| "
            f"(smallest pivot {fac.min_pivot:.3e})"
        )
    return u


def solve(system: GlobalSystem) -> np.ndarray:
    """Free-DOF displacement vector u with S u = F."""
    return solve_spd(system.S, system.F)


@dataclass(frozen=True, eq=False)
class Solution:
    """Discrete fields on a mesh.

    ``u`` holds all nodal DOFs interleaved (w, beta_1, beta_2), boundary
    values zero; ``m`` the moment coefficients per element.
    """

    system: GlobalSystem
    u: np.ndarray
    m: np.ndarray

    @property
    def mesh(self):
        return self.system.mesh

    @property
    def material(self):
        return self.system.material

    @property
    def w_nodal(self) -> np.ndarray:
        return self.u[0::3]

    @property
    def beta_nodal(self) -> np.ndarray:
        return self.u.reshape(-1, 3)[:, 1:]

    def local_u(self) -> np.ndarray:
        return self.u[self.system.local_dofs]

    def evaluate(self, ref, weights=None):
        """All fields at reference points of every element.

        Returns (geometry, fields) where fields has keys ``w`` (nel, p),
        ``grad_w`` (nel, p, 2), ``beta`` (nel, p, 2), ``grad_beta``
        (nel, p, 2, 2) with [i, j] = d beta_i / d x_j, ``M`` (nel, p, 3) in
        Voigt form and ``gamma`` = div_h M_h (nel, p, 2).
        """
        geom = element_geometry(self.mesh.element_coords(), ref, weights)
        ul = self.local_u().reshape(self.mesh.num_elements, -1, 3)
        mb = moment_basis_from_geometry(geom)
        fields = {
            "w": np.einsum("pn,en->ep", geom.N, ul[..., 0]),
            "grad_w": np.einsum("epni,en->epi", geom.grad, ul[..., 0]),
            "beta": np.einsum("pn,enc->epc", geom.N, ul[..., 1:]),
            "grad_beta": np.einsum("epni,enc->epci", geom.grad, ul[..., 1:]),
            "M": np.einsum("epia,ei->epa", mb.values, self.m),
            "gamma": np.einsum("epia,ei->epa", mb.div, self.m),
        }
        return geom, fields


def recover_fields(u_free: np.ndarray, system: GlobalSystem) -> Solution:
    """Moments m_K = G_K u_K from the condensed solution."""
    u = system.expand(u_free)
    m = np.einsum("eij,ej->ei", system.G, u[system.local_dofs])
    return Solution(system, u, m)

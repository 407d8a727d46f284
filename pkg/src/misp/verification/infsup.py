"""Numerical inf-sup constant of the coupling form in mesh-dependent norms.

With B the global b~ matrix (free displacement rows x moment columns),

    N_m : ||Q||_0^2 + (t+h)^2 ||div_h Q||_0^2          (block diagonal),
    N_u : ||eps(zeta)||_0^2 + (t+h)^-2 ||R_h(grad v - zeta)||_0^2,

the constant beta satisfies beta^2 = lambda_min(B N_m^-1 B^T, N_u), a dense
generalized symmetric eigenproblem. Both families are probed with these
norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..assembly import (
    DEFAULT_QUAD_DEGREE,
    AssemblyError,
    assemble,
    global_coupling,
    moment_basis_from_geometry,
    strain_basis,
)
from ..femcore import VOIGT_METRIC, MaterialParams, element_geometry, quadrature, reference_domain
from ..mesh import Mesh, quality_report
from ..reduction import reduction_matrix, tangential_basis

MAX_DENSE_DOFS = 4000


class InfSupError(RuntimeError):
    pass


@dataclass(frozen=True)
class InfSupReport:
    element: str
    mesh: str
    n: int
    t: float
    beta: float
    num_free: int


def _norm_blocks(mesh: Mesh, weight: float, quad_degree: int | None):
    xy = mesh.element_coords()
    nv = mesh.vertices_per_element
    rule = quadrature(reference_domain(nv), quad_degree or DEFAULT_QUAD_DEGREE[nv])
    geom = element_geometry(xy, rule.points, rule.weights)
    dx = geom.dx
    mb = moment_basis_from_geometry(geom)
    Nm = (np.einsum("epia,ab,epjb,ep->eij", mb.values, VOIGT_METRIC, mb.values, dx)
          + weight**2 * np.einsum("epia,epja,ep->eij", mb.div, mb.div, dx))
    eps = strain_basis(geom)
    E = np.einsum("epia,ab,epjb,ep->eij", eps, VOIGT_METRIC, eps, dx)
    psi = tangential_basis(xy).evaluate(rule.points)
    Mz = np.einsum("epsa,epra,ep->esr", psi, psi, dx)
    R = reduction_matrix(xy)
    Z = np.einsum("esi,esr,erj->eij", R, Mz, R)
    return Nm, E + Z / weight**2


def infsup_estimate(
    mesh: Mesh,
    material: MaterialParams,
    element: str = "",
    quad_degree: int | None = None,
) -> InfSupReport:
    """Smallest generalized singular value of b~ in the mesh-dependent norms."""
    try:
        glob = assemble(mesh, material, None, quad_degree)
    except AssemblyError as exc:
        raise InfSupError(f"cannot probe inf-sup: {exc}") from exc
    if glob.num_free > MAX_DENSE_DOFS:
        raise InfSupError(
            f"{glob.num_free} free DOFs exceeds the dense eigen-solve limit {MAX_DENSE_DOFS}"
        )
    weight = material.t + quality_report(mesh).h
    Nm_K, Nu_K = _norm_blocks(mesh, weight, quad_degree)

    try:
        L = np.linalg.cholesky(Nm_K)
    except np.linalg.LinAlgError as exc:
        raise InfSupError("moment norm Gram matrix is not positive definite") from exc
    # B N_m^{-1} B^T = sum_K (L_K^{-1} B_K^T)^T (L_K^{-1} B_K^T)
    Y = np.linalg.solve(L, np.swapaxes(glob.elements.B, 1, 2))
    B = global_coupling(glob, np.swapaxes(Y, 1, 2)).toarray()
    lhs = B @ B.T

    lmap = glob.dof_map[glob.local_dofs]
    keep = (lmap[:, :, None] >= 0) & (lmap[:, None, :] >= 0)
    rows = np.broadcast_to(lmap[:, :, None], keep.shape)[keep]
    cols = np.broadcast_to(lmap[:, None, :], keep.shape)[keep]
    Nu = sp.coo_matrix((Nu_K[keep], (rows, cols)), shape=lhs.shape).toarray()
    try:
        lam = sla.eigh(lhs, Nu, eigvals_only=True, subset_by_index=[0, 0])
    except np.linalg.LinAlgError as exc:
        raise InfSupError("displacement norm Gram matrix is not positive definite") from exc
    return InfSupReport(
        element=element,
        mesh=mesh.name,
        n=mesh.n,
        t=material.t,
        beta=math.sqrt(max(float(lam[0]), 0.0)),
        num_free=glob.num_free,
    )

"""Element blocks of the hybrid mixed scheme, static condensation and
global assembly of the clamped plate system.

Per element the discrete problem couples moment coefficients m (the
discontinuous M_h DOFs) with nodal displacements u = (w, beta_1, beta_2):

    A m + B^T u = 0,        B m = -f,

where A is the compliance block a(M, div M; Q, div Q), B holds
b~(Q, div Q; v, zeta) with rows indexed by displacement DOFs, and
f_j = int g phi_j. Eliminating m element by element gives the SPD system
S u = F with S = sum_K B_K A_K^{-1} B_K^T, and m_K = -A_K^{-1} B_K^T u_K.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .femcore import (
    VOIGT_METRIC,
    MaterialParams,
    element_geometry,
    quadrature,
    reference_domain,
)
from .mesh import Mesh
from .reduction import reduction_matrix, tangential_basis

DEFAULT_QUAD_DEGREE = {3: 4, 4: 5}
DEFAULT_LOAD_DEGREE = 10

LoadFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class AssemblyError(RuntimeError):
    pass


def _batch(vertices):
    v = np.asarray(vertices, dtype=float)
    return v[None] if v.ndim == 2 else v


@dataclass(frozen=True, eq=False)
class MomentBasis:
    """Moment basis fields of M_h at reference points.

    Field index i = 3*a + c pairs the scalar shape function a (P1 on
    triangles, mapped Q1 on quadrilaterals) with Voigt component c.
    ``values`` is (nel, npts, nm, 3) in Voigt form, ``div`` (nel, npts, nm, 2).
    """

    values: np.ndarray
    div: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[2]


def moment_basis_from_geometry(geom) -> MomentBasis:
    nel, npts, nv, _ = geom.grad.shape
    N = np.broadcast_to(geom.N, (nel, npts, nv))
    gx, gy = geom.grad[..., 0], geom.grad[..., 1]
    values = np.zeros((nel, npts, nv, 3, 3))
    div = np.zeros((nel, npts, nv, 3, 2))
    for c in range(3):
        values[..., c, c] = N
    div[..., 0, 0] = gx
    div[..., 1, 1] = gy
    div[..., 2, 0] = gy
    div[..., 2, 1] = gx
    return MomentBasis(values.reshape(nel, npts, 3 * nv, 3), div.reshape(nel, npts, 3 * nv, 2))


def moment_basis(vertices, ref) -> MomentBasis:
    return moment_basis_from_geometry(element_geometry(_batch(vertices), ref))


def strain_basis(geom) -> np.ndarray:
    """Voigt strains eps(zeta_j) of the local displacement basis, (nel, npts, 3nv, 3)."""
    nel, npts, nv, _ = geom.grad.shape
    gx, gy = geom.grad[..., 0], geom.grad[..., 1]
    eps = np.zeros((nel, npts, nv, 3, 3))
    eps[..., 1, 0] = gx
    eps[..., 1, 2] = 0.5 * gy
    eps[..., 2, 1] = gy
    eps[..., 2, 2] = 0.5 * gx
    return eps.reshape(nel, npts, 3 * nv, 3)


@dataclass(frozen=True, eq=False)
class ElementSystem:
    """Batched element blocks; leading axis runs over elements."""

    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    R: np.ndarray

    def condense(self):
        return condense(self)


def element_matrices(
    vertices,
    material: MaterialParams,
    load: LoadFunction | None = None,
    quad_degree: int | None = None,
    load_degree: int = DEFAULT_LOAD_DEGREE,
) -> ElementSystem:
    v = _batch(vertices)
    nel, nv = v.shape[:2]
    domain = reference_domain(nv)
    rule = quadrature(domain, quad_degree if quad_degree is not None
                      else DEFAULT_QUAD_DEGREE[nv])
    geom = element_geometry(v, rule.points, rule.weights)
    dx = geom.dx
    mb = moment_basis_from_geometry(geom)
    eps = strain_basis(geom)

    C = material.compliance_form
    shear = material.t**2 / material.lam
    A = (np.einsum("epia,ab,epjb,ep->eij", mb.values, C, mb.values, dx)
         + shear * np.einsum("epia,epja,ep->eij", mb.div, mb.div, dx))

    B_eps = np.einsum("epja,ab,epib,ep->eji", eps, VOIGT_METRIC, mb.values, dx)
    zbasis = tangential_basis(v)
    psi = zbasis.evaluate(rule.points)
    P = np.einsum("epia,epsa,ep->eis", mb.div, psi, dx)
    R = reduction_matrix(v)
    B = B_eps - np.einsum("esj,eis->eji", R, P)

    f = np.zeros((nel, 3 * nv))
    if load is not None:
        lrule = quadrature(domain, load_degree)
        lgeom = element_geometry(v, lrule.points, lrule.weights)
        g = np.asarray(load(lgeom.x[..., 0], lgeom.x[..., 1]), dtype=float)
        f[:, 0::3] = np.einsum("ep,pn,ep->en", np.broadcast_to(g, lgeom.dx.shape),
                               lgeom.N, lgeom.dx)
    return ElementSystem(A, B, f, R)


def condense(system: ElementSystem) -> tuple[np.ndarray, np.ndarray]:
    """Element Schur complements S_K = B A^{-1} B^T and recovery maps G_K = -A^{-1} B^T."""
    try:
        L = np.linalg.cholesky(system.A)
    except np.linalg.LinAlgError as exc:
        eig = np.linalg.eigvalsh(system.A)
        bad = int(np.argmin(eig[:, 0]))
        raise AssemblyError(
            f"moment block of element {bad} is not positive definite "
            f"(smallest eigenvalue {eig[bad, 0]:.3e}); check geometry and material"
        ) from exc
    Y = np.linalg.solve(L, np.swapaxes(system.B, 1, 2))
    S = np.einsum("eki,ekj->eij", Y, Y)
    G = -np.linalg.solve(np.swapaxes(L, 1, 2), Y)
    return S, G


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    """Condensed clamped system over the free (interior) nodal DOFs."""

    mesh: Mesh
    material: MaterialParams
    S: sp.csr_matrix
    F: np.ndarray
    free_dofs: np.ndarray
    dof_map: np.ndarray
    local_dofs: np.ndarray
    elements: ElementSystem
    G: np.ndarray

    @property
    def num_free(self) -> int:
        return len(self.free_dofs)

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Full nodal DOF vector (3 per node, boundary values zero)."""
        full = np.zeros(3 * self.mesh.num_nodes)
        full[self.free_dofs] = u_free
        return full


def local_dof_indices(mesh: Mesh) -> np.ndarray:
    return (3 * mesh.elements[:, :, None] + np.arange(3)).reshape(mesh.num_elements, -1)


def free_dof_indices(mesh: Mesh) -> np.ndarray:
    nodes = mesh.interior_nodes()
    return (3 * nodes[:, None] + np.arange(3)).ravel()


def assemble(
    mesh: Mesh,
    material: MaterialParams,
    load: LoadFunction | None = None,
    quad_degree: int | None = None,
    load_degree: int = DEFAULT_LOAD_DEGREE,
) -> GlobalSystem:
    """Assemble S u = F with F_j = +int g phi_j over the free DOFs.

    Elements are scattered in ascending index order, so repeated runs give
    bit-identical matrices.
    """
    free = free_dof_indices(mesh)
    if free.size == 0:
        raise AssemblyError(f"mesh {mesh.name or mesh.family} (n={mesh.n}) has no free DOFs")
    dof_map = np.full(3 * mesh.num_nodes, -1, dtype=np.int64)
    dof_map[free] = np.arange(free.size)

    system = element_matrices(mesh.element_coords(), material, load, quad_degree, load_degree)
    S_K, G_K = condense(system)
    ldofs = local_dof_indices(mesh)
    lmap = dof_map[ldofs]

    keep = (lmap[:, :, None] >= 0) & (lmap[:, None, :] >= 0)
    rows = np.broadcast_to(lmap[:, :, None], keep.shape)[keep]
    cols = np.broadcast_to(lmap[:, None, :], keep.shape)[keep]
    S = sp.coo_matrix((S_K[keep], (rows, cols)), shape=(free.size, free.size)).tocsr()

    F = np.zeros(free.size)
    fmask = lmap >= 0
    np.add.at(F, lmap[fmask], system.f[fmask])
    return GlobalSystem(mesh, material, S, F, free, dof_map, ldofs, system, G_K)


def global_coupling(glob: GlobalSystem, B_K: np.ndarray | None = None) -> sp.csr_matrix:
    """Scatter element coupling blocks into (free displacement DOFs) x (all moments).

    Moment DOF i of element K gets global index K * nm + i.
    """
    if B_K is None:
        B_K = glob.elements.B
    nel, _, nm = B_K.shape
    mdofs = np.arange(nel * nm).reshape(nel, nm)
    lmap = glob.dof_map[glob.local_dofs]
    keep = np.broadcast_to(lmap[:, :, None] >= 0, B_K.shape)
    rows = np.broadcast_to(lmap[:, :, None], B_K.shape)[keep]
    cols = np.broadcast_to(mdofs[:, None, :], B_K.shape)[keep]
    return sp.coo_matrix((B_K[keep], (rows, cols)), shape=(glob.num_free, nel * nm)).tocsr()


def saddle_point_system(glob: GlobalSystem) -> tuple[sp.csr_matrix, np.ndarray]:
    """Uncondensed system [[A, B^T], [B, 0]] [m; u] = [0; -F] over all moments
    and the free displacement DOFs. Used to cross-check the condensation."""
    A_K = glob.elements.A
    nel, nm = A_K.shape[:2]
    A = sp.block_diag(list(A_K), format="csr")
    B = global_coupling(glob)
    K = sp.bmat([[A, B.T], [B, None]], format="csr")
    rhs = np.concatenate([np.zeros(nel * nm), -glob.F])
    return K, rhs

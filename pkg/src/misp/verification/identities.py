"""Runtime checks of the algebraic properties of the reduction operator R_h.

* R_h(grad v_h) = grad v_h for every discrete deflection v_h (both families).
* rot(R_h zeta_h) = rot(zeta_h) element-wise for discrete rotations (triangles).
* ||eta - R_h eta||_0 = O(h) for a fixed smooth field eta.
* tangential continuity of the assembled R_h field across interior edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..femcore import element_geometry, quadrature, reference_domain
from ..mesh import Mesh, TRIANGULAR
from ..reduction import reduce_field, reduction_matrix, nodal_field, tangential_basis
from ..assembly import local_dof_indices


@dataclass(frozen=True)
class RhIdentityReport:
    """Maximum deviations over all trials, relative to the field scale.

    ``rot_deviation`` is None for quadrilateral meshes, where the rot
    identity is not part of the element's design.
    """

    trials: int
    grad_deviation: float
    rot_deviation: float | None
    continuity_deviation: float

    def passed(self, tol: float = 1e-11) -> bool:
        devs = [self.grad_deviation, self.continuity_deviation]
        if self.rot_deviation is not None:
            devs.append(self.rot_deviation)
        return max(devs) <= tol


def _sample_points(nv: int) -> np.ndarray:
    return quadrature(reference_domain(nv), 4).points


def _scale(a: np.ndarray) -> float:
    return max(float(np.abs(a).max()), 1e-300)


def rh_identity_check(mesh: Mesh, trials: int = 50, seed: int = 0) -> RhIdentityReport:
    """Apply R_h to random discrete fields and measure the identity defects.

    Each trial draws nodal (w, beta_1, beta_2) values uniformly in [-1, 1] on
    all nodes. Deviations are sup-norm differences at interior sample points,
    divided by the sup norm of the exact side.
    """
    rng = np.random.default_rng(seed)
    xy = mesh.element_coords()
    nv = mesh.vertices_per_element
    ref = _sample_points(nv)
    basis = tangential_basis(xy)
    psi = basis.evaluate(ref)
    rot_psi = basis.rot(ref) if mesh.family == TRIANGULAR else None
    R = reduction_matrix(xy)
    ldofs = local_dof_indices(mesh)
    signs = mesh.edge_signs

    grad_dev = rot_dev = cont_dev = 0.0
    for _ in range(trials):
        u = rng.uniform(-1.0, 1.0, 3 * mesh.num_nodes)
        uw = u.copy()
        uw[1::3] = uw[2::3] = 0.0
        ul = uw[ldofs]
        coeff = np.einsum("esj,ej->es", R, ul)
        exact, _ = nodal_field(xy, ul, ref)
        red = np.einsum("epsi,es->epi", psi, coeff)
        grad_dev = max(grad_dev, float(np.abs(red - exact).max()) / _scale(exact))

        ul = u[ldofs]
        coeff = np.einsum("esj,ej->es", R, ul)
        glob = np.zeros(mesh.num_edges)
        hits = np.zeros(mesh.num_edges)
        np.add.at(glob, mesh.element_edges, signs * coeff)
        np.add.at(hits, mesh.element_edges, 1.0)
        mean = glob / hits
        cont = np.abs(signs * coeff - mean[mesh.element_edges]).max()
        cont_dev = max(cont_dev, float(cont) / _scale(coeff))

        if rot_psi is not None:
            uz = u.copy()
            uz[0::3] = 0.0
            ul = uz[ldofs]
            coeff = np.einsum("esj,ej->es", R, ul)
            _, rot_exact = nodal_field(xy, ul, ref)
            rot_red = np.einsum("eps,es->ep", rot_psi, coeff)
            rot_dev = max(rot_dev, float(np.abs(rot_red - rot_exact).max()) / _scale(rot_exact))

    return RhIdentityReport(
        trials=trials,
        grad_deviation=grad_dev,
        rot_deviation=rot_dev if rot_psi is not None else None,
        continuity_deviation=cont_dev,
    )


def smooth_test_field(x: np.ndarray) -> np.ndarray:
    """A fixed smooth vector field on the unit square, (..., 2) -> (..., 2)."""
    X, Y = x[..., 0], x[..., 1]
    return np.stack([np.sin(math.pi * X) * np.cos(2.0 * Y) + Y**2,
                     np.exp(X) * np.sin(3.0 * Y) - X * Y], -1)


def rh_approximation_error(
    mesh: Mesh,
    field: Callable[[np.ndarray], np.ndarray] = smooth_test_field,
    degree: int = 8,
) -> float:
    """||eta - R_h eta||_0 over the mesh."""
    xy = mesh.element_coords()
    basis, coeff = reduce_field(field, xy)
    rule = quadrature(reference_domain(mesh.vertices_per_element), degree)
    geom = element_geometry(xy, rule.points, rule.weights)
    diff = field(geom.x) - basis.field(coeff, rule.points)
    return math.sqrt(float(np.einsum("epi,epi,ep->", diff, diff, geom.dx)))

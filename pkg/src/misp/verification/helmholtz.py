"""Discrete Helmholtz decomposition of div_h M_h on triangular meshes.

For Q_h in the P1 moment space, div_h Q_h is piecewise constant and splits as

    div_h Q_h = grad s_h + curl_h q_h,

with s_h continuous P1 vanishing on the boundary and q_h a Crouzeix-Raviart
function (P1 per element, continuous at edge midpoints) with zero mean,
curl_h q = (d_y q, -d_x q) element-wise. The witness finds (s_h, q_h) by
weighted least squares with the mean constraint and reports the residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..femcore import element_geometry
from ..assembly import moment_basis_from_geometry
from ..mesh import Mesh, TRIANGULAR

_CENTROID = np.array([[1.0 / 3.0, 1.0 / 3.0]])


class HelmholtzError(RuntimeError):
    pass


@dataclass(frozen=True)
class HelmholtzWitness:
    """s: nodal values of s_h (boundary zero); q: CR edge-midpoint values of q_h."""

    s: np.ndarray
    q: np.ndarray
    residual: float
    mean_q: float


def _div_constants(mesh: Mesh, m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    geom = element_geometry(mesh.element_coords(), _CENTROID, np.array([0.5]))
    div = moment_basis_from_geometry(geom).div[:, 0]
    d = np.einsum("eia,ei->ea", div, m)
    return d, geom.grad[:, 0], geom.dx[:, 0]


def helmholtz_witness(mesh: Mesh, m: np.ndarray) -> HelmholtzWitness:
    """Decompose div_h of the moment field with coefficients ``m`` (nel, 9)."""
    if mesh.family != TRIANGULAR:
        raise ValueError("the Helmholtz witness is defined for triangular meshes only")
    m = np.asarray(m, dtype=float).reshape(mesh.num_elements, -1)
    d, grad, area = _div_constants(mesh, m)
    nel = mesh.num_elements
    interior = mesh.interior_nodes()
    smap = np.full(mesh.num_nodes, -1)
    smap[interior] = np.arange(interior.size)
    ns, nq = interior.size, mesh.num_edges

    # Rows 2K, 2K+1 hold the x and y components on element K.
    G = np.zeros((2 * nel, ns + nq))
    rows = np.arange(nel)
    for a in range(3):
        col = smap[mesh.elements[:, a]]
        ok = col >= 0
        G[2 * rows[ok], col[ok]] += grad[ok, a, 0]
        G[2 * rows[ok] + 1, col[ok]] += grad[ok, a, 1]
    # CR basis of local edge k (vertices k, k+1) is 1 - 2 lambda_{k+2}.
    for k in range(3):
        col = ns + mesh.element_edges[:, k]
        g = -2.0 * grad[:, (k + 2) % 3]
        G[2 * rows, col] += g[:, 1]
        G[2 * rows + 1, col] += -g[:, 0]

    wts = np.repeat(np.sqrt(area), 2)
    Aw = G * wts[:, None]
    bw = d.ravel() * wts
    norm_d = float(np.linalg.norm(bw))
    mean_row = np.zeros(ns + nq)
    np.add.at(mean_row, ns + mesh.element_edges, np.repeat(area[:, None] / 3.0, 3, axis=1))
    if norm_d == 0.0:
        return HelmholtzWitness(np.zeros(mesh.num_nodes), np.zeros(nq), 0.0, 0.0)

    kkt = np.zeros((ns + nq + 1, ns + nq + 1))
    kkt[:-1, :-1] = Aw.T @ Aw
    kkt[:-1, -1] = kkt[-1, :-1] = mean_row
    rhs = np.concatenate([Aw.T @ bw, [0.0]])
    cond = np.linalg.cond(kkt)
    if not np.isfinite(cond) or cond > 1e14:
        raise HelmholtzError(
            f"normal equations singular (condition {cond:.3e}); basis construction is inconsistent"
        )
    sol = np.linalg.solve(kkt, rhs)[:-1]
    res = float(np.linalg.norm(Aw @ sol - bw)) / norm_d
    s = np.zeros(mesh.num_nodes)
    s[interior] = sol[:ns]
    q = sol[ns:]
    return HelmholtzWitness(s, q, res, float(mean_row[ns:] @ q))


def curl_cr(mesh: Mesh, q: np.ndarray) -> np.ndarray:
    """Element-wise curl_h of a CR function given by edge values, (nel, 2)."""
    xy = mesh.element_coords()
    geom = element_geometry(xy, _CENTROID, np.array([0.5]))
    grad = geom.grad[:, 0]
    gq = np.zeros((mesh.num_elements, 2))
    for k in range(3):
        gq += -2.0 * grad[:, (k + 2) % 3] * q[mesh.element_edges[:, k], None]
    return np.stack([gq[:, 1], -gq[:, 0]], -1)


def l2_piecewise_constant(mesh: Mesh, v: np.ndarray) -> float:
    xy = mesh.element_coords()
    area = element_geometry(xy, _CENTROID, np.array([0.5])).dx[:, 0]
    return math.sqrt(float(np.sum(area * (v**2).sum(-1))))

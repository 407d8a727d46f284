"""Tangential edge spaces Z_h and the reduction operator R_h.

On a triangle Z_h is the lowest-order edge space spanned by (1, 0), (0, 1)
and (y, -x); on a quadrilateral it is the covariant (DF^{-T}) image of
span{(1, 0), (eta, 0), (0, 1), (0, xi)}, the MITC4 shear space. R_h maps a
vector field to the member of Z_h with the same tangential integrals
int_e psi . t_e ds on every edge.

All routines are batched over elements: vertex arrays have shape
(nel, nv, 2). Local edge k runs from vertex k to vertex k+1 (mod nv); the
global orientation is recovered with ``Mesh.edge_signs``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .femcore import bilinear_map, gauss_line, shape_family_for, shape_eval

TRI_REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
QUAD_REF_VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def reference_vertices(nv: int) -> np.ndarray:
    return TRI_REF_VERTICES if nv == 3 else QUAD_REF_VERTICES


def _as_batch(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    return v[None] if v.ndim == 2 else v


def _span_fields(v: np.ndarray, ref: np.ndarray):
    """Spanning fields of Z_h at reference points: (nel, npts, nfields, 2)."""
    fmap = bilinear_map(v)
    nel, nv = v.shape[:2]
    npts = len(ref)
    if nv == 3:
        x = fmap(ref) - v.mean(axis=1)[:, None, :]
        out = np.zeros((nel, npts, 3, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        out[..., 2, 0] = x[..., 1]
        out[..., 2, 1] = -x[..., 0]
        return out
    q = np.zeros((npts, 4, 2))
    q[:, 0, 0] = 1.0
    q[:, 1, 0] = ref[:, 1]
    q[:, 2, 1] = 1.0
    q[:, 3, 1] = ref[:, 0]
    DFinv = np.linalg.inv(fmap.jacobian_matrix(ref))
    return np.einsum("epji,pkj->epki", DFinv, q)


def _span_rot(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """rot of the spanning fields, (nel, npts, nfields)."""
    nel, nv = v.shape[:2]
    if nv == 3:
        out = np.zeros((nel, len(ref), 3))
        out[..., 2] = 2.0
        return out
    J = bilinear_map(v).jacobian(ref)
    rot_ref = np.array([0.0, 1.0, 0.0, -1.0])
    return rot_ref[None, None, :] / J[..., None]


def _edge_points(nv: int, npts: int):
    """Reference points along each local edge, (nv, npts, 2), and line weights."""
    s, w = gauss_line(npts)
    rv = reference_vertices(nv)
    a, b = rv, np.roll(rv, -1, axis=0)
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    return pts, w


def _edge_vectors(v: np.ndarray) -> np.ndarray:
    return np.roll(v, -1, axis=1) - v


@dataclass(frozen=True, eq=False)
class TangentialBasis:
    """Edge-dual basis of Z_h on a batch of elements.

    Basis field e is ``sum_k coef[:, k, e] * span_k``; its tangential
    integral along local edge e' (in the local direction) is delta_{e e'}.
    """

    vertices: np.ndarray
    coef: np.ndarray

    @property
    def family(self) -> str:
        return "whitney-triangle" if self.vertices.shape[1] == 3 else "mitc4-quad"

    def evaluate(self, ref) -> np.ndarray:
        """Basis fields at reference points, (nel, npts, nedge, 2)."""
        ref = np.atleast_2d(np.asarray(ref, dtype=float))
        span = _span_fields(self.vertices, ref)
        return np.einsum("epki,eks->epsi", span, self.coef)

    def rot(self, ref) -> np.ndarray:
        """rot of each basis field, (nel, npts, nedge)."""
        ref = np.atleast_2d(np.asarray(ref, dtype=float))
        return np.einsum("epk,eks->eps", _span_rot(self.vertices, ref), self.coef)

    def field(self, coeffs: np.ndarray, ref) -> np.ndarray:
        """Field with local edge coefficients ``coeffs`` (nel, nedge)."""
        return np.einsum("epsi,es->epi", self.evaluate(ref), coeffs)


def tangential_basis(vertices) -> TangentialBasis:
    v = _as_batch(vertices)
    nv = v.shape[1]
    pts, w = _edge_points(nv, 2)
    tvec = _edge_vectors(v)
    # moments[e, k, j] = int_{edge j} span_k . t_j ds
    moments = np.empty((len(v), nv, nv))
    for j in range(nv):
        span = _span_fields(v, pts[j])
        moments[:, :, j] = np.einsum("epki,ei,p->ek", span, tvec[:, j], w)
    coef = np.linalg.inv(np.swapaxes(moments, 1, 2))
    return TangentialBasis(v, coef)


def edge_tangential_moments(
    field: Callable[[np.ndarray], np.ndarray], vertices, degree: int = 3
) -> np.ndarray:
    """Gauss approximation of int_e psi . t_e ds on every local edge.

    ``field`` maps physical points (..., 2) to vectors (..., 2). Edges are
    traversed in the local direction; the rule is exact when the tangential
    trace is a polynomial of degree <= ``degree`` along the edge.
    """
    v = _as_batch(vertices)
    s, w = gauss_line(degree // 2 + 1)
    tvec = _edge_vectors(v)
    x = v[:, :, None, :] + s[None, None, :, None] * tvec[:, :, None, :]
    vals = np.asarray(field(x))
    return np.einsum("ejpi,eji,p->ej", vals, tvec, w)


def reduction_matrix(vertices) -> np.ndarray:
    """Local matrices mapping displacement DOFs to Z_h edge coefficients.

    Local DOFs are interleaved per vertex as (w, beta_1, beta_2). Column
    3a+c holds the tangential edge moments of grad(v) - zeta for the nodal
    basis function of vertex a in component c; these moments are exact:
    for w they are endpoint differences, for beta they are half the edge
    vector since the trace of a vertex function is linear along the edge.
    Shape (nel, nv, 3 nv).
    """
    v = _as_batch(vertices)
    nel, nv = v.shape[:2]
    tvec = _edge_vectors(v)
    R = np.zeros((nel, nv, 3 * nv))
    for e in range(nv):
        a, b = e, (e + 1) % nv
        R[:, e, 3 * b] += 1.0
        R[:, e, 3 * a] -= 1.0
        for node in (a, b):
            R[:, e, 3 * node + 1] = -0.5 * tvec[:, e, 0]
            R[:, e, 3 * node + 2] = -0.5 * tvec[:, e, 1]
    return R


def reduce_field(field: Callable[[np.ndarray], np.ndarray], vertices,
                 degree: int = 9) -> tuple[TangentialBasis, np.ndarray]:
    """R_h applied to a smooth field: the basis and local edge coefficients."""
    basis = tangential_basis(vertices)
    return basis, edge_tangential_moments(field, basis.vertices, degree)


def nodal_field(vertices, local_dofs: np.ndarray, ref) -> tuple[np.ndarray, ...]:
    """grad(v) - zeta for local displacement DOFs, plus its rot.

    Returns (values (nel, npts, 2), rot zeta (nel, npts)). Helper for the
    identity checks; rot(grad v - zeta) = -rot(zeta).
    """
    v = _as_batch(vertices)
    nv = v.shape[1]
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    fmap = bilinear_map(v)
    _, dN = shape_eval(shape_family_for(nv), ref)
    DFinv = np.linalg.inv(fmap.jacobian_matrix(ref))
    grad = np.einsum("epji,pnj->epni", DFinv, dN)
    N, _ = shape_eval(shape_family_for(nv), ref)
    u = local_dofs.reshape(len(v), nv, 3)
    gw = np.einsum("epni,en->epi", grad, u[..., 0])
    zeta = np.einsum("pn,enc->epc", N, u[..., 1:])
    dzeta = np.einsum("epni,enc->epci", grad, u[..., 1:])
    rot_zeta = dzeta[..., 0, 1] - dzeta[..., 1, 0]
    return gw - zeta, -rot_zeta

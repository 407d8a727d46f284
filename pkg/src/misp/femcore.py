"""Shared finite element machinery: material law, element maps, shape
functions and quadrature.

Symmetric 2x2 tensors are stored in Voigt order (xx, yy, xy) with the
off-diagonal entry stored once. ``VOIGT_METRIC`` weights the xy slot so
that ``m @ VOIGT_METRIC @ q`` equals the full contraction M:Q.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

VOIGT_METRIC = np.diag([1.0, 1.0, 2.0])

P1_TRIANGLE = "P1-triangle"
Q1_QUAD = "Q1-quad"
REF_TRIANGLE = "triangle"
REF_SQUARE = "square"


class GeometryError(ValueError):
    """Raised for inverted or degenerate elements."""


# ---------------------------------------------------------------------------
# material
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaterialParams:
    E: float
    nu: float
    kappa: float
    t: float

    @property
    def lam(self) -> float:
        """Shear modulus scaled by the correction factor, kappa*E/(2(1+nu))."""
        return self.kappa * self.E / (2.0 * (1.0 + self.nu))

    @property
    def bending_stiffness(self) -> float:
        return self.E / (12.0 * (1.0 - self.nu**2))

    @property
    def D_voigt(self) -> np.ndarray:
        """Action of the bending tensor D on a Voigt vector."""
        nu = self.nu
        return self.bending_stiffness * np.array(
            [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 1.0 - nu]]
        )

    @property
    def Dinv_voigt(self) -> np.ndarray:
        nu = self.nu
        c = 1.0 / (self.bending_stiffness * (1.0 - nu**2))
        return c * np.array(
            [[1.0, -nu, 0.0], [-nu, 1.0, 0.0], [0.0, 0.0, 1.0 + nu]]
        )

    @property
    def compliance_form(self) -> np.ndarray:
        """Symmetric matrix C with m @ C @ q == M : D^{-1} Q."""
        return VOIGT_METRIC @ self.Dinv_voigt

    def apply_D(self, Q: np.ndarray) -> np.ndarray:
        """D applied to full 2x2 tensors (trailing axes)."""
        tr = np.trace(Q, axis1=-2, axis2=-1)[..., None, None]
        return self.bending_stiffness * ((1.0 - self.nu) * Q + self.nu * tr * np.eye(2))


def material_derive(E: float, nu: float, kappa: float, t: float) -> MaterialParams:
    if not E > 0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    if not 0.0 <= nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    if not kappa > 0:
        raise ValueError(f"shear correction factor must be positive, got {kappa}")
    if not t > 0:
        raise ValueError(f"thickness must be positive, got {t}")
    return MaterialParams(float(E), float(nu), float(kappa), float(t))


def voigt_to_tensor(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    out = np.empty(v.shape[:-1] + (2, 2))
    out[..., 0, 0] = v[..., 0]
    out[..., 1, 1] = v[..., 1]
    out[..., 0, 1] = out[..., 1, 0] = v[..., 2]
    return out


def tensor_to_voigt(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T)
    return np.stack([T[..., 0, 0], T[..., 1, 1], 0.5 * (T[..., 0, 1] + T[..., 1, 0])], -1)


# ---------------------------------------------------------------------------
# shape functions
# ---------------------------------------------------------------------------


def shape_eval(family: str, point) -> tuple[np.ndarray, np.ndarray]:
    """Basis values and reference gradients at reference points.

    ``point`` has shape (..., 2). Returns values (..., nv) and gradients
    (..., nv, 2) with respect to (xi, eta). P1 lives on the triangle
    (0,0), (1,0), (0,1); Q1 on [-1, 1]^2 with vertices ordered
    (-1,-1), (1,-1), (1,1), (-1,1).
    """
    p = np.asarray(point, dtype=float)
    xi, eta = p[..., 0], p[..., 1]
    one = np.ones_like(xi)
    if family == P1_TRIANGLE:
        N = np.stack([1.0 - xi - eta, xi, eta], -1)
        dN = np.broadcast_to(
            np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), xi.shape + (3, 2)
        ).copy()
        return N, dN
    if family == Q1_QUAD:
        sx = np.array([-1.0, 1.0, 1.0, -1.0])
        sy = np.array([-1.0, -1.0, 1.0, 1.0])
        fx = 1.0 + sx * xi[..., None]
        fy = 1.0 + sy * eta[..., None]
        N = 0.25 * fx * fy
        dN = 0.25 * np.stack([sx * fy, sy * fx * one[..., None]], -1)
        return N, dN
    raise ValueError(f"unknown shape family {family!r}")


# ---------------------------------------------------------------------------
# element maps
# ---------------------------------------------------------------------------

_QUAD_COEF = 0.25 * np.array(
    [[1, 1, 1, 1], [-1, 1, 1, -1], [-1, -1, 1, 1], [1, -1, 1, -1]], dtype=float
)


@dataclass(frozen=True, eq=False)
class BilinearMap:
    """x = a0 + a1 xi + a2 eta + a12 xi eta (y likewise with b), batched.

    ``a`` and ``b`` have shape (nel, 4) in the order (0, 1, 2, 12).
    Triangles use the same form with a12 = b12 = 0 on the unit reference
    triangle.
    """

    a: np.ndarray
    b: np.ndarray
    reference: str

    @property
    def J0(self):
        return self.a[:, 1] * self.b[:, 2] - self.a[:, 2] * self.b[:, 1]

    @property
    def J1(self):
        return self.a[:, 1] * self.b[:, 3] - self.a[:, 3] * self.b[:, 1]

    @property
    def J2(self):
        return self.a[:, 3] * self.b[:, 2] - self.a[:, 2] * self.b[:, 3]

    @property
    def is_affine(self) -> np.ndarray:
        return (self.a[:, 3] == 0) & (self.b[:, 3] == 0)

    def __call__(self, ref: np.ndarray) -> np.ndarray:
        """Physical points, shape (nel, npts, 2), for reference points (npts, 2)."""
        ref = np.atleast_2d(ref)
        basis = np.stack(
            [np.ones(len(ref)), ref[:, 0], ref[:, 1], ref[:, 0] * ref[:, 1]], -1
        )
        return np.stack([self.a @ basis.T, self.b @ basis.T], -1)

    def jacobian_matrix(self, ref: np.ndarray) -> np.ndarray:
        """DF, shape (nel, npts, 2, 2), entries d(x, y)/d(xi, eta)."""
        ref = np.atleast_2d(ref)
        xi, eta = ref[:, 0], ref[:, 1]
        a, b = self.a[:, None, :], self.b[:, None, :]
        DF = np.empty((len(self.a), len(ref), 2, 2))
        DF[..., 0, 0] = a[..., 1] + a[..., 3] * eta
        DF[..., 0, 1] = a[..., 2] + a[..., 3] * xi
        DF[..., 1, 0] = b[..., 1] + b[..., 3] * eta
        DF[..., 1, 1] = b[..., 2] + b[..., 3] * xi
        return DF

    def jacobian(self, ref: np.ndarray) -> np.ndarray:
        """det DF via J0 + J1 xi + J2 eta, shape (nel, npts)."""
        ref = np.atleast_2d(ref)
        return (self.J0[:, None] + self.J1[:, None] * ref[:, 0]
                + self.J2[:, None] * ref[:, 1])


def bilinear_map(vertices) -> BilinearMap:
    """Element map from vertex coordinates, (nv, 2) or (nel, nv, 2)."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 2:
        v = v[None]
    nel, nv, _ = v.shape
    if nv == 4:
        coef = np.einsum("ij,ejk->eik", _QUAD_COEF, v)
        fmap = BilinearMap(coef[..., 0].copy(), coef[..., 1].copy(), REF_SQUARE)
        corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
    elif nv == 3:
        coef = np.zeros((nel, 4, 2))
        coef[:, 0] = v[:, 0]
        coef[:, 1] = v[:, 1] - v[:, 0]
        coef[:, 2] = v[:, 2] - v[:, 0]
        fmap = BilinearMap(coef[..., 0].copy(), coef[..., 1].copy(), REF_TRIANGLE)
        corners = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    else:
        raise GeometryError(f"elements need 3 or 4 vertices, got {nv}")
    Jc = fmap.jacobian(corners)
    bad = np.flatnonzero((Jc <= 0).any(axis=1))
    if bad.size:
        raise GeometryError(
            f"element {int(bad[0])} is inverted or degenerate "
            f"(corner Jacobians {Jc[bad[0]].tolist()})"
        )
    return fmap


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Batched geometric data of a set of elements at fixed reference points.

    Arrays are indexed (element, point, ...). ``grad`` holds the physical
    gradients of the nodal basis, shape (nel, npts, nv, 2).
    """

    fmap: BilinearMap
    ref: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    DF: np.ndarray
    detJ: np.ndarray
    DFinv: np.ndarray
    N: np.ndarray
    grad: np.ndarray

    @property
    def dx(self) -> np.ndarray:
        """Physical quadrature weights, (nel, npts)."""
        return self.weights[None, :] * self.detJ


def shape_family_for(nv: int) -> str:
    return P1_TRIANGLE if nv == 3 else Q1_QUAD


def element_geometry(vertices, ref, weights=None) -> ElementGeometry:
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 2:
        v = v[None]
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    fmap = bilinear_map(v)
    DF = fmap.jacobian_matrix(ref)
    detJ = fmap.jacobian(ref)
    DFinv = np.linalg.inv(DF)
    N, dN = shape_eval(shape_family_for(v.shape[1]), ref)
    # grad_x N = DF^{-T} grad_ref N
    grad = np.einsum("epji,pnj->epni", DFinv, dN)
    w = np.ones(len(ref)) if weights is None else np.asarray(weights, dtype=float)
    return ElementGeometry(fmap, ref, w, fmap(ref), DF, detJ, DFinv, N, grad)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

MAX_DEGREE = 20


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int
    domain: str

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def quadrature(domain: str, degree: int) -> QuadratureRule:
    """Quadrature on the reference triangle or the reference square.

    Square rules are tensor Gauss-Legendre rules, exact for polynomials of
    degree <= ``degree`` in each variable separately. Triangle rules are
    exact for total degree <= ``degree``; above degree 2 they are
    collapsed-coordinate (Duffy) Gauss-Jacobi rules.
    """
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (0..{MAX_DEGREE})")
    if domain == REF_SQUARE:
        m = degree // 2 + 1
        g, w = np.polynomial.legendre.leggauss(m)
        xi, eta = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([xi.ravel(), eta.ravel()])
        wts = np.outer(w, w).ravel()
    elif domain == REF_TRIANGLE:
        if degree <= 1:
            pts = np.array([[1.0 / 3.0, 1.0 / 3.0]])
            wts = np.array([0.5])
        elif degree == 2:
            pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
            wts = np.full(3, 1.0 / 6.0)
        else:
            m = degree // 2 + 1
            # u carries the (1 - u) factor of the collapsed map
            u, wu = roots_jacobi(m, 1.0, 0.0)
            s, ws = np.polynomial.legendre.leggauss(m)
            u = 0.5 * (u + 1.0)
            wu = 0.25 * wu
            s = 0.5 * (s + 1.0)
            ws = 0.5 * ws
            U, S = np.meshgrid(u, s, indexing="ij")
            pts = np.column_stack([U.ravel(), ((1.0 - U) * S).ravel()])
            wts = np.outer(wu, ws).ravel()
    else:
        raise ValueError(f"unknown quadrature domain {domain!r}")
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, degree, domain)


def reference_domain(nv: int) -> str:
    return REF_TRIANGLE if nv == 3 else REF_SQUARE


def gauss_line(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    g, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (g + 1.0), 0.5 * w

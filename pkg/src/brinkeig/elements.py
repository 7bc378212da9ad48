# -*- coding: utf-8 -*-
"""Reference-triangle bases, quadrature rules, and affine push-forward.

The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.
Barycentric coordinates are lam1 = 1 - x - y, lam2 = x, lam3 = y, so the
local vertex order matches the barycentric order.  Local edge i is the
edge opposite vertex i.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class ElementError(ValueError):
    """Invalid element-level request (unsupported degree, bad points)."""


class GeometryError(ElementError):
    """Degenerate cell geometry (non-positive or vanishing Jacobian)."""


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature rule on the reference triangle.

    Attributes
    ----------
    degree : int
        Total polynomial degree integrated exactly.
    points : ndarray, shape (nq, 3)
        Barycentric coordinates of the quadrature points.
    weights : ndarray, shape (nq,)
        Weights in the reference measure; they sum to 1/2.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def xy(self):
        """Cartesian reference coordinates, shape (nq, 2)."""
        return self.points[:, 1:3]


def _orbit1():
    return [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]


def _orbit3(a):
    # one barycentric coordinate equals a, the other two (1-a)/2
    b = 0.5 * (1.0 - a)
    return [(a, b, b), (b, a, b), (b, b, a)]


def _orbit6(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


_SQRT15 = np.sqrt(15.0)

# Orbit tables; weights are normalized to sum to 1 (scaled by the reference
# area 1/2 when the rule is built).
_ORBIT_RULES = {
    1: [(1.0, _orbit1())],
    # edge midpoints
    2: [(1.0 / 3.0, _orbit3(0.0))],
    4: [
        (0.223381589678011, _orbit3(0.108103018168070)),
        (0.109951743655322, _orbit3(0.816847572980459)),
    ],
    5: [
        (9.0 / 40.0, _orbit1()),
        ((155.0 + _SQRT15) / 1200.0, _orbit3((9.0 - 2.0 * _SQRT15) / 21.0)),
        ((155.0 - _SQRT15) / 1200.0, _orbit3((9.0 + 2.0 * _SQRT15) / 21.0)),
    ],
    6: [
        (0.116786275726379, _orbit3(0.501426509658179)),
        (0.050844906370207, _orbit3(0.873821971016996)),
        (0.082851075618374, _orbit6(0.053145049844817, 0.310352451033784)),
    ],
}

# requested degree -> table entry (3 -> degree-4 rule: the classical 4-point
# degree-3 rule has a negative weight)
_DEGREE_ALIASES = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5, 6: 6}

MAX_QUADRATURE_DEGREE = 8


def _conical_rule(n):
    """Collapsed Gauss-Legendre x Gauss-Jacobi product rule, degree 2n-1."""
    xg, wg = roots_legendre(n)
    u = 0.5 * (xg + 1.0)
    wu = 0.5 * wg
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    v = 0.5 * (xj + 1.0)
    wv = 0.25 * wj
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (uu * (1.0 - vv)).ravel()
    y = vv.ravel()
    w = np.outer(wu, wv).ravel()
    return x, y, w


def _symmetrized_conical(degree):
    n = (degree + 2) // 2
    x, y, w = _conical_rule(n)
    bary = np.column_stack([1.0 - x - y, x, y])
    pts = []
    wts = []
    for perm in ((0, 1, 2), (1, 2, 0), (2, 0, 1), (0, 2, 1), (2, 1, 0), (1, 0, 2)):
        pts.append(bary[:, perm])
        wts.append(w / 6.0)
    return np.vstack(pts), np.concatenate(wts)


def quadrature(degree):
    """Return a quadrature rule exact for polynomials of total `degree`.

    Degrees 1 to 6 use symmetric orbit rules with positive weights; degrees
    7 and 8 use a symmetrized conical product rule.  Weights sum to the
    reference area 1/2.
    """
    if not isinstance(degree, (int, np.integer)):
        raise ElementError("quadrature degree must be an integer")
    if degree < 1 or degree > MAX_QUADRATURE_DEGREE:
        raise ElementError(
            "unsupported quadrature degree %d (supported 1..%d)"
            % (degree, MAX_QUADRATURE_DEGREE)
        )
    if degree in _DEGREE_ALIASES:
        table = _ORBIT_RULES[_DEGREE_ALIASES[degree]]
        pts = []
        wts = []
        for w, orbit in table:
            for p in orbit:
                pts.append(p)
                wts.append(w)
        points = np.array(pts, dtype=float)
        weights = 0.5 * np.array(wts, dtype=float)
    else:
        points, weights = _symmetrized_conical(degree)
    return QuadratureRule(degree=int(degree), points=points, weights=weights)


class RefBasis:
    """Scalar shape functions on the reference triangle.

    Subclasses provide vectorized value/gradient/Hessian evaluation at
    arbitrary reference points of shape (..., 2).
    """

    n = 0
    name = "abstract"

    def values(self, pts):
        raise NotImplementedError

    def gradients(self, pts):
        raise NotImplementedError

    def hessians(self, pts):
        """Second derivatives stacked as (..., n, 3) in (xx, xy, yy) order."""
        raise NotImplementedError

    def laplacians(self, pts):
        h = self.hessians(pts)
        return h[..., 0] + h[..., 2]


class P1Basis(RefBasis):
    """Linear Lagrange basis on the 3 vertices."""

    n = 3
    name = "p1"

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([1.0 - x - y, x, y], axis=-1)

    def gradients(self, pts):
        pts = np.asarray(pts, dtype=float)
        g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        return np.broadcast_to(g, pts.shape[:-1] + (3, 2)).copy()

    def hessians(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.zeros(pts.shape[:-1] + (3, 3))


def _bubble_value(x, y):
    return 27.0 * x * y * (1.0 - x - y)


class P1BubbleBasis(RefBasis):
    """P1 plus the cubic cell bubble 27*lam1*lam2*lam3 (value 1 at centroid)."""

    n = 4
    name = "p1_bubble"

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([1.0 - x - y, x, y, _bubble_value(x, y)], axis=-1)

    def gradients(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (4, 2))
        out[..., 0, :] = [-1.0, -1.0]
        out[..., 1, :] = [1.0, 0.0]
        out[..., 2, :] = [0.0, 1.0]
        out[..., 3, 0] = 27.0 * (y - 2.0 * x * y - y * y)
        out[..., 3, 1] = 27.0 * (x - x * x - 2.0 * x * y)
        return out

    def hessians(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (4, 3))
        out[..., 3, 0] = -54.0 * y
        out[..., 3, 1] = 27.0 * (1.0 - 2.0 * x - 2.0 * y)
        out[..., 3, 2] = -54.0 * x
        return out


class P2Basis(RefBasis):
    """Quadratic Lagrange basis: 3 vertices then 3 edge midpoints.

    Edge shape function i sits on the midpoint of the edge opposite
    vertex i, matching the mesh facet numbering.
    """

    n = 6
    name = "p2"

    def values(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        l1 = 1.0 - x - y
        return np.stack(
            [
                l1 * (2.0 * l1 - 1.0),
                x * (2.0 * x - 1.0),
                y * (2.0 * y - 1.0),
                4.0 * x * y,
                4.0 * y * l1,
                4.0 * x * l1,
            ],
            axis=-1,
        )

    def gradients(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (6, 2))
        out[..., 0, 0] = 4.0 * (x + y) - 3.0
        out[..., 0, 1] = 4.0 * (x + y) - 3.0
        out[..., 1, 0] = 4.0 * x - 1.0
        out[..., 2, 1] = 4.0 * y - 1.0
        out[..., 3, 0] = 4.0 * y
        out[..., 3, 1] = 4.0 * x
        out[..., 4, 0] = -4.0 * y
        out[..., 4, 1] = 4.0 * (1.0 - x - 2.0 * y)
        out[..., 5, 0] = 4.0 * (1.0 - 2.0 * x - y)
        out[..., 5, 1] = -4.0 * x
        return out

    def hessians(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1] + (6, 3))
        out[..., 0, :] = [4.0, 4.0, 4.0]
        out[..., 1, 0] = 4.0
        out[..., 2, 2] = 4.0
        out[..., 3, 1] = 4.0
        out[..., 4, 1] = -4.0
        out[..., 4, 2] = -8.0
        out[..., 5, 0] = -8.0
        out[..., 5, 1] = -4.0
        return out


@dataclass(frozen=True)
class Family:
    """A velocity/pressure element pairing.

    `order` is the velocity approximation order k (1 for the bubble-enriched
    linear family, 2 for quadratic velocities).  `quad_degree` is the single
    cell rule exact for every assembled term of the family (bubble mass is
    degree 6; quadratic mass is degree 4).
    """

    name: str
    velocity: RefBasis
    pressure: RefBasis
    order: int
    quad_degree: int


MINI = Family("mini", P1BubbleBasis(), P1Basis(), order=1, quad_degree=6)
TAYLOR_HOOD = Family("taylor_hood", P2Basis(), P1Basis(), order=2, quad_degree=4)

_FAMILIES = {f.name: f for f in (MINI, TAYLOR_HOOD)}


def family_by_name(name):
    try:
        return _FAMILIES[name]
    except KeyError:
        raise ElementError(
            "unknown element family %r (expected one of %s)"
            % (name, sorted(_FAMILIES))
        ) from None


def eval_basis(family, field, points):
    """Evaluate one scalar field of a family at reference points.

    Parameters
    ----------
    family : Family
    field : str
        'velocity_scalar' or 'pressure'.
    points : array_like, shape (..., 2)

    Returns
    -------
    values, gradients, laplacians : ndarray
        Shapes (..., n), (..., n, 2) and (..., n).
    """
    if field == "velocity_scalar":
        basis = family.velocity
    elif field == "pressure":
        basis = family.pressure
    else:
        raise ElementError("unknown field %r" % (field,))
    pts = np.asarray(points, dtype=float)
    return basis.values(pts), basis.gradients(pts), basis.laplacians(pts)


@dataclass(frozen=True)
class PushForward:
    """Basis tables mapped to physical cells at quadrature points.

    `values` is (nq, n) (affine cells share reference values), `gradients`
    is (nc, nq, n, 2), `laplacians` is (nc, nq, n) and `measure` is
    (nc, nq) holding |det J| times the reference weight.
    """

    values: np.ndarray
    gradients: np.ndarray
    laplacians: np.ndarray
    measure: np.ndarray
    jac: np.ndarray
    jac_inv: np.ndarray
    det: np.ndarray


def cell_jacobians(cell_vertices):
    """Affine map data for cells given as (nc, 3, 2) vertex coordinates."""
    v = np.asarray(cell_vertices, dtype=float)
    squeeze = v.ndim == 2
    if squeeze:
        v = v[None]
    jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(np.abs(det) < 1e-14):
        bad = int(np.argmin(np.abs(det)))
        raise GeometryError("degenerate cell %d: |det J| = %.3e" % (bad, abs(det[bad])))
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    return jac, inv, det


def push_forward(cell_vertices, basis, rule):
    """Map reference basis tables to physical cells.

    Gradients transform with the inverse-transpose Jacobian; Laplacians use
    the affine chain rule tr(J^{-1} J^{-T} H); the integration measure is
    |det J| times the reference weight.
    """
    v = np.asarray(cell_vertices, dtype=float)
    if v.ndim == 2:
        v = v[None]
    jac, inv, det = cell_jacobians(v)
    pts = rule.xy
    vals = basis.values(pts)
    g_ref = basis.gradients(pts)
    h_ref = basis.hessians(pts)
    # row-vector gradients: g_phys = g_ref @ J^{-1}
    g_phys = np.einsum("qnd,cde->cqne", g_ref, inv)
    c_mat = np.einsum("cde,cfe->cdf", inv, inv)  # J^{-1} J^{-T}
    lap = (
        c_mat[:, None, None, 0, 0] * h_ref[None, :, :, 0]
        + 2.0 * c_mat[:, None, None, 0, 1] * h_ref[None, :, :, 1]
        + c_mat[:, None, None, 1, 1] * h_ref[None, :, :, 2]
    )
    measure = np.abs(det)[:, None] * rule.weights[None, :]
    return PushForward(
        values=vals,
        gradients=g_phys,
        laplacians=lap,
        measure=measure,
        jac=jac,
        jac_inv=inv,
        det=det,
    )

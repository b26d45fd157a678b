"""Lagrange P1/P2 reference bases, quadrature on triangles and segments,
and affine reference-to-physical maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidArgumentError, SingularMapError

# Reference triangle: vertices (0,0), (1,0), (0,1).
P1_NODES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
P2_NODES = np.vstack([P1_NODES,
                      [[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]])


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Quadrature nodes and weights on a reference element.

    ``degree`` is the highest polynomial degree integrated exactly.
    Triangle weights sum to 1/2, segment weights to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


class ReferenceElement:
    """Scalar Lagrange element of degree 1 or 2 on the reference triangle."""

    def __init__(self, degree):
        if degree not in (1, 2):
            raise InvalidArgumentError(f"degree must be 1 or 2, got {degree}")
        self.degree = int(degree)
        self.nodes = P1_NODES if degree == 1 else P2_NODES
        self.n_basis = len(self.nodes)

    def tabulate(self, points):
        """Basis values and gradients at reference points.

        Parameters
        ----------
        points : (m, 2) array

        Returns
        -------
        values : (m, n_basis) array
        gradients : (m, n_basis, 2) array
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        lam = np.stack([1.0 - x - y, x, y], axis=1)   # barycentric
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

        if self.degree == 1:
            values = lam
            gradients = np.broadcast_to(dlam, (len(pts), 3, 2)).copy()
            return values, gradients

        values = np.empty((len(pts), 6))
        gradients = np.empty((len(pts), 6, 2))
        for v in range(3):
            values[:, v] = lam[:, v] * (2.0 * lam[:, v] - 1.0)
            gradients[:, v] = (4.0 * lam[:, v, None] - 1.0) * dlam[v]
        # edge bubbles: (v0,v1), (v1,v2), (v2,v0)
        for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            values[:, 3 + e] = 4.0 * lam[:, a] * lam[:, b]
            gradients[:, 3 + e] = 4.0 * (lam[:, a, None] * dlam[b]
                                         + lam[:, b, None] * dlam[a])
        return values, gradients


def reference_basis(degree, point):
    """Values and gradients of all shape functions at one reference point."""
    elem = ReferenceElement(degree)
    values, gradients = elem.tabulate(np.asarray(point, dtype=float)[None, :])
    return values[0], gradients[0]


def edge_shape_functions(degree, xi):
    """Trace shape functions on an edge, parameterized by xi in [0, 1].

    Node order is (start, end) for P1 and (start, midpoint, end) for P2.
    """
    xi = np.asarray(xi, dtype=float)
    if degree == 1:
        return np.stack([1.0 - xi, xi], axis=-1)
    if degree == 2:
        return np.stack([(1.0 - xi) * (1.0 - 2.0 * xi),
                         4.0 * xi * (1.0 - xi),
                         xi * (2.0 * xi - 1.0)], axis=-1)
    raise InvalidArgumentError(f"degree must be 1 or 2, got {degree}")


def _symmetric_orbit(a):
    # three barycentric permutations of (1-2a, a, a), expressed as (x, y)
    return [(a, a), (1.0 - 2.0 * a, a), (a, 1.0 - 2.0 * a)]


def _full_orbit(a, b):
    c = 1.0 - a - b
    bary = {(a, b), (a, c), (b, a), (b, c), (c, a), (c, b)}
    return sorted(bary)


def _triangle_rules():
    third = 1.0 / 3.0
    rules = {}
    rules[1] = ([(third, third)], [1.0])
    rules[2] = (_symmetric_orbit(1.0 / 6.0), [third] * 3)
    # 6-point rule, exact to degree 4
    pts4 = (_symmetric_orbit(0.445948490915965)
            + _symmetric_orbit(0.091576213509771))
    wts4 = [0.223381589678011] * 3 + [0.109951743655322] * 3
    rules[4] = (pts4, wts4)
    # 7-point rule, exact to degree 5
    pts5 = ([(third, third)]
            + _symmetric_orbit(0.470142064105115)
            + _symmetric_orbit(0.101286507323456))
    wts5 = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
    rules[5] = (pts5, wts5)
    # 12-point rule, exact to degree 6
    pts6 = (_symmetric_orbit(0.063089014491502)
            + _symmetric_orbit(0.249286745170910)
            + _full_orbit(0.310352451033785, 0.053145049844816))
    wts6 = ([0.050844906370207] * 3 + [0.116786275726379] * 3
            + [0.082851075618374] * 6)
    rules[6] = (pts6, wts6)
    return rules


_TRIANGLE_RULES = _triangle_rules()
MAX_TRIANGLE_ORDER = max(_TRIANGLE_RULES)


def quadrature_triangle(order):
    """Rule on the reference triangle, exact for polynomials of ``order``.

    The returned rule may exceed the requested exactness (degree 3
    requests are served by the degree-4 rule, which has positive weights).
    """
    if not 1 <= order <= MAX_TRIANGLE_ORDER:
        raise InvalidArgumentError(
            f"triangle quadrature order must be in [1, {MAX_TRIANGLE_ORDER}],"
            f" got {order}")
    degree = min(d for d in _TRIANGLE_RULES if d >= order)
    pts, wts = _TRIANGLE_RULES[degree]
    return QuadratureRule(points=np.array(pts, dtype=float),
                          weights=0.5 * np.array(wts, dtype=float),
                          degree=degree)


def quadrature_segment(order):
    """Gauss rule on [0, 1], exact for polynomials of degree ``order``."""
    if order < 1:
        raise InvalidArgumentError(f"segment order must be >= 1, got {order}")
    n = (order + 2) // 2
    xi, w = leggauss(n)
    return QuadratureRule(points=0.5 * (xi + 1.0), weights=0.5 * w,
                          degree=2 * n - 1)


def collapsed_triangle_rule(n):
    """Product-Gauss rule on the reference triangle via the collapsed
    square map (x, y) = (xi, eta (1 - xi)).

    Exact for bivariate polynomials up to degree 2n - 2. Used where the
    integrand is not polynomial (error norms); independent of the
    symmetric rule tables above.
    """
    xi, wx = leggauss(n)
    xi = 0.5 * (xi + 1.0)
    wx = 0.5 * wx
    X, Y = np.meshgrid(xi, xi, indexing="ij")
    px = X.ravel()
    py = (Y * (1.0 - X)).ravel()
    w = (np.outer(wx, wx) * (1.0 - X)).ravel()
    return QuadratureRule(points=np.column_stack([px, py]), weights=w,
                          degree=2 * n - 2)


def map_to_physical(tri_nodes, points):
    """Affine map from the reference triangle onto a physical one.

    Parameters
    ----------
    tri_nodes : (3, 2) array
        Physical vertex coordinates.
    points : (m, 2) array
        Reference coordinates.

    Returns
    -------
    physical : (m, 2) array
    jacobian : (2, 2) array
    det : float
        Absolute Jacobian determinant (twice the triangle area).
    """
    v = np.asarray(tri_nodes, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    jac = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(det) < 1e-300:
        raise SingularMapError("triangle has zero area")
    physical = v[0] + pts @ jac.T
    return physical, jac, abs(det)

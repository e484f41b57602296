"""Local function spaces, modal bases, and Lagrange interpolation.

Each element kind carries a function space of degree ``p`` whose dimension
equals the node count of the element.  The default "orthogonal" mode uses
orthonormal modal bases: tensor Legendre products on line/quad/hex, the
collapsed-coordinate simplex bases on triangle and tetrahedron, a
triangle-times-Legendre product on the prism, and the rational
polynomial-trace space on the pyramid.  A "monomial" mode exists for
debugging; it spans the same spaces but conditions badly with degree.

Basis gradients are implemented analytically for every kind, which is what
makes the analytic objective gradient of the optimizer possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import UnisolvencyError
from .geometry import ElementKind, node_count
from .symmetry import NodalDistribution

__all__ = [
    "FunctionSpace",
    "VandermondeMatrix",
    "space_dimension",
    "jacobi",
    "jacobi_derivative",
    "basis_eval",
    "basis_eval_many",
    "basis_grad_many",
    "vandermonde",
    "lagrange_eval",
    "LagrangeInterpolator",
    "UNISOLVENCY_CONDITION_LIMIT",
]

UNISOLVENCY_CONDITION_LIMIT = 1e12
_COLLAPSE_EPS = 1e-13


def space_dimension(kind: ElementKind, p: int) -> int:
    """Dimension of the degree-``p`` space; equals the element node count."""
    return node_count(kind, p)


@dataclass(frozen=True)
class FunctionSpace:
    kind: ElementKind
    degree: int
    mode: str = "orthogonal"  # "orthogonal" | "monomial"

    def __post_init__(self):
        if self.mode not in ("orthogonal", "monomial"):
            raise ValueError(f"unknown basis mode {self.mode!r}")
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")

    @property
    def dim(self):
        return space_dimension(self.kind, self.degree)


def jacobi(n, a, b, x):
    """Jacobi polynomial P_n^{(a,b)} by the three-term recurrence.

    Standard normalization (P_n(1) = binom(n+a, n)); vectorized in ``x``.
    """
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x)
    p_prev = np.ones_like(x)
    p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x
    for m in range(2, n + 1):
        c1 = 2.0 * m * (m + a + b) * (2.0 * m + a + b - 2.0)
        c2 = (2.0 * m + a + b - 1.0) * (a * a - b * b)
        c3 = (
            (2.0 * m + a + b - 2.0)
            * (2.0 * m + a + b - 1.0)
            * (2.0 * m + a + b)
        )
        c4 = 2.0 * (m + a - 1.0) * (m + b - 1.0) * (2.0 * m + a + b)
        p, p_prev = ((c2 + c3 * x) * p - c4 * p_prev) / c1, p
    return p


def jacobi_derivative(n, a, b, x):
    """First derivative of P_n^{(a,b)}."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    return 0.5 * (n + a + b + 1.0) * jacobi(n - 1, a + 1.0, b + 1.0, x)


def _jacobi_norm(n, a, b):
    """L2 norm of P_n^{(a,b)} under the weight (1-x)^a (1+x)^b on [-1, 1]."""
    num = (
        (a + b + 1.0) * math.log(2.0)
        + math.lgamma(n + a + 1.0)
        + math.lgamma(n + b + 1.0)
        - math.lgamma(n + a + b + 1.0)
        - math.lgamma(n + 1.0)
    )
    return math.sqrt(math.exp(num) / (2.0 * n + a + b + 1.0))


def _njacobi(n, a, b, x):
    return jacobi(n, a, b, x) / _jacobi_norm(n, a, b)


def _njacobi_derivative(n, a, b, x):
    return jacobi_derivative(n, a, b, x) / _jacobi_norm(n, a, b)


def _pow_or_zero(base, e):
    """base**e, with negative exponents mapped to 0.

    Negative exponents only appear multiplied by vanishing coefficients in
    the gradient formulas below; mapping them to zero avoids inf*0.
    """
    if e < 0:
        return np.zeros_like(base)
    if e == 0:
        return np.ones_like(base)
    return base**e


# ---------------------------------------------------------------------------
# Index sets
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _index_set(kind, p):
    kind = ElementKind(kind)
    if kind is ElementKind.LINE:
        return tuple((i,) for i in range(p + 1))
    if kind is ElementKind.QUADRILATERAL:
        return tuple((i, j) for i in range(p + 1) for j in range(p + 1))
    if kind is ElementKind.HEXAHEDRON:
        return tuple(
            (i, j, k)
            for i in range(p + 1)
            for j in range(p + 1)
            for k in range(p + 1)
        )
    if kind is ElementKind.TRIANGLE:
        return tuple((i, j) for i in range(p + 1) for j in range(p + 1 - i))
    if kind is ElementKind.TETRAHEDRON:
        return tuple(
            (i, j, k)
            for i in range(p + 1)
            for j in range(p + 1 - i)
            for k in range(p + 1 - i - j)
        )
    if kind is ElementKind.PRISM:
        return tuple(
            (i, j, k)
            for i in range(p + 1)
            for j in range(p + 1 - i)
            for k in range(p + 1)
        )
    if kind is ElementKind.PYRAMID:
        return tuple(
            (i, j, k)
            for i in range(p + 1)
            for j in range(p + 1)
            for k in range(p + 1 - max(i, j))
        )
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# Collapsed coordinates for the simplex bases
# ---------------------------------------------------------------------------


def _collapse_ratio(num, denom):
    """(num / denom) where |denom| is meaningful, -1 at the singular limit."""
    ok = np.abs(denom) > _COLLAPSE_EPS
    safe = np.where(ok, denom, 1.0)
    return np.where(ok, num / safe - 1.0, -1.0)


def _tri_collapse(x, y):
    return _collapse_ratio(2.0 * (1.0 + x), 1.0 - y), y


def _tet_collapse(x, y, z):
    a = _collapse_ratio(2.0 * (1.0 + x), -(y + z))
    b = _collapse_ratio(2.0 * (1.0 + y), 1.0 - z)
    return a, b, z


# ---------------------------------------------------------------------------
# Orthogonal-mode evaluation
# ---------------------------------------------------------------------------


def _eval_line(p, pts):
    x = pts[:, 0]
    return np.column_stack([_njacobi(i, 0.0, 0.0, x) for i in range(p + 1)])


def _eval_tensor(kind, p, pts):
    cols = [
        np.column_stack([_njacobi(i, 0.0, 0.0, pts[:, d]) for i in range(p + 1)])
        for d in range(pts.shape[1])
    ]
    idx = _index_set(kind, p)
    out = np.empty((pts.shape[0], len(idx)))
    for col, ids in enumerate(idx):
        v = cols[0][:, ids[0]]
        for d in range(1, len(ids)):
            v = v * cols[d][:, ids[d]]
        out[:, col] = v
    return out


def _tri_modes(p, a, b):
    """Values of the orthonormal triangle modes at collapsed coords (a, b)."""
    idx = _index_set(ElementKind.TRIANGLE, p)
    fa = {i: _njacobi(i, 0.0, 0.0, a) for i in range(p + 1)}
    out = np.empty((a.size, len(idx)))
    one_m_b = 1.0 - b
    for col, (i, j) in enumerate(idx):
        gb = _njacobi(j, 2.0 * i + 1.0, 0.0, b)
        out[:, col] = math.sqrt(2.0) * fa[i] * gb * _pow_or_zero(one_m_b, i)
    return out


def _eval_triangle(p, pts):
    a, b = _tri_collapse(pts[:, 0], pts[:, 1])
    return _tri_modes(p, a, b)


def _eval_tetrahedron(p, pts):
    a, b, c = _tet_collapse(pts[:, 0], pts[:, 1], pts[:, 2])
    idx = _index_set(ElementKind.TETRAHEDRON, p)
    out = np.empty((pts.shape[0], len(idx)))
    pb = 0.5 * (1.0 - b)
    pc = 0.5 * (1.0 - c)
    for col, (i, j, k) in enumerate(idx):
        fa = _njacobi(i, 0.0, 0.0, a)
        gb = _njacobi(j, 2.0 * i + 1.0, 0.0, b)
        hc = _njacobi(k, 2.0 * (i + j) + 2.0, 0.0, c)
        amp = 2.0 * math.sqrt(2.0) * 2.0 ** (2 * i + j)
        out[:, col] = (
            amp * fa * gb * hc * _pow_or_zero(pb, i) * _pow_or_zero(pc, i + j)
        )
    return out


def _eval_prism(p, pts):
    tri = _eval_triangle(p, pts[:, :2])
    tri_idx = _index_set(ElementKind.TRIANGLE, p)
    tri_col = {ij: n for n, ij in enumerate(tri_idx)}
    leg = np.column_stack(
        [_njacobi(k, 0.0, 0.0, pts[:, 2]) for k in range(p + 1)]
    )
    idx = _index_set(ElementKind.PRISM, p)
    out = np.empty((pts.shape[0], len(idx)))
    for col, (i, j, k) in enumerate(idx):
        out[:, col] = tri[:, tri_col[(i, j)]] * leg[:, k]
    return out


def _pyramid_uvw(pts):
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    w = 0.5 * (1.0 - z)
    safe = np.where(w > _COLLAPSE_EPS, w, 1.0)
    u = np.where(w > _COLLAPSE_EPS, x / safe, 0.0)
    v = np.where(w > _COLLAPSE_EPS, y / safe, 0.0)
    return u, v, w, z


def _pyramid_norm(i, j, k):
    c = max(i, j)
    return math.sqrt(8.0 / ((2 * i + 1) * (2 * j + 1) * (2 * k + 2 * c + 3)))


def _eval_pyramid(p, pts):
    u, v, w, z = _pyramid_uvw(pts)
    idx = _index_set(ElementKind.PYRAMID, p)
    out = np.empty((pts.shape[0], len(idx)))
    fu = {i: jacobi(i, 0.0, 0.0, u) for i in range(p + 1)}
    fv = {j: jacobi(j, 0.0, 0.0, v) for j in range(p + 1)}
    for col, (i, j, k) in enumerate(idx):
        c = max(i, j)
        hk = jacobi(k, 2.0 * (c + 1.0), 0.0, z)
        out[:, col] = (
            fu[i] * fv[j] * _pow_or_zero(w, c) * hk / _pyramid_norm(i, j, k)
        )
    return out


# ---------------------------------------------------------------------------
# Monomial (debug) mode
# ---------------------------------------------------------------------------


def _eval_monomial(kind, p, pts):
    idx = _index_set(kind, p)
    if kind is ElementKind.PYRAMID:
        u, v, w, z = _pyramid_uvw(pts)
        out = np.empty((pts.shape[0], len(idx)))
        for col, (i, j, k) in enumerate(idx):
            c = max(i, j)
            out[:, col] = (u**i) * (v**j) * _pow_or_zero(w, c) * (z**k)
        return out
    out = np.empty((pts.shape[0], len(idx)))
    for col, ids in enumerate(idx):
        v = np.ones(pts.shape[0])
        for d, e in enumerate(ids):
            v = v * pts[:, d] ** e
        out[:, col] = v
    return out


# ---------------------------------------------------------------------------
# Gradients (orthogonal mode)
# ---------------------------------------------------------------------------


def _grad_line(p, pts):
    x = pts[:, 0]
    g = np.empty((pts.shape[0], p + 1, 1))
    for i in range(p + 1):
        g[:, i, 0] = _njacobi_derivative(i, 0.0, 0.0, x)
    return g


def _grad_tensor(kind, p, pts):
    d = pts.shape[1]
    vals = [
        np.column_stack([_njacobi(i, 0.0, 0.0, pts[:, dd]) for i in range(p + 1)])
        for dd in range(d)
    ]
    ders = [
        np.column_stack(
            [_njacobi_derivative(i, 0.0, 0.0, pts[:, dd]) for i in range(p + 1)]
        )
        for dd in range(d)
    ]
    idx = _index_set(kind, p)
    g = np.empty((pts.shape[0], len(idx), d))
    for col, ids in enumerate(idx):
        for dd in range(d):
            v = np.ones(pts.shape[0])
            for d2, e in enumerate(ids):
                v = v * (ders[d2][:, e] if d2 == dd else vals[d2][:, e])
            g[:, col, dd] = v
    return g


def _grad_triangle(p, pts):
    a, b = _tri_collapse(pts[:, 0], pts[:, 1])
    idx = _index_set(ElementKind.TRIANGLE, p)
    g = np.empty((pts.shape[0], len(idx), 2))
    one_m_b = 1.0 - b
    s2 = math.sqrt(2.0)
    for col, (i, j) in enumerate(idx):
        fa = _njacobi(i, 0.0, 0.0, a)
        dfa = _njacobi_derivative(i, 0.0, 0.0, a)
        gb = _njacobi(j, 2.0 * i + 1.0, 0.0, b)
        dgb = _njacobi_derivative(j, 2.0 * i + 1.0, 0.0, b)
        pw_i = _pow_or_zero(one_m_b, i)
        pw_im1 = _pow_or_zero(one_m_b, i - 1)
        g[:, col, 0] = s2 * 2.0 * dfa * gb * pw_im1
        g[:, col, 1] = s2 * (
            dfa * (1.0 + a) * gb * pw_im1 + fa * dgb * pw_i - i * fa * gb * pw_im1
        )
    return g


def _grad_tetrahedron(p, pts):
    a, b, c = _tet_collapse(pts[:, 0], pts[:, 1], pts[:, 2])
    idx = _index_set(ElementKind.TETRAHEDRON, p)
    g = np.empty((pts.shape[0], len(idx), 3))
    pb = 0.5 * (1.0 - b)
    pc = 0.5 * (1.0 - c)
    for col, (i, j, k) in enumerate(idx):
        amp = 2.0 * math.sqrt(2.0) * 2.0 ** (2 * i + j)
        fa = _njacobi(i, 0.0, 0.0, a)
        dfa = _njacobi_derivative(i, 0.0, 0.0, a)
        gb = _njacobi(j, 2.0 * i + 1.0, 0.0, b)
        dgb = _njacobi_derivative(j, 2.0 * i + 1.0, 0.0, b)
        hc = _njacobi(k, 2.0 * (i + j) + 2.0, 0.0, c)
        dhc = _njacobi_derivative(k, 2.0 * (i + j) + 2.0, 0.0, c)
        pb_i = _pow_or_zero(pb, i)
        pb_im1 = _pow_or_zero(pb, i - 1)
        pc_ij = _pow_or_zero(pc, i + j)
        pc_ijm1 = _pow_or_zero(pc, i + j - 1)
        dx_core = dfa * gb * hc * pb_im1 * pc_ijm1
        tmp_b = dgb * pb_i - 0.5 * i * gb * pb_im1  # d/db of gb * pb^i
        g[:, col, 0] = amp * dx_core
        g[:, col, 1] = amp * (
            0.5 * (1.0 + a) * dx_core + fa * hc * pc_ijm1 * tmp_b
        )
        g[:, col, 2] = amp * (
            0.5 * (1.0 + a) * dx_core
            + 0.5 * (1.0 + b) * fa * hc * pc_ijm1 * tmp_b
            + fa * gb * pb_i * (dhc * pc_ij - 0.5 * (i + j) * hc * pc_ijm1)
        )
    return g


def _grad_prism(p, pts):
    tri_v = _eval_triangle(p, pts[:, :2])
    tri_g = _grad_triangle(p, pts[:, :2])
    tri_idx = _index_set(ElementKind.TRIANGLE, p)
    tri_col = {ij: n for n, ij in enumerate(tri_idx)}
    z = pts[:, 2]
    leg = np.column_stack([_njacobi(k, 0.0, 0.0, z) for k in range(p + 1)])
    dleg = np.column_stack(
        [_njacobi_derivative(k, 0.0, 0.0, z) for k in range(p + 1)]
    )
    idx = _index_set(ElementKind.PRISM, p)
    g = np.empty((pts.shape[0], len(idx), 3))
    for col, (i, j, k) in enumerate(idx):
        t = tri_col[(i, j)]
        g[:, col, 0] = tri_g[:, t, 0] * leg[:, k]
        g[:, col, 1] = tri_g[:, t, 1] * leg[:, k]
        g[:, col, 2] = tri_v[:, t] * dleg[:, k]
    return g


def _grad_pyramid(p, pts):
    u, v, w, z = _pyramid_uvw(pts)
    idx = _index_set(ElementKind.PYRAMID, p)
    g = np.empty((pts.shape[0], len(idx), 3))
    for col, (i, j, k) in enumerate(idx):
        c = max(i, j)
        fi = jacobi(i, 0.0, 0.0, u)
        dfi = jacobi_derivative(i, 0.0, 0.0, u)
        fj = jacobi(j, 0.0, 0.0, v)
        dfj = jacobi_derivative(j, 0.0, 0.0, v)
        hk = jacobi(k, 2.0 * (c + 1.0), 0.0, z)
        dhk = jacobi_derivative(k, 2.0 * (c + 1.0), 0.0, z)
        w_c = _pow_or_zero(w, c)
        w_cm1 = _pow_or_zero(w, c - 1)
        nrm = _pyramid_norm(i, j, k)
        g[:, col, 0] = dfi * fj * hk * w_cm1 / nrm
        g[:, col, 1] = fi * dfj * hk * w_cm1 / nrm
        g[:, col, 2] = (
            0.5 * dfi * u * fj * hk * w_cm1
            + 0.5 * fi * dfj * v * hk * w_cm1
            - 0.5 * c * fi * fj * hk * w_cm1
            + fi * fj * dhk * w_c
        ) / nrm
    return g


def _grad_monomial(kind, p, pts):
    idx = _index_set(kind, p)
    d = pts.shape[1]
    if kind is ElementKind.PYRAMID:
        u, v, w, z = _pyramid_uvw(pts)
        g = np.empty((pts.shape[0], len(idx), 3))
        for col, (i, j, k) in enumerate(idx):
            c = max(i, j)
            ui, vj, zk = u**i, v**j, z**k
            dui = i * _pow_or_zero(u, i - 1)
            dvj = j * _pow_or_zero(v, j - 1)
            dzk = k * _pow_or_zero(z, k - 1)
            w_c = _pow_or_zero(w, c)
            w_cm1 = _pow_or_zero(w, c - 1)
            g[:, col, 0] = dui * vj * zk * w_cm1
            g[:, col, 1] = ui * dvj * zk * w_cm1
            g[:, col, 2] = (
                0.5 * dui * u * vj * zk * w_cm1
                + 0.5 * ui * dvj * v * zk * w_cm1
                - 0.5 * c * ui * vj * zk * w_cm1
                + ui * vj * dzk * w_c
            )
        return g
    g = np.empty((pts.shape[0], len(idx), d))
    for col, ids in enumerate(idx):
        for dd in range(d):
            vals = np.ones(pts.shape[0])
            for d2, e in enumerate(ids):
                if d2 == dd:
                    vals = vals * e * _pow_or_zero(pts[:, d2], e - 1)
                else:
                    vals = vals * pts[:, d2] ** e
            g[:, col, dd] = vals
    return g


# ---------------------------------------------------------------------------
# Public evaluation API
# ---------------------------------------------------------------------------


def basis_eval_many(space: FunctionSpace, pts):
    """Evaluate all basis functions at an (n, d) array of points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    kind, p = space.kind, space.degree
    if space.mode == "monomial":
        return _eval_monomial(kind, p, pts)
    if kind is ElementKind.LINE:
        return _eval_line(p, pts)
    if kind in (ElementKind.QUADRILATERAL, ElementKind.HEXAHEDRON):
        return _eval_tensor(kind, p, pts)
    if kind is ElementKind.TRIANGLE:
        return _eval_triangle(p, pts)
    if kind is ElementKind.TETRAHEDRON:
        return _eval_tetrahedron(p, pts)
    if kind is ElementKind.PRISM:
        return _eval_prism(p, pts)
    if kind is ElementKind.PYRAMID:
        return _eval_pyramid(p, pts)
    raise ValueError(kind)


def basis_grad_many(space: FunctionSpace, pts):
    """Gradients of all basis functions: (n_points, dim, d)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    kind, p = space.kind, space.degree
    if space.mode == "monomial":
        return _grad_monomial(kind, p, pts)
    if kind is ElementKind.LINE:
        return _grad_line(p, pts)
    if kind in (ElementKind.QUADRILATERAL, ElementKind.HEXAHEDRON):
        return _grad_tensor(kind, p, pts)
    if kind is ElementKind.TRIANGLE:
        return _grad_triangle(p, pts)
    if kind is ElementKind.TETRAHEDRON:
        return _grad_tetrahedron(p, pts)
    if kind is ElementKind.PRISM:
        return _grad_prism(p, pts)
    if kind is ElementKind.PYRAMID:
        return _grad_pyramid(p, pts)
    raise ValueError(kind)


def basis_eval(space: FunctionSpace, x):
    """Evaluate all basis functions at a single point."""
    return basis_eval_many(space, np.atleast_2d(x))[0]


@dataclass(eq=False)
class VandermondeMatrix:
    """Generalized Vandermonde matrix V[i, j] = phi_j(node_i)."""

    matrix: np.ndarray
    space: FunctionSpace
    nodes: np.ndarray
    _cond: float | None = field(default=None, repr=False)

    @property
    def condition(self):
        if self._cond is None:
            try:
                self._cond = float(np.linalg.cond(self.matrix))
            except np.linalg.LinAlgError:
                self._cond = np.inf
        return self._cond

    @property
    def determinant(self):
        return float(np.linalg.det(self.matrix))


def vandermonde(space: FunctionSpace, dist: NodalDistribution) -> VandermondeMatrix:
    if dist.count != space.dim:
        raise ValueError(
            f"distribution has {dist.count} nodes, space dimension is "
            f"{space.dim}"
        )
    V = basis_eval_many(space, dist.nodes)
    return VandermondeMatrix(V, space, dist.nodes)


class LagrangeInterpolator:
    """Factorized Lagrange evaluation for one (space, distribution) pair.

    The transposed Vandermonde matrix is factorized once and reused for all
    evaluation points; this is the workhorse behind the metric and objective
    computations.
    """

    def __init__(self, space, dist, condition_limit=UNISOLVENCY_CONDITION_LIMIT):
        self.space = space
        self.dist = dist
        self.vmatrix = vandermonde(space, dist)
        V = self.vmatrix.matrix
        if not np.all(np.isfinite(V)):
            raise UnisolvencyError("non-finite basis values at nodes")
        cond = self.vmatrix.condition
        if not np.isfinite(cond) or cond > condition_limit:
            raise UnisolvencyError(
                f"Vandermonde condition {cond:.3e} exceeds limit "
                f"{condition_limit:.1e}"
            )
        self._lu = scipy.linalg.lu_factor(V)

    def eval_many(self, pts):
        """Cardinal function values: (n_points, n_nodes)."""
        phi = basis_eval_many(self.space, pts)
        # V^T ell(x) = phi(x)  =>  solve with the transposed factorization.
        return scipy.linalg.lu_solve(self._lu, phi.T, trans=1).T

    def eval_gradients(self, pts):
        """Cardinal function gradients: (n_points, n_nodes, d)."""
        g = basis_grad_many(self.space, pts)
        npts, nb, d = g.shape
        flat = g.transpose(0, 2, 1).reshape(npts * d, nb)
        sol = scipy.linalg.lu_solve(self._lu, flat.T, trans=1).T
        return sol.reshape(npts, d, nb).transpose(0, 2, 1)


def lagrange_eval(space, dist, x):
    """Values of all Lagrange cardinal functions of ``dist`` at ``x``.

    Raises :class:`UnisolvencyError` when the node set is not unisolvent for
    the space (Vandermonde condition above the screening limit).
    """
    interp = LagrangeInterpolator(space, dist)
    return interp.eval_many(np.atleast_2d(x))[0]

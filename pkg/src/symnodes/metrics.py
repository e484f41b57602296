"""Interpolation quality metrics for nodal distributions.

* Lebesgue constant: max over a deterministic dense sample of the domain of
  the sum of absolute cardinal function values.  The sample is a uniform
  lattice (``resolution`` points per dimension restricted to the domain)
  augmented with the element vertices and the degree-2p quadrature points,
  so the reported value is a certified lower bound that is monotone in the
  lattice refinement.
* Lebesgue objective: the smooth surrogate sum_i integral(l_i^2), evaluated
  exactly by quadrature.
* Mass matrix condition number: extreme-eigenvalue ratio of the cardinal
  Gram matrix.
* Unisolvency screen: cheap rejection of node sets whose Vandermonde or
  coarse Lebesgue estimate blows up.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import (
    FunctionSpace,
    LagrangeInterpolator,
    UNISOLVENCY_CONDITION_LIMIT,
    vandermonde,
)
from .errors import NumericalError, UnisolvencyError
from .geometry import ElementKind, contains, reference_element
from .quadrature import quadrature_rule
from .symmetry import NodalDistribution

__all__ = [
    "MetricReport",
    "default_resolution",
    "lebesgue_constant",
    "lebesgue_objective",
    "mass_matrix",
    "is_unisolvent",
    "evaluate_metrics",
]

_DEFAULT_RESOLUTION = {1: 1000, 2: 300, 3: 60}
_SCREEN_RESOLUTION = 20
_SCREEN_LIMIT = 1e12
_CHUNK = 16384


@dataclass
class MetricReport:
    lebesgue_constant: float
    lebesgue_objective: float
    mass_condition: float
    unisolvent: bool
    resolution: int


def default_resolution(dim):
    return _DEFAULT_RESOLUTION[dim]


@lru_cache(maxsize=32)
def _lattice(kind: ElementKind, resolution: int):
    """Uniform lattice over the bounding box restricted to the domain."""
    elem = reference_element(kind)
    axis = np.linspace(-1.0, 1.0, resolution)
    grids = np.meshgrid(*[axis] * elem.dim, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    keep = contains(elem, pts, 1e-12)
    pts = pts[keep]
    pts.setflags(write=False)
    return pts


def _sample_points(space: FunctionSpace, resolution: int):
    elem = reference_element(space.kind)
    rule = quadrature_rule(space.kind, 2 * space.degree)
    return np.vstack(
        [_lattice(space.kind, resolution), elem.vertices, rule.points]
    )


def lebesgue_constant(space, dist, resolution=None):
    """Max over the sample set of the cardinal-function absolute sum."""
    if resolution is None:
        resolution = default_resolution(reference_element(space.kind).dim)
    interp = LagrangeInterpolator(space, dist)
    pts = _sample_points(space, resolution)
    best = 0.0
    for start in range(0, pts.shape[0], _CHUNK):
        L = interp.eval_many(pts[start : start + _CHUNK])
        best = max(best, float(np.max(np.sum(np.abs(L), axis=1))))
    return best


def lebesgue_objective(space, dist, rule):
    """Sum of integrals of squared cardinal functions, by quadrature."""
    if rule.exactness < 2 * space.degree:
        raise ValueError(
            f"rule exactness {rule.exactness} insufficient for degree "
            f"{space.degree} (need {2 * space.degree})"
        )
    interp = LagrangeInterpolator(space, dist)
    L = interp.eval_many(rule.points)
    return float(np.einsum("q,qi,qi->", rule.weights, L, L))


def mass_matrix(space, dist, rule):
    """Cardinal Gram matrix and its spectral condition number."""
    if rule.exactness < 2 * space.degree:
        raise ValueError(
            f"rule exactness {rule.exactness} insufficient for degree "
            f"{space.degree} (need {2 * space.degree})"
        )
    interp = LagrangeInterpolator(space, dist)
    L = interp.eval_many(rule.points)
    M = L.T @ (rule.weights[:, None] * L)
    M = 0.5 * (M + M.T)
    eigs = np.linalg.eigvalsh(M)
    if eigs[0] <= 1e-14 * max(eigs[-1], 1.0):
        raise NumericalError(
            f"mass matrix is not positive definite (min eig {eigs[0]:.3e})"
        )
    return M, float(eigs[-1] / eigs[0])


def is_unisolvent(space, dist):
    """Fast screen: finite, moderate Vandermonde condition and a bounded
    coarse Lebesgue estimate."""
    try:
        V = vandermonde(space, dist)
    except ValueError:
        return False
    if not np.all(np.isfinite(V.matrix)):
        return False
    cond = V.condition
    if not np.isfinite(cond) or cond >= UNISOLVENCY_CONDITION_LIMIT:
        return False
    try:
        coarse = lebesgue_constant(space, dist, resolution=_SCREEN_RESOLUTION)
    except (UnisolvencyError, np.linalg.LinAlgError):
        return False
    return bool(np.isfinite(coarse) and coarse < _SCREEN_LIMIT)


def evaluate_metrics(space, dist, resolution=None):
    """Full metric report for a distribution."""
    if resolution is None:
        resolution = default_resolution(reference_element(space.kind).dim)
    rule = quadrature_rule(space.kind, 2 * space.degree)
    uni = is_unisolvent(space, dist)
    leb = lebesgue_constant(space, dist, resolution)
    obj = lebesgue_objective(space, dist, rule)
    _, cond = mass_matrix(space, dist, rule)
    return MetricReport(
        lebesgue_constant=leb,
        lebesgue_objective=obj,
        mass_condition=cond,
        unisolvent=uni,
        resolution=resolution,
    )

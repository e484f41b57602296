"""Symmetry orbits of the reference elements.

An orbit maps a small parameter vector ``xi`` through a fixed family of
affine maps ``S_i @ xi + sigma_i`` into natural coordinates, producing a
point set closed under the element's symmetry group.  Distributions are
unions of orbits gathered in an :class:`OrbitCollection`, whose stacked
parameter vector is the optimization variable elsewhere in the package.

Orbit-internal point order is fixed: permutation patterns are enumerated in
lexicographic order of the index tuple, sign patterns with ``+1`` before
``-1``, permutations varying slower than signs.  The first point of every
orbit is therefore the generator tuple itself, which is the map used to
derive parameter bounds and to anchor equality constraints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import lincon
from .errors import (
    ConstraintConflictError,
    DegenerateDistributionError,
    InfeasibleParameterError,
    NumericalError,
)
from .geometry import (
    ElementKind,
    ReferenceElement,
    natural_to_cartesian,
    node_count,
    reference_element,
)

__all__ = [
    "SymmetryOrbit",
    "LinearConstraintSet",
    "ConstrainedOrbit",
    "OrbitCollection",
    "NodalDistribution",
    "orbits",
    "evaluate_orbit",
    "orbit_parameter_bounds",
    "attach_constraints",
    "enumerate_admissible_collections",
    "evaluate_collection",
    "natural_symmetry_group",
    "cartesian_symmetry_group",
    "MIN_NODE_SEPARATION",
]

MIN_NODE_SEPARATION = 1e-8


@dataclass(frozen=True, eq=False)
class LinearConstraintSet:
    """Rows ``lower <= matrix @ xi <= upper``; infinite bounds allowed."""

    matrix: np.ndarray  # (r, l)
    lower: np.ndarray  # (r,)
    upper: np.ndarray  # (r,)

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ConstraintConflictError("lower bound exceeds upper bound")

    @property
    def nrows(self):
        return self.matrix.shape[0]

    @property
    def nvars(self):
        return self.matrix.shape[1]

    def violation(self, xi):
        return lincon.violation(self.matrix, self.lower, self.upper, xi)

    @staticmethod
    def empty(nvars):
        return LinearConstraintSet(
            np.zeros((0, nvars)), np.zeros(0), np.zeros(0)
        )


@dataclass(frozen=True, eq=False)
class SymmetryOrbit:
    """One symmetry orbit of one element kind.

    ``maps`` holds the ``multiplicity`` affine point maps ``(S_i, sigma_i)``
    acting on the ``param_count`` orbit parameters; ``bounds`` are the
    parameter constraints derived from the first point map.
    """

    kind: ElementKind
    index: int  # 1-based, as tabulated
    param_count: int
    multiplicity: int
    maps: tuple[tuple[np.ndarray, np.ndarray], ...]
    bounds: LinearConstraintSet = field(repr=False, default=None)

    def point_matrix(self):
        """All maps stacked: (multiplicity, natural_dim, param_count)."""
        return np.stack([s for s, _ in self.maps])

    def point_offsets(self):
        return np.stack([t for _, t in self.maps])


@dataclass(frozen=True, eq=False)
class ConstrainedOrbit:
    """An orbit together with extra linear constraints on its parameters."""

    orbit: SymmetryOrbit
    extra: LinearConstraintSet

    @property
    def param_count(self):
        return self.orbit.param_count

    @property
    def multiplicity(self):
        return self.orbit.multiplicity

    def stacked_constraints(self):
        b = self.orbit.bounds
        return LinearConstraintSet(
            np.vstack([b.matrix, self.extra.matrix]),
            np.concatenate([b.lower, self.extra.lower]),
            np.concatenate([b.upper, self.extra.upper]),
        )

    @property
    def is_pinned(self):
        """True when the extra equalities determine the parameters uniquely."""
        eq = (self.extra.upper - self.extra.lower) <= lincon.EQ_TOL
        if self.param_count == 0:
            return True
        rows = self.extra.matrix[eq]
        return (
            rows.shape[0] > 0
            and np.linalg.matrix_rank(rows, tol=1e-12) == self.param_count
        )

    def pinned_parameters(self):
        eq = (self.extra.upper - self.extra.lower) <= lincon.EQ_TOL
        rows = self.extra.matrix[eq]
        rhs = self.extra.lower[eq]
        xi, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
        return xi


@dataclass(frozen=True, eq=False)
class OrbitCollection:
    """Ordered multiset of constrained orbits with a stacked parameter layout.

    ``degree`` may be ``None`` for free-form collections; when set, the total
    multiplicity must equal the dimension of the degree-``degree`` space.
    """

    kind: ElementKind
    degree: int | None
    entries: tuple[ConstrainedOrbit, ...]
    offsets: tuple[int, ...] = None

    def __post_init__(self):
        offs, pos = [], 0
        for e in self.entries:
            offs.append(pos)
            pos += e.param_count
        object.__setattr__(self, "offsets", tuple(offs))
        object.__setattr__(self, "_total_params", pos)
        if self.degree is not None:
            want = node_count(self.kind, self.degree)
            have = sum(e.multiplicity for e in self.entries)
            if have != want:
                raise ValueError(
                    f"collection multiplicity {have} != space dimension "
                    f"{want} for {self.kind.value} degree {self.degree}"
                )

    @property
    def total_params(self):
        return self._total_params

    @property
    def total_points(self):
        return sum(e.multiplicity for e in self.entries)

    @property
    def indices(self):
        return tuple(e.orbit.index for e in self.entries)

    def slices(self):
        return [
            slice(off, off + e.param_count)
            for off, e in zip(self.offsets, self.entries)
        ]

    def stacked_constraints(self):
        """Block-diagonal assembly of every entry's bounds and extras."""
        L = self.total_params
        rows, lo, hi = [], [], []
        for off, e in zip(self.offsets, self.entries):
            c = e.stacked_constraints()
            block = np.zeros((c.nrows, L))
            block[:, off : off + e.param_count] = c.matrix
            rows.append(block)
            lo.append(c.lower)
            hi.append(c.upper)
        if rows:
            return LinearConstraintSet(
                np.vstack(rows), np.concatenate(lo), np.concatenate(hi)
            )
        return LinearConstraintSet.empty(L)


@dataclass(eq=False)
class NodalDistribution:
    """A realized Cartesian node set for one element kind and degree.

    ``kind`` is ``None`` for the trivial 0-dimensional point set used as the
    face prescription of line elements.
    """

    kind: ElementKind | None
    degree: int
    nodes: np.ndarray  # (n, d)
    source: str = "unspecified"
    parameters: np.ndarray | None = None
    collection: OrbitCollection | None = None

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))

    @property
    def count(self):
        return self.nodes.shape[0]

    @property
    def dim(self):
        return self.nodes.shape[1]

    def min_separation(self):
        """Smallest pairwise node distance, with the closest pair."""
        x = self.nodes
        if x.shape[0] < 2:
            return np.inf, None
        d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        i, j = np.unravel_index(np.argmin(d2), d2.shape)
        return float(np.sqrt(d2[i, j])), (int(i), int(j))

    def validate(self, tol=1e-10):
        """Enforce the distribution invariants; raises on violation."""
        if self.kind is not None:
            want = node_count(self.kind, self.degree)
            if self.count != want:
                raise ValueError(
                    f"{self.kind.value} degree {self.degree}: expected "
                    f"{want} nodes, got {self.count}"
                )
            elem = reference_element(self.kind)
            from .geometry import contains

            inside = contains(elem, self.nodes, tol)
            if not np.all(inside):
                bad = int(np.argmin(inside))
                raise ValueError(
                    f"node {bad} at {self.nodes[bad]} lies outside the "
                    f"{self.kind.value} domain"
                )
        sep, pair = self.min_separation()
        if sep <= MIN_NODE_SEPARATION:
            raise DegenerateDistributionError(
                f"nodes {pair[0]} and {pair[1]} are {sep:.3e} apart", pair=pair
            )
        return self


# ---------------------------------------------------------------------------
# Orbit tables
# ---------------------------------------------------------------------------

# A generator is a tuple of natural-coordinate components, each an affine
# function (coefficients over xi, constant).  Patterns below rearrange the
# generator's components and flip signs; duplicate affine maps collapse, so
# the tabulated multiplicities emerge from the structure alone.


def _gen(l, *components):
    out = []
    for comp in components:
        coeffs = np.zeros(l)
        const = 0.0
        for term in comp:
            if isinstance(term, tuple):
                j, c = term
                coeffs[j] += c
            else:
                const += term
        out.append((coeffs, const))
    return out


def _orbit_table(kind):
    k = ElementKind(kind)
    third, quarter = 1.0 / 3.0, 0.25
    A, B, C = (0, 1.0), (1, 1.0), (2, 1.0)  # xi components as coefficients

    if k is ElementKind.LINE:
        return [
            (0, 1, _gen(0, [0.0])),
            (1, 2, _gen(1, [A])),
        ]
    if k is ElementKind.TRIANGLE:
        return [
            (0, 1, _gen(0, [third], [third], [third])),
            (1, 3, _gen(1, [A], [A], [(0, -2.0), 1.0])),
            (2, 6, _gen(2, [A], [B], [(0, -1.0), (1, -1.0), 1.0])),
        ]
    if k is ElementKind.QUADRILATERAL:
        return [
            (0, 1, _gen(0, [0.0], [0.0])),
            (1, 4, _gen(1, [A], [0.0])),
            (1, 4, _gen(1, [A], [A])),
            (2, 8, _gen(2, [A], [B])),
        ]
    if k is ElementKind.TETRAHEDRON:
        return [
            (0, 1, _gen(0, [quarter], [quarter], [quarter], [quarter])),
            (1, 4, _gen(1, [A], [A], [A], [(0, -3.0), 1.0])),
            (1, 6, _gen(1, [A], [A], [(0, -1.0), 0.5], [(0, -1.0), 0.5])),
            (2, 12, _gen(2, [A], [A], [B], [(0, -2.0), (1, -1.0), 1.0])),
            (
                3,
                24,
                _gen(3, [A], [B], [C], [(0, -1.0), (1, -1.0), (2, -1.0), 1.0]),
            ),
        ]
    if k is ElementKind.HEXAHEDRON:
        return [
            (0, 1, _gen(0, [0.0], [0.0], [0.0])),
            (1, 6, _gen(1, [A], [0.0], [0.0])),
            (1, 8, _gen(1, [A], [A], [A])),
            (1, 12, _gen(1, [A], [A], [0.0])),
            (2, 24, _gen(2, [A], [B], [0.0])),
            (2, 24, _gen(2, [A], [A], [B])),
            (3, 48, _gen(3, [A], [B], [C])),
        ]
    if k is ElementKind.PRISM:
        return [
            (0, 1, _gen(0, [third], [third], [third], [0.0])),
            (1, 2, _gen(1, [third], [third], [third], [A])),
            (1, 3, _gen(1, [A], [A], [(0, -2.0), 1.0], [0.0])),
            (2, 6, _gen(2, [A], [A], [(0, -2.0), 1.0], [B])),
            (2, 6, _gen(2, [A], [B], [(0, -1.0), (1, -1.0), 1.0], [0.0])),
            (3, 12, _gen(3, [A], [B], [(0, -1.0), (1, -1.0), 1.0], [C])),
        ]
    if k is ElementKind.PYRAMID:
        return [
            (1, 1, _gen(1, [0.0], [0.0], [A])),
            (2, 4, _gen(2, [A], [0.0], [B])),
            (2, 4, _gen(2, [A], [A], [B])),
            (3, 8, _gen(3, [A], [B], [C])),
        ]
    raise ValueError(f"unknown element kind {kind!r}")


def _patterns(kind, dprime):
    """(permutation, signs) patterns realizing the element symmetry group.

    Returns tuples ``(perm, signs)`` where ``perm`` permutes the generator
    components and ``signs`` (same length) flips individual components.
    Permutations vary slower than signs; all-plus identity comes first.
    """
    k = ElementKind(kind)
    idx = tuple(range(dprime))

    def full_perm_signed(nperm, nsign_positions):
        pats = []
        for perm in itertools.permutations(range(nperm)):
            full = tuple(perm) + idx[nperm:]
            for signs in itertools.product([1.0, -1.0], repeat=len(nsign_positions)):
                s = np.ones(dprime)
                for pos, sg in zip(nsign_positions, signs):
                    s[pos] = sg
                pats.append((full, s))
        return pats

    if k in (ElementKind.LINE,):
        return full_perm_signed(1, (0,))
    if k in (
        ElementKind.QUADRILATERAL,
        ElementKind.HEXAHEDRON,
    ):
        return full_perm_signed(dprime, idx)
    if k in (ElementKind.TRIANGLE, ElementKind.TETRAHEDRON):
        return full_perm_signed(dprime, ())
    if k is ElementKind.PRISM:
        # Permutations of the barycentric triple, sign flip on the axis.
        return full_perm_signed(3, (3,))
    if k is ElementKind.PYRAMID:
        # Signed permutations of (x, y); the vertical coordinate is fixed.
        return full_perm_signed(2, (0, 1))
    raise ValueError(f"unknown element kind {kind!r}")


def _orbit_maps(generator, patterns, l, dprime):
    seen = set()
    maps = []
    for perm, signs in patterns:
        S = np.zeros((dprime, l))
        sigma = np.zeros(dprime)
        for row, src in enumerate(perm):
            coeffs, const = generator[src]
            S[row] = signs[row] * coeffs
            sigma[row] = signs[row] * const
        S += 0.0  # normalize -0.0 so duplicate maps collapse bytewise
        sigma += 0.0
        key = (S.tobytes(), sigma.tobytes())
        if key not in seen:
            seen.add(key)
            S.setflags(write=False)
            sigma.setflags(write=False)
            maps.append((S, sigma))
    return maps


def orbit_parameter_bounds(elem: ReferenceElement, orbit) -> LinearConstraintSet:
    """Parameter constraints induced by the natural bounds via the first map.

    Rows come from ``B_lambda @ S_1`` with bounds shifted by
    ``B_lambda @ sigma_1``; identically-zero rows whose constant bounds hold
    are dropped, as are exact duplicate rows.
    """
    S1, s1 = (orbit.maps[0] if isinstance(orbit, SymmetryOrbit) else orbit)
    B = elem.b_lambda @ S1
    shift = elem.b_lambda @ s1
    lo = elem.v_lower - shift
    hi = elem.v_upper - shift
    keep, seen = [], set()
    for r in range(B.shape[0]):
        if np.all(B[r] == 0.0):
            if lo[r] > 1e-12 or hi[r] < -1e-12:
                raise NumericalError(
                    "orbit map violates a constant natural bound"
                )
            continue
        key = (B[r].tobytes(), float(lo[r]), float(hi[r]))
        if key in seen:
            continue
        seen.add(key)
        keep.append(r)
    return LinearConstraintSet(B[keep], lo[keep], hi[keep])


@lru_cache(maxsize=None)
def orbits(kind: ElementKind) -> tuple[SymmetryOrbit, ...]:
    """All symmetry orbits of ``kind``, with derived parameter bounds."""
    kind = ElementKind(kind)
    elem = reference_element(kind)
    dprime = elem.natural_dim
    patterns = _patterns(kind, dprime)
    out = []
    for i, (l, m, generator) in enumerate(_orbit_table(kind), start=1):
        maps = _orbit_maps(generator, patterns, l, dprime)
        if len(maps) != m:
            raise NumericalError(
                f"{kind.value} orbit {i}: built {len(maps)} maps, expected {m}"
            )
        orbit = SymmetryOrbit(
            kind=kind,
            index=i,
            param_count=l,
            multiplicity=m,
            maps=tuple(maps),
        )
        object.__setattr__(orbit, "bounds", orbit_parameter_bounds(elem, orbit))
        out.append(orbit)
    return tuple(out)


def evaluate_orbit(orbit, xi, tol=1e-9):
    """Natural coordinates of every orbit point at parameters ``xi``.

    Accepts a :class:`SymmetryOrbit` or :class:`ConstrainedOrbit`; the
    parameters must satisfy the orbit bounds (and extra constraints) within
    ``tol``.
    """
    if isinstance(orbit, ConstrainedOrbit):
        cons = orbit.stacked_constraints()
        base = orbit.orbit
    else:
        cons = orbit.bounds
        base = orbit
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.size != base.param_count:
        raise InfeasibleParameterError(
            f"expected {base.param_count} parameters, got {xi.size}"
        )
    v = cons.violation(xi)
    if v > tol:
        raise InfeasibleParameterError(
            f"orbit {base.index} parameters infeasible (violation {v:.3e})"
        )
    return base.point_matrix() @ xi + base.point_offsets()


def attach_constraints(orbit: SymmetryOrbit, A, b_lower, b_upper):
    """Attach extra linear parameter constraints, verifying joint feasibility."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        A = A.reshape(0, orbit.param_count)
    b_lower = np.asarray(b_lower, dtype=float).ravel()
    b_upper = np.asarray(b_upper, dtype=float).ravel()
    if A.shape[1] != orbit.param_count:
        raise ValueError(
            f"constraint matrix has {A.shape[1]} columns, orbit has "
            f"{orbit.param_count} parameters"
        )
    extra = LinearConstraintSet(A, b_lower, b_upper)
    combined = ConstrainedOrbit(orbit, extra)
    cons = combined.stacked_constraints()
    if lincon.feasible_point(cons.matrix, cons.lower, cons.upper) is None:
        raise ConstraintConflictError(
            f"extra constraints conflict with orbit {orbit.index} bounds"
        )
    return combined


def _reachable_sums(mults, repeatable, target):
    """Bitset DP of achievable multiplicity sums."""
    dp = np.zeros(target + 1, dtype=bool)
    dp[0] = True
    for m, rep in zip(mults, repeatable):
        if rep:
            for s in range(m, target + 1):
                if dp[s - m]:
                    dp[s] = True
        else:
            for s in range(target, m - 1, -1):
                if dp[s - m]:
                    dp[s] = True
    return dp


def enumerate_admissible_collections(kind, p, cap=64):
    """Orbit multisets whose total multiplicity matches the space dimension.

    Parameter-free orbits appear at most once (repeating one would duplicate
    its fixed points exactly).  Results are ordered lexicographically by the
    sorted orbit-index tuple and truncated at ``cap``.
    """
    kind = ElementKind(kind)
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    target = node_count(kind, p)
    orbs = orbits(kind)
    mults = [o.multiplicity for o in orbs]
    repeatable = [o.param_count > 0 for o in orbs]
    # Reachability with unlimited use of repeatable orbits only.
    dp_rep = np.zeros(target + 1, dtype=bool)
    dp_rep[0] = True
    for m, rep in zip(mults, repeatable):
        if rep:
            for s in range(m, target + 1):
                if dp_rep[s - m]:
                    dp_rep[s] = True

    results = []

    def reachable(remaining, start, used_unrepeatable):
        if dp_rep[remaining]:
            return True
        for j in range(start, len(orbs)):
            if not repeatable[j] and j not in used_unrepeatable:
                m = mults[j]
                if m <= remaining and dp_rep[remaining - m]:
                    return True
        return False

    def dfs(start, remaining, prefix, used_unrepeatable):
        if len(results) >= cap:
            return
        if remaining == 0:
            results.append(tuple(prefix))
            return
        for j in range(start, len(orbs)):
            m = mults[j]
            if m > remaining:
                continue
            if not repeatable[j] and j in used_unrepeatable:
                continue
            new_used = (
                used_unrepeatable | {j}
                if not repeatable[j]
                else used_unrepeatable
            )
            if not reachable(remaining - m, j, new_used):
                continue
            prefix.append(j)
            dfs(j if repeatable[j] else j, remaining - m, prefix, new_used)
            prefix.pop()
            if len(results) >= cap:
                return

    dfs(0, target, [], frozenset())

    collections = []
    for combo in results:
        entries = tuple(
            ConstrainedOrbit(orbs[j], LinearConstraintSet.empty(orbs[j].param_count))
            for j in combo
        )
        collections.append(OrbitCollection(kind, p, entries))
    return collections


def evaluate_collection(collection: OrbitCollection, xi_bar, tol=1e-9):
    """Realize a collection at stacked parameters ``xi_bar``.

    Nodes appear in collection order, then orbit-internal point order.
    Raises :class:`DegenerateDistributionError` when nodes (nearly) collide.
    """
    xi_bar = np.asarray(xi_bar, dtype=float).ravel()
    if xi_bar.size != collection.total_params:
        raise InfeasibleParameterError(
            f"expected {collection.total_params} stacked parameters, got "
            f"{xi_bar.size}"
        )
    elem = reference_element(collection.kind)
    pieces = []
    for entry, sl in zip(collection.entries, collection.slices()):
        lam = evaluate_orbit(entry, xi_bar[sl], tol=tol)
        pieces.append(lam)
    lam_all = np.vstack(pieces)
    nodes = natural_to_cartesian(elem, lam_all, tol=max(tol, 1e-9))
    dist = NodalDistribution(
        kind=collection.kind,
        degree=collection.degree,
        nodes=nodes,
        source="collection",
        parameters=xi_bar.copy(),
        collection=collection,
    )
    if collection.degree is not None:
        dist.validate()
    else:
        sep, pair = dist.min_separation()
        if sep <= MIN_NODE_SEPARATION:
            raise DegenerateDistributionError(
                f"nodes {pair[0]} and {pair[1]} are {sep:.3e} apart", pair=pair
            )
    return dist


# ---------------------------------------------------------------------------
# Symmetry groups
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def natural_symmetry_group(kind):
    """Orthogonal natural-coordinate transformations of the element group.

    Simplex-like shapes permute barycentric components; tensor shapes apply
    signed coordinate permutations; the prism combines a barycentric
    permutation with an axis flip; the pyramid applies the base square's
    signed permutations to (x, y).
    """
    kind = ElementKind(kind)
    dprime = NATURAL_DIM_LOOKUP[kind]
    mats = []
    for perm, signs in _patterns(kind, dprime):
        P = np.zeros((dprime, dprime))
        for row, src in enumerate(perm):
            P[row, src] = signs[row]
        P.setflags(write=False)
        mats.append(P)
    return tuple(mats)


NATURAL_DIM_LOOKUP = {
    ElementKind.LINE: 1,
    ElementKind.TRIANGLE: 3,
    ElementKind.QUADRILATERAL: 2,
    ElementKind.TETRAHEDRON: 4,
    ElementKind.HEXAHEDRON: 3,
    ElementKind.PRISM: 4,
    ElementKind.PYRAMID: 3,
}


@lru_cache(maxsize=None)
def cartesian_symmetry_group(kind):
    """The element symmetry group as Cartesian affine maps ``(A, b)``."""
    kind = ElementKind(kind)
    elem = reference_element(kind)
    d = elem.dim
    G = elem._solve_matrix[:, :d]
    e = elem._solve_rhs_vals
    g_const = elem._solve_matrix[:, d:] @ e if e.size else np.zeros(
        elem.natural_dim
    )
    out = []
    for P in natural_symmetry_group(kind):
        A = elem.n_matrix @ P @ G
        b = elem.n_matrix @ P @ g_const + elem.nu
        A.setflags(write=False)
        b.setflags(write=False)
        out.append((A, b))
    return tuple(out)

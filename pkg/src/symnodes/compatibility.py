"""Cross-element compatibility: pinning orbits to prescribed face nodes.

Given a symmetric node distribution for each face geometry of an element,
the construction below walks the prescribed face nodes (mapped onto one
fixed face per face kind), finds for each node the first collection entry
whose orbit can reach it, and pins that entry with an equality constraint on
its parameters.  Because orbits are symmetric, pinning one face's worth of
nodes fixes matching nodes on every face, so adjacent elements sharing the
same prescriptions have coincident face nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lincon
from .errors import IncompatibleCollectionError, OutsideDomainError
from .geometry import (
    ElementKind,
    cartesian_to_natural,
    face_node_count,
    natural_to_cartesian,
    reference_element,
)
from .symmetry import (
    ConstrainedOrbit,
    LinearConstraintSet,
    NodalDistribution,
    OrbitCollection,
    cartesian_symmetry_group,
    evaluate_orbit,
)

__all__ = [
    "FacePrescription",
    "point_prescription",
    "build_compatibility_constraints",
    "verify_face_match",
]

_RESIDUAL_TOL = 1e-10
_FEAS_MARGIN = 1e-12
_MATCH_TOL = 1e-10

# Mixed-face elements resolve triangle faces before quadrilateral faces.
_FACE_KIND_PRIORITY = {None: 0, ElementKind.LINE: 1, ElementKind.TRIANGLE: 2,
                       ElementKind.QUADRILATERAL: 3}


@dataclass(frozen=True, eq=False)
class FacePrescription:
    """A symmetric node distribution prescribed on one face geometry."""

    face_kind: ElementKind | None
    dist: NodalDistribution

    def __post_init__(self):
        if self.face_kind is None:
            return
        if self.dist.kind != self.face_kind:
            raise ValueError(
                f"prescription distribution is for {self.dist.kind}, "
                f"expected {self.face_kind}"
            )
        if not _is_symmetric(self.face_kind, self.dist.nodes):
            raise ValueError(
                "prescribed face distribution is not symmetric under the "
                "face geometry's symmetry group"
            )


def point_prescription(degree=1):
    """The trivial prescription for 0-dimensional faces (line endpoints)."""
    dist = NodalDistribution(
        kind=None, degree=degree, nodes=np.zeros((1, 0)), source="point"
    )
    return FacePrescription(None, dist)


def _is_symmetric(kind, nodes, tol=1e-10):
    nodes = np.atleast_2d(nodes)
    for A, b in cartesian_symmetry_group(kind):
        mapped = nodes @ A.T + b
        if not _same_point_set(mapped, nodes, tol):
            return False
    return True


def _same_point_set(a, b, tol):
    if a.shape != b.shape:
        return False
    used = np.zeros(b.shape[0], dtype=bool)
    for x in a:
        d = np.linalg.norm(b - x, axis=1)
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] > tol:
            return False
        used[j] = True
    return True


def _orbit_reach(entry, lam_hat):
    """Parameters placing some orbit point at ``lam_hat``, else ``None``.

    Solves the per-point linear system by least squares; when the minimizer
    is infeasible for the orbit bounds, falls back to an LP over the
    equality-constrained feasible set (covers rank-deficient point maps).
    """
    orbit = entry.orbit
    bounds = orbit.bounds
    for S, sigma in orbit.maps:
        rhs = lam_hat - sigma
        if orbit.param_count == 0:
            if np.linalg.norm(rhs) <= _RESIDUAL_TOL:
                return np.zeros(0)
            continue
        xi, *_ = np.linalg.lstsq(S, rhs, rcond=None)
        if np.linalg.norm(S @ xi - rhs) > _RESIDUAL_TOL:
            continue
        if bounds.violation(xi) <= _FEAS_MARGIN:
            return xi
        # Exact solutions form an affine set; probe it against the bounds.
        stacked = LinearConstraintSet(
            np.vstack([S, bounds.matrix]),
            np.concatenate([rhs, bounds.lower]),
            np.concatenate([rhs, bounds.upper]),
        )
        xi2 = lincon.feasible_point(
            stacked.matrix, stacked.lower, stacked.upper, tol=_FEAS_MARGIN
        )
        if xi2 is not None and np.linalg.norm(S @ xi2 - rhs) <= _RESIDUAL_TOL:
            return xi2
    return None


def _pin_entry(entry, xi):
    """Equality constraints locking the whole orbit via its first point map."""
    S1, _ = entry.orbit.maps[0]
    target = S1 @ xi
    extra = LinearConstraintSet(S1.copy(), target.copy(), target.copy())
    return ConstrainedOrbit(entry.orbit, extra)


def build_compatibility_constraints(
    elem, collection: OrbitCollection, prescriptions, fixed_faces=None
) -> OrbitCollection:
    """Pin collection entries so every face carries its prescribed nodes.

    ``prescriptions`` holds one :class:`FacePrescription` per face kind of
    the element.  ``fixed_faces`` optionally selects which face of each kind
    receives the node mapping (any choice yields the same node set, by
    symmetry); by default the first face of each kind is used.

    Raises :class:`IncompatibleCollectionError` when some prescribed node
    cannot be hosted by any remaining entry.
    """
    by_kind = {}
    for pres in prescriptions:
        if pres.face_kind in by_kind:
            raise ValueError(
                f"duplicate prescription for face kind {pres.face_kind}"
            )
        by_kind[pres.face_kind] = pres
    face_kinds = {f.face_kind for f in elem.faces}
    if face_kinds != set(by_kind):
        missing = face_kinds - set(by_kind)
        extra = set(by_kind) - face_kinds
        raise ValueError(
            f"prescription face kinds do not match element faces "
            f"(missing {missing or '{}'}, extraneous {extra or '{}'})"
        )

    entries = list(collection.entries)
    pinned_points = []  # natural coordinates covered by pinned entries
    for e in entries:
        if e.extra.nrows and e.is_pinned:
            pinned_points.append(evaluate_orbit(e, e.pinned_parameters()))

    ordered_kinds = sorted(by_kind, key=lambda k: _FACE_KIND_PRIORITY[k])
    for fk in ordered_kinds:
        pres = by_kind[fk]
        if fixed_faces and fk in fixed_faces:
            face = elem.faces[fixed_faces[fk]]
            if face.face_kind != fk:
                raise ValueError(
                    f"face {fixed_faces[fk]} of {elem.kind.value} is not a "
                    f"{fk} face"
                )
        else:
            face = next(f for f in elem.faces if f.face_kind == fk)
        parent_pts = face.embed(pres.dist.nodes)
        worklist = []
        for x in parent_pts:
            try:
                worklist.append(cartesian_to_natural(elem, x, tol=1e-9))
            except OutsideDomainError as exc:
                raise ValueError(
                    f"prescribed face node {x} falls outside the element"
                ) from exc

        while worklist:
            lam_hat = worklist.pop(0)
            covered = any(
                np.min(np.linalg.norm(pp - lam_hat, axis=1)) <= _MATCH_TOL
                for pp in pinned_points
            )
            if covered:
                continue
            placed = False
            for j, entry in enumerate(entries):
                if entry.extra.nrows:
                    continue  # already assigned a constraint
                xi = _orbit_reach(entry, lam_hat)
                if xi is None:
                    continue
                pinned = _pin_entry(entry, xi)
                entries[j] = pinned
                pts = evaluate_orbit(pinned, xi)
                pinned_points.append(pts)
                worklist = [
                    lh
                    for lh in worklist
                    if np.min(np.linalg.norm(pts - lh, axis=1)) > _MATCH_TOL
                ]
                placed = True
                break
            if not placed:
                raise IncompatibleCollectionError(
                    f"collection {collection.indices} cannot place a "
                    f"prescribed {fk.value if fk else 'point'} node at "
                    f"natural coordinates {lam_hat}"
                )

    return OrbitCollection(collection.kind, collection.degree, tuple(entries))


def verify_face_match(elem, dist: NodalDistribution, prescriptions, tol=_MATCH_TOL):
    """True when every face of ``dist`` carries exactly its prescribed nodes.

    A node belongs to a face when its distance to the face's affine hull is
    at most ``tol``; the per-face node subsets are compared against the
    embedded prescriptions as sets under ``tol``.
    """
    by_kind = {p.face_kind: p for p in prescriptions}
    for face in elem.faces:
        pres = by_kind.get(face.face_kind)
        if pres is None:
            return False
        _, resid = face.pullback(dist.nodes)
        on_face = dist.nodes[resid <= tol]
        expected = face.embed(pres.dist.nodes)
        if on_face.shape[0] != face_node_count(face.face_kind, dist.degree):
            return False
        if not _same_point_set(on_face, expected, tol):
            return False
    return True

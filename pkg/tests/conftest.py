"""Shared fixtures: a session-wide cache of optimized distributions.

The acceptance suite and several unit tests need the same optimized node
sets; generating them is the dominant cost, so one bottom-up cache is built
lazily and shared across the whole session.
"""

import numpy as np
import pytest

from symnodes.compatibility import FacePrescription, point_prescription
from symnodes.geometry import ElementKind
from symnodes.optimizer import OptimizerConfig, optimize_nodes

FACE_DEPS = {
    ElementKind.LINE: (),
    ElementKind.TRIANGLE: (ElementKind.LINE,),
    ElementKind.QUADRILATERAL: (ElementKind.LINE,),
    ElementKind.TETRAHEDRON: (ElementKind.TRIANGLE,),
    ElementKind.HEXAHEDRON: (ElementKind.QUADRILATERAL,),
    ElementKind.PRISM: (ElementKind.TRIANGLE, ElementKind.QUADRILATERAL),
    ElementKind.PYRAMID: (ElementKind.TRIANGLE, ElementKind.QUADRILATERAL),
}


class OptimizedCache:
    """Lazy bottom-up generator of compatibility-constrained optima."""

    def __init__(self, config=None):
        self.config = config or OptimizerConfig()
        self._results = {}

    def prescriptions(self, kind, p):
        if kind is ElementKind.LINE:
            return [point_prescription(p)]
        return [
            FacePrescription(face_kind, self.result(face_kind, p).distribution)
            for face_kind in FACE_DEPS[kind]
        ]

    def result(self, kind, p):
        key = (kind, p)
        if key not in self._results:
            pres = self.prescriptions(kind, p)
            self._results[key] = optimize_nodes(kind, p, pres, self.config)
        return self._results[key]

    def dist(self, kind, p):
        return self.result(kind, p).distribution


@pytest.fixture(scope="session")
def opt_cache():
    return OptimizedCache()

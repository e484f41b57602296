import numpy as np
import pytest

from symnodes.baselines import BaselineKind, baseline_distribution, gll_1d
from symnodes.basis import jacobi, jacobi_derivative
from symnodes.compatibility import FacePrescription, verify_face_match
from symnodes.errors import UnsupportedBaselineError
from symnodes.geometry import ElementKind, node_count, reference_element
from symnodes.symmetry import cartesian_symmetry_group

ALL_KINDS = list(ElementKind)


def test_gll_examples():
    np.testing.assert_allclose(gll_1d(1), [-1, 1])
    np.testing.assert_allclose(gll_1d(2), [-1, 0, 1], atol=1e-15)
    s = np.sqrt(1.0 / 5.0)
    np.testing.assert_allclose(gll_1d(3), [-1, -s, s, 1], atol=1e-15)


@pytest.mark.parametrize("p", [2, 5, 9, 14, 20, 30])
def test_gll_residual_and_interlacing(p):
    nodes = gll_1d(p)
    assert nodes[0] == -1.0 and nodes[-1] == 1.0
    np.testing.assert_allclose(nodes, -nodes[::-1], atol=1e-15)
    interior = nodes[1:-1]
    resid = (1.0 - interior**2) * jacobi_derivative(p, 0.0, 0.0, interior)
    assert np.max(np.abs(resid)) <= 1e-13
    # Interlacing with the Legendre roots of the same degree.
    from symnodes.quadrature import gauss_legendre_1d

    roots, _ = gauss_legendre_1d(p)
    assert np.all(interior > roots[:-1]) and np.all(interior < roots[1:])


def test_baseline_examples():
    quad = baseline_distribution(ElementKind.QUADRILATERAL, 2, "gll")
    got = sorted(map(tuple, quad.nodes.tolist()))
    grid = sorted(
        (x, y) for x in (-1.0, 0.0, 1.0) for y in (-1.0, 0.0, 1.0)
    )
    assert got == grid

    tri = baseline_distribution(ElementKind.TRIANGLE, 2, "uniform")
    expected = {
        (-1, -1), (1, -1), (-1, 1),  # vertices
        (0, -1), (-1, 0), (0, 0),  # edge midpoints
    }
    got = {tuple(np.round(n, 12)) for n in tri.nodes}
    assert got == {(float(a), float(b)) for a, b in expected}

    pyr = baseline_distribution(ElementKind.PYRAMID, 1, "uniform")
    assert pyr.count == 5
    got = {tuple(np.round(n, 12)) for n in pyr.nodes}
    assert (0.0, 0.0, 1.0) in got


def test_gll_rejected_off_tensor_shapes():
    for kind in (
        ElementKind.TRIANGLE,
        ElementKind.TETRAHEDRON,
        ElementKind.PRISM,
        ElementKind.PYRAMID,
    ):
        with pytest.raises(UnsupportedBaselineError):
            baseline_distribution(kind, 2, BaselineKind.GLL)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_uniform_counts_and_symmetry(kind, p):
    dist = baseline_distribution(kind, p, "uniform")
    assert dist.count == node_count(kind, p)
    for A, b in cartesian_symmetry_group(kind):
        mapped = dist.nodes @ A.T + b
        assert _match(mapped, dist.nodes, 1e-12)


def _match(a, b, tol):
    used = np.zeros(len(b), dtype=bool)
    for x in a:
        d = np.linalg.norm(b - x, axis=1)
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] > tol:
            return False
        used[j] = True
    return True


def test_baseline_face_restriction():
    # Tensor GLL restricts to GLL on faces; uniform restricts to uniform.
    hexa = reference_element(ElementKind.HEXAHEDRON)
    hex_gll = baseline_distribution(ElementKind.HEXAHEDRON, 3, "gll")
    quad_gll = baseline_distribution(ElementKind.QUADRILATERAL, 3, "gll")
    assert verify_face_match(
        hexa, hex_gll, [FacePrescription(ElementKind.QUADRILATERAL, quad_gll)]
    )
    prism = reference_element(ElementKind.PRISM)
    pu = baseline_distribution(ElementKind.PRISM, 3, "uniform")
    tu = baseline_distribution(ElementKind.TRIANGLE, 3, "uniform")
    qu = baseline_distribution(ElementKind.QUADRILATERAL, 3, "uniform")
    assert verify_face_match(
        prism,
        pu,
        [
            FacePrescription(ElementKind.TRIANGLE, tu),
            FacePrescription(ElementKind.QUADRILATERAL, qu),
        ],
    )
    pyr = reference_element(ElementKind.PYRAMID)
    pyu = baseline_distribution(ElementKind.PYRAMID, 2, "uniform")
    tu2 = baseline_distribution(ElementKind.TRIANGLE, 2, "uniform")
    qu2 = baseline_distribution(ElementKind.QUADRILATERAL, 2, "uniform")
    assert verify_face_match(
        pyr,
        pyu,
        [
            FacePrescription(ElementKind.TRIANGLE, tu2),
            FacePrescription(ElementKind.QUADRILATERAL, qu2),
        ],
    )

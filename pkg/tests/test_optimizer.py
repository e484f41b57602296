import numpy as np
import pytest

from symnodes import lincon
from symnodes.baselines import baseline_distribution, gll_1d
from symnodes.basis import FunctionSpace
from symnodes.compatibility import (
    FacePrescription,
    build_compatibility_constraints,
    point_prescription,
)
from symnodes.errors import ConstraintConflictError
from symnodes.geometry import ElementKind, reference_element
from symnodes.metrics import lebesgue_constant, lebesgue_objective
from symnodes.optimizer import (
    OptimizerConfig,
    assemble_problem,
    minimize,
    objective_and_gradient,
    optimize_nodes,
)
from symnodes.quadrature import quadrature_rule
from symnodes.symmetry import (
    ConstrainedOrbit,
    LinearConstraintSet,
    OrbitCollection,
    attach_constraints,
    enumerate_admissible_collections,
    orbits,
)


def _collection(kind, degree, indices):
    table = {o.index: o for o in orbits(kind)}
    return OrbitCollection(
        kind,
        degree,
        tuple(
            ConstrainedOrbit(
                table[i], LinearConstraintSet.empty(table[i].param_count)
            )
            for i in indices
        ),
    )


def _problem(kind, p, indices, prescriptions=None):
    elem = reference_element(kind)
    coll = _collection(kind, p, indices)
    if prescriptions:
        coll = build_compatibility_constraints(elem, coll, prescriptions)
    space = FunctionSpace(kind, p)
    rule = quadrature_rule(kind, 2 * p)
    return assemble_problem(elem, coll, space, rule), coll


# ---------------------------------------------------------------------------
# Core solver sanity (quadratic test problems)
# ---------------------------------------------------------------------------


def test_active_set_box_quadratic():
    fun = lambda x: (
        float((x[0] - 2) ** 2 + (x[1] - 2) ** 2),
        np.array([2 * (x[0] - 2), 2 * (x[1] - 2)]),
    )
    res = lincon.minimize_linearly_constrained(
        fun, np.zeros(2), np.eye(2), [0, 0], [1, 1]
    )
    assert res.status == "kkt-converged"
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-10)


def test_active_set_equality_quadratic():
    fun = lambda x: (float(x @ x), 2 * x)
    B = np.vstack([np.eye(2), np.ones((1, 2))])
    res = lincon.minimize_linearly_constrained(
        fun, np.array([1.0, 0.0]), B, [-10, -10, 1], [10, 10, 1]
    )
    assert res.status == "kkt-converged"
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-10)


def test_projection_and_feasibility():
    B = np.array([[1.0, 1.0]])
    x = lincon.project_onto(B, [-np.inf], [1.0], np.array([2.0, 2.0]))
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-10)
    assert lincon.feasible_point(np.array([[1.0]]), [2.0], [1.0]) is None


# ---------------------------------------------------------------------------
# Problem assembly
# ---------------------------------------------------------------------------


def test_assemble_worked_triangle_system():
    # Collection (1, 2, 2, 3, 3) with the second 6-point orbit restricted to
    # an edge: the stacked set must reduce to the textbook intervals.
    kind = ElementKind.TRIANGLE
    table = {o.index: o for o in orbits(kind)}
    e = lambda i: ConstrainedOrbit(
        table[i], LinearConstraintSet.empty(table[i].param_count)
    )
    pinned = attach_constraints(table[3], [[0.0, 1.0]], [0.0], [0.0])
    coll = OrbitCollection(kind, None, (e(1), e(2), e(2), e(3), pinned))
    elem = reference_element(kind)
    problem = assemble_problem(
        elem, coll, FunctionSpace(kind, 3), quadrature_rule(kind, 6)
    )
    cons = problem.constraints
    lo, hi = lincon.coordinate_intervals(cons.matrix, cons.lower, cons.upper)
    np.testing.assert_allclose(lo, [0, 0, 0, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(hi, [0.5, 0.5, 1, 1, 1, 0], atol=1e-12)
    # alpha3 + alpha4 <= 1 via an LP probe on the same stacked system.
    from scipy.optimize import linprog

    from symnodes.lincon import _lp_parts

    A_eq, b_eq, A_ub, b_ub = _lp_parts(cons.matrix, cons.lower, cons.upper)
    c = np.zeros(6)
    c[2] = c[3] = -1.0
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq if A_eq.shape[0] else None,
        b_eq=b_eq if A_eq.shape[0] else None,
        bounds=[(None, None)] * 6,
        method="highs",
    )
    assert abs(-res.fun - 1.0) < 1e-12


def test_assemble_fully_pinned_line():
    problem, coll = _problem(
        ElementKind.LINE, 2, (1, 2), [point_prescription(2)]
    )
    assert problem.free_dimension == 0
    assert coll.entries[1].is_pinned


def test_assemble_conflict():
    kind = ElementKind.LINE
    table = {o.index: o for o in orbits(kind)}
    bad = ConstrainedOrbit(
        table[2],
        LinearConstraintSet(
            np.array([[1.0], [1.0]]), np.array([0.2, 0.8]), np.array([0.2, 0.8])
        ),
    )
    coll = OrbitCollection(
        kind, None, (bad,)
    )
    with pytest.raises(ConstraintConflictError):
        assemble_problem(
            reference_element(kind),
            coll,
            FunctionSpace(kind, 1),
            quadrature_rule(kind, 2),
        )


# ---------------------------------------------------------------------------
# Objective and gradient
# ---------------------------------------------------------------------------


def test_objective_fully_pinned_line():
    problem, coll = _problem(
        ElementKind.LINE, 2, (1, 2), [point_prescription(2)]
    )
    xi = np.array([e.pinned_parameters() for e in coll.entries if e.extra.nrows])
    f, g = objective_and_gradient(problem, xi.ravel())
    assert f == pytest.approx(8.0 / 5.0, abs=1e-12)
    assert g.size == 0


def _random_feasible_points(problem, count, seed):
    rng = np.random.default_rng(seed)
    cons = problem.constraints
    center = lincon.interior_point(cons.matrix, cons.lower, cons.upper)
    pts = []
    attempts = 0
    while len(pts) < count and attempts < 100 * count:
        attempts += 1
        xi = center + rng.normal(scale=0.1, size=cons.nvars)
        if cons.violation(xi) > 0.0:
            continue
        try:
            f, _ = objective_and_gradient(problem, xi)
        except Exception:
            continue
        if np.isfinite(f) and f < 1e8:
            pts.append(xi)
    return pts


@pytest.mark.parametrize(
    "kind,p,indices",
    [
        (ElementKind.LINE, 3, (2, 2)),
        (ElementKind.TRIANGLE, 2, (2, 2)),
        (ElementKind.QUADRILATERAL, 2, (1, 2, 3)),
        (ElementKind.PYRAMID, 2, (1, 1, 2, 3, 3)),
    ],
)
def test_gradient_matches_fd(kind, p, indices):
    problem, _ = _problem(kind, p, indices)
    for xi in _random_feasible_points(problem, 5, seed=1):
        f_a, g_a = objective_and_gradient(problem, xi, mode="analytic")
        f_f, g_f = objective_and_gradient(problem, xi, mode="fd")
        assert f_a == pytest.approx(f_f, rel=1e-12)
        denom = max(np.linalg.norm(g_a), 1e-8)
        assert np.linalg.norm(g_a - g_f) / denom < 1e-5


def test_line_p4_objective_shape():
    # Along the free parameter the objective is stationary at the optimum
    # and grows on both sides.
    problem, coll = _problem(
        ElementKind.LINE, 4, (1, 2, 2), [point_prescription(4)]
    )
    res = minimize(problem, OptimizerConfig(), np.array([1.0, 0.5]))
    xi_star = res.parameters
    f_star, g_star = objective_and_gradient(problem, xi_star)
    assert np.max(np.abs(g_star)) < 1e-8
    Z = problem.null_basis
    for t in (1e-3, -1e-3):
        f_t, _ = objective_and_gradient(problem, xi_star + Z[:, 0] * t)
        assert f_t > f_star


# ---------------------------------------------------------------------------
# minimize / optimize_nodes
# ---------------------------------------------------------------------------


def test_minimize_line_p4_near_gll():
    problem, coll = _problem(
        ElementKind.LINE, 4, (1, 2, 2), [point_prescription(4)]
    )
    # Initialize the free symmetric pair at the uniform interior node.
    xi0 = np.zeros(coll.total_params)
    for entry, sl in zip(coll.entries, problem.collection.slices()):
        if entry.extra.nrows:
            xi0[sl] = entry.pinned_parameters()
    free_slice = [
        sl
        for entry, sl in zip(coll.entries, problem.collection.slices())
        if not entry.extra.nrows and entry.param_count
    ][0]
    xi0[free_slice] = 0.5
    res = minimize(problem, OptimizerConfig(), xi0)
    assert res.status == "kkt-converged"
    alpha = abs(res.parameters[free_slice][0])
    assert abs(alpha - 0.65) <= 0.05


def test_optimize_line_p2_forced():
    r = optimize_nodes(ElementKind.LINE, 2, [point_prescription(2)])
    np.testing.assert_allclose(
        np.sort(r.distribution.nodes.ravel()), [-1, 0, 1], atol=1e-12
    )
    assert r.status == "kkt-converged"


def test_optimize_triangle_p1_vertices():
    line = optimize_nodes(ElementKind.LINE, 1, [point_prescription(1)])
    r = optimize_nodes(
        ElementKind.TRIANGLE,
        1,
        [FacePrescription(ElementKind.LINE, line.distribution)],
    )
    got = sorted(map(tuple, np.round(r.distribution.nodes, 12).tolist()))
    assert got == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0)]


def test_optimize_monotone_improvement_and_feasibility():
    r = optimize_nodes(ElementKind.LINE, 5, [point_prescription(5)])
    gll = baseline_distribution(ElementKind.LINE, 5, "gll")
    sp = FunctionSpace(ElementKind.LINE, 5)
    rule = quadrature_rule(ElementKind.LINE, 10)
    # Initialized from the tensor baseline, so it can only improve on it.
    assert r.objective <= lebesgue_objective(sp, gll, rule) + 1e-12
    cons = r.collection.stacked_constraints()
    assert cons.violation(r.parameters) <= 1e-10


def test_optimize_determinism():
    cfg = OptimizerConfig(seed=3)
    a = optimize_nodes(ElementKind.TRIANGLE, 2, (), cfg)
    b = optimize_nodes(ElementKind.TRIANGLE, 2, (), cfg)
    np.testing.assert_array_equal(a.distribution.nodes, b.distribution.nodes)
    assert a.objective == b.objective

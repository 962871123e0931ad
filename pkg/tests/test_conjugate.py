"""Velocity-hull model, conjugate values, and the structured split.

Independent oracles: hand-reduced planar geometry for the preset hull (the
image lives in the (x2dot, x4dot) plane), scipy.optimize.linprog for hull
membership, and the closed-form 5*b2 + 9*b4 expression valid on that hull.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from laxopt.conjugate import (
    BiconjugateTable,
    ConvexCombination,
    HullModel,
    biconjugate,
    control_image_hull,
    hamiltonian,
    hstar,
    hstar_structured,
    hull_distance,
    reduced_lagrangian,
    sample_hull,
)
from laxopt.model import Box, CostSpec, FiniteSet, Problem, StructuredDynamics, TimeGrid, gear_preset

GEAR = gear_preset()
HULL = sample_hull(GEAR, 0.0, np.zeros(4))

V1 = np.array([0.0, -0.25, 0.0, 0.25])
V2 = np.array([0.0, -1.0 / 13.0, 0.0, 2.0 / 13.0])


def members_of(hull):
    return {tuple(np.round(v, 12)) for v in hull.vertices}


# ---------------------------------------------------------------------------
# hull sampling


def test_gear_hull_has_three_extreme_velocities():
    assert HULL.size == 3
    assert members_of(HULL) == {
        (0.0, 0.0, 0.0, 0.0),
        tuple(np.round(V1, 12)),
        tuple(np.round(V2, 12)),
    }
    by_vertex = {tuple(np.round(v, 12)): c for v, c in zip(HULL.vertices, HULL.vertex_costs)}
    assert by_vertex[(0.0, 0.0, 0.0, 0.0)] == pytest.approx(0.0, abs=1e-12)
    assert by_vertex[tuple(np.round(V1, 12))] == pytest.approx(1.0, abs=1e-12)
    assert by_vertex[tuple(np.round(V2, 12))] == pytest.approx(1.0, abs=1e-12)


def test_gear_hull_vertices_are_generated_by_their_controls():
    for b, a, c in zip(HULL.vertices, HULL.generator_controls, HULL.vertex_costs):
        assert GEAR.controls.contains(a)
        assert np.allclose(b, HULL.base - GEAR.dynamics.h(0.0, a), atol=1e-12)
        expected = GEAR.cost.stage_state(0.0, np.zeros(4)) + GEAR.cost.stage_control(0.0, a)
        assert c == pytest.approx(expected, abs=1e-10)


def test_hull_base_shifts_with_the_state():
    x = np.array([0.0, 0.05, 0.0, -0.3])
    shifted = sample_hull(GEAR, 0.0, x)
    assert np.allclose(shifted.base, [-0.05, 0.0, 0.3, 0.0])
    rel0 = sorted(map(tuple, np.round(HULL.vertices - HULL.base, 12)))
    rel1 = sorted(map(tuple, np.round(shifted.vertices - shifted.base, 12)))
    assert rel0 == rel1


def test_singleton_control_set_gives_singleton_hull():
    dyn = StructuredDynamics(A=np.array([[0.0]]), control_term=lambda t, a: np.array([a[0] ** 2]))
    prob = Problem(
        dynamics=dyn,
        cost=CostSpec(
            stage_state=lambda t, x: 0.5,
            stage_control=lambda t, a: float(a[0]),
            terminal=lambda x: 0.0,
        ),
        controls=FiniteSet(np.array([[3.0]])),
        grid=TimeGrid.uniform(0.0, 1.0, 4),
        x0=np.zeros(1),
        name="singleton",
    )
    hull = sample_hull(prob, 0.0, np.zeros(1))
    assert hull.size == 1
    assert np.allclose(hull.vertices[0], [-9.0])
    assert hull.vertex_costs[0] == pytest.approx(3.5)
    # hamiltonian of a singleton is p.b - cost exactly
    assert hamiltonian(hull, np.array([2.0])) == pytest.approx(-18.0 - 3.5)
    assert biconjugate(hull, np.array([2.0]), density=5) == pytest.approx(-21.5, abs=1e-8)


def test_control_image_hull_excludes_state_cost():
    img = control_image_hull(GEAR, 0.0)
    assert img.size == 3
    assert np.allclose(img.base, 0.0)
    assert members_of(img) == members_of(HULL)


# ---------------------------------------------------------------------------
# reduced lagrangian


def test_reduced_lagrangian_matches_generating_control():
    cands = np.array([[1.0, 0.0], [1.0, 1.0], [2.0, 1.0]])
    val = reduced_lagrangian(GEAR, 0.0, np.zeros(4), V1, cands)
    assert val.finite and val.value == pytest.approx(1.0)


def test_reduced_lagrangian_zero_velocity_is_free():
    cands = np.array([[1.0, 0.0], [2.0, 0.5]])
    val = reduced_lagrangian(GEAR, 0.0, np.zeros(4), np.zeros(4), cands)
    assert val.finite and val.value == pytest.approx(0.0)


def test_reduced_lagrangian_unreachable_velocity_is_infinite():
    cands = np.array([[1.0, u2] for u2 in np.linspace(0, 1, 21)])
    val = reduced_lagrangian(GEAR, 0.0, np.zeros(4), np.array([0.0, 0.1, 0.0, 0.0]), cands)
    assert not val.finite


# ---------------------------------------------------------------------------
# hamiltonian


def test_hamiltonian_at_zero_costate():
    assert hamiltonian(HULL, np.zeros(4)) == pytest.approx(0.0)


def test_hamiltonian_enumerates_vertices():
    p = np.array([0.0, -9.0, 0.0, 0.0])
    # max(0, 9/4 - 1, 9/13 - 1) = 1.25
    assert hamiltonian(HULL, p) == pytest.approx(1.25)


# ---------------------------------------------------------------------------
# conjugate values


def test_hstar_on_the_gear1_vertex():
    val = hstar(HULL, V1)
    assert val.finite and val.value == pytest.approx(1.0, abs=1e-7)
    w = val.combination.weights
    idx = [i for i, v in enumerate(HULL.vertices) if np.allclose(v, V1)][0]
    assert w[idx] == pytest.approx(1.0, abs=1e-6)


def test_hstar_at_zero_velocity():
    val = hstar(HULL, np.zeros(4))
    assert val.finite and val.value == pytest.approx(0.0, abs=1e-8)


def test_hstar_interior_point():
    val = hstar(HULL, np.array([0.0, -0.1, 0.0, 0.11]))
    assert val.finite
    assert val.value == pytest.approx(5 * (-0.1) + 9 * 0.11, abs=1e-7)


def test_hstar_outside_the_hull_is_infinite():
    assert not hstar(HULL, np.array([0.0, 0.0, 0.0, 0.5])).finite
    assert not hstar(HULL, np.array([0.1, -0.1, 0.0, 0.11])).finite


def test_hstar_combination_reconstructs_the_query_point():
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.dirichlet(np.ones(3))
        b = w @ HULL.vertices
        val = hstar(HULL, b)
        assert val.finite
        assert np.allclose(val.combination.combine(HULL.vertices), b, atol=1e-6)


def test_gear_conjugate_is_linear_on_the_hull():
    rng = np.random.default_rng(42)
    for _ in range(100):
        w = rng.dirichlet(np.ones(3) * rng.uniform(0.3, 3.0))
        b = w @ HULL.vertices
        val = hstar(HULL, b)
        assert val.finite
        assert abs(val.value - (5.0 * b[1] + 9.0 * b[3])) <= 1e-8


# ---------------------------------------------------------------------------
# structured split


def test_structured_split_matches_shifted_query():
    x = np.array([0.0, 0.05, 0.0, -0.3])
    b = np.array([-0.05, -0.25, 0.3, 0.25])
    val = hstar_structured(GEAR, 0.0, x, b)
    assert val.finite and val.value == pytest.approx(1.0, abs=1e-7)


def test_structured_split_zero_shifted_argument():
    x = np.array([0.4, -0.02, 0.1, 0.07])
    val = hstar_structured(GEAR, 0.0, x, -(GEAR.dynamics.A @ x))
    assert val.finite and val.value == pytest.approx(0.0, abs=1e-8)


def test_structured_split_infinite_branch():
    assert not hstar_structured(GEAR, 0.0, np.zeros(4), np.array([0.0, 0.0, 0.0, 0.5])).finite


def test_structured_split_agrees_with_full_hull():
    rng = np.random.default_rng(3)
    for _ in range(15):
        x = rng.uniform(-0.5, 0.5, size=4)
        hull_x = sample_hull(GEAR, 0.0, x)
        w = rng.dirichlet(np.ones(hull_x.size))
        b = w @ hull_x.vertices
        full = hstar(hull_x, b)
        split = hstar_structured(GEAR, 0.0, x, b)
        assert full.finite and split.finite
        assert abs(full.value - split.value) <= 1e-8


# ---------------------------------------------------------------------------
# membership dichotomy against an independent LP


def membership_by_linprog(hull, b):
    nv = hull.size
    A_eq = np.vstack([hull.vertices.T, np.ones((1, nv))])
    b_eq = np.concatenate([b, [1.0]])
    res = linprog(np.zeros(nv), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * nv, method="highs")
    return res.status == 0


def test_finite_iff_inside_hull():
    rng = np.random.default_rng(11)
    disagreements = 0
    for trial in range(250):
        if trial % 5 < 3:
            b = rng.uniform(-0.3, 0.3, size=4)
        else:
            w = rng.dirichlet(np.ones(3))
            b = w @ HULL.vertices
        lhs = hstar(HULL, b).finite
        rhs = membership_by_linprog(HULL, b)
        disagreements += lhs != rhs
    assert disagreements == 0


def test_hull_distance_sign():
    assert hull_distance(HULL, V2) == pytest.approx(0.0, abs=1e-7)
    w = np.array([0.2, 0.5, 0.3])
    assert hull_distance(HULL, w @ HULL.vertices) == pytest.approx(0.0, abs=1e-7)
    assert hull_distance(HULL, np.array([0.0, 0.0, 0.0, 0.5])) > 0.1


# ---------------------------------------------------------------------------
# convexity and biconjugacy


@settings(max_examples=25, deadline=None)
@given(
    w1=st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
    w2=st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
    lam=st.floats(0.05, 0.95),
)
def test_hstar_is_convex_along_hull_segments(w1, w2, lam):
    a1 = np.array(w1) / np.sum(w1)
    a2 = np.array(w2) / np.sum(w2)
    b1 = a1 @ HULL.vertices
    b2 = a2 @ HULL.vertices
    mid = lam * b1 + (1 - lam) * b2
    v1 = hstar(HULL, b1)
    v2 = hstar(HULL, b2)
    vm = hstar(HULL, mid)
    assert v1.finite and v2.finite and vm.finite
    assert vm.value <= lam * v1.value + (1 - lam) * v2.value + 1e-7


def test_biconjugate_recovers_hamiltonian_within_grid_bound():
    table = BiconjugateTable(HULL, density=9)
    assert table.resolution > 0
    rng = np.random.default_rng(8)
    for _ in range(20):
        p = rng.uniform(-10, 10, size=4)
        gap = abs(table.evaluate(p) - hamiltonian(HULL, p))
        assert gap <= 2.0 * table.resolution * np.linalg.norm(p) + 1e-6
    assert abs(table.evaluate(np.zeros(4)) - 0.0) <= 1e-6
    p = np.array([0.0, -9.0, 0.0, 0.0])
    assert table.evaluate(p) == pytest.approx(1.25, abs=2.0 * table.resolution * 9.0 + 1e-6)


# ---------------------------------------------------------------------------
# plumbing types


def test_convex_combination_validation():
    c = ConvexCombination(np.array([0.25, 0.75]))
    assert np.allclose(c.combine(np.array([[0.0, 0.0], [1.0, 2.0]])), [0.75, 1.5])
    with pytest.raises(ValueError):
        ConvexCombination(np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        ConvexCombination(np.array([-0.1, 1.1]))


def test_hull_model_validation():
    with pytest.raises(ValueError):
        HullModel(
            base=np.zeros(2),
            vertices=np.zeros((0, 2)),
            vertex_costs=np.zeros(0),
            generator_controls=np.zeros((0, 1)),
        )

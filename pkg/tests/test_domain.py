import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msdl.domain import (
    AnnularDomain,
    ParameterGrid,
    build_exhaustion,
    homology_basis,
    sample_circle,
    urysohn_weights,
)
from msdl.errors import DisjointnessError, InvalidGeometryError, OutOfDomainError, PreconditionError


def test_exhaustion_one_stage_is_endpoints():
    K0, L = AnnularDomain(0.6, 1.8), AnnularDomain(0.5, 2.0)
    ex = build_exhaustion(K0, L, 1, 1.0)
    assert ex.stages == (K0, L)


def test_exhaustion_two_stages_geometric_middle():
    ex = build_exhaustion(AnnularDomain(0.6, 1.8), AnnularDomain(0.5, 2.0), 2, 1.0)
    mid = ex[1]
    assert mid.r_in == pytest.approx(math.sqrt(0.6 * 0.5), rel=1e-14)
    assert mid.r_out == pytest.approx(math.sqrt(1.8 * 2.0), rel=1e-14)
    assert mid.r_in == pytest.approx(0.5477, abs=1e-4)
    assert mid.r_out == pytest.approx(1.8974, abs=1e-4)


def test_exhaustion_rejects_non_nested():
    with pytest.raises(InvalidGeometryError):
        build_exhaustion(AnnularDomain(0.6, 1.8), AnnularDomain(0.7, 1.7), 1)


def test_exhaustion_rejects_zero_stages():
    with pytest.raises(PreconditionError):
        build_exhaustion(AnnularDomain(0.6, 1.8), AnnularDomain(0.5, 2.0), 0)


@given(st.integers(1, 6), st.floats(0.51, 0.9), st.floats(1.1, 1.95))
def test_exhaustion_strictly_nested(stages, r_in, r_out):
    ex = build_exhaustion(AnnularDomain(r_in, r_out), AnnularDomain(0.5, 2.0), stages, 1.0)
    assert len(ex) == stages + 1
    for a, b in zip(ex.stages, ex.stages[1:]):
        assert a.strictly_inside(b)
        assert len(b.components_outside(a)) <= 2


def test_annulus_validation():
    with pytest.raises(InvalidGeometryError):
        AnnularDomain(2.0, 1.0)
    with pytest.raises(InvalidGeometryError):
        AnnularDomain(-1.0, 1.0)
    assert AnnularDomain(0.0, 1.0).is_disc


def test_homology_basis_core_circle():
    assert homology_basis(AnnularDomain(0.5, 2.0)).radii == (1.0,)
    assert homology_basis(AnnularDomain(0.0, 2.0)).count == 0


def test_sample_circle_roots_of_unity():
    z = sample_circle(1.0, 4)
    np.testing.assert_allclose(z, [1, 1j, -1, -1j], atol=1e-15)
    z8 = sample_circle(1.0, 8)
    assert np.min(np.abs(z8 - np.exp(1j * math.pi / 4))) < 1e-15


def test_sample_circle_too_few_nodes():
    with pytest.raises(PreconditionError):
        sample_circle(2.0, 2)


def test_sample_circle_outside_domain():
    with pytest.raises(OutOfDomainError):
        sample_circle(3.0, 8, AnnularDomain(0.5, 2.0))


def _line_grid(n_t=5):
    return ParameterGrid(np.zeros(1), np.zeros(1, bool), np.linspace(0, 1, n_t))


def test_urysohn_endpoints_and_midpoint():
    grid = _line_grid(5)
    w = urysohn_weights(grid, [0], [4])
    assert w[0] == 0.0 and w[4] == 1.0
    assert w[2] == 0.5


def test_urysohn_overlap_rejected():
    with pytest.raises(DisjointnessError):
        urysohn_weights(_line_grid(), [0, 1], [1, 2])


@given(st.integers(3, 9), st.integers(2, 6), st.data())
def test_urysohn_range_and_lipschitz(n_t, n_p, data):
    grid = ParameterGrid.uniform(n_p, np.linspace(0, 1, n_t))
    nodes = list(range(grid.n_nodes))
    Y = data.draw(st.sets(st.sampled_from(nodes), min_size=1, max_size=len(nodes) - 1))
    Z = data.draw(st.sets(st.sampled_from([i for i in nodes if i not in Y]), min_size=1))
    w = urysohn_weights(grid, Y, Z)
    assert np.all((w >= 0) & (w <= 1))
    assert all(w[i] == 0 for i in Y) and all(w[i] == 1 for i in Z)
    X = grid.coords()
    dYZ = min(np.linalg.norm(X[y] - X[z]) for y in Y for z in Z)
    for i in nodes:
        for j in nodes:
            d = np.linalg.norm(X[i] - X[j])
            assert abs(w[i] - w[j]) <= d / dYZ + 1e-12


def test_grid_fixed_and_gated_nodes():
    grid = ParameterGrid.uniform(3, [0.0, 0.5, 1.0], q_indices=[0], stages=2)
    fixed = grid.fixed_nodes()
    assert fixed == {0, 1, 2, 3, 6}
    assert grid.T_chain[-1] == frozenset({1, 2})
    assert grid.T_chain[0] <= grid.T_chain[1]
    gated = grid.gated_nodes(2, 1 / 3)
    assert gated == {4, 5, 7, 8}


def test_grid_rejects_q_inside_T():
    with pytest.raises(PreconditionError):
        ParameterGrid(np.linspace(0, 1, 2), np.array([True, False]), [0.0, 1.0],
                      (frozenset({0, 1}),))

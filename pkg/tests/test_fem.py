import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov.fem import (
    AssemblyError,
    Mesh1D,
    MeshError,
    bisect_mesh,
    build_mesh,
    observed_order,
    refinement_study,
    steklov_mode_fem,
    study_to_json,
)
from steklov.modal import sphere_eigenvalue
from steklov.profile import (
    Piece,
    Profile,
    make_capped,
    make_euclidean,
    make_plateau_h0,
    make_plateau_large,
    make_plateau_small,
)
from steklov.shoot import steklov_mode

PROFILES = [
    make_euclidean(4, 2.0),
    make_plateau_large(4, 1.0, 1e-2),
    make_plateau_large(3, 1.0, 1e-3),
    make_plateau_small(4, 1.0, 1e-2),
    make_plateau_h0(1.0, 1e-2, 0.7),
    make_capped(3, 1.0, 0.5, 1.0, 2.0, [(0, 1.5), (0.6, 1.5)]),
]


# -- meshes ---------------------------------------------------------------------

def test_uniform_mesh_nodes():
    m = build_mesh(make_euclidean(3, 1), 8, "uniform")
    np.testing.assert_array_equal(m.nodes, np.arange(9) / 8)
    assert m.N == 8


def test_junction_mesh_forces_nodes():
    eps = 1e-2
    p = make_plateau_large(4, 1, eps)
    nodes = build_mesh(p, 1000, "junction").nodes
    for x in (eps, 2 * eps, 1 - 2 * eps, 1 - eps):
        assert np.any(nodes == x)
    assert len(nodes) == 1001


@pytest.mark.parametrize("grading", ["uniform", "geometric", "junction"])
def test_mesh_minimum_size(grading):
    with pytest.raises(MeshError):
        build_mesh(make_euclidean(3, 1), 4, grading)


def test_mesh_errors():
    with pytest.raises(MeshError):
        build_mesh(make_euclidean(3, 1), 100, "random")
    with pytest.raises(MeshError):
        build_mesh(make_euclidean(3, 1), 100, "geometric", ratio=1.5)
    with pytest.raises(MeshError):  # five pieces need at least 20 cells
        build_mesh(make_plateau_small(4, 1, 1e-2), 16, "junction")


@given(idx=st.integers(0, len(PROFILES) - 1), N=st.integers(40, 3000),
       grading=st.sampled_from(["uniform", "geometric", "junction"]))
def test_mesh_invariants(idx, N, grading):
    p = PROFILES[idx]
    m = build_mesh(p, N, grading)
    assert m.nodes[0] == 0.0 and m.nodes[-1] == p.R
    assert np.all(np.diff(m.nodes) > 0)
    assert m.N >= 8
    assert set(p.breakpoints).issubset(set(m.nodes))


def test_geometric_refines_toward_pole():
    d = np.diff(build_mesh(make_euclidean(3, 1), 200, "geometric", 0.98).nodes)
    assert d[-1] < d[0]


# -- values -----------------------------------------------------------------------

def test_euclidean_examples():
    p3, p4 = make_euclidean(3, 1), make_euclidean(4, 1)
    assert steklov_mode_fem(p3, 2, build_mesh(p3, 2000)) == pytest.approx(1.0, rel=1e-5)
    assert steklov_mode_fem(p4, 3, build_mesh(p4, 2000)) == pytest.approx(1.0, rel=1e-5)


def test_lambda_zero_and_domain():
    p = make_euclidean(3, 1)
    m = build_mesh(p, 64)
    assert steklov_mode_fem(p, 0.0, m) == 0.0
    with pytest.raises(ValueError):
        steklov_mode_fem(p, -1.0, m)
    with pytest.raises(MeshError):
        steklov_mode_fem(make_euclidean(3, 2), 2.0, m)


def test_non_spd_assembly_reported():
    # h < 0 inside makes the stiffness weights negative
    p = Profile(4, 1.0, "PiecewiseMollified", {}, (Piece(0.0, 1.0, (0.5, -1.0)),), strict=False)
    with pytest.raises(AssemblyError):
        steklov_mode_fem(p, 3.0, build_mesh(p, 64, "uniform"))


def test_overflowing_weights_reported():
    p = Profile(6, 1.0, "PiecewiseMollified", {}, (Piece(0.0, 1.0, (1e100, 0.0)),), strict=False)
    with pytest.raises(AssemblyError):
        steklov_mode_fem(p, 3.0, build_mesh(p, 64, "uniform"))


def test_cross_solver_small_plateau():
    p = make_plateau_small(4, 1, 1e-2)
    s = steklov_mode(p, 3)
    assert abs(steklov_mode_fem(p, 3, build_mesh(p, 4000)) - s) / s <= 1e-3


@pytest.mark.parametrize("p", PROFILES, ids=lambda p: p.tag)
@pytest.mark.parametrize("k", [1, 2, 4])
def test_cross_solver_agreement(p, k):
    lam = sphere_eigenvalue(p.n, k)
    s = steklov_mode(p, lam)
    fem = steklov_mode_fem(p, lam, build_mesh(p, 4000))
    assert fem >= s * (1 - 1e-10)  # conforming upper bound
    assert (fem - s) / s <= 1e-3


@given(idx=st.integers(0, len(PROFILES) - 1), k=st.integers(1, 5), N=st.integers(20, 800))
def test_upper_bound_property(idx, k, N):
    p = PROFILES[idx]
    lam = sphere_eigenvalue(p.n, k)
    assert steklov_mode_fem(p, lam, build_mesh(p, N)) >= steklov_mode(p, lam) * (1 - 1e-10)


@given(idx=st.integers(0, len(PROFILES) - 1), lam=st.floats(0.5, 50), N=st.integers(20, 1000),
       grading=st.sampled_from(["uniform", "junction"]))
def test_nested_refinement_monotone(idx, lam, N, grading):
    p = PROFILES[idx]
    m = build_mesh(p, N, grading)
    coarse = steklov_mode_fem(p, lam, m)
    fine = steklov_mode_fem(p, lam, bisect_mesh(m))
    assert fine <= coarse * (1 + 1e-12)


def test_bisect_mesh():
    m = Mesh1D(np.array([0.0, 0.5, 1.0]), "uniform")
    np.testing.assert_array_equal(bisect_mesh(m).nodes, [0, 0.25, 0.5, 0.75, 1.0])


@pytest.mark.parametrize("n,R,k", [(3, 1.0, 2), (4, 2.0, 2), (5, 1.0, 3)])
def test_convergence_order_euclidean(n, R, k):
    # (the n = 3, k = 1 mode is linear in r and reproduced exactly)
    p = make_euclidean(n, R)
    lam = sphere_eigenvalue(n, k)
    errs = []
    for N in (250, 500, 1000):
        errs.append(abs(steklov_mode_fem(p, lam, build_mesh(p, N, "uniform")) - k / R))
    for q in observed_order(errs):
        assert 1.7 <= q <= 2.3


def test_refinement_study_json():
    study = refinement_study(make_euclidean(5, 2), 40, 200, 3, "uniform", exact=2.5)
    data = json.loads(study_to_json(study))
    assert data["N"] == [200, 400, 800]
    assert all(1.7 <= q <= 2.3 for q in data["observed_order"])

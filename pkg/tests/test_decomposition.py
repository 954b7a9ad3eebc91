import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from hlimit.complex_core import build_grid_complex_3d, build_interval_complex, build_trivial_complex, make_complex
from hlimit.decomposition import (BlockOperator, CoefficientBounds, DecompositionError, SingularBlockError,
                                  assemble_from_blocks, block_inverse, block_representation,
                                  build_decomposition, check_membership, harmonic_subspace_V,
                                  helmholtz_project, schur_complement, schur_factorize)
from hlimit.experiments import random_block_operator, random_member
from hlimit.hconv import operator_from_projected_identities, solve_projected_pair

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture(scope="module")
def d8():
    return build_decomposition(build_interval_complex(8, "Dirichlet"))


@pytest.fixture(scope="module")
def d_grid():
    return build_decomposition(build_grid_complex_3d((2, 2, 2), "Dirichlet"))


def test_decomposition_is_orthogonal_and_complete(d_grid):
    U = d_grid.U
    assert np.allclose(U.conj().T @ U, np.eye(d_grid.dim), atol=1e-12)
    assert np.allclose(d_grid.pi0 + d_grid.pi1, np.eye(d_grid.dim), atol=1e-12)


def test_interval_dimensions(d8):
    assert (d8.r0, d8.r1, d8.dim) == (7, 1, 8)


def test_inexact_complex_is_rejected():
    c = make_complex(np.zeros((3, 1)), np.zeros((1, 3)))
    with pytest.raises(DecompositionError) as exc:
        build_decomposition(c)
    assert exc.value.cohomology_dim == 3


def test_helmholtz_projection_splits_vector(d8, rng):
    q = rng.standard_normal(8)
    q0, q1 = helmholtz_project(d8, q)
    assert np.allclose(q0 + q1, q) and abs(np.vdot(q0, q1)) < 1e-12
    with pytest.raises(DecompositionError):
        helmholtz_project(d8, np.ones(5))


@given(seeds)
def test_assemble_inverts_block_representation(seed):
    rng = np.random.default_rng(seed)
    d = build_decomposition(build_interval_complex(6, "Dirichlet"))
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    assert np.allclose(assemble_from_blocks(d, block_representation(d, a)), a, atol=1e-12)


@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_schur_factorization_reproduces_operator(seed, r0, r1):
    b = random_block_operator(np.random.default_rng(seed), r0, r1)
    lo, dg, up = schur_factorize(b)
    assert np.allclose((lo @ dg @ up).full(), b.full(), atol=1e-10)
    assert np.allclose(dg.a11, schur_complement(b), atol=1e-12)


@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_block_inverse_matches_dense_inverse(seed, r0, r1):
    b = random_block_operator(np.random.default_rng(seed), r0, r1)
    assert np.allclose(block_inverse(b).full(), sla.inv(b.full()), atol=1e-10)


def test_singular_leading_block_raises():
    b = BlockOperator(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2))
    with pytest.raises(SingularBlockError):
        block_inverse(b)


def test_block_adjoint_and_product():
    rng = np.random.default_rng(0)
    b, c = random_block_operator(rng, 2, 3), random_block_operator(rng, 2, 3)
    assert np.allclose((b @ c).full(), b.full() @ c.full())
    assert np.allclose(b.adjoint().full(), b.full().conj().T)
    assert np.array_equal(BlockOperator.identity(2, 3).full(), np.eye(5))


@given(seeds)
def test_random_members_pass_membership(seed):
    d = build_decomposition(build_interval_complex(6, "Dirichlet"))
    rep = check_membership(d, random_member(np.random.default_rng(seed), 6))
    assert rep.is_member and rep.alpha > 0 and 0 < rep.beta < np.inf


def test_membership_bounds_for_scalar(d8):
    rep = check_membership(d8, 2.0 * np.eye(8), CoefficientBounds(2.0, 2.0))
    assert rep.is_member
    assert rep.alpha == pytest.approx(2.0) and rep.beta == pytest.approx(2.0)
    assert not check_membership(d8, 2.0 * np.eye(8), CoefficientBounds(3.0, 2.0)).is_member
    assert not check_membership(d8, 2.0 * np.eye(8), CoefficientBounds(2.0, 1.0)).is_member


def test_negative_operator_is_not_member(d8):
    assert not check_membership(d8, -np.eye(8)).is_member
    assert not check_membership(d8, np.zeros((8, 8))).is_member
    with pytest.raises(ValueError):
        CoefficientBounds(0.0, 1.0)


def test_trivial_complex_membership_is_plain_coercivity():
    d = build_decomposition(build_trivial_complex(4))
    assert d.r0 == 0 and d.r1 == 4
    rot = np.array([[0, -1], [1, 0]], float)
    skew = np.kron(np.eye(2), rot) + 0.1 * np.eye(4)
    assert check_membership(d, skew).is_member
    assert not check_membership(d, np.diag([1.0, 1.0, 1.0, -1.0])).is_member


@given(seeds)
def test_projected_pair_recovers_image(seed):
    rng = np.random.default_rng(seed)
    d = build_decomposition(build_interval_complex(6, "Dirichlet"))
    a = random_member(rng, 6)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert np.allclose(solve_projected_pair(d, a, v), a @ v, atol=1e-9)


@given(seeds)
def test_projected_identities_determine_operator(seed):
    d = build_decomposition(build_interval_complex(6, "Neumann"))
    b = random_member(np.random.default_rng(seed), 6)
    assert np.allclose(operator_from_projected_identities(d, b), b, atol=1e-9)


def test_harmonic_subspace_is_orthogonal_to_dirichlet_gradients():
    dims = (3, 3, 3)
    dd = build_decomposition(build_grid_complex_3d(dims, "Dirichlet"))
    dn = build_decomposition(build_grid_complex_3d(dims, "Neumann"))
    V = harmonic_subspace_V(dd, dn)
    nodes = 4 ** 3
    # gradients of nodal fields that vanish inside: all nodes minus interior, minus constants
    assert V.shape[1] == nodes - 2 ** 3 - 1
    assert np.allclose(V.conj().T @ V, np.eye(V.shape[1]), atol=1e-10)
    assert np.abs(dd.Q0.conj().T @ V).max() < 1e-10
    assert np.linalg.norm(V - dn.Q0 @ (dn.Q0.conj().T @ V)) < 1e-10


def test_decomposition_dense_text_round_trip(tmp_path, d_grid):
    from hlimit.decomposition import load_decomposition, read_dense, save_decomposition, write_dense
    save_decomposition(d_grid, tmp_path)
    back = load_decomposition(tmp_path)
    assert np.array_equal(back.Q0, d_grid.Q0) and np.array_equal(back.Q1, d_grid.Q1)
    assert (tmp_path / "Q0.txt").read_text().startswith(f"# {d_grid.dim} {d_grid.r0}\n")
    write_dense(np.zeros((3, 0)), tmp_path / "e.txt")
    assert read_dense(tmp_path / "e.txt").shape == (3, 0)


def test_membership_report_json(tmp_path, d8):
    import json
    check_membership(d8, np.eye(8)).to_json(tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["is_member"] is True and data["alpha"] == pytest.approx(1.0)

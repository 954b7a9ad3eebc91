import numpy as np
import pytest

from hlimit.complex_core import build_grid_complex_3d, build_interval_complex
from hlimit.decomposition import build_decomposition
from hlimit.experiments import random_member
from hlimit.solvers import (SolverPreconditionError, VariationalSolution, full_residual,
                            functional_from_dual, reduce, solve_dual, solve_primal)
from oracles import discrete_flux_solution, two_phase_samples


def _interval(N):
    c = build_interval_complex(N, "Dirichlet")
    d = build_decomposition(c)
    return c, d, reduce(c.A0), reduce(c.A1.conj().T)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_primal_matches_flux_oracle(n):
    N = 64
    c, d, r0, _ = _interval(N)
    a_cells = two_phase_samples(N, n)
    f = functional_from_dual(r0, np.ones(N - 1))
    sol = solve_primal(d, r0, np.diag(a_cells), f)
    ref = discrete_flux_solution(a_cells)
    u = sol.u * np.sign(sol.u[N // 2].real)
    assert np.allclose(u, ref, rtol=1e-9, atol=1e-12)
    assert sol.residual < 1e-12
    assert full_residual(c.A0, sol.flux, f.g) < 1e-12


def test_primal_flux_is_coefficient_times_gradient():
    c, d, r0, _ = _interval(32)
    a = np.diag(two_phase_samples(32, 2))
    sol = solve_primal(d, r0, a, functional_from_dual(r0, np.ones(31)))
    assert np.allclose(sol.flux, a @ (c.A0 @ sol.u), atol=1e-12)


def test_dual_routes_agree_for_random_member(rng):
    c = build_grid_complex_3d((2, 2, 2), "Dirichlet")
    d = build_decomposition(c)
    r1 = reduce(c.A1.conj().T)
    a = random_member(rng, d.dim)
    h = functional_from_dual(r1, r1.basis_dom @ rng.standard_normal(r1.size))
    sol = solve_dual(d, r1, a, h)
    assert sol.route_gap < 1e-8 and sol.residual < 1e-10
    assert full_residual(c.A1.conj().T, np.linalg.solve(a, c.A1.conj().T @ sol.u), h.g) < 1e-9


def test_dual_for_identity_matches_primal_structure():
    c, d, r0, r1 = _interval(16)
    g = functional_from_dual(r1, r1.basis_dom @ np.ones(r1.size))
    sol = solve_dual(d, r1, np.eye(16), g)
    assert np.allclose(sol.flux, c.A1.conj().T @ sol.u, atol=1e-12)


def test_non_coercive_coefficient_is_rejected():
    c, d, r0, r1 = _interval(8)
    f = functional_from_dual(r0, np.ones(7))
    with pytest.raises(SolverPreconditionError):
        solve_primal(d, r0, -np.eye(8), f)
    with pytest.raises(SolverPreconditionError):
        solve_dual(d, r1, np.zeros((8, 8)), functional_from_dual(r1, r1.basis_dom @ np.ones(1)))


def test_data_outside_range_is_rejected():
    c, d, r0, _ = _interval(8)
    from hlimit.solvers import RangeFunctional
    with pytest.raises(ValueError):
        solve_primal(d, r0, np.eye(8), RangeFunctional(np.ones(8)))
    with pytest.raises(ValueError):
        solve_primal(d, r0, np.eye(8), RangeFunctional(np.ones(3)))


def test_solution_serialisation(tmp_path):
    sol = VariationalSolution(np.array([1 + 2j, 3]), np.array([0.5]), 1e-14)
    sol.to_json(tmp_path / "s.json")
    sol.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "index,u_re,u_im,flux_re,flux_im"
    assert lines[2] == "1,3.0,0.0,,"
    import json
    assert json.loads((tmp_path / "s.json").read_text())["u"][0] == [1.0, 2.0]

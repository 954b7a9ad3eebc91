"""Reduced isomorphisms and the primal/dual variational solves.

A map ``C`` is reduced to an invertible square matrix between orthonormal
bases of rge(C*) and rge(C).  Right-hand sides are carried as vectors ``g`` in
rge(C) standing for the functional ``v -> <g, C v>``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ._linalg import as_dense, min_real_eig, range_and_corange
from .decomposition import (BlockDecomposition, SingularBlockError, _require_invertible,
                            block_representation, schur_complement)


class SolverPreconditionError(ValueError):
    """Raised when a coercivity or invertibility hypothesis fails."""


class RouteMismatchError(ArithmeticError):
    """Raised when the two dual solution routes disagree."""


@dataclass(frozen=True)
class ReducedOperator:
    basis_dom: np.ndarray
    basis_ran: np.ndarray
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(sla.norm(self.matrix, 2)) if self.size else 0.0


@dataclass(frozen=True)
class RangeFunctional:
    g: np.ndarray


@dataclass(frozen=True)
class VariationalSolution:
    u: np.ndarray
    flux: np.ndarray
    residual: float
    route_gap: float = 0.0

    def to_dict(self) -> dict:
        def cplx(x):
            return [[float(z.real), float(z.imag)] for z in np.asarray(x).ravel()]
        return {"u": cplx(self.u), "flux": cplx(self.flux), "residual": float(self.residual),
                "route_gap": float(self.route_gap)}

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def to_csv(self, path) -> None:
        """One row per index: index, u_re, u_im, flux_re, flux_im (blank past the end)."""
        n = max(self.u.size, self.flux.size)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "u_re", "u_im", "flux_re", "flux_im"])
            for i in range(n):
                row = [i]
                for vec in (self.u, self.flux):
                    row += ([repr(float(vec[i].real)), repr(float(vec[i].imag))]
                            if i < vec.size else ["", ""])
                w.writerow(row)


def reduce(c_leg) -> ReducedOperator:
    ran, dom, _ = range_and_corange(c_leg)
    C = as_dense(c_leg)
    return ReducedOperator(dom, ran, ran.conj().T @ (C @ dom))


def functional_from_dual(r: ReducedOperator, f: np.ndarray) -> RangeFunctional:
    """Represent ``v -> <f, v>`` (restricted to rge(C*)) as ``v -> <g, C v>``.

    Solves the transposed reduced system, i.e. applies the inverse of the
    dual isomorphism.
    """
    f = np.asarray(f, dtype=complex)
    if r.size == 0:
        return RangeFunctional(np.zeros(r.basis_ran.shape[0], complex))
    y = sla.solve(r.matrix.conj().T, r.basis_dom.conj().T @ f)
    return RangeFunctional(r.basis_ran @ y)


def _range_coords(r: ReducedOperator, g: np.ndarray, label: str) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.shape[0] != r.basis_ran.shape[0]:
        raise ValueError(f"{label} has length {g.shape[0]}, expected {r.basis_ran.shape[0]}")
    coords = r.basis_ran.conj().T @ g
    scale = max(np.linalg.norm(g), 1e-300)
    if np.linalg.norm(g - r.basis_ran @ coords) > 1e-10 * scale:
        raise ValueError(f"{label} is not in the range of the reduced map")
    return coords


def _residual(r: ReducedOperator, defect: np.ndarray, g: np.ndarray) -> float:
    if r.size == 0:
        return 0.0
    num = np.linalg.norm(r.matrix.conj().T @ (r.basis_ran.conj().T @ defect))
    return float(num / (r.norm() * max(np.linalg.norm(g), 1e-300)))


def full_residual(C, flux: np.ndarray, g: np.ndarray) -> float:
    """Same residual measured against the whole test space via ``C*``."""
    C = as_dense(C)
    if C.size == 0:
        return 0.0
    num = np.linalg.norm(C.conj().T @ (flux - g))
    return float(num / (sla.norm(C, 2) * max(np.linalg.norm(g), 1e-300)))


def solve_primal(d: BlockDecomposition, r0: ReducedOperator, a, f: RangeFunctional) -> VariationalSolution:
    """Solve <a A0 u, A0 phi> = <g, A0 phi> through the three reduced inverses."""
    g0 = _range_coords(r0, f.g, "primal data")
    Q = r0.basis_ran
    aQ = np.asarray(a @ Q, dtype=complex).reshape(Q.shape)
    a00 = Q.conj().T @ aQ
    if r0.size and min_real_eig(a00) <= 0.0:
        raise SolverPreconditionError(
            f"a00 is not coercive (min real eigenvalue {min_real_eig(a00):.3e})")
    y = sla.solve(a00, g0) if r0.size else np.zeros(0, complex)
    x = sla.solve(r0.matrix, y) if r0.size else np.zeros(0, complex)
    u = r0.basis_dom @ x
    flux = aQ @ y
    return VariationalSolution(u, flux, _residual(r0, flux - f.g, f.g))


def solve_dual(d: BlockDecomposition, r1: ReducedOperator, a, g: RangeFunctional,
               route_tol: float = 1e-8) -> VariationalSolution:
    """Solve <a^-1 A1* v, A1* psi> = <h, A1* psi> using the Schur complement.

    The coefficient (a^-1)11^-1 is formed as a11 - a10 a00^-1 a01 and checked
    against the inverse of the compressed dense inverse.
    """
    h1 = _range_coords(r1, g.g, "dual data")
    dd = BlockDecomposition(d.Q0, r1.basis_ran)
    A = as_dense(a)
    b = block_representation(dd, A)
    try:
        S = schur_complement(b)
        # with a00 invertible, a is invertible exactly when S is
        _require_invertible(S, "Schur complement")
    except SingularBlockError as exc:
        raise SolverPreconditionError(f"coefficient is not invertible: {exc}") from exc
    lu = sla.lu_factor(A)
    Q1 = r1.basis_ran
    ainv11 = Q1.conj().T @ sla.lu_solve(lu, Q1)
    if r1.size and min_real_eig(ainv11) <= 0.0:
        raise SolverPreconditionError(
            f"(a^-1)11 is not coercive (min real eigenvalue {min_real_eig(ainv11):.3e})")
    y = S @ h1
    y_direct = sla.solve(ainv11, h1) if r1.size else y
    gap = float(np.linalg.norm(y - y_direct) / max(np.linalg.norm(y_direct), 1e-300))
    if gap > route_tol:
        raise RouteMismatchError(f"Schur and direct dual routes differ by {gap:.3e}")
    x = sla.solve(r1.matrix, y) if r1.size else np.zeros(0, complex)
    v = r1.basis_dom @ x
    a00_inv_a01_h = sla.solve(b.a00, b.a01 @ h1) if d.r0 else np.zeros(0, complex)
    flux = Q1 @ h1 - d.Q0 @ a00_inv_a01_h
    return VariationalSolution(v, flux, _residual(r1, flux - g.g, g.g), gap)

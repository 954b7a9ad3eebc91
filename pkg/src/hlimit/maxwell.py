"""Laplace-domain Maxwell solves on a composed complex.

Fields live on ``K2 (+) K1`` (electric field on faces, magnetic field on
edges).  For a real frequency parameter ``lam`` the system is
``(lam M(lam) + A) U = F`` with the skew operator ``A = [[0, -curl], [curl*, 0]]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate as integrate
import scipy.linalg as sla
import scipy.sparse as sp

from ._linalg import as_dense, hermitian_part, max_abs
from .coefficients import CellFunction, OperatorSequence
from .complex_core import HilbertComplex
from .decomposition import BlockDecomposition, CoefficientBounds, block_representation
from .hconv import HLimitReport, WOTProbe, extract_h_limit


class MaxwellError(ValueError):
    """Raised for positivity failures or frequencies at or below the abscissa."""


def _herm_min(m) -> float:
    """Smallest eigenvalue of the Hermitian part; diagonal inputs are read off."""
    if sp.issparse(m):
        if m.shape[0] == 0:
            return float("inf")
        if (m - sp.diags(m.diagonal())).count_nonzero() == 0:
            return float(np.min(m.diagonal().real))
    m = as_dense(m)
    if m.size == 0:
        return float("inf")
    diag = np.diagonal(m)
    if np.count_nonzero(m) == np.count_nonzero(diag):
        return float(np.min(diag.real))
    return float(sla.eigvalsh(hermitian_part(m))[0])


@dataclass
class MaterialLaw:
    """``M(lam) = diag(eps, mu) + diag(sigma, 0) / lam`` or a general ``law(lam)``.

    ``c`` is the recorded positivity constant: the smallest eigenvalue of the
    Hermitian part of ``lam M(lam)`` at ``lam = lambda_min``.  For the affine
    law with ``diag(eps, mu)`` Hermitian-nonnegative this bounds every
    ``lam >= lambda_min`` from below, since the Hermitian part is then
    nondecreasing in ``lam``.
    """

    eps: object
    sigma: object
    mu: object
    mu_threshold: float = 0.0
    law: Callable[[float], np.ndarray] | None = None
    lambda_min: float = 1.0
    c: float = field(init=False, default=float("nan"))
    c_holds_for_all_larger: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.mu_threshold < 0:
            raise MaxwellError("the abscissa must be nonnegative")
        if self.lambda_min <= self.mu_threshold:
            raise MaxwellError("lambda_min must exceed the abscissa")
        self.c = self.positivity(self.lambda_min)
        if self.law is None:
            inst = sp.block_diag([sp.csr_matrix(self.eps), sp.csr_matrix(self.mu)])
            self.c_holds_for_all_larger = _herm_min(inst) >= -1e-12
        if not self.c > 0:
            raise MaxwellError(f"material law is not positive at lambda = {self.lambda_min} (c = {self.c:.3e})")

    @property
    def sizes(self) -> tuple[int, int]:
        return as_dense(self.eps).shape[0], as_dense(self.mu).shape[0]

    def M(self, lam: float) -> np.ndarray:
        if self.law is not None:
            return as_dense(self.law(lam))
        eps, sig, mu = as_dense(self.eps), as_dense(self.sigma), as_dense(self.mu)
        return sla.block_diag(eps + sig / lam, mu)

    def positivity(self, lam: float) -> float:
        """Smallest eigenvalue of the Hermitian part of ``lam M(lam)``."""
        return _herm_min(lam * self.M(lam))


def affine_material_law(eps, sigma, mu, lambda_min: float = 1.0, mu_threshold: float = 0.0) -> MaterialLaw:
    return MaterialLaw(eps, sigma, mu, mu_threshold, None, lambda_min)


def general_material_law(law: Callable[[float], np.ndarray], sizes: tuple[int, int],
                         lambda_min: float = 1.0, mu_threshold: float = 0.0) -> MaterialLaw:
    """Law given directly as ``lam -> M(lam)`` (e.g. a homogenised memory law)."""
    k2, k1 = sizes
    return MaterialLaw(np.zeros((k2, k2)), np.zeros((k2, k2)), np.zeros((k1, k1)),
                       mu_threshold, law, lambda_min)


@dataclass(frozen=True)
class MaxwellOperator:
    A: sp.csr_matrix
    complex: HilbertComplex

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def maxwell_operator(c: HilbertComplex) -> MaxwellOperator:
    """``A = -A1`` of a composed complex; skew by construction."""
    A = (-c.A1).tocsr()
    if A.shape[0] != A.shape[1] or max_abs((A + A.conj().T).toarray()) > 1e-12:
        raise MaxwellError("composed complex does not yield a skew operator")
    return MaxwellOperator(A, c)


def _system(law: MaterialLaw, op: MaxwellOperator, lam: float) -> np.ndarray:
    if not lam > law.mu_threshold:
        raise MaxwellError(f"lambda = {lam} does not exceed the abscissa {law.mu_threshold}")
    T = lam * law.M(lam)
    if T.shape != (op.dim, op.dim):
        raise MaxwellError(f"material law has size {T.shape[0]}, operator {op.dim}")
    c = _herm_min(T)
    if not c > 0:
        raise MaxwellError(f"positivity fails at lambda = {lam} (min eigenvalue {c:.3e})")
    return T


def solve_laplace_domain(law: MaterialLaw, op: MaxwellOperator, lam: float, F) -> np.ndarray:
    """Solve ``(lam M(lam) + A) U = F``; ``F`` may hold several columns."""
    T = _system(law, op, lam)
    S = T + op.A.toarray()
    F = np.asarray(F, dtype=complex)
    U = sla.solve(S, F)
    res = np.linalg.norm(S @ U - F) / max(np.linalg.norm(F), 1e-300)
    if res > 1e-10:
        raise ArithmeticError(f"direct Maxwell solve residual {res:.3e}")
    return U


def solve_via_block_reduction(law: MaterialLaw, op: MaxwellOperator, lam: float, F,
                              d: BlockDecomposition) -> np.ndarray:
    """Eliminate the kernel component of ``A`` and solve on rge(A).

    In coordinates of ``d`` (index 0 = rge(A0) = ker A, index 1 = rge(A1*))
    the operator only has the block ``A11``; the field on rge(A1*) solves the
    Schur-reduced system and the kernel part is recovered by back-substitution.
    """
    T = _system(law, op, lam)
    b = block_representation(d, T)
    A11 = d.Q1.conj().T @ (op.A @ d.Q1)
    F = np.asarray(F, dtype=complex)
    F0, F1 = d.Q0.conj().T @ F, d.Q1.conj().T @ F
    if d.r0:
        s = sla.svdvals(b.a00)
        if s[-1] <= 1e-12 * s[0]:
            raise MaxwellError("kernel block of lam M(lam) is singular")
        lu = sla.lu_factor(b.a00)
        red = b.a11 + A11 - b.a10 @ sla.lu_solve(lu, b.a01)
        x1 = sla.solve(red, F1 - b.a10 @ sla.lu_solve(lu, F0))
        x0 = sla.lu_solve(lu, F0 - b.a01 @ x1)
    else:
        x1 = sla.solve(b.a11 + A11, F1)
        x0 = np.zeros((0,) + F.shape[1:], complex)
    return d.Q0 @ x0 + d.Q1 @ x1


def resolvent_bound_check(law: MaterialLaw, op: MaxwellOperator, lam: float,
                          samples: int = 100, seed: int = 0) -> dict:
    """Worst ratio ``c ||U|| / ||F||`` over random right-hand sides (must be <= 1)."""
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((op.dim, samples)) + 1j * rng.standard_normal((op.dim, samples))
    U = solve_laplace_domain(law, op, lam, F)
    c = law.positivity(lam)
    S = lam * law.M(lam) + op.A.toarray()
    ratio = c * np.linalg.norm(U, axis=0) / np.linalg.norm(F, axis=0)
    res = np.linalg.norm(S @ U - F, axis=0) / np.linalg.norm(F, axis=0)
    return {"lambda": lam, "c": c, "max_ratio": float(ratio.max()), "max_residual": float(res.max())}


def memory_kernel(cell_eps: CellFunction, cell_sigma: CellFunction, lam: float) -> complex:
    """Harmonic mean of ``eps + sigma / lam`` over the unit cell (layered media)."""
    if not lam > 0:
        raise MaxwellError("lambda must be positive")

    def value(y):
        p = np.array([[y % 1.0]])
        return complex(cell_eps(p)[0] + cell_sigma(p)[0] / lam)

    pts = sorted(set(cell_eps.breakpoints) | set(cell_sigma.breakpoints))
    probe = np.concatenate([(np.arange(256) + 0.5) / 256, np.asarray(pts, float)])
    if min(value(y).real for y in probe) <= 0.0:
        raise MaxwellError("cell makes eps + sigma / lam touch zero in real part")
    kw = {"points": pts} if pts else {}
    re = integrate.quad(lambda y: (1.0 / value(y)).real, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, **kw)[0]
    im = integrate.quad(lambda y: (1.0 / value(y)).imag, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, **kw)[0]
    return 1.0 / complex(re, im)


# ---------------------------------------------------------------- experiment

@dataclass
class ResolventCurve:
    lam: float
    indices: list
    wot_error: list
    strong_error_U0: list
    hlimit_converged: bool | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "wot_error", "strong_error_U0"])
            for n, a, b in zip(self.indices, self.wot_error, self.strong_error_U0):
                w.writerow([n, repr(float(a)), repr(float(b))])


@dataclass
class ResolventReport:
    curves: list
    tol: float
    verdict: bool

    def to_dict(self) -> dict:
        return {"tol": self.tol, "verdict": self.verdict,
                "curves": [{"lambda": c.lam, "indices": c.indices,
                            "wot_error": [float(x) for x in c.wot_error],
                            "strong_error_U0": [float(x) for x in c.strong_error_U0],
                            "hlimit_converged": c.hlimit_converged} for c in self.curves]}


def _non_increasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def resolvent_convergence_experiment(seqM: Callable[[int], MaterialLaw], indices: Sequence[int],
                                     limitM: MaterialLaw, lambdas: Sequence[float], F_samples,
                                     probe: WOTProbe, tol: float, op: MaxwellOperator,
                                     d: BlockDecomposition, check_blocks: bool = True) -> ResolventReport:
    """Per-frequency surrogate of resolvent convergence in the weak operator topology.

    ``wot_error`` is the largest probe coefficient of ``U_n - U_inf`` relative
    to the largest probe coefficient of ``U_inf``; ``strong_error_U0`` is the
    relative norm error of the rge(A) component, which should converge
    strongly.  With ``check_blocks`` the four block quantities of
    ``lam M_n(lam)`` are run through extract_h_limit at each frequency.
    """
    indices = list(indices)
    F = np.asarray(F_samples, dtype=complex)
    if F.ndim == 1:
        F = F[:, None]
    basis = probe.basis()
    curves, verdict = [], True
    for lam in lambdas:
        U_inf = solve_laplace_domain(limitM, op, lam, F)
        ref_w = max(max_abs(basis.conj().T @ U_inf), 1e-300)
        ref_s = np.linalg.norm(d.Q1.conj().T @ U_inf, axis=0)
        wot, strong = [], []
        for n in indices:
            U = solve_laplace_domain(seqM(n), op, lam, F)
            diff = U - U_inf
            wot.append(max_abs(basis.conj().T @ diff) / ref_w)
            strong.append(float(np.max(np.linalg.norm(d.Q1.conj().T @ diff, axis=0)
                                       / np.maximum(ref_s, 1e-300))))
        conv = None
        if check_blocks:
            seq = OperatorSequence(tuple(indices), lambda n, lam=lam: lam * seqM(n).M(lam),
                                   CoefficientBounds(1e-3, 1e3), 0.0)
            rep: HLimitReport = extract_h_limit(d, seq, probe, tol, check_members=False)
            conv = rep.converged
        curves.append(ResolventCurve(lam, indices, wot, strong, conv))
        verdict = verdict and _non_increasing(wot) and wot[-1] <= tol \
            and _non_increasing(strong)
    return ResolventReport(curves, tol, bool(verdict))


__all__ = [
    "MaxwellError", "MaterialLaw", "affine_material_law", "general_material_law",
    "MaxwellOperator", "maxwell_operator", "solve_laplace_domain", "solve_via_block_reduction",
    "resolvent_bound_check", "memory_kernel", "ResolventCurve", "ResolventReport",
    "resolvent_convergence_experiment",
]

"""Helmholtz splitting ``H1 = rge(A0) (+) rge(A1*)`` and 2x2 block algebra."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from ._linalg import EIG_TOL, RANK_RTOL, as_dense, fix_phase, min_real_eig, range_and_corange
from .complex_core import HilbertComplex, verify_complex


class DecompositionError(ValueError):
    """Raised when the complex is not exact or block sizes disagree."""

    def __init__(self, message: str, cohomology_dim: int | None = None):
        super().__init__(message)
        self.cohomology_dim = cohomology_dim


class SingularBlockError(ArithmeticError):
    """Raised when a block that has to be inverted is numerically singular."""


@dataclass(frozen=True)
class BlockDecomposition:
    """Orthonormal bases of rge(A0) (``Q0``) and rge(A1*) (``Q1``)."""

    Q0: np.ndarray
    Q1: np.ndarray

    @property
    def U(self) -> np.ndarray:
        return np.hstack([self.Q0, self.Q1])

    @property
    def r0(self) -> int:
        return self.Q0.shape[1]

    @property
    def r1(self) -> int:
        return self.Q1.shape[1]

    @property
    def dim(self) -> int:
        return self.Q0.shape[0]

    @property
    def pi0(self) -> np.ndarray:
        return self.Q0 @ self.Q0.conj().T

    @property
    def pi1(self) -> np.ndarray:
        return self.Q1 @ self.Q1.conj().T


@dataclass(frozen=True)
class BlockOperator:
    a00: np.ndarray
    a01: np.ndarray
    a10: np.ndarray
    a11: np.ndarray

    @property
    def sizes(self) -> tuple[int, int]:
        return self.a00.shape[0], self.a11.shape[0]

    def full(self) -> np.ndarray:
        return np.block([[self.a00, self.a01], [self.a10, self.a11]])

    @classmethod
    def from_full(cls, m: np.ndarray, r0: int) -> "BlockOperator":
        m = np.asarray(m, dtype=complex)
        return cls(m[:r0, :r0], m[:r0, r0:], m[r0:, :r0], m[r0:, r0:])

    @classmethod
    def identity(cls, r0: int, r1: int) -> "BlockOperator":
        return cls.from_full(np.eye(r0 + r1, dtype=complex), r0)

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        return BlockOperator.from_full(self.full() @ other.full(), self.sizes[0])

    def adjoint(self) -> "BlockOperator":
        return BlockOperator(self.a00.conj().T, self.a10.conj().T,
                             self.a01.conj().T, self.a11.conj().T)


@dataclass(frozen=True)
class CoefficientBounds:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("coefficient bounds must be positive")


@dataclass(frozen=True)
class MembershipReport:
    min_real_eig_a00: float
    min_real_eig_a00_inv: float
    min_real_eig_ainv11: float
    min_real_eig_ainv11_inv: float
    invertibility_margin: float
    alpha: float
    beta: float
    is_member: bool

    def to_dict(self) -> dict:
        return {k: (v if np.isfinite(v) else None) if isinstance(v, float) else v
                for k, v in self.__dict__.items()}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


def build_decomposition(c: HilbertComplex) -> BlockDecomposition:
    rep = verify_complex(c)
    if not rep.is_exact:
        raise DecompositionError(
            f"complex {c.name} is not exact (cohomology {rep.cohomology_dim})",
            rep.cohomology_dim)
    Q0 = range_and_corange(c.A0)[0]
    Q1 = range_and_corange(c.A1.conj().T)[0]
    return BlockDecomposition(Q0, Q1)


def _check_vec(d: BlockDecomposition, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=complex)
    if q.shape[0] != d.dim:
        raise DecompositionError(f"vector has length {q.shape[0]}, expected {d.dim}")
    return q


def helmholtz_project(d: BlockDecomposition, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = _check_vec(d, q)
    q0 = d.Q0 @ (d.Q0.conj().T @ q)
    q1 = d.Q1 @ (d.Q1.conj().T @ q)
    return q0, q1


def block_representation(d: BlockDecomposition, a) -> BlockOperator:
    """Blocks ``Qi* a Qj``; ``a`` may be dense, sparse or a LinearOperator."""
    if a.shape != (d.dim, d.dim):
        raise DecompositionError(f"operator shape {a.shape} does not match H1 of size {d.dim}")
    aQ0 = np.asarray(a @ d.Q0, dtype=complex).reshape(d.dim, d.r0)
    aQ1 = np.asarray(a @ d.Q1, dtype=complex).reshape(d.dim, d.r1)
    Q0h, Q1h = d.Q0.conj().T, d.Q1.conj().T
    return BlockOperator(Q0h @ aQ0, Q0h @ aQ1, Q1h @ aQ0, Q1h @ aQ1)


def assemble_from_blocks(d: BlockDecomposition, b: BlockOperator) -> np.ndarray:
    if b.sizes != (d.r0, d.r1):
        raise DecompositionError(f"block sizes {b.sizes} do not match ({d.r0}, {d.r1})")
    return d.U @ b.full() @ d.U.conj().T


def _require_invertible(m: np.ndarray, label: str) -> None:
    if m.size == 0:
        return
    s = sla.svdvals(m)
    if s[0] == 0.0 or s[-1] <= RANK_RTOL * s[0]:
        raise SingularBlockError(f"{label} is numerically singular (margin {s[-1]:.3e})")


def _solve(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if m.size == 0:
        return np.zeros((0, rhs.shape[1]), dtype=complex)
    return sla.solve(m, rhs)


def schur_complement(b: BlockOperator) -> np.ndarray:
    _require_invertible(b.a00, "a00")
    return b.a11 - b.a10 @ _solve(b.a00, b.a01)


def schur_factorize(b: BlockOperator) -> tuple[BlockOperator, BlockOperator, BlockOperator]:
    """``b = lower @ diag(a00, S) @ upper`` with unit triangular outer factors."""
    r0, r1 = b.sizes
    _require_invertible(b.a00, "a00")
    a00_inv_a01 = _solve(b.a00, b.a01)
    a10_a00_inv = _solve(b.a00.T, b.a10.T).T
    S = b.a11 - b.a10 @ a00_inv_a01
    I0, I1 = np.eye(r0, dtype=complex), np.eye(r1, dtype=complex)
    lower = BlockOperator(I0, np.zeros((r0, r1), complex), a10_a00_inv, I1)
    diag = BlockOperator(b.a00.copy(), np.zeros((r0, r1), complex),
                         np.zeros((r1, r0), complex), S)
    upper = BlockOperator(I0, a00_inv_a01, np.zeros((r1, r0), complex), I1)
    return lower, diag, upper


def block_inverse(b: BlockOperator) -> BlockOperator:
    """Blocks of ``b^-1`` from a00^-1 and the inverse Schur complement."""
    _require_invertible(b.a00, "a00")
    a00_inv = _solve(b.a00, np.eye(b.sizes[0], dtype=complex))
    S = b.a11 - b.a10 @ a00_inv @ b.a01
    _require_invertible(S, "Schur complement")
    S_inv = _solve(S, np.eye(b.sizes[1], dtype=complex))
    left = a00_inv @ b.a01
    right = b.a10 @ a00_inv
    return BlockOperator(a00_inv + left @ S_inv @ right, -left @ S_inv,
                         -S_inv @ right, S_inv)


def check_membership(d: BlockDecomposition, a, bounds: CoefficientBounds | None = None,
                     tol: float = EIG_TOL) -> MembershipReport:
    """Evaluate the four real-part conditions and invertibility of ``a``.

    Without ``bounds`` membership means all four conditions hold with some
    positive constants; the tightest constants are always reported.
    """
    A = as_dense(a)
    if A.shape != (d.dim, d.dim):
        raise DecompositionError(f"operator shape {A.shape} does not match H1 of size {d.dim}")
    inf = float("inf")
    b = block_representation(d, A)
    s = sla.svdvals(A) if A.size else np.array([inf])
    margin = float(s[-1])
    invertible = s.size > 0 and (A.size == 0 or (s[0] > 0 and s[-1] > RANK_RTOL * s[0]))

    e00 = min_real_eig(b.a00)
    try:
        _require_invertible(b.a00, "a00")
        e00i = min_real_eig(_solve(b.a00, np.eye(d.r0, dtype=complex)))
    except SingularBlockError:
        e00i = -inf
    if invertible:
        ainv11 = d.Q1.conj().T @ sla.solve(A, d.Q1) if d.r1 else np.zeros((0, 0), complex)
        e11 = min_real_eig(ainv11)
        try:
            _require_invertible(ainv11, "(a^-1)11")
            e11i = min_real_eig(_solve(ainv11, np.eye(d.r1, dtype=complex)))
        except SingularBlockError:
            e11i = -inf
    else:
        e11 = e11i = -inf
    alpha = min(e00, e11i)
    inv_beta = min(e00i, e11)
    beta = 1.0 / inv_beta if inv_beta > 0 else inf
    if bounds is None:
        ok = alpha > tol and inv_beta > tol
    else:
        ok = (e00 >= bounds.alpha - tol and e11i >= bounds.alpha - tol
              and e00i >= 1.0 / bounds.beta - tol and e11 >= 1.0 / bounds.beta - tol)
    return MembershipReport(e00, e00i, e11, e11i, margin, alpha, beta,
                            bool(ok and invertible))


def harmonic_subspace_V(d_dirichlet: BlockDecomposition, d_neumann: BlockDecomposition,
                        cos_threshold: float = 1.0 - 1e-10) -> np.ndarray:
    """Orthonormal basis of rge(grad0)^perp intersected with rge(grad).

    The dimension is the number of principal cosines between rge(A1*) of the
    Dirichlet complex and rge(A0) of the Neumann complex above the threshold.
    The basis itself is taken from the null space of the Dirichlet projection
    restricted to rge(A0) of the Neumann complex, which keeps it orthogonal to
    the Dirichlet gradients at rounding level.
    """
    if d_dirichlet.dim != d_neumann.dim:
        raise DecompositionError("decompositions live on different H1 spaces")
    cosines = sla.svdvals(d_dirichlet.Q1.conj().T @ d_neumann.Q0) if d_neumann.r0 and d_dirichlet.r1 else np.zeros(0)
    m = int(np.count_nonzero(cosines >= cos_threshold))
    if m == 0:
        return np.zeros((d_neumann.dim, 0), dtype=complex)
    M = d_dirichlet.Q0.conj().T @ d_neumann.Q0
    if M.shape[0] == 0:
        coords = np.eye(d_neumann.r0, dtype=complex)[:, -m:]
    else:
        _, _, vh = sla.svd(M, full_matrices=True)
        coords = vh[-m:].conj().T
    return fix_phase(d_neumann.Q0 @ coords)


# ---------------------------------------------------------------- dense text export

def write_dense(m: np.ndarray, path) -> None:
    """Header ``# rows cols``, then one line per row of interleaved ``re im`` pairs."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    rows, cols = m.shape
    inter = np.empty((rows, 2 * cols))
    inter[:, 0::2], inter[:, 1::2] = m.real, m.imag
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {rows} {cols}\n")
        for row in inter:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_dense(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows, cols = (int(x) for x in fh.readline().lstrip("#").split())
        data = np.array([[float(x) for x in line.split()] for line in fh if line.strip()])
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols), dtype=complex)
    data = data.reshape(rows, 2 * cols)
    return data[:, 0::2] + 1j * data[:, 1::2]


def save_decomposition(d: BlockDecomposition, directory) -> None:
    """Write ``Q0.txt`` and ``Q1.txt`` (orthonormal bases of rge(A0) and rge(A1*))."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_dense(d.Q0, out / "Q0.txt")
    write_dense(d.Q1, out / "Q1.txt")


def load_decomposition(directory) -> BlockDecomposition:
    src = Path(directory)
    return BlockDecomposition(read_dense(src / "Q0.txt"), read_dense(src / "Q1.txt"))


__all__ = [
    "BlockDecomposition", "BlockOperator", "CoefficientBounds", "MembershipReport",
    "DecompositionError", "SingularBlockError", "build_decomposition", "helmholtz_project",
    "block_representation", "assemble_from_blocks", "schur_factorize", "schur_complement",
    "block_inverse", "check_membership", "harmonic_subspace_V", "write_dense", "read_dense",
    "save_decomposition", "load_decomposition"
]

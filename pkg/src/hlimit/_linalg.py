"""Dense linear-algebra helpers shared across modules."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

RANK_RTOL = 1e-10
EIG_TOL = 1e-10


def as_dense(op) -> np.ndarray:
    """Materialize ndarray, sparse matrix or LinearOperator as a complex array."""
    if isinstance(op, np.ndarray):
        return op.astype(complex, copy=False)
    if sp.issparse(op):
        return op.toarray().astype(complex, copy=False)
    if isinstance(op, LinearOperator):
        if hasattr(op, "toarray"):
            return np.asarray(op.toarray(), dtype=complex)
        return np.asarray(op @ np.eye(op.shape[1], dtype=complex), dtype=complex)
    return np.asarray(op, dtype=complex)


def apply(op, x: np.ndarray) -> np.ndarray:
    """Apply any supported operator representation to a vector or block."""
    return np.asarray(op @ x)


def fix_phase(basis: np.ndarray) -> np.ndarray:
    """Rotate each column so that its largest-magnitude entry is real positive.

    Ties within a relative 1e-8 band go to the smallest row index, which makes
    the choice stable under rounding noise.
    """
    if basis.size == 0:
        return basis
    mags = np.abs(basis)
    peak = mags.max(axis=0)
    idx = np.argmax(mags >= peak * (1.0 - 1e-8), axis=0)
    pivots = basis[idx, np.arange(basis.shape[1])]
    return basis * (np.abs(pivots) / pivots)[None, :]


def _svd(m: np.ndarray):
    if np.iscomplexobj(m) and not np.any(m.imag):
        m = m.real
    return sla.svd(m, full_matrices=False, lapack_driver="gesdd")


def singular_values(op) -> np.ndarray:
    m = as_dense(op)
    if m.size == 0:
        return np.zeros(0)
    if not np.any(m.imag):
        m = m.real
    return sla.svdvals(m)


def numerical_rank(op, rtol: float = RANK_RTOL) -> int:
    s = singular_values(op)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def range_and_corange(op, rtol: float = RANK_RTOL):
    """Orthonormal phase-fixed bases of rge(op) and rge(op*) plus singular values."""
    m = as_dense(op)
    rows, cols = m.shape
    if m.size == 0:
        return (np.zeros((rows, 0), complex), np.zeros((cols, 0), complex), np.zeros(0))
    w, s, vh = _svd(m)
    r = int(np.count_nonzero(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    ran = fix_phase(np.asarray(w[:, :r], dtype=complex))
    dom = fix_phase(np.asarray(vh[:r].conj().T, dtype=complex))
    return ran, dom, s[:r]


def orth(vectors: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the column span, dropping numerically dependent columns."""
    if vectors.size == 0:
        return np.zeros((vectors.shape[0], 0), complex)
    w, s, _ = sla.svd(np.asarray(vectors, complex), full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((vectors.shape[0], 0), complex)
    r = int(np.count_nonzero(s > rtol * s[0]))
    return fix_phase(w[:, :r])


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def min_real_eig(m: np.ndarray) -> float:
    """Smallest eigenvalue of (m + m*)/2; +inf for an empty block."""
    if m.size == 0:
        return float("inf")
    return float(sla.eigvalsh(hermitian_part(m))[0])


def smallest_singular(m: np.ndarray) -> float:
    if m.size == 0:
        return float("inf")
    return float(sla.svdvals(m)[-1])


def max_abs(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0

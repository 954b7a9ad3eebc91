"""Coefficient operators on H1: oscillating multiplications, convolutions,
subspace patches and block material laws, plus indexed families of them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft
import scipy.linalg as sla
import scipy.signal
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, svds

from ._linalg import as_dense
from .complex_core import Geometry
from .decomposition import BlockDecomposition, CoefficientBounds, check_membership

DEFAULT_INDICES = (1, 2, 4, 8, 16, 32, 64)


class CoefficientError(ValueError):
    """Raised for invalid coefficient parameters."""


class TwoScaleWarning(UserWarning):
    """Emitted when n times the cell period exceeds the grid resolution."""


@dataclass(frozen=True)
class CellFunction:
    """Unit-periodic coefficient ``y -> value``.

    ``sampler`` receives an ``(m, ndim)`` array of points in [0, 1)^ndim and
    returns ``(m,)`` scalars (``value_dim == 1``) or ``(m, 3, 3)`` matrices.
    """

    sampler: Callable[[np.ndarray], np.ndarray]
    description: str
    bound: float
    value_dim: int = 1
    period_cells: int = 2
    breakpoints: tuple[float, ...] = ()

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.sampler(np.atleast_2d(y)), dtype=complex)

    def check_bound(self, samples: int = 64, ndim: int = 1) -> float:
        """Spot-check the declared bound on a regular sample grid."""
        t = (np.arange(samples) + 0.5) / samples
        pts = np.stack([t] * ndim, axis=1)
        vals = self(pts)
        peak = float(np.max(np.abs(vals))) if self.value_dim == 1 else \
            float(max(np.linalg.norm(v, 2) for v in vals))
        if peak > self.bound * (1 + 1e-12):
            raise CoefficientError(f"cell {self.description} exceeds its bound {self.bound}")
        return peak


def two_phase_cell(v1: complex = 1.0, v2: complex = 0.5, split: float = 0.5,
                   axis: int = 0) -> CellFunction:
    """``v1`` on [0, split), ``v2`` on [split, 1) along ``axis``."""
    if not 0.0 < split < 1.0:
        raise CoefficientError("split must lie in (0, 1)")

    def sampler(y):
        return np.where(y[:, axis] % 1.0 < split, v1, v2).astype(complex)

    return CellFunction(sampler, f"two-phase({v1},{v2};split={split},axis={axis})",
                        float(max(abs(v1), abs(v2))), 1, 2, (split,))


def constant_cell(value: complex = 1.0) -> CellFunction:
    return CellFunction(lambda y: np.full(y.shape[0], value, dtype=complex),
                        f"constant({value})", abs(value), 1, 1)


def diagonal_cell(entries: Sequence[CellFunction | complex]) -> CellFunction:
    """Matrix-valued cell ``diag(e0, e1, e2)``."""
    cells = [e if isinstance(e, CellFunction) else constant_cell(e) for e in entries]
    if len(cells) != 3:
        raise CoefficientError("diagonal_cell needs three entries")

    def sampler(y):
        out = np.zeros((y.shape[0], 3, 3), dtype=complex)
        for i, c in enumerate(cells):
            out[:, i, i] = c(y)
        return out

    return CellFunction(sampler, "diag(" + ", ".join(c.description for c in cells) + ")",
                        max(c.bound for c in cells), 3, max(c.period_cells for c in cells))


def _resolution(geometry: Geometry) -> int:
    res = []
    for lat in geometry.lattices:
        for ax in lat.axes:
            if len(ax) > 1:
                res.append(int(round(1.0 / np.min(np.diff(ax)))))
    return min(res) if res else 1


def multiplication_operator(geometry: Geometry, cell: CellFunction, n: int,
                            dense: bool = False):
    """Sample ``cell`` at ``n * position`` for every dof of ``geometry``.

    Scalar cells give a diagonal operator.  Matrix cells contribute the
    diagonal entry matching each dof's field component; staggered components
    live at different points, so off-diagonal entries are rejected.
    """
    if n < 1:
        raise CoefficientError("oscillation index must be a positive integer")
    if n * cell.period_cells > _resolution(geometry):
        warnings.warn(f"n={n} leaves fewer than {cell.period_cells} cells per period",
                      TwoScaleWarning, stacklevel=2)
    y = np.round(n * geometry.positions(), 12) % 1.0
    vals = cell(y)
    if cell.value_dim == 1:
        diag = vals
    else:
        if geometry.ndim != 3 and cell.value_dim == 3:
            raise CoefficientError("matrix-valued cells need a 3D geometry")
        comp = geometry.components() % 3
        off = vals.copy()
        off[:, [0, 1, 2], [0, 1, 2]] = 0.0
        if np.any(np.abs(off) > 0):
            raise CoefficientError("staggered multiplication supports diagonal matrix cells only")
        diag = vals[np.arange(len(comp)), comp, comp]
    op = sp.diags(diag.astype(complex), format="csr")
    return op.toarray() if dense else op


# ---------------------------------------------------------------- convolution

@dataclass(frozen=True)
class ConvolutionSpec:
    """Difference kernel ``z -> k(z)`` (``z`` of shape ``(m, ndim)``) and norm bound."""

    kernel: Callable[[np.ndarray], np.ndarray]
    bound_theta: float
    description: str = "kernel"

    def __post_init__(self):
        if not 0.0 <= self.bound_theta < 1.0:
            raise CoefficientError("bound_theta must lie in [0, 1)")


def gaussian_kernel(width: float = 1.0, amplitude: float = 1.0, n: int = 0,
                    depth: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """``amplitude * exp(-|z|^2 / width^2) * (1 + depth * cos(2 pi n z_0))``."""

    def k(z):
        z = np.atleast_2d(z)
        r2 = np.sum(z * z, axis=1)
        return amplitude * np.exp(-r2 / width**2) * (1.0 + depth * np.cos(2 * np.pi * n * z[:, 0]))

    return k


def _lattice_spacing(axes) -> tuple[float, ...]:
    return tuple(float(ax[1] - ax[0]) if len(ax) > 1 else 1.0 for ax in axes)


def _uniform(axes) -> bool:
    return all(len(ax) < 3 or np.allclose(np.diff(ax), ax[1] - ax[0], rtol=0, atol=1e-12) for ax in axes)


class ConvolutionOperator(LinearOperator):
    """Componentwise convolution with quadrature weights on a tensor geometry.

    ``matvec`` uses FFT-based Toeplitz products; ``toarray`` and
    ``dense_matvec`` use the explicit kernel matrix.
    """

    def __init__(self, geometry: Geometry, kernel: Callable[[np.ndarray], np.ndarray]):
        self.geometry = geometry
        self.kernel = kernel
        self._stencils = []
        for lat in geometry.lattices:
            if not _uniform(lat.axes):
                raise CoefficientError("fast convolution needs uniform lattices")
            hs = _lattice_spacing(lat.axes)
            weight = float(np.prod(hs))
            offsets = [np.arange(-(len(ax) - 1), len(ax)) * h for ax, h in zip(lat.axes, hs)]
            mesh = np.meshgrid(*offsets, indexing="ij")
            z = np.stack([m.ravel() for m in mesh], axis=1)
            self._stencils.append(weight * np.asarray(kernel(z), complex).reshape(mesh[0].shape))
        size = geometry.size
        super().__init__(dtype=complex, shape=(size, size))

    def _matvec(self, x):
        x = np.asarray(x, dtype=complex).ravel()
        out = np.empty_like(x)
        for lat, off, st in zip(self.geometry.lattices, self.geometry.offsets(), self._stencils):
            block = x[off:off + lat.size].reshape(lat.shape)
            if len(lat.shape) == 1:
                c = st[len(block) - 1:]
                r = st[len(block) - 1::-1]
                y = sla.matmul_toeplitz((c, r), block, check_finite=False)
            else:
                full = scipy.signal.fftconvolve(block, st, mode="full")
                sl = tuple(slice(s - 1, 2 * s - 1) for s in lat.shape)
                y = full[sl]
            out[off:off + lat.size] = np.ravel(y)
        return out

    def _matmat(self, X):
        return np.column_stack([self._matvec(X[:, j]) for j in range(X.shape[1])])

    def _adjoint(self):
        return _AdjointConvolution(self)

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=complex)
        for lat, off in zip(self.geometry.lattices, self.geometry.offsets()):
            pos = lat.positions()
            weight = float(np.prod(_lattice_spacing(lat.axes)))
            diff = pos[:, None, :] - pos[None, :, :]
            vals = np.asarray(self.kernel(diff.reshape(-1, pos.shape[1])), complex)
            out[off:off + lat.size, off:off + lat.size] = weight * vals.reshape(lat.size, lat.size)
        return out

    def dense_matvec(self, x: np.ndarray) -> np.ndarray:
        return self.toarray() @ x

    def norm_estimate(self) -> float:
        if self.shape[0] <= 3000:
            return float(sla.norm(self.toarray(), 2))
        return float(svds(self, k=1, return_singular_vectors=False, random_state=0)[0])


class _AdjointConvolution(LinearOperator):
    def __init__(self, op: ConvolutionOperator):
        self._op = op
        super().__init__(dtype=complex, shape=op.shape)

    def _matvec(self, x):
        return self._op.toarray().conj().T @ x


def convolution_operator(geometry: Geometry, spec: ConvolutionSpec,
                         check_norm: bool = True) -> ConvolutionOperator:
    op = ConvolutionOperator(geometry, spec.kernel)
    if check_norm:
        nrm = op.norm_estimate()
        if nrm > spec.bound_theta + 1e-8:
            raise CoefficientError(
                f"convolution norm {nrm:.6g} exceeds bound_theta {spec.bound_theta}")
    return op


def scale_kernel_to_norm(geometry: Geometry, kernel, target: float):
    """Rescale ``kernel`` so that the induced operator norm equals ``target``."""
    nrm = ConvolutionOperator(geometry, kernel).norm_estimate()
    if nrm == 0.0:
        return kernel
    factor = target / nrm
    return lambda z: factor * np.asarray(kernel(z))


def dense_kernel_operator(geometry: Geometry, kernel_xy) -> np.ndarray:
    """General ``k(x, y)`` kernel as a dense matrix with quadrature weights."""
    out = np.zeros((geometry.size, geometry.size), dtype=complex)
    for lat, off in zip(geometry.lattices, geometry.offsets()):
        pos = lat.positions()
        weight = float(np.prod(_lattice_spacing(lat.axes)))
        x = np.repeat(pos, lat.size, axis=0)
        y = np.tile(pos, (lat.size, 1))
        out[off:off + lat.size, off:off + lat.size] = weight * np.asarray(
            kernel_xy(x, y), complex).reshape(lat.size, lat.size)
    return out


def toeplitz_distance(m: np.ndarray) -> float:
    """Relative Frobenius distance from ``m`` to its diagonal-averaged Toeplitz part."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    t = np.zeros_like(m)
    for k in range(-n + 1, n):
        d = np.diagonal(m, k)
        idx = np.arange(d.size)
        rows, cols = (idx, idx + k) if k >= 0 else (idx - k, idx)
        t[rows, cols] = d.mean()
    return float(np.linalg.norm(m - t) / max(np.linalg.norm(m), 1e-300))


# ---------------------------------------------------------------- patches

def patched_operator(V_basis: np.ndarray, b, H1_dim: int) -> np.ndarray:
    """``pi_{V^perp} + V b V*`` on H1."""
    V = np.asarray(V_basis, dtype=complex)
    if V.shape[0] != H1_dim:
        raise CoefficientError("V basis has the wrong number of rows")
    m = V.shape[1]
    if np.max(np.abs(V.conj().T @ V - np.eye(m)), initial=0.0) > 1e-10:
        raise CoefficientError("V basis is not orthonormal")
    b = as_dense(b)
    if b.shape != (m, m):
        raise CoefficientError("b must be square of size dim V")
    return np.eye(H1_dim, dtype=complex) + V @ (b - np.eye(m)) @ V.conj().T


def spectral_coordinate(V_basis: np.ndarray, roughness) -> np.ndarray:
    """Orthonormal basis ``Z`` of span(V) whose index order behaves like [0, 1].

    Eigenvectors of ``V* roughness V`` (smoothest first) are mixed by the
    orthonormal DCT-II, so a vector made of a few smooth eigenmodes has a
    slowly varying coefficient profile over the index ``i -> (i + 1/2) / m``.
    Multiplying that profile by an oscillating cell gives a two-scale
    operator on V.
    """
    V = np.asarray(V_basis, dtype=complex)
    m = V.shape[1]
    R = V.conj().T @ as_dense(roughness) @ V
    R = 0.5 * (R + R.conj().T)
    _, E = sla.eigh(R)
    D = scipy.fft.dct(np.eye(m), type=2, norm="ortho", axis=0)
    return V @ E @ D


def index_multiplication(m: int, cell: CellFunction, n: int) -> np.ndarray:
    """Diagonal of ``cell(n t_i)`` at ``t_i = (i + 1/2) / m``."""
    t = (np.arange(m) + 0.5) / m
    y = np.round(n * t, 12) % 1.0
    return cell(y[:, None])


def block_material_law(eps, mu):
    """``diag(eps, mu)`` on K2 (+) K1."""
    if sp.issparse(eps) and sp.issparse(mu):
        return sp.block_diag([eps, mu], format="csr").astype(complex)
    e, m = as_dense(eps), as_dense(mu)
    if e.shape[0] != e.shape[1] or m.shape[0] != m.shape[1]:
        raise CoefficientError("material blocks must be square")
    return sla.block_diag(e, m)


# ---------------------------------------------------------------- sequences

@dataclass(frozen=True)
class OperatorSequence:
    indices: tuple[int, ...]
    generator: Callable[[int], object]
    bounds: CoefficientBounds
    uniform_norm_bound: float
    description: str = ""
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, n: int):
        if n not in self._cache:
            self._cache[n] = self.generator(n)
        return self._cache[n]

    def adjoint(self) -> "OperatorSequence":
        return OperatorSequence(self.indices, lambda n: as_dense(self(n)).conj().T,
                                self.bounds, self.uniform_norm_bound,
                                f"adjoint of {self.description}")

    def check_members(self, d: BlockDecomposition) -> list:
        """Membership spot check at the first and last index."""
        reps = [check_membership(d, self(n), self.bounds)
                for n in (self.indices[0], self.indices[-1])]
        return reps


def _indices(params) -> tuple[int, ...]:
    idx = tuple(int(n) for n in params.get("indices", DEFAULT_INDICES))
    if not idx or any(n < 1 for n in idx) or list(idx) != sorted(set(idx)):
        raise CoefficientError("indices must be increasing positive integers")
    return idx


def sequence(kind: str, **params) -> OperatorSequence:
    """Build an indexed operator family.

    kinds:
      ``constant``  params ``op``
      ``osc1d`` / ``osc``  params ``geometry``, ``cell``
      ``conv``  params ``geometry``, ``kernel_family`` (n -> kernel), optional ``cell``
      ``patched``  params ``V``, ``b_family`` (n -> matrix on V), ``dim``
      ``material``  params ``eps_family``, ``mu_family``
      ``custom``  params ``generator``
    All kinds accept ``indices``, ``bounds`` (CoefficientBounds) and ``norm_bound``.
    """
    idx = _indices(params)
    bounds = params.get("bounds", CoefficientBounds(1e-3, 1e3))
    if kind == "constant":
        op = params["op"]
        gen = lambda n: op  # noqa: E731
        desc = "constant"
    elif kind in ("osc1d", "osc"):
        geo, cell = params["geometry"], params["cell"]
        gen = lambda n: multiplication_operator(geo, cell, n)  # noqa: E731
        desc = f"multiplication by {cell.description}(n x)"
    elif kind == "conv":
        geo = params["geometry"]
        family = params["kernel_family"]
        cell = params.get("cell")
        theta = float(params.get("theta", 0.99))

        def gen(n):
            base = multiplication_operator(geo, cell, n) if cell is not None else sp.identity(geo.size)
            conv = convolution_operator(geo, ConvolutionSpec(family(n), theta))
            return as_dense(base) + conv.toarray()
        desc = "multiplication plus oscillating convolution"
    elif kind == "patched":
        V, fam, dim = params["V"], params["b_family"], int(params["dim"])
        gen = lambda n: patched_operator(V, fam(n), dim)  # noqa: E731
        desc = "patched a(b_n)"
    elif kind == "material":
        ef, mf = params["eps_family"], params["mu_family"]
        gen = lambda n: block_material_law(ef(n), mf(n))  # noqa: E731
        desc = "block material law"
    elif kind == "custom":
        gen = params["generator"]
        desc = params.get("description", "custom")
    else:
        raise CoefficientError(f"unknown sequence kind {kind!r}")
    norm_bound = params.get("norm_bound")
    seq = OperatorSequence(idx, gen, bounds, float(norm_bound or 0.0), desc)
    if norm_bound is None:
        est = max(operator_norm(seq(n)) for n in (idx[0], idx[-1]))
        seq = OperatorSequence(idx, gen, bounds, est, desc, seq._cache)
    return seq


def operator_norm(op) -> float:
    """Spectral norm; diagonal sparse operators are read off directly."""
    if sp.issparse(op) and sp.triu(op, 1).nnz == 0 and sp.tril(op, -1).nnz == 0:
        return float(np.max(np.abs(op.diagonal()), initial=0.0))
    if op.shape[0] > 600:
        return float(svds(op, k=1, return_singular_vectors=False, random_state=0, tol=1e-8)[0])
    return float(sla.norm(as_dense(op), 2))

"""Finite-dimensional Hilbert complexes ``H0 --A0--> H1 --A1--> H2``.

Operators are stored as complex CSR matrices.  Every space carries the
unit-weight dot product; mesh volume factors are folded into the stencils, so
the adjoint of a map is its conjugate transpose.

Grid layout (see the README appendix): nodes, then x/y/z edges, then yz/zx/xy
faces, then cells, each block in C order over its (i, j, k) lattice.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._linalg import max_abs, numerical_rank


class ComplexError(ValueError):
    """Raised for degenerate inputs or violated complex preconditions."""


class BC(str, enum.Enum):
    TRIVIAL = "Trivial"
    DIRICHLET = "Dirichlet"
    NEUMANN = "Neumann"
    COMPOSED = "Composed"
    CUSTOM = "Custom"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value.lower() == value.lower():
                    return member
        return None


@dataclass(frozen=True)
class Lattice:
    """One field component sampled on a tensor lattice inside the unit box.

    ``axes`` holds the coordinates along each axis; dofs are ordered in C order.
    """

    component: int
    axes: tuple[np.ndarray, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.axes else 0

    def positions(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class Geometry:
    """Placement of the dofs of a space: a concatenation of lattices."""

    lattices: tuple[Lattice, ...]

    @property
    def size(self) -> int:
        return sum(l.size for l in self.lattices)

    @property
    def ndim(self) -> int:
        return len(self.lattices[0].axes) if self.lattices else 0

    def positions(self) -> np.ndarray:
        return np.concatenate([l.positions() for l in self.lattices], axis=0)

    def components(self) -> np.ndarray:
        return np.concatenate([np.full(l.size, l.component) for l in self.lattices])

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for l in self.lattices:
            out.append(acc)
            acc += l.size
        return out

    def shifted(self, by: int) -> "Geometry":
        return Geometry(tuple(Lattice(l.component + by, l.axes) for l in self.lattices))

    def __add__(self, other: "Geometry") -> "Geometry":
        return Geometry(self.lattices + other.lattices)


@dataclass(frozen=True)
class HilbertComplex:
    A0: sp.csr_matrix
    A1: sp.csr_matrix
    bc_tag: BC
    name: str
    geometry: Geometry | None = field(default=None, compare=False)
    grid: tuple[int, ...] | None = None

    @property
    def dim_H0(self) -> int:
        return self.A0.shape[1]

    @property
    def dim_H1(self) -> int:
        return self.A0.shape[0]

    @property
    def dim_H2(self) -> int:
        return self.A1.shape[0]

    def metadata(self) -> dict:
        meta = {
            "name": self.name,
            "bc_tag": self.bc_tag.value,
            "dims": [self.dim_H0, self.dim_H1, self.dim_H2],
        }
        if self.grid is not None:
            meta["grid"] = list(self.grid)
        return meta


@dataclass(frozen=True)
class ComplexReport:
    is_complex: bool
    rank_A0: int
    dim_ker_A1: int
    cohomology_dim: int
    is_exact: bool
    is_closed: bool = True
    composition_error: float = 0.0


def _csr(m) -> sp.csr_matrix:
    return sp.csr_matrix(m, dtype=complex)


def make_complex(A0, A1, bc_tag: BC = BC.CUSTOM, name: str = "custom",
                 geometry: Geometry | None = None, grid=None) -> HilbertComplex:
    """Wrap a user-supplied operator pair, checking that the shapes compose."""
    A0, A1 = _csr(A0), _csr(A1)
    if A1.shape[1] != A0.shape[0]:
        raise ComplexError(f"A1 has {A1.shape[1]} columns but A0 has {A0.shape[0]} rows")
    if geometry is not None and geometry.size != A0.shape[0]:
        raise ComplexError("geometry size does not match dim H1")
    return HilbertComplex(A0, A1, BC(bc_tag), name, geometry,
                          None if grid is None else tuple(grid))


# ---------------------------------------------------------------- builders

def build_trivial_complex(dim: int, geometry: Geometry | None = None) -> HilbertComplex:
    """``{0} -> H1 -> H1`` with A0 the empty map and A1 the identity."""
    if dim < 1:
        raise ComplexError("trivial complex needs dim >= 1")
    return make_complex(sp.csr_matrix((dim, 0)), sp.identity(dim), BC.TRIVIAL,
                        f"trivial-{dim}", geometry)


def _diff(n: int) -> sp.csr_matrix:
    """Forward difference from n+1 nodes to n intervals."""
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _nodes(n: int) -> np.ndarray:
    return np.arange(n + 1) / n


def _mids(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def interval_geometry(cells: int) -> Geometry:
    return Geometry((Lattice(0, (_mids(cells),)),))


def build_interval_complex(cells: int, bc: str | BC) -> HilbertComplex:
    """Gradient complex on [0, 1] split into ``cells`` equal cells.

    Dirichlet: interior nodes -> cells -> the mean functional.
    Neumann: all nodes -> cells -> {0}.
    """
    bc = BC(bc)
    if cells < 2:
        raise ComplexError("interval complex needs at least 2 cells")
    if bc not in (BC.DIRICHLET, BC.NEUMANN):
        raise ComplexError(f"unsupported boundary condition {bc.value}")
    h = 1.0 / cells
    grad = _diff(cells) * cells
    geo = interval_geometry(cells)
    if bc is BC.DIRICHLET:
        A0 = grad[:, 1:cells]
        A1 = np.full((1, cells), np.sqrt(h))
    else:
        A0 = grad
        A1 = sp.csr_matrix((0, cells))
    return make_complex(A0, A1, bc, f"interval-{cells}-{bc.value}", geo, (cells,))


def _kron3(a, b, c) -> sp.csr_matrix:
    return sp.kron(sp.kron(a, b), c, format="csr")


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, format="csr")


def _check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 2:
        raise ComplexError(f"grid dims must be three integers >= 2, got {dims}")
    return dims


def grid_geometries(dims) -> dict[str, Geometry]:
    """Dof placement for nodes, edges, faces and cells of the box grid."""
    nx, ny, nz = _check_dims(dims)
    xn, yn, zn = _nodes(nx), _nodes(ny), _nodes(nz)
    xm, ym, zm = _mids(nx), _mids(ny), _mids(nz)
    return {
        "nodes": Geometry((Lattice(0, (xn, yn, zn)),)),
        "edges": Geometry((Lattice(0, (xm, yn, zn)), Lattice(1, (xn, ym, zn)),
                           Lattice(2, (xn, yn, zm)))),
        "faces": Geometry((Lattice(0, (xn, ym, zm)), Lattice(1, (xm, yn, zm)),
                           Lattice(2, (xm, ym, zn)))),
        "cells": Geometry((Lattice(0, (xm, ym, zm)),)),
    }


def grid_operators(dims) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Full (boundary-free) grad, curl and div on the staggered box grid."""
    nx, ny, nz = _check_dims(dims)
    Dx, Dy, Dz = _diff(nx) * nx, _diff(ny) * ny, _diff(nz) * nz
    Ix, Iy, Iz = _eye(nx + 1), _eye(ny + 1), _eye(nz + 1)
    ix, iy, iz = _eye(nx), _eye(ny), _eye(nz)
    grad = sp.vstack([_kron3(Dx, Iy, Iz), _kron3(Ix, Dy, Iz), _kron3(Ix, Iy, Dz)])
    # edge blocks: x (nx,ny+1,nz+1), y (nx+1,ny,nz+1), z (nx+1,ny+1,nz)
    Z = sp.csr_matrix
    curl = sp.bmat([
        [Z(((nx + 1) * ny * nz, nx * (ny + 1) * (nz + 1))), -_kron3(Ix, iy, Dz), _kron3(Ix, Dy, iz)],
        [_kron3(ix, Iy, Dz), Z((nx * (ny + 1) * nz, (nx + 1) * ny * (nz + 1))), -_kron3(Dx, Iy, iz)],
        [-_kron3(ix, Dy, Iz), _kron3(Dx, iy, Iz), Z((nx * ny * (nz + 1), (nx + 1) * (ny + 1) * nz))],
    ])
    div = sp.hstack([_kron3(Dx, iy, iz), _kron3(ix, Dy, iz), _kron3(ix, iy, Dz)])
    return _csr(grad), _csr(curl), _csr(div)


def _boundary_masks(dims):
    """Boolean masks: boundary nodes and boundary-tangential edges."""
    nx, ny, nz = dims

    def on_bdry(n, idx):
        return (idx == 0) | (idx == n)

    i, j, k = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    bx, by, bz = on_bdry(nx, i), on_bdry(ny, j), on_bdry(nz, k)
    node_b = (bx | by | bz).ravel()
    edge_b = np.concatenate([
        (by | bz)[:nx, :, :].ravel(),
        (bx | bz)[:, :ny, :].ravel(),
        (bx | by)[:, :, :nz].ravel(),
    ])
    return node_b, edge_b


def build_grid_complex_3d(dims, bc: str | BC) -> HilbertComplex:
    """(grad, curl) on the staggered unit-box grid with ``dims`` cells per axis.

    Neumann uses every node and edge.  Dirichlet drops boundary nodes from H0
    and boundary-tangential edges from the domain of the curl.  The dropped
    edges stay in H1 (so both variants share the same H1) and are sent to a
    trace block of H2; this makes ker(A1) exactly the fields that vanish on
    boundary edges and are curl free, i.e. rge(A0).
    """
    bc = BC(bc)
    dims = _check_dims(dims)
    if bc not in (BC.DIRICHLET, BC.NEUMANN):
        raise ComplexError(f"unsupported boundary condition {bc.value}")
    grad, curl, _ = grid_operators(dims)
    geo = grid_geometries(dims)["edges"]
    name = "grid-{}x{}x{}-{}".format(*dims, bc.value)
    if bc is BC.NEUMANN:
        return make_complex(grad, curl, bc, name, geo, dims)
    node_b, edge_b = _boundary_masks(dims)
    A0 = grad[:, np.flatnonzero(~node_b)]
    keep = sp.diags((~edge_b).astype(float))
    nx, ny, nz = dims
    edge_scale = np.concatenate([np.full(l.size, n) for l, n in zip(geo.lattices, (nx, ny, nz))])
    rows = np.flatnonzero(edge_b)
    trace = sp.csr_matrix((edge_scale[rows], (np.arange(rows.size), rows)),
                          shape=(rows.size, edge_b.size))
    A1 = sp.vstack([curl @ keep, trace])
    return make_complex(A0, A1, bc, name, geo, dims)


def compose_maxwell_complex(b0, b1, b2, k2_geometry: Geometry | None = None,
                            k1_geometry: Geometry | None = None,
                            name: str = "maxwell", grid=None) -> HilbertComplex:
    """Compose legs K0 -B0-> K1 -B1-> K2 -B2-> K3 into the Maxwell complex.

    A0 = [[0, B2*], [B0, 0]] : K0+K3 -> K2+K1 and A1 = [[0, B1], [-B1*, 0]].
    """
    b0, b1, b2 = _csr(b0), _csr(b1), _csr(b2)
    for lo, hi, label in ((b0, b1, "(B0, B1)"), (b1, b2, "(B1, B2)")):
        if hi.shape[1] != lo.shape[0]:
            raise ComplexError(f"leg {label} shapes do not compose")
        rep = verify_complex(make_complex(lo, hi))
        if not rep.is_exact:
            raise ComplexError(f"leg {label} is not an exact complex "
                               f"(cohomology {rep.cohomology_dim}, complex={rep.is_complex})")
    k0, k1 = b0.shape[1], b0.shape[0]
    k2, k3 = b1.shape[0], b2.shape[0]
    Z = sp.csr_matrix
    A0 = sp.bmat([[Z((k2, k0)), b2.conj().T], [b0, Z((k1, k3))]])
    A1 = sp.bmat([[Z((k2, k2)), b1], [-b1.conj().T, Z((k1, k1))]])
    geo = None
    if k2_geometry is not None and k1_geometry is not None:
        shift = 1 + max(l.component for l in k2_geometry.lattices)
        geo = k2_geometry + k1_geometry.shifted(shift)
    return make_complex(A0, A1, BC.COMPOSED, name, geo, grid)


def build_maxwell_grid_complex(dims) -> HilbertComplex:
    """Composed complex from the box-grid legs grad, curl, div (faces + edges)."""
    dims = _check_dims(dims)
    grad, curl, div = grid_operators(dims)
    geo = grid_geometries(dims)
    return compose_maxwell_complex(grad, curl, div, geo["faces"], geo["edges"],
                                   name="maxwell-{}x{}x{}".format(*dims), grid=dims)


# ---------------------------------------------------------------- checks

def verify_complex(c: HilbertComplex, tol: float = 1e-12) -> ComplexReport:
    comp = c.A1 @ c.A0
    err = max_abs(comp.data) if comp.nnz else 0.0
    r0 = numerical_rank(c.A0)
    r1 = numerical_rank(c.A1)
    ker1 = c.dim_H1 - r1
    coh = ker1 - r0
    is_complex = err <= tol
    return ComplexReport(is_complex, r0, ker1, coh, is_complex and coh == 0,
                         composition_error=err)


def adjoint_complex(c: HilbertComplex) -> HilbertComplex:
    """The complex (A1*, A0*) : H2 -> H1 -> H0."""
    if not verify_complex(c).is_complex:
        raise ComplexError("adjoint_complex needs a complex as input")
    return HilbertComplex(_csr(c.A1.conj().T), _csr(c.A0.conj().T), c.bc_tag,
                          f"{c.name}-adjoint", c.geometry, c.grid)


# ---------------------------------------------------------------- export

def write_coo(matrix, path) -> None:
    """Write ``row col re im`` lines, zero-based, with round-trip precision."""
    m = sp.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {m.shape[0]} {m.shape[1]}\n")
        order = np.lexsort((m.col, m.row))
        for r, col, v in zip(m.row[order], m.col[order], m.data[order]):
            v = complex(v)
            fh.write(f"{r} {col} {v.real!r} {v.imag!r}\n")


def read_coo(path) -> sp.csr_matrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        shape = (int(header[1]), int(header[2]))
        data = np.loadtxt(fh, ndmin=2) if shape[0] * shape[1] else np.zeros((0, 4))
    if data.size == 0:
        return sp.csr_matrix(shape, dtype=complex)
    vals = data[:, 2] + 1j * data[:, 3]
    return sp.csr_matrix((vals, (data[:, 0].astype(int), data[:, 1].astype(int))), shape=shape)


def save_complex(c: HilbertComplex, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_coo(c.A0, d / "A0.coo")
    write_coo(c.A1, d / "A1.coo")
    (d / "complex.json").write_text(json.dumps(c.metadata(), indent=2) + "\n", encoding="utf-8")


def load_complex(directory) -> HilbertComplex:
    """Reload a saved complex; geometry is rebuilt for known grid builders."""
    d = Path(directory)
    meta = json.loads((d / "complex.json").read_text(encoding="utf-8"))
    A0, A1 = read_coo(d / "A0.coo"), read_coo(d / "A1.coo")
    geo = None
    grid = meta.get("grid")
    if grid is not None and len(grid) == 1:
        geo = interval_geometry(grid[0])
    elif grid is not None and meta["bc_tag"] in (BC.DIRICHLET.value, BC.NEUMANN.value):
        geo = grid_geometries(grid)["edges"]
    elif grid is not None and meta["bc_tag"] == BC.COMPOSED.value:
        g = grid_geometries(grid)
        geo = g["faces"] + g["edges"].shifted(3)
    return make_complex(A0, A1, BC(meta["bc_tag"]), meta["name"], geo, grid)

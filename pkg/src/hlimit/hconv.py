"""Probe-based weak limits and nonlocal H-limits.

Weak operator convergence is measured through a fixed dictionary of smooth
probe vectors; in exact finite dimensions every topology coincides, so the
two-scale meaning comes entirely from keeping the probe coarse compared with
the oscillation.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from ._linalg import as_dense, max_abs
from .coefficients import OperatorSequence
from .complex_core import Geometry, HilbertComplex
from .decomposition import (BlockDecomposition, MembershipReport, assemble_from_blocks,
                            block_representation, build_decomposition, check_membership)
from .solvers import (RangeFunctional, ReducedOperator, reduce, solve_dual, solve_primal)


class HConvergenceError(ValueError):
    """Raised for violated preconditions (too few indices, non-members)."""


# ---------------------------------------------------------------- probes

def gram_schmidt(vectors: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Order-preserving orthonormalisation; nearly dependent columns are dropped."""
    vectors = np.asarray(vectors, dtype=complex)
    out: list[np.ndarray] = []
    for j in range(vectors.shape[1]):
        v = vectors[:, j].copy()
        n0 = np.linalg.norm(v)
        if n0 == 0.0:
            continue
        for _ in range(2):
            for q in out:
                v -= q * np.vdot(q, v)
        if np.linalg.norm(v) <= rtol * n0:
            continue
        out.append(v / np.linalg.norm(v))
    if not out:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    return np.column_stack(out)


@dataclass(frozen=True)
class WOTProbe:
    """Unit test vectors (columns) in H1."""

    test_vectors: np.ndarray
    count_per_subspace: int = 8

    def __post_init__(self):
        v = self.test_vectors
        if v.ndim != 2 or v.shape[1] == 0:
            raise HConvergenceError("a probe needs at least one vector")
        if np.max(np.abs(np.linalg.norm(v, axis=0) - 1.0)) > 1e-10:
            raise HConvergenceError("probe vectors must have unit norm")
        if gram_schmidt(v).shape[1] != v.shape[1]:
            raise HConvergenceError("probe vectors must be linearly independent")

    @property
    def k(self) -> int:
        return self.test_vectors.shape[1]

    def basis(self) -> np.ndarray:
        return gram_schmidt(self.test_vectors)

    def compressed(self, Q: np.ndarray) -> np.ndarray:
        """Orthonormal basis of the compressions ``Q* phi`` in Q-coordinates."""
        if Q.shape[1] == 0:
            return np.zeros((0, 0), dtype=complex)
        return gram_schmidt(Q.conj().T @ self.test_vectors)


def _mode_tuples(ndim: int, start: int, limit: int):
    ranges = [range(start, limit)] * ndim
    return sorted(itertools.product(*ranges), key=lambda p: (sum(x * x for x in p), p))


def lattice_modes(geometry: Geometry, k: int, family: str = "sine") -> np.ndarray:
    """``k`` lowest tensor sine (or cosine) modes per lattice, unit norm."""
    cols = []
    for lat, off in zip(geometry.lattices, geometry.offsets()):
        ndim = len(lat.axes)
        start = 1 if family == "sine" else 0
        limit = start + max(k, 2) + 1
        kept = np.zeros((lat.size, 0), dtype=complex)
        for p in _mode_tuples(ndim, start, limit):
            factors = [np.sin(pi * np.pi * ax) if family == "sine" else np.cos(pi * np.pi * ax)
                       for pi, ax in zip(p, lat.axes)]
            v = factors[0]
            for f in factors[1:]:
                v = np.multiply.outer(v, f)
            v = np.ravel(v).astype(complex)
            if np.linalg.norm(v) < 1e-12:
                continue
            trial = gram_schmidt(np.column_stack([kept, v]))
            if trial.shape[1] == kept.shape[1]:
                continue
            kept = np.column_stack([kept, v / np.linalg.norm(v)])
            if kept.shape[1] == k:
                break
        full = np.zeros((geometry.size, kept.shape[1]), dtype=complex)
        full[off:off + lat.size] = kept
        cols.append(full)
    return np.hstack(cols)


def default_probe(c: HilbertComplex, k: int, seed: int = 0) -> WOTProbe:
    """Low sine modes per field component, or smooth random profiles without geometry."""
    if k < 1:
        raise HConvergenceError("probe size must be positive")
    if k > c.dim_H1:
        raise HConvergenceError(f"probe size {k} exceeds dim H1 = {c.dim_H1}")
    if c.geometry is not None:
        return WOTProbe(lattice_modes(c.geometry, k), k)
    rng = np.random.default_rng(seed)
    t = (np.arange(c.dim_H1) + 0.5) / c.dim_H1
    low = np.column_stack([np.cos(p * np.pi * t) for p in range(min(4, c.dim_H1))])
    vecs = low @ rng.standard_normal((low.shape[1], k))
    vecs = vecs.astype(complex)
    vecs /= np.linalg.norm(vecs, axis=0)
    if gram_schmidt(vecs).shape[1] < k:
        vecs = np.eye(c.dim_H1, dtype=complex)[:, :k]
    return WOTProbe(vecs, k)


# ---------------------------------------------------------------- weak limits

@dataclass
class WOTLimit:
    limit: np.ndarray
    probe_limit: np.ndarray
    raw_last: np.ndarray
    probe_matrices: dict
    cauchy_residuals: list
    converged: bool

    def probe_matrices_to_csv(self, path) -> None:
        """Long-format CSV of the per-index probe matrices: n, row, col, re, im."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "row", "col", "re", "im"])
            for n, P in self.probe_matrices.items():
                for (i, j), z in np.ndenumerate(P):
                    w.writerow([n, i, j, repr(float(z.real)), repr(float(z.imag))])


def _write_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def richardson(indices: Sequence[int], values: Sequence[np.ndarray]) -> np.ndarray:
    """First-order extrapolation from the last two values, assuming O(1/n) decay."""
    n1, n2 = indices[-2], indices[-1]
    return (n2 * values[-1] - n1 * values[-2]) / (n2 - n1)


def lift(left: np.ndarray, right: np.ndarray, probe_limit: np.ndarray,
         last: np.ndarray) -> np.ndarray:
    """Least-squares lift of a probe-level limit onto the whole space.

    The probe block is taken from ``probe_limit``; the block between the two
    probe complements comes from the last iterate; the mixed blocks vanish.
    For a constant sequence and a complete probe this returns the constant.
    """
    perp_l = np.eye(left.shape[0], dtype=complex) - left @ left.conj().T
    perp_r = np.eye(right.shape[0], dtype=complex) - right @ right.conj().T
    return left @ probe_limit @ right.conj().T + perp_l @ last @ perp_r


def _spread(mats: Sequence[np.ndarray], floor: float = 0.0) -> float:
    scale = max(max_abs(mats[-1]), floor, 1e-300)
    return max(max_abs(a - b) for a, b in itertools.combinations(mats, 2)) / scale


def wot_limit(seq, probe, tol: float, indices: Sequence[int] | None = None,
              right_probe=None, scale_floor: float = 0.0) -> WOTLimit:
    """Probe matrices ``[<X(n) phi_j, phi_i>]``, Cauchy diagnostics and the lifted limit.

    ``seq`` is an OperatorSequence or a callable ``n -> matrix`` with
    ``indices``.  ``probe`` / ``right_probe`` are WOTProbe objects or
    orthonormal column matrices (left acts on the range side).  Entry
    changes are measured relative to the largest entry of the last probe
    matrix, or ``scale_floor`` when that is larger.
    """
    if indices is None:
        indices = seq.indices
    indices = list(indices)
    if len(indices) < 3:
        raise HConvergenceError("wot_limit needs at least three indices")
    left = probe.basis() if isinstance(probe, WOTProbe) else np.asarray(probe, complex)
    right = left if right_probe is None else (
        right_probe.basis() if isinstance(right_probe, WOTProbe) else np.asarray(right_probe, complex))
    mats, last = [], None
    for n in indices:
        X = as_dense(seq(n))
        mats.append(left.conj().T @ X @ right)
        last = X
    denom = max(max_abs(mats[-1]), scale_floor, 1e-300)
    resid = [0.0] + [max_abs(mats[i] - mats[i - 1]) / denom for i in range(1, len(mats))]
    if left.shape[1] == 0 or right.shape[1] == 0 or last.size == 0:
        spread = 0.0
        resid = [0.0] * len(mats)
    else:
        spread = _spread(mats[-3:], scale_floor)
    p_lim = richardson(indices, mats)
    return WOTLimit(lift(left, right, p_lim, last), p_lim, mats[-1],
                    dict(zip(indices, mats)), resid, bool(spread <= tol))


# ---------------------------------------------------------------- H-limits

QUANTITIES = ("L00", "L10", "L01", "LS")


def characteristic_quantities(d: BlockDecomposition, a) -> dict[str, np.ndarray]:
    """a00^-1, a10 a00^-1, a00^-1 a01 and the Schur complement of ``a``."""
    b = block_representation(d, a)
    if d.r0:
        a00_inv = sla.inv(b.a00)
    else:
        a00_inv = np.zeros((0, 0), dtype=complex)
    L10 = b.a10 @ a00_inv
    L01 = a00_inv @ b.a01
    return {"L00": a00_inv, "L10": L10, "L01": L01, "LS": b.a11 - L10 @ b.a01}


def reconstruct(d: BlockDecomposition, q: dict[str, np.ndarray]) -> np.ndarray:
    """Operator whose characteristic quantities are ``q``."""
    from .decomposition import BlockOperator
    a00 = sla.inv(q["L00"]) if d.r0 else np.zeros((0, 0), dtype=complex)
    a10 = q["L10"] @ a00
    a01 = a00 @ q["L01"]
    a11 = q["LS"] + q["L10"] @ a00 @ q["L01"]
    return assemble_from_blocks(d, BlockOperator(a00, a01, a10, a11))


def _setting_decomposition(d) -> BlockDecomposition:
    return d.d if isinstance(d, ComplexSetting) else d


@dataclass
class HLimitReport:
    L00: np.ndarray
    L10: np.ndarray
    L01: np.ndarray
    LS: np.ndarray
    reconstructed: np.ndarray
    cauchy_residuals: dict
    converged: bool
    probe_limits: dict
    raw_last: dict
    membership: MembershipReport | None
    reconstruction_defect: float
    indices: list = field(default_factory=list)

    def quantities(self) -> dict[str, np.ndarray]:
        return {"L00": self.L00, "L10": self.L10, "L01": self.L01, "LS": self.LS}

    def to_dict(self) -> dict:
        def cm(m):
            m = np.asarray(m)
            return {"re": m.real.tolist(), "im": m.imag.tolist()}
        return {
            "indices": list(self.indices),
            "converged": self.converged,
            "cauchy_residuals": {k: [float(x) for x in v] for k, v in self.cauchy_residuals.items()},
            "probe_limits": {k: cm(v) for k, v in self.probe_limits.items()},
            "raw_last": {k: cm(v) for k, v in self.raw_last.items()},
            "reconstruction_defect": float(self.reconstruction_defect),
            "membership": None if self.membership is None else self.membership.to_dict(),
        }

    def to_json(self, path) -> None:
        _write_json(self.to_dict(), path)


def extract_h_limit(d, seq: OperatorSequence, probe: WOTProbe, tol: float,
                    check_members: bool = True) -> HLimitReport:
    """Run the weak limits of the four characteristic quantities and rebuild the limit."""
    d = _setting_decomposition(d)
    indices = list(seq.indices)
    if len(indices) < 3:
        raise HConvergenceError("extract_h_limit needs at least three indices")
    if check_members:
        for n in (indices[0], indices[-1]):
            rep = check_membership(d, seq(n), seq.bounds)
            if not rep.is_member:
                raise HConvergenceError(f"a_{n} is not in the coefficient class: {rep}")
    per_n = {n: characteristic_quantities(d, seq(n)) for n in indices}
    psi0 = probe.compressed(d.Q0) if d.r0 else np.zeros((0, 0), complex)
    psi1 = probe.compressed(d.Q1) if d.r1 else np.zeros((0, 0), complex)
    sides = {"L00": (psi0, psi0), "L10": (psi1, psi0), "L01": (psi0, psi1), "LS": (psi1, psi1)}
    for name in QUANTITIES:
        left, right = sides[name]
        if not left.size:
            sides[name] = (np.zeros((per_n[indices[0]][name].shape[0], 0), complex), right)
        if not right.size:
            sides[name] = (sides[name][0], np.zeros((per_n[indices[0]][name].shape[1], 0), complex))
    # off-diagonal quantities may vanish; measure their changes on the common scale
    floor = max(max_abs(l.conj().T @ per_n[indices[-1]][k] @ r) if l.size and r.size else 0.0
                for k, (l, r) in sides.items())
    lifted, resid, plims, raws, conv = {}, {}, {}, {}, True
    for name in QUANTITIES:
        left, right = sides[name]
        w = wot_limit(lambda n, name=name: per_n[n][name], left, tol, indices, right, floor)
        lifted[name], resid[name], plims[name], raws[name] = w.limit, w.cauchy_residuals, w.probe_limit, w.raw_last
        conv = conv and w.converged
    rec = reconstruct(d, lifted)
    back = characteristic_quantities(d, rec)
    defect = max((max_abs(back[k] - lifted[k]) / max(max_abs(lifted[k]), 1.0) for k in QUANTITIES),
                 default=0.0)
    membership = check_membership(d, rec)
    return HLimitReport(lifted["L00"], lifted["L10"], lifted["L01"], lifted["LS"], rec,
                        resid, conv, plims, raws, membership, defect, indices)


# ---------------------------------------------------------------- definition check

@dataclass(frozen=True)
class ComplexSetting:
    """A complex together with its decomposition and reduced legs."""

    c: HilbertComplex
    d: BlockDecomposition
    r0: ReducedOperator
    r1: ReducedOperator

    @property
    def dim(self) -> int:
        return self.d.dim


def prepare(c: HilbertComplex) -> ComplexSetting:
    return ComplexSetting(c, build_decomposition(c), reduce(c.A0), reduce(c.A1.conj().T))


def probe_samples(s: ComplexSetting, probe: WOTProbe, count: int | None = None):
    """(f, g) pairs made of the Helmholtz parts of probe vectors."""
    out = []
    for j in range(probe.k if count is None else min(count, probe.k)):
        phi = probe.test_vectors[:, j]
        f = s.d.Q0 @ (s.d.Q0.conj().T @ phi)
        g = s.d.Q1 @ (s.d.Q1.conj().T @ phi)
        out.append((RangeFunctional(f) if np.linalg.norm(f) > 1e-12 else None,
                    RangeFunctional(g) if np.linalg.norm(g) > 1e-12 else None))
    return out


@dataclass
class ConvergenceReport:
    indices: list
    residuals: dict
    overall: list
    verdict: bool
    tol: float

    def to_dict(self) -> dict:
        return {"indices": self.indices, "tol": self.tol, "verdict": self.verdict,
                "overall": [float(x) for x in self.overall],
                "residuals": {k: [float(x) for x in v] for k, v in self.residuals.items()}}

    def to_json(self, path) -> None:
        _write_json(self.to_dict(), path)


def _decreasing(values: Sequence[float], window: int = 3) -> bool:
    """Non-increasing over the asymptotic window (the last ``window`` indices).

    The first indices of a dyadic family can resonate with the probe modes
    and are not part of the two-scale regime, so they are not judged.
    """
    tail = list(values)[-window:]
    return all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(tail, tail[1:]))


def _solution_images(s: ComplexSetting, a, samples) -> list[dict]:
    """Per-sample images; all samples share one factorisation per route."""
    fs = [j for j, (f, _) in enumerate(samples) if f is not None]
    gs = [j for j, (_, g) in enumerate(samples) if g is not None]
    out: list[dict] = [{} for _ in samples]
    if fs:
        F = RangeFunctional(np.column_stack([samples[j][0].g for j in fs]))
        sol = solve_primal(s.d, s.r0, a, F)
        image = s.r0.basis_ran @ (s.r0.matrix @ (s.r0.basis_dom.conj().T @ sol.u))
        for col, j in enumerate(fs):
            out[j]["u"] = image[:, col]
            out[j]["primal_flux"] = sol.flux[:, col]
    if gs:
        G = RangeFunctional(np.column_stack([samples[j][1].g for j in gs]))
        sol = solve_dual(s.d, s.r1, a, G)
        image = s.r1.basis_ran @ (s.r1.matrix @ (s.r1.basis_dom.conj().T @ sol.u))
        for col, j in enumerate(gs):
            out[j]["v"] = image[:, col]
            out[j]["dual_flux"] = sol.flux[:, col]
    return out


def verify_h_convergence_definition(s: ComplexSetting, seq: OperatorSequence, candidate,
                                    samples=None, tol: float = 5e-2,
                                    probe: WOTProbe | None = None) -> ConvergenceReport:
    """Check weak convergence of solutions and fluxes toward the candidate's.

    ``u`` and ``v`` are compared through their images ``A0 u`` and ``A1* v``
    (weak convergence in the graph norm); all four quantities are tested
    against the probe and normalised by the candidate quantity's norm.
    """
    if probe is None:
        probe = default_probe(s.c, 8)
    if samples is None:
        samples = probe_samples(s, probe)
    if not samples:
        raise HConvergenceError("verification needs at least one sample")
    cand = as_dense(candidate)
    if sla.svdvals(cand)[-1] <= 1e-10 * sla.svdvals(cand)[0]:
        raise HConvergenceError("candidate is not invertible")
    basis = probe.basis()
    refs = _solution_images(s, cand, samples)
    names = ("u", "primal_flux", "v", "dual_flux")
    residuals = {k: [] for k in names}
    for n in seq.indices:
        a = seq(n)
        worst = {k: 0.0 for k in names}
        for cur, ref in zip(_solution_images(s, a, samples), refs):
            for k, x in cur.items():
                scale = max(np.linalg.norm(ref[k]), 1e-300)
                worst[k] = max(worst[k], max_abs(basis.conj().T @ (x - ref[k])) / scale)
        for k in names:
            residuals[k].append(worst[k])
    overall = [max(residuals[k][i] for k in names) for i in range(len(seq.indices))]
    verdict = _decreasing(overall) and overall[-1] <= tol
    return ConvergenceReport(list(seq.indices), residuals, overall, bool(verdict), tol)


def h_pseudometric(d, a, b, probe: WOTProbe) -> float:
    """Sum of max-entry probe distances of the four characteristic quantities."""
    d = _setting_decomposition(d)
    for label, op in (("a", a), ("b", b)):
        if not check_membership(d, op).is_member:
            raise HConvergenceError(f"{label} is not in the coefficient class")
    qa, qb = characteristic_quantities(d, a), characteristic_quantities(d, b)
    psi = {0: probe.compressed(d.Q0) if d.r0 else np.zeros((0, 0)),
           1: probe.compressed(d.Q1) if d.r1 else np.zeros((0, 0))}
    sides = {"L00": (0, 0), "L10": (1, 0), "L01": (0, 1), "LS": (1, 1)}
    total = 0.0
    for name, (i, j) in sides.items():
        if psi[i].size == 0 or psi[j].size == 0:
            continue
        total += max_abs(psi[i].conj().T @ (qa[name] - qb[name]) @ psi[j])
    return float(total)


# ---------------------------------------------------------------- projected identities

def solve_projected_pair(d, a, v: np.ndarray) -> np.ndarray:
    """Recover ``w = a v`` from ``pi0 w = pi0 a v`` and ``pi1 a^-1 w = pi1 v``."""
    d = _setting_decomposition(d)
    A = as_dense(a)
    v = np.asarray(v, dtype=complex)
    Q0h, Q1h = d.Q0.conj().T, d.Q1.conj().T
    lhs = np.vstack([Q0h, Q1h @ sla.solve(A, np.eye(d.dim))])
    rhs = np.concatenate([Q0h @ (A @ v), Q1h @ v])
    return sla.solve(lhs, rhs)


def operator_from_projected_identities(d, b) -> np.ndarray:
    """The operator ``a`` with ``b^-1 a pi0 = pi0`` and ``a b^-1 pi1 = pi1``.

    Both identities fix ``a`` on the columns of ``[Q0, b^-1 Q1]``, which span
    H1 whenever ``b`` is in the coefficient class; the result is ``b``.
    """
    d = _setting_decomposition(d)
    B = as_dense(b)
    src = np.hstack([d.Q0, sla.solve(B, d.Q1)])
    dst = np.hstack([B @ d.Q0, d.Q1])
    return sla.solve(src.T, dst.T).T


# ---------------------------------------------------------------- div-curl

def vector_limit(vec_seq: Callable[[int], np.ndarray], indices: Sequence[int],
                 basis: np.ndarray, tol: float):
    """Extrapolated weak limit of a vector family, lifted onto ``basis``.

    Returns (limit, coefficient spread over the last three indices, converged).
    A family that is constant over the last three indices is its own limit.
    """
    basis = gram_schmidt(basis)
    vecs = [np.asarray(vec_seq(n), complex) for n in indices]
    tail = vecs[-3:]
    if max(np.linalg.norm(a - b) for a, b in itertools.combinations(tail, 2)) <= \
            1e-12 * max(max(np.linalg.norm(v) for v in tail), 1e-300):
        return vecs[-1].copy(), 0.0, True
    coeffs = [basis.conj().T @ v for v in vecs]
    # changes are judged against the vector norm so that families tending to zero count as convergent
    floor = max(np.linalg.norm(v) for v in vecs[-3:])
    spread = _spread(coeffs[-3:], floor) if len(coeffs) >= 3 else float("inf")
    lim = richardson(indices, coeffs)
    return basis @ lim, spread, bool(spread <= tol)


def limit_dictionary(geometry: Geometry, k: int = 16) -> np.ndarray:
    """Cosine modes used to represent weak limits of vector families."""
    return lattice_modes(geometry, k, family="cosine")


@dataclass
class DivCurlReport:
    indices: list
    pairings: list
    limit_pairing: complex
    errors: list
    verdict: bool
    compact_surrogate: bool
    compact_declared: bool | None
    weakly_convergent: bool
    tol: float

    def to_dict(self) -> dict:
        return {"indices": self.indices, "tol": self.tol, "verdict": self.verdict,
                "pairings": [[float(p.real), float(p.imag)] for p in self.pairings],
                "limit_pairing": [float(self.limit_pairing.real), float(self.limit_pairing.imag)],
                "errors": [float(e) for e in self.errors],
                "compact_surrogate": self.compact_surrogate,
                "compact_declared": self.compact_declared,
                "weakly_convergent": self.weakly_convergent}


def _strongly_convergent(seq_coords: Sequence[np.ndarray], tol: float) -> bool:
    tail = seq_coords[-3:]
    scale = max(max(np.linalg.norm(x) for x in tail), 1e-300)
    if scale < 1e-12:
        return True
    return max(np.linalg.norm(a - b) for a, b in itertools.combinations(tail, 2)) / scale <= tol


def divcurl_pairing(s: ComplexSetting, q_seq, r_seq, indices: Sequence[int],
                    probe: WOTProbe | None = None, tol: float = 5e-2,
                    q_limit=None, r_limit=None, compact_declared: bool | None = None,
                    dictionary: np.ndarray | None = None) -> DivCurlReport:
    """Compare <q_n, r_n> with the pairing of the weak limits.

    The compactness surrogate asks that (pi0 q_n, pi1 r_n) or, with the roles
    swapped, (pi0 r_n, pi1 q_n) converge strongly.  A finite battery can only
    refute compactness, never certify it.
    """
    indices = list(indices)
    if len(indices) < 3:
        raise HConvergenceError("divcurl_pairing needs at least three indices")
    qs = {n: np.asarray(q_seq(n), complex) for n in indices}
    rs = {n: np.asarray(r_seq(n), complex) for n in indices}
    for v in list(qs.values()) + list(rs.values()):
        if v.shape[0] != s.dim:
            raise HConvergenceError("vector length does not match dim H1")
    if dictionary is None:
        dictionary = limit_dictionary(s.c.geometry) if s.c.geometry is not None else probe.test_vectors
    weak = True
    if q_limit is None:
        q_limit, _, ok = vector_limit(qs.__getitem__, indices, dictionary, tol)
        weak = weak and ok
    if r_limit is None:
        r_limit, _, ok = vector_limit(rs.__getitem__, indices, dictionary, tol)
        weak = weak and ok
    lim = complex(np.vdot(r_limit, q_limit))
    pairings = [complex(np.vdot(rs[n], qs[n])) for n in indices]
    errors = []
    for n, p in zip(indices, pairings):
        # relative to the limit pairing unless it is negligible against the Cauchy-Schwarz bound
        bound = np.linalg.norm(qs[n]) * np.linalg.norm(rs[n])
        scale = abs(lim) if abs(lim) >= 1e-3 * bound else bound
        errors.append(abs(p - lim) / max(scale, 1e-300))
    Q0h, Q1h = s.d.Q0.conj().T, s.d.Q1.conj().T
    orient1 = (_strongly_convergent([Q0h @ qs[n] for n in indices], tol)
               and _strongly_convergent([Q1h @ rs[n] for n in indices], tol))
    orient2 = (_strongly_convergent([Q0h @ rs[n] for n in indices], tol)
               and _strongly_convergent([Q1h @ qs[n] for n in indices], tol))
    verdict = _decreasing(errors) and errors[-1] <= tol
    return DivCurlReport(indices, pairings, lim, errors, bool(verdict), bool(orient1 or orient2),
                         compact_declared, weak, tol)


@dataclass
class FluxCheckReport:
    indices: list
    errors: list
    verdict: bool
    tol: float

    def to_dict(self) -> dict:
        return {"indices": self.indices, "errors": [float(e) for e in self.errors],
                "verdict": self.verdict, "tol": self.tol}


def divcurl_flux_check(s: ComplexSetting, seq: OperatorSequence, candidate, q_seq,
                       probe: WOTProbe, tol: float = 5e-2, q_limit=None,
                       dictionary: np.ndarray | None = None) -> FluxCheckReport:
    """Test ``a_n q_n`` against ``candidate q_inf`` on the probe."""
    indices = list(seq.indices)
    qs = {n: np.asarray(q_seq(n), complex) for n in indices}
    if q_limit is None:
        if dictionary is None:
            dictionary = limit_dictionary(s.c.geometry) if s.c.geometry is not None else probe.test_vectors
        q_limit, _, _ = vector_limit(qs.__getitem__, indices, dictionary, tol)
    target = np.asarray(candidate @ q_limit).ravel()
    basis = probe.basis()
    scale = max(max_abs(basis.conj().T @ target), 1e-300)
    errors = [max_abs(basis.conj().T @ (np.asarray(seq(n) @ qs[n]).ravel() - target)) / scale
              for n in indices]
    verdict = _decreasing(errors) and errors[-1] <= tol
    return FluxCheckReport(indices, errors, bool(verdict), tol)

"""Dense symmetric linear algebra shared by the whole package.

Everything operates on plain float64 numpy arrays.  Symmetric matrices are
kept exactly symmetric (entry (i, j) equals entry (j, i) bit for bit), which
downstream trace-orthogonality checks rely on.  The eigensolver is a cyclic
Jacobi iteration with a round-robin sweep ordering; within one round the
rotation planes are disjoint, so the vectorized update is exactly equivalent
to applying the rotations sequentially.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SQRT2 = float(np.sqrt(2.0))


class NotPsdError(ValueError):
    """A matrix required to be positive semidefinite is significantly indefinite."""


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return 0.5*(M + M^T).  Float addition commutes, so the result is exactly symmetric."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def check_finite(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} has non-finite entries")
    return m


def trace_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius inner product <A, B> = sum_ij A_ij B_ij."""
    return float(np.sum(a * b))


@dataclass(frozen=True)
class SpectralFactorization:
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return symmetrize((v * self.eigenvalues) @ v.T)


def _round_robin_rounds(d: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rounds of pairwise-disjoint index pairs covering every (i, j), i < j, once.

    Classic circle scheduling: slot 0 is fixed, the rest rotate.  Odd d gets a
    bye slot that is skipped.
    """
    slots = list(range(d)) if d % 2 == 0 else list(range(d)) + [d]
    k = len(slots)
    rounds = []
    for _ in range(k - 1):
        ps, qs = [], []
        for i in range(k // 2):
            a, b = slots[i], slots[k - 1 - i]
            if a < d and b < d:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.asarray(ps, dtype=int), np.asarray(qs, dtype=int)))
        slots = [slots[0], slots[-1]] + slots[1:-1]
    return rounds


def _offdiag_mass2(a: np.ndarray) -> float:
    # summing the squared off-diagonal entries directly avoids the catastrophic
    # cancellation of ||A||_F^2 - ||diag||^2 once the mass is near machine level
    b = a.copy()
    np.fill_diagonal(b, 0.0)
    return float(np.sum(b * b))


def _jacobi(a: np.ndarray, want_vectors: bool, off_tol: float, max_sweeps: int):
    d = a.shape[0]
    v = np.eye(d) if want_vectors else None
    if d == 1:
        return a, v
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return a, v
    rounds = _round_robin_rounds(d)
    thresh2 = (off_tol * norm) ** 2
    for _ in range(max_sweeps):
        if _offdiag_mass2(a) <= thresh2:
            break
        for ps, qs in rounds:
            apq = a[ps, qs]
            app = a[ps, ps]
            aqq = a[qs, qs]
            with np.errstate(all="ignore"):
                theta = (aqq - app) / (2.0 * apq)
                sgn = np.where(theta >= 0.0, 1.0, -1.0)
                t = sgn / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            # skip pairs whose pivot is already zero (guards 0/0 above)
            t = np.where(np.abs(apq) > 0.0, t, 0.0)
            t = np.where(np.isfinite(t), t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cols_p = a[:, ps].copy()
            cols_q = a[:, qs].copy()
            a[:, ps] = c * cols_p - s * cols_q
            a[:, qs] = s * cols_p + c * cols_q
            rows_p = a[ps, :].copy()
            rows_q = a[qs, :].copy()
            a[ps, :] = c[:, None] * rows_p - s[:, None] * rows_q
            a[qs, :] = s[:, None] * rows_p + c[:, None] * rows_q
            # the rotated pivots are analytically zero
            a[ps, qs] = 0.0
            a[qs, ps] = 0.0
            if want_vectors:
                vp = v[:, ps].copy()
                vq = v[:, qs].copy()
                v[:, ps] = c * vp - s * vq
                v[:, qs] = s * vp + c * vq
        a = symmetrize(a)
    return a, v


def sym_eig(m: np.ndarray, off_tol: float = 1e-12, max_sweeps: int = 100) -> SpectralFactorization:
    """Full spectral factorization of a symmetric matrix by cyclic Jacobi rotations.

    Converges when the off-diagonal Frobenius mass drops below
    ``off_tol * ||M||_F``.  Deterministic; intended for dimensions up to ~200.
    """
    a = check_finite(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    a = symmetrize(a)
    a, v = _jacobi(a.copy(), True, off_tol, max_sweeps)
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return SpectralFactorization(np.ascontiguousarray(vals[order]), np.ascontiguousarray(v[:, order]))


def sym_eigvalues(m: np.ndarray, off_tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues only (descending); skips the eigenvector accumulation."""
    a = check_finite(m)
    a = symmetrize(a)
    a, _ = _jacobi(a.copy(), False, off_tol, max_sweeps)
    vals = np.diag(a).copy()
    vals[::-1].sort()
    return vals


def psd_factor(m: np.ndarray, rank_tol: float = 1e-7) -> tuple[np.ndarray, int]:
    """Factor a (numerically) PSD matrix as M ~= V V^T with V of full column rank.

    Columns are sqrt(lambda_i) * v_i for eigenvalues above
    ``rank_tol * (1 + lambda_max)``; the column count is the numerical rank.
    Raises :class:`NotPsdError` when lambda_min < -rank_tol * (1 + lambda_max).
    """
    f = sym_eig(m)
    lmax = max(float(f.eigenvalues[0]), 0.0) if f.eigenvalues.size else 0.0
    lmin = float(f.eigenvalues[-1]) if f.eigenvalues.size else 0.0
    if lmin < -rank_tol * (1.0 + lmax):
        raise NotPsdError(f"not PSD within tolerance: lambda_min={lmin:.3e}, lambda_max={lmax:.3e}")
    keep = f.eigenvalues > rank_tol * (1.0 + lmax)
    r = int(np.count_nonzero(keep))
    v = f.eigenvectors[:, keep] * np.sqrt(np.maximum(f.eigenvalues[keep], 0.0))
    return v, r


def hvec(m: np.ndarray) -> np.ndarray:
    """Scaled half-vectorization: off-diagonals carry sqrt(2) so that
    trace_inner(A, B) == hvec(A) @ hvec(B)."""
    d = m.shape[0]
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.diag(m), SQRT2 * m[iu]])


def hmat(x: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`hvec`."""
    x = np.asarray(x, dtype=float)
    if dim is None:
        dim = int(round((np.sqrt(1 + 8 * x.size) - 1) / 2))
    if dim * (dim + 1) // 2 != x.size:
        raise ValueError(f"length {x.size} is not a triangular number for dim {dim}")
    out = np.zeros((dim, dim))
    out[np.diag_indices(dim)] = x[:dim]
    iu = np.triu_indices(dim, 1)
    off = x[dim:] / SQRT2
    out[iu] = off
    out[(iu[1], iu[0])] = off
    return out


def sym_nullspace(
    constraints: Sequence[np.ndarray],
    dim: int | None = None,
    rank_tol: float = 1e-12,
) -> list[np.ndarray]:
    """Orthonormal basis of {Delta symmetric : <C_i, Delta> = 0 for all i}.

    Works in the scaled half-vectorization so the constraint system is a plain
    linear one.  The basis is built by pivoted Gram-Schmidt on the projected
    identity, with least-squares refinement against the constraint rows, so
    returned matrices are trace-orthogonal to every C_i to near machine
    precision.  An empty list is a valid return.
    """
    mats = [symmetrize(check_finite(c, "constraint")) for c in constraints]
    if dim is None:
        if not mats:
            raise ValueError("dim is required when the constraint list is empty")
        dim = mats[0].shape[0]
    for c in mats:
        if c.shape != (dim, dim):
            raise ValueError("constraint matrices must share one dimension")
    full = dim * (dim + 1) // 2

    if not mats:
        eye = np.eye(full)
        return [hmat(eye[:, j], dim) for j in range(full)]

    k = np.stack([hvec(c) for c in mats])  # (ncon, full)
    gram = symmetrize(k @ k.T)
    gf = sym_eig(gram)
    lmax = max(float(gf.eigenvalues[0]), 0.0)
    keep = gf.eigenvalues > rank_tol * lmax if lmax > 0 else np.zeros(gf.eigenvalues.size, dtype=bool)
    rank = int(np.count_nonzero(keep))
    nullity = full - rank
    if nullity == 0:
        return []
    if rank == 0:
        eye = np.eye(full)
        return [hmat(eye[:, j], dim) for j in range(full)]

    u = gf.eigenvectors[:, :rank]
    lam = gf.eigenvalues[:rank]
    w = k.T @ (u / np.sqrt(lam))  # orthonormal basis of the constraint row space

    def refine(vec: np.ndarray) -> np.ndarray:
        # least-squares projection onto the exact nullspace of k
        for _ in range(2):
            resid = k @ vec
            vec = vec - k.T @ (u @ ((u.T @ resid) / lam))
        return vec

    cand = np.eye(full) - w @ w.T
    basis_vecs: list[np.ndarray] = []
    for _ in range(nullity):
        norms = np.linalg.norm(cand, axis=0)
        j = int(np.argmax(norms))
        vec = refine(cand[:, j].copy())
        for b in basis_vecs:  # re-orthogonalize (refinement may tilt slightly)
            vec -= (b @ vec) * b
        nrm = float(np.linalg.norm(vec))
        if nrm < 1e-8:
            raise RuntimeError("nullspace basis extraction lost rank; constraint system is numerically borderline")
        vec /= nrm
        basis_vecs.append(vec)
        cand -= np.outer(vec, vec @ cand)
    return [hmat(vec, dim) for vec in basis_vecs]

"""Semidefinite relaxation of the homogenized problem and a dense solver for it.

The relaxation minimizes <B, X> over X >= 0 with X_{n+1,n+1} = 1 and
<Bk, X> <= 0 for every ellipsoid.  The solver is an infeasible-start
primal-dual path-following method with Nesterov-Todd scaling on the
semidefinite block, a log barrier on the inequality slacks, and Mehrotra
predictor-corrector steps.  Dense factorizations throughout; intended for
block dimensions up to ~60 and up to ~50 constraints.  Fully deterministic.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .linalg import psd_factor, sym_eig, symmetrize, trace_inner
from .model import HomogenizedProblem


class SolverError(RuntimeError):
    """Unrecoverable numerical breakdown inside the interior-point iteration."""


@dataclass(frozen=True)
class ConicProgram:
    """min <objective, X> s.t. <ineq_k, X> + s_k = 0, s >= 0, <equality, X> = rhs, X >= 0."""

    dim: int
    objective: np.ndarray
    inequalities: tuple[np.ndarray, ...]
    equality: np.ndarray
    equality_rhs: float = 1.0

    @property
    def m(self) -> int:
        return len(self.inequalities)


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_frac: float = 0.98   # fraction of the distance to the cone boundary
    rank_tol: float = 1e-7
    verbose: bool = False


@dataclass(frozen=True)
class IterationStat:
    pobj: float
    dobj: float
    gap: float
    primal_residual: float
    dual_residual: float
    mu: float


@dataclass(frozen=True)
class SdpSolution:
    X: np.ndarray
    slacks: np.ndarray
    v_sdp: float
    gap: float
    status: str  # optimal | max_iter | numerical_failure
    rank: int
    primal_residual: float
    dual_residual: float
    iterations: int = 0
    y: np.ndarray | None = None        # multipliers, inequalities first, equality last
    Z: np.ndarray | None = None        # dual semidefinite slack
    z_lin: np.ndarray | None = None    # dual slack on the inequality multipliers
    history: tuple[IterationStat, ...] = ()


def build_relaxation(h: HomogenizedProblem) -> ConicProgram:
    """Assemble the relaxation; the corner equality pins the homogenizing entry to 1."""
    d = h.dim
    e = np.zeros((d, d))
    e[d - 1, d - 1] = 1.0
    return ConicProgram(dim=d, objective=h.B.copy(), inequalities=tuple(b.copy() for b in h.Bk), equality=e)


def _chol(mat: np.ndarray, jitter_base: float = 0.0) -> np.ndarray:
    """Cholesky with an escalating diagonal jitter ladder; raises SolverError on failure."""
    d = mat.shape[0]
    scale = 1.0 + abs(float(np.trace(mat))) / d
    jitter = jitter_base
    for _ in range(4):
        try:
            return np.linalg.cholesky(mat + jitter * scale * np.eye(d) if jitter else mat)
        except np.linalg.LinAlgError:
            jitter = max(jitter * 1e4, 1e-14)
    raise SolverError("Cholesky factorization broke down")


def _psd_step_bound(u: np.ndarray, hi: float = 1.03, splits: int = 16) -> float:
    """Largest certified alpha in [0, hi] with I + alpha*U >= 0, via Cholesky bisection.

    Returns a lower bound on the true boundary distance (sufficient for a
    fraction-to-boundary rule).  U must be symmetric.
    """
    d = u.shape[0]
    eye = np.eye(d)

    def ok(alpha: float) -> bool:
        try:
            np.linalg.cholesky(eye + alpha * u)
            return True
        except np.linalg.LinAlgError:
            return False

    if ok(hi):
        return hi
    lo = 0.0
    cur = hi
    for _ in range(splits):
        mid = 0.5 * (lo + cur)
        if ok(mid):
            lo = mid
        else:
            cur = mid
    return lo


def _lin_step_bound(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0.0
    if not np.any(neg):
        return np.inf
    return float(np.min(v[neg] / -dv[neg]))


def solve_sdp(program: ConicProgram, options: SolverOptions | None = None) -> SdpSolution:
    """Solve the relaxation to the requested duality gap and feasibility tolerances.

    On iteration-limit exhaustion the best iterate seen is returned with status
    ``max_iter``; factorization breakdown yields ``numerical_failure`` (also
    with the best iterate).  Deterministic given the options.
    """
    opts = options or SolverOptions()
    d = program.dim
    m = program.m
    bmat = symmetrize(program.objective)
    stack = np.stack([symmetrize(c) for c in program.inequalities] + [symmetrize(program.equality)])
    ncon = m + 1
    rhs_vec = np.zeros(ncon)
    rhs_vec[m] = program.equality_rhs
    norm_b = float(np.linalg.norm(bmat))
    rho = 1.0 + max([norm_b] + [float(np.linalg.norm(c)) for c in stack])

    X = np.eye(d) * rho
    s = np.full(m, rho)
    y = np.zeros(ncon)
    Z = np.eye(d) * rho
    zl = np.full(m, rho)

    history: list[IterationStat] = []
    best = None
    best_score = np.inf
    status = "max_iter"
    iterations = 0
    idx = np.arange(m)

    def stats():
        con_vals = np.einsum("kij,ij->k", stack, X)
        pobj = trace_inner(bmat, X)
        dobj = float(y[m] * program.equality_rhs)
        r_p = rhs_vec - con_vals - np.concatenate([s, [0.0]])
        R_d = symmetrize(bmat - np.einsum("k,kij->ij", y, stack) - Z)
        r_dl = -y[:m] - zl
        mu = (trace_inner(X, Z) + float(s @ zl)) / (d + m)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pres = float(np.abs(r_p).max()) / (1.0 + abs(program.equality_rhs))
        dres = max(
            float(np.linalg.norm(R_d)) / (1.0 + norm_b),
            float(np.abs(r_dl).max()) / (1.0 + norm_b) if m else 0.0,
        )
        return con_vals, pobj, dobj, r_p, R_d, r_dl, mu, gap, pres, dres

    for iterations in range(1, opts.max_iter + 1):
        con_vals, pobj, dobj, r_p, R_d, r_dl, mu, gap, pres, dres = stats()
        history.append(IterationStat(pobj, dobj, gap, pres, dres, mu))
        score = max(gap, pres, dres)
        if np.isfinite(score) and score < best_score:
            best_score = score
            best = (X.copy(), s.copy(), y.copy(), Z.copy(), zl.copy(), pobj, gap, pres, dres)
        if gap <= opts.gap_tol and pres <= opts.feas_tol and dres <= opts.feas_tol:
            status = "optimal"
            break
        if not np.isfinite(score) or abs(pobj) > 1e14 * rho:
            status = "numerical_failure"
            break
        if opts.verbose:
            print(f"  it {iterations:3d}  pobj {pobj:+.9e}  gap {gap:.2e}  pres {pres:.2e}  dres {dres:.2e}")

        try:
            # Nesterov-Todd scaling: G^-1 X G^-T = G^T Z G = diag(sig)
            Lx = _chol(X)
            Lz = _chol(Z)
            middle = symmetrize(Lx.T @ Z @ Lx)
            f = sym_eig(middle)
            lam2 = np.maximum(f.eigenvalues, 1e-300)
            sig = np.sqrt(lam2)
            G = (Lx @ f.eigenvectors) / np.sqrt(sig)
            Gi = (f.eigenvectors * np.sqrt(sig)).T @ np.linalg.inv(Lx)
            denom = 0.5 * (sig[:, None] + sig[None, :])

            # scaled constraint operators and the Schur complement
            Ahat = np.matmul(np.matmul(G.T[None, :, :], stack), G[None, :, :])
            Ahat = 0.5 * (Ahat + np.transpose(Ahat, (0, 2, 1)))
            WAW = np.matmul(np.matmul(G[None, :, :], Ahat), G.T[None, :, :])
            WAW = 0.5 * (WAW + np.transpose(WAW, (0, 2, 1)))
            M = np.einsum("aij,bij->ab", Ahat, Ahat)
            w_lin = s / zl
            M[idx, idx] += w_lin
            M = symmetrize(M)
            Lm = _chol(M, jitter_base=1e-14)
            Rd_hat = symmetrize(G.T @ R_d @ G)
            WRdW = symmetrize(G @ Rd_hat @ G.T)

            def directions(rc_mat: np.ndarray, rc_lin: np.ndarray):
                tm = G @ (rc_mat / denom) @ G.T
                nm = symmetrize(tm - WRdW)
                rhs = r_p - np.einsum("kij,ij->k", stack, nm)
                rhs[:m] -= rc_lin / zl - w_lin * r_dl
                dy = np.linalg.solve(Lm.T, np.linalg.solve(Lm, rhs))
                resid = rhs - M @ dy
                dy += np.linalg.solve(Lm.T, np.linalg.solve(Lm, resid))
                dZ = symmetrize(R_d - np.einsum("k,kij->ij", dy, stack))
                dX = symmetrize(nm + np.einsum("k,kij->ij", dy, WAW))
                dz = r_dl - dy[:m]
                ds = rc_lin / zl - w_lin * r_dl + w_lin * dy[:m]
                return dX, ds, dy, dZ, dz

            def step_bounds(dX, ds, dZ, dz):
                dX_hat = symmetrize(Gi @ dX @ Gi.T)
                dZ_hat = symmetrize(G.T @ dZ @ G)
                scale = np.sqrt(np.outer(sig, sig))
                ap = min(_psd_step_bound(dX_hat / scale), _lin_step_bound(s, ds))
                ad = min(_psd_step_bound(dZ_hat / scale), _lin_step_bound(zl, dz))
                return min(1.0, opts.step_frac * ap), min(1.0, opts.step_frac * ad), dX_hat, dZ_hat

            # predictor: pure affine direction
            rc_aff_mat = -np.diag(lam2)
            rc_aff_lin = -s * zl
            dXa, dsa, dya, dZa, dza = directions(rc_aff_mat, rc_aff_lin)
            ap, ad, dXa_hat, dZa_hat = step_bounds(dXa, dsa, dZa, dza)

            mu_aff = (
                trace_inner(X + ap * dXa, Z + ad * dZa) + float((s + ap * dsa) @ (zl + ad * dza))
            ) / (d + m)
            mu_aff = max(mu_aff, 0.0)
            sigma = min(max((mu_aff / mu) ** 3, 0.0), 1.0) if mu > 0 else 0.0

            # corrector with Mehrotra second-order term in the scaled space
            cross = 0.5 * (dXa_hat @ dZa_hat + dZa_hat @ dXa_hat)
            rc_mat = sigma * mu * np.eye(d) - np.diag(lam2) - cross
            rc_lin = sigma * mu - s * zl - dsa * dza
            dX, ds, dy, dZ, dz = directions(rc_mat, rc_lin)
            ap, ad, _, _ = step_bounds(dX, ds, dZ, dz)
        except SolverError:
            status = "numerical_failure"
            break

        X = symmetrize(X + ap * dX)
        s = s + ap * ds
        y = y + ad * dy
        Z = symmetrize(Z + ad * dZ)
        zl = zl + ad * dz
    else:
        status = "max_iter"

    if status != "optimal" and best is not None:
        X, s, y, Z, zl, pobj, gap, pres, dres = best
    else:
        _, pobj, _, _, _, _, _, gap, pres, dres = stats()

    try:
        _, rank = psd_factor(X, opts.rank_tol)
    except Exception:
        rank = d
    return SdpSolution(
        X=X,
        slacks=s,
        v_sdp=float(pobj),
        gap=float(gap),
        status=status,
        rank=rank,
        primal_residual=float(pres),
        dual_residual=float(dres),
        iterations=iterations,
        y=y,
        Z=Z,
        z_lin=zl,
        history=tuple(history),
    )


def solution_to_dict(sol: SdpSolution) -> dict:
    return {
        "X": sol.X.tolist(),
        "v_sdp": sol.v_sdp,
        "gap": sol.gap,
        "status": sol.status,
        "rank": sol.rank,
    }


def solution_from_dict(data: dict, program: ConicProgram | None = None,
                       rank_tol: float = 1e-7) -> SdpSolution:
    """Rebuild a solution from its JSON form (the in-process solve is optional)."""
    try:
        X = symmetrize(np.asarray(data["X"], dtype=float))
        v_sdp = float(data["v_sdp"])
        gap = float(data.get("gap", 0.0))
        status = str(data.get("status", "optimal"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed solution JSON: {exc}") from exc
    if "rank" in data:
        rank = int(data["rank"])
    else:
        _, rank = psd_factor(X, rank_tol)
    if program is not None:
        slacks = np.maximum(0.0, -np.array([trace_inner(c, X) for c in program.inequalities]))
    else:
        slacks = np.zeros(0)
    return SdpSolution(
        X=X, slacks=slacks, v_sdp=v_sdp, gap=gap, status=status, rank=rank,
        primal_residual=0.0, dual_residual=0.0,
    )

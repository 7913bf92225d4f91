"""Problem containers: quadratic objectives over intersections of ellipsoids.

An instance minimizes x^T A x + 2 b^T x subject to ||F_k x + g_k||^2 <= 1.
The origin must lie strictly inside the feasible region (every ||g_k|| < 1),
which every downstream stage of the pipeline relies on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import jsonio
from .linalg import check_finite, symmetrize

FEAS_TOL = 1e-8  # absolute tolerance on squared-norm constraint residuals
_INTERIOR_MARGIN = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Ellipsoid:
    """One constraint ||F x + g||^2 <= 1 with F of shape (rows, n)."""

    F: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        f = check_finite(self.F, "F")
        g = check_finite(self.g, "g")
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"F must be a matrix with at least one row, got shape {f.shape}")
        if g.shape != (f.shape[0],):
            raise ValueError(f"g has shape {g.shape}, expected ({f.shape[0]},)")
        object.__setattr__(self, "F", _freeze(f))
        object.__setattr__(self, "g", _freeze(g))

    @property
    def rows(self) -> int:
        return self.F.shape[0]

    def gram(self) -> np.ndarray:
        return symmetrize(self.F.T @ self.F)


@dataclass(frozen=True)
class EcqpInstance:
    A: np.ndarray
    b: np.ndarray
    ellipsoids: tuple[Ellipsoid, ...]
    # constant added to the objective for reporting only (used by the
    # assignment-polytope reduction); never enters the relaxation or rounding
    offset: float = 0.0

    def __post_init__(self):
        a = check_finite(self.A, "A")
        b = check_finite(self.b, "b")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        n = a.shape[0]
        if n < 1:
            raise ValueError("dimension must be at least 1")
        asym = float(np.abs(a - a.T).max()) if n else 0.0
        if asym > 1e-12 * (1.0 + float(np.abs(a).max())):
            raise ValueError(f"A is asymmetric beyond tolerance (max |A - A^T| = {asym:.3e})")
        if b.shape != (n,):
            raise ValueError(f"b has shape {b.shape}, expected ({n},)")
        ells = tuple(self.ellipsoids)
        if len(ells) < 1:
            raise ValueError("at least one ellipsoid constraint is required")
        for k, e in enumerate(ells):
            if e.F.shape[1] != n:
                raise ValueError(f"ellipsoid {k}: F has {e.F.shape[1]} columns, expected {n}")
        object.__setattr__(self, "A", _freeze(symmetrize(a)))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "ellipsoids", ells)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return len(self.ellipsoids)

    def gamma(self) -> float:
        """max_k ||g_k||, the interiority measure of the origin."""
        return max(float(np.linalg.norm(e.g)) for e in self.ellipsoids)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    gamma: float
    issues: tuple[str, ...] = ()
    offending: tuple[int, ...] = ()


def validate(inst: EcqpInstance) -> ValidationReport:
    """Check that the origin is strictly interior: every ||g_k|| < 1.

    Shape consistency is enforced by the instance constructor already, so the
    report only concerns the interiority margins.
    """
    issues = []
    offending = []
    gamma = 0.0
    for k, e in enumerate(inst.ellipsoids):
        nrm = float(np.linalg.norm(e.g))
        gamma = max(gamma, nrm)
        if nrm >= 1.0 - _INTERIOR_MARGIN:
            issues.append(f"constraint {k}: ||g|| = {nrm:.12g} leaves the origin on or outside the boundary")
            offending.append(k)
    return ValidationReport(ok=not issues, gamma=gamma, issues=tuple(issues), offending=tuple(offending))


@dataclass(frozen=True)
class HomogenizedProblem:
    """Quadratic forms in dimension n+1 equivalent to the instance on x_{n+1} = 1."""

    B: np.ndarray
    Bk: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.B.shape[0]


def homogenize(inst: EcqpInstance) -> HomogenizedProblem:
    """Lift objective and constraints to (n+1)-dimensional quadratic forms.

    [x; 1]^T B [x; 1] equals the objective and [x; 1]^T Bk [x; 1] equals
    ||F_k x + g_k||^2 - 1.
    """
    report = validate(inst)
    if not report.ok:
        raise ValueError("instance fails validation: " + "; ".join(report.issues))
    n = inst.n
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = inst.A
    B[:n, n] = inst.b
    B[n, :n] = inst.b
    Bk = []
    for e in inst.ellipsoids:
        m = np.zeros((n + 1, n + 1))
        m[:n, :n] = e.gram()
        fg = e.F.T @ e.g
        m[:n, n] = fg
        m[n, :n] = fg
        m[n, n] = float(e.g @ e.g) - 1.0
        Bk.append(_freeze(symmetrize(m)))
    return HomogenizedProblem(B=_freeze(symmetrize(B)), Bk=tuple(Bk))


def evaluate(inst: EcqpInstance, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective x^T A x + 2 b^T x and per-constraint residuals max(0, ||F x + g||^2 - 1).

    The reporting offset is deliberately not included; f(0) is exactly 0.
    """
    x = check_finite(x, "x")
    value = float(x @ inst.A @ x + 2.0 * (inst.b @ x))
    residuals = np.empty(inst.m)
    for k, e in enumerate(inst.ellipsoids):
        v = e.F @ x + e.g
        residuals[k] = max(0.0, float(v @ v) - 1.0)
    return value, residuals


def is_feasible(inst: EcqpInstance, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
    return bool(evaluate(inst, x)[1].max() <= tol)


@dataclass(frozen=True)
class InstanceSpec:
    """Knobs for the seeded generator."""

    gamma_max: float = 0.0   # constraint centers are rescaled so ||g_k|| <= gamma_max
    bounded: bool = True     # force sum_k F_k^T F_k positive definite (compact region)
    ball: bool = False       # first constraint is the exact unit ball
    convex: bool = False     # draw A positive semidefinite instead of indefinite
    scale: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.gamma_max < 1.0):
            raise ValueError(f"gamma_max must lie in [0, 1), got {self.gamma_max}")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")


def _random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_instance(seed: int, n: int, m: int, spec: InstanceSpec = InstanceSpec()) -> EcqpInstance:
    """Deterministic random instance satisfying the interiority assumption by construction.

    A = Q D Q^T with mixed-sign D (unless ``spec.convex``), so the objective is
    genuinely nonconvex for n >= 2.  With ``spec.bounded`` the first constraint
    matrix is square and well conditioned, making the feasible set compact.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), n, m, 0xEC9B]))
    eigs = rng.uniform(0.5, 2.0, size=n) * spec.scale
    if spec.convex:
        signs = np.ones(n)
    else:
        signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        signs[0] = 1.0
        signs[-1] = -1.0  # mixed signs guarantee indefiniteness for n >= 2; negative for n == 1
    q = _random_orthogonal(rng, n)
    a = symmetrize((q * (eigs * signs)) @ q.T)
    b = rng.standard_normal(n) * (0.5 * spec.scale)

    ells = []
    for k in range(m):
        if spec.ball and k == 0:
            ells.append(Ellipsoid(F=np.eye(n), g=np.zeros(n)))
            continue
        if spec.bounded and k == 0:
            f = (_random_orthogonal(rng, n) * rng.uniform(0.7, 1.3, size=n)) @ _random_orthogonal(rng, n)
        else:
            rows = int(rng.integers(1, n + 1))
            f = rng.standard_normal((rows, n))
            f *= rng.uniform(0.6, 1.4) / max(float(np.linalg.norm(f, 2)), 1e-12)
        rows = f.shape[0]
        if spec.gamma_max > 0.0:
            direction = rng.standard_normal(rows)
            nrm = float(np.linalg.norm(direction))
            radius = spec.gamma_max * float(rng.random())
            g = direction * (radius / nrm) if nrm > 0 else np.zeros(rows)
        else:
            g = np.zeros(rows)
        ells.append(Ellipsoid(F=f, g=g))
    inst = EcqpInstance(A=a, b=b, ellipsoids=tuple(ells))
    report = validate(inst)
    if not report.ok:  # pragma: no cover - construction guarantees interiority
        raise RuntimeError("generator produced an invalid instance: " + "; ".join(report.issues))
    return inst


def instance_to_dict(inst: EcqpInstance) -> dict:
    return {
        "n": inst.n,
        "m": inst.m,
        "A": inst.A.tolist(),
        "b": inst.b.tolist(),
        "ellipsoids": [{"F": e.F.tolist(), "g": e.g.tolist()} for e in inst.ellipsoids],
        "offset": inst.offset,
    }


def instance_from_dict(data: dict) -> EcqpInstance:
    try:
        a = np.asarray(data["A"], dtype=float)
        b = np.asarray(data["b"], dtype=float)
        ells = tuple(
            Ellipsoid(F=np.asarray(e["F"], dtype=float), g=np.asarray(e["g"], dtype=float))
            for e in data["ellipsoids"]
        )
        offset = float(data.get("offset", 0.0))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance JSON: {exc}") from exc
    inst = EcqpInstance(A=a, b=b, ellipsoids=ells, offset=offset)
    if "n" in data and int(data["n"]) != inst.n:
        raise ValueError(f"declared n={data['n']} does not match A of dimension {inst.n}")
    if "m" in data and int(data["m"]) != inst.m:
        raise ValueError(f"declared m={data['m']} does not match {inst.m} ellipsoids")
    return inst


def instance_digest(inst: EcqpInstance) -> str:
    """Stable content hash of the canonical JSON form."""
    text = jsonio.dumps(instance_to_dict(inst))
    return hashlib.sha256(text.encode()).hexdigest()[:16]

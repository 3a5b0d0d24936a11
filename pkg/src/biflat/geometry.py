"""Natural and dual connections built from rotation and Lame coefficients,
and numerical checks of the bi-flat F-manifold axioms.

Index conventions: a connection is stored as an array ``G`` with
``G[i, j, k] = Gamma^i_{jk}``; derivative stacks carry the differentiation
index last.

Powers of coordinate differences use ``|x|**p`` on the ordered chart
``0 < u^1 < ... < u^n``.  Explicit simple-pole factors ``1/(u^i - u^j)``
keep their sign.  The two choices differ from the principal branch by a
constant phase per index, i.e. by a gauge ``beta_ij -> (l_i/l_j) beta_ij``,
``H_i -> l_i H_i`` that leaves every structure below unchanged.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ChartCollision, EvaluationFailure, OriginSingularity
from .numerics import fd_jacobian

COLLISION = 1e-8


def real_power(x, p):
    """``|x|**p``: the real branch used for all homogeneous factors."""
    return np.abs(x) ** p


def check_chart(u, dual: bool = False) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    diff = np.abs(u[:, None] - u[None, :]) + np.eye(len(u))
    if np.any(diff < COLLISION):
        raise ChartCollision(f"coincident canonical coordinates at u = {u.tolist()}")
    if dual and np.any(np.abs(u) < COLLISION):
        raise OriginSingularity(f"a canonical coordinate vanishes at u = {u.tolist()}")
    return u


def sample_ordered_points(n, count, rng, box=(1.0, 6.0), min_gap=0.5, max_tries=100_000):
    """Uniform points in ``box**n``, sorted ascending; points with a gap
    below ``min_gap`` are rejected and redrawn."""
    out = []
    for _ in range(max_tries):
        if len(out) == count:
            break
        u = np.sort(rng.uniform(box[0], box[1], size=n))
        if n == 1 or np.min(np.diff(u)) >= max(min_gap, COLLISION):
            out.append(u)
    if len(out) < count:
        raise ValueError("could not sample enough well-separated points; widen the box")
    return out


@dataclass(frozen=True)
class RotationField:
    """beta(u) returns the n x n matrix of rotation coefficients (zero diagonal)."""

    n: int
    beta: Callable[[np.ndarray], np.ndarray]
    degrees: np.ndarray

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.beta(np.asarray(u, dtype=float)), dtype=float)

    def value(self, i, j, u) -> float:
        return 0.0 if i == j else float(self(u)[i, j])


@dataclass(frozen=True)
class LameField:
    n: int
    H: Callable[[np.ndarray], np.ndarray]
    degrees: np.ndarray

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.H(np.asarray(u, dtype=float)), dtype=float)

    def value(self, i, u) -> float:
        return float(self(u)[i])


@dataclass(frozen=True)
class ChristoffelField:
    n: int
    gamma: Callable[[np.ndarray], np.ndarray]
    kind: str = "generic"

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.gamma(np.asarray(u, dtype=float)), dtype=float)

    def value(self, i, j, k, u) -> float:
        return float(self(u)[i, j, k])


@dataclass(frozen=True)
class ProductStructure:
    n: int
    kind: str  # "circ" or "star"

    def __post_init__(self):
        if self.kind not in ("circ", "star"):
            raise ValueError("kind must be 'circ' or 'star'")

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        c = np.zeros((self.n,) * 3)
        idx = np.arange(self.n)
        if self.kind == "circ":
            c[idx, idx, idx] = 1.0
        else:
            if np.any(u == 0):
                raise OriginSingularity("star product needs u^i != 0")
            c[idx, idx, idx] = 1.0 / u
        return c


def zero_connection(n: int) -> ChristoffelField:
    return ChristoffelField(n, lambda u: np.zeros((n, n, n)), "zero")


def _offdiag(beta: RotationField, H: LameField, u) -> np.ndarray:
    """A[i, j] = (H_j / H_i) beta_ij, zero on the diagonal (shared by both connections)."""
    h = H(u)
    if np.any(h == 0) or not np.all(np.isfinite(h)):
        raise EvaluationFailure(f"Lame coefficient vanishes or is not finite at u = {u.tolist()}", u)
    A = h[None, :] / h[:, None] * beta(u)
    np.fill_diagonal(A, 0.0)
    return A


def _consistent(beta: RotationField, H: LameField):
    if beta.n != H.n:
        raise ValueError("rotation and Lame fields have different dimensions")


def natural_connection(beta: RotationField, H: LameField) -> ChristoffelField:
    _consistent(beta, H)
    n = beta.n

    def gamma(u):
        u = check_chart(u)
        A = _offdiag(beta, H, u)
        G = np.zeros((n, n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    G[i, i, j] = G[i, j, i] = A[i, j]
                    G[i, j, j] = -A[i, j]
            G[i, i, i] = -A[i].sum()
        return G

    return ChristoffelField(n, gamma, "natural")


def dual_connection(beta: RotationField, H: LameField) -> ChristoffelField:
    _consistent(beta, H)
    n = beta.n

    def gamma(u):
        u = check_chart(u, dual=True)
        A = _offdiag(beta, H, u)
        G = np.zeros((n, n, n))
        for i in range(n):
            for j in range(n):
                if i != j:
                    G[i, i, j] = G[i, j, i] = A[i, j]
                    G[i, j, j] = -u[i] / u[j] * A[i, j]
            G[i, i, i] = -(u * A[i]).sum() / u[i] - 1.0 / u[i]
        return G

    return ChristoffelField(n, gamma, "dual")


def riemann_curvature(gamma: ChristoffelField, u, h: float | None = None, order: int = 2) -> np.ndarray:
    """R[i, j, k, l] = R^i_{jkl} with partials of Gamma by central differences."""
    u = np.asarray(u, dtype=float)
    if h is None:
        dG = fd_jacobian(gamma, u, order=order)
    else:
        from .numerics import fd_partial

        dG = np.stack([fd_partial(gamma, u, k, h=h, order=order) for k in range(len(u))], axis=-1)
    G = gamma(u)
    # dG[i, a, b, k] = d_k Gamma^i_ab
    R = np.einsum("iljk->ijkl", dG) - np.einsum("ikjl->ijkl", dG)
    R += np.einsum("ikm,mlj->ijkl", G, G) - np.einsum("ilm,mkj->ijkl", G, G)
    return R


def covariant_derivative_12(gamma: ChristoffelField, c: Callable, u) -> np.ndarray:
    """N[i, j, k, l] = nabla_l c^i_{jk} for a (1,2)-tensor field c."""
    u = np.asarray(u, dtype=float)
    G = gamma(u)
    C = np.asarray(c(u))
    dC = fd_jacobian(c, u, order=4)
    N = dC.copy()
    N += np.einsum("ilm,mjk->ijkl", G, C)
    N -= np.einsum("mlj,imk->ijkl", G, C)
    N -= np.einsum("mlk,ijm->ijkl", G, C)
    return N


def product_compatibility_residual(gamma: ChristoffelField, c: ProductStructure, u) -> float:
    """max |nabla_l c^i_jk - nabla_j c^i_lk|."""
    N = covariant_derivative_12(gamma, c, u)
    return float(np.max(np.abs(N - np.einsum("ijkl->ilkj", N))))


def unit_parallel_residual(gamma: ChristoffelField, which: str, u) -> float:
    """max_{i,j} |d_j X^i + Gamma^i_jk X^k| for X = e or X = E."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    if which == "e":
        X, dX = np.ones(n), np.zeros((n, n))
    elif which == "E":
        X, dX = u.copy(), np.eye(n)
    else:
        raise ValueError("field must be 'e' or 'E'")
    nabla = dX + np.einsum("ijk,k->ij", gamma(u), X)
    return float(np.max(np.abs(nabla)))


def almost_hydro_equiv_residual(gamma1: ChristoffelField, gamma2: ChristoffelField, u) -> float:
    if gamma1.n != gamma2.n:
        raise ValueError("connections have different dimensions")
    G1, G2 = gamma1(u), gamma2(u)
    n = gamma1.n
    off = ~np.eye(n, dtype=bool)
    d1 = np.einsum("iij->ij", G1)[off]
    d2 = np.einsum("iij->ij", G2)[off]
    return float(np.max(np.abs(d1 - d2))) if n > 1 else 0.0


# ---------------------------------------------------------------------------
# Aggregated report
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    max_residual: float
    worst_point: list
    tol: float
    passed: bool

    def to_dict(self):
        return {
            "name": self.name,
            "max_residual": float(f"{self.max_residual:.17g}"),
            "worst_point": [float(f"{x:.17g}") for x in self.worst_point],
            "tol": self.tol,
            "passed": self.passed,
        }


@dataclass
class BiflatReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


CURVATURE_TOL = 1e-6
ALGEBRAIC_TOL = 1e-8


def verify_biflat(
    beta: RotationField,
    H: LameField,
    sample: Sequence,
    curvature_tol: float = CURVATURE_TOL,
    algebraic_tol: float = ALGEBRAIC_TOL,
) -> BiflatReport:
    """Run every axiom check at every sample point and keep per-check maxima."""
    from .darboux_egorov import ed_residual, lame_residual

    if len(sample) == 0:
        raise ValueError("empty sample")
    nat, dual = natural_connection(beta, H), dual_connection(beta, H)
    circ, star = ProductStructure(beta.n, "circ"), ProductStructure(beta.n, "star")

    def point_checks(u):
        r1, r2, r3 = ed_residual(beta, u)
        s1, s2, s3 = lame_residual(beta, H, u)
        return {
            "curvature_natural": (np.max(np.abs(riemann_curvature(nat, u))), curvature_tol),
            "curvature_dual": (np.max(np.abs(riemann_curvature(dual, u))), curvature_tol),
            "compatibility_natural_circ": (product_compatibility_residual(nat, circ, u), algebraic_tol),
            "compatibility_dual_star": (product_compatibility_residual(dual, star, u), algebraic_tol),
            "unit_natural_e": (unit_parallel_residual(nat, "e", u), algebraic_tol),
            "unit_dual_E": (unit_parallel_residual(dual, "E", u), algebraic_tol),
            "almost_hydro_equivalence": (almost_hydro_equiv_residual(nat, dual, u), algebraic_tol),
            "ed1": (r1, algebraic_tol),
            "ed2": (r2, algebraic_tol),
            "ed3": (r3, algebraic_tol),
            "lame1": (s1, algebraic_tol),
            "lame2": (s2, algebraic_tol),
            "lame3": (s3, algebraic_tol),
        }

    worst = {}
    for u in sample:
        u = np.asarray(u, dtype=float)
        try:
            res = point_checks(check_chart(u, dual=True))
        except EvaluationFailure:
            raise
        except Exception as exc:  # keep the offending point
            raise EvaluationFailure(f"{type(exc).__name__}: {exc}", u) from exc
        for name, (value, tol) in res.items():
            value = float(value)
            if not np.isfinite(value):
                value = np.inf
            if name not in worst or value > worst[name][0]:
                worst[name] = (value, u, tol)
    report = BiflatReport()
    for name, (value, u, tol) in worst.items():
        report.checks.append(CheckResult(name, value, u.tolist(), tol, bool(value < tol)))
    return report

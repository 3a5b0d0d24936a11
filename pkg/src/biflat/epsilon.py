"""The generalized epsilon-system: closed-form fields, flat coordinates,
principal hierarchy, twisted Lenard-Magri chain, reciprocal transformations."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NormalizationPole, ZeroDenominator, ZeroEpsilon
from .geometry import (
    ChristoffelField, LameField, RotationField, check_chart, dual_connection, natural_connection,
    real_power,
)
from .numerics import DEFAULT_TOL, Tolerance, fd_jacobian, hyp2f1, hyp2f1_deriv


@dataclass(frozen=True)
class EpsilonConfig:
    eps: tuple

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        if len(self.eps) < 2:
            raise ValueError("the epsilon-system needs n >= 2")

    @property
    def n(self) -> int:
        return len(self.eps)

    @property
    def total(self) -> float:
        return float(sum(self.eps))

    @property
    def degrees(self) -> np.ndarray:
        e = np.array(self.eps)
        return e - e.sum()

    def negated(self) -> "EpsilonConfig":
        return EpsilonConfig(tuple(-e for e in self.eps))


def _prod_factor(eps, u):
    """P_i = prod_{l != i} |u^i - u^l|^{eps_l}."""
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, 1.0)
    return np.prod(real_power(diff, np.asarray(eps)[None, :]), axis=1)


def epsilon_fields(cfg: EpsilonConfig):
    e = np.array(cfg.eps)
    n = cfg.n
    d = cfg.degrees

    def beta(u):
        u = check_chart(u)
        P = _prod_factor(e, u)
        diff = u[:, None] - u[None, :]
        np.fill_diagonal(diff, 1.0)
        B = (P[None, :] / P[:, None]) * e[None, :] / diff
        np.fill_diagonal(B, 0.0)
        return B

    def H(u):
        u = check_chart(u)
        return 1.0 / _prod_factor(e, u)

    return RotationField(n, beta, d), LameField(n, H, d)


# ---------------------------------------------------------------------------
# Scalar fields with exact gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    """A function on the chart together with its gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    degree: float | None = None
    label: str = ""

    def __call__(self, u) -> float:
        return float(self.value(np.asarray(u, dtype=float)))


def from_callable(fn: Callable, degree=None, label="") -> ScalarField:
    """Wrap a plain function; the gradient falls back to finite differences."""
    return ScalarField(fn, lambda u: fd_jacobian(fn, u, order=4), degree, label)


def flat_form_residual(theta: Callable, cfg: EpsilonConfig, u) -> float:
    """max |d_j th_i - (e_j th_i - e_i th_j)/(u^i - u^j)| and |sum_k d_k th_i|."""
    u = check_chart(u)
    e = np.array(cfg.eps)
    th = np.asarray(theta(u), dtype=float)
    dth = fd_jacobian(theta, u, order=4)  # dth[i, j] = d_j th_i
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, 1.0)
    rhs = (e[None, :] * th[:, None] - e[:, None] * th[None, :]) / diff
    off = ~np.eye(cfg.n, dtype=bool)
    r_off = np.max(np.abs(dth - rhs)[off])
    r_sum = np.max(np.abs(dth.sum(axis=1)))
    return float(max(r_off, r_sum))


# ---------------------------------------------------------------------------
# Flat coordinates for n = 3
# ---------------------------------------------------------------------------
#
# With s = u2 - u1, t = u3 - u1 and x = s/t in (0, 1) on the ordered chart,
# every flat coordinate of degree k = 1 - sum(eps) is s^k F(t/s) where F
# solves a hypergeometric equation in w = t/s with parameters
# (eps3, sum(eps) - 1; eps1 + eps3).  Around w = infinity the two real
# solutions are
#     f2 = s^(k + eps3) t^(-eps3) 2F1(eps3, 1 - eps1; 2 - eps1 - eps2; x)
#     f3 = t^k 2F1(sum(eps) - 1, eps2; eps1 + eps2; x)


def _hyp_branch(A, B, a, b, c, tol):
    def value(u):
        s, t = u[1] - u[0], u[2] - u[0]
        return real_power(s, A) * real_power(t, B) * hyp2f1(a, b, c, s / t, tol)

    def grad(u):
        s, t = u[1] - u[0], u[2] - u[0]
        x = s / t
        pre = real_power(s, A) * real_power(t, B)
        F, dF = hyp2f1(a, b, c, x, tol), hyp2f1_deriv(a, b, c, x, tol)
        ds = pre * (A / s * F + dF / t)
        dt = pre * (B / t * F - dF * x / t)
        return np.array([-ds - dt, ds, dt])

    return value, grad


def _check_flat_config(cfg: EpsilonConfig):
    if cfg.n != 3:
        raise ValueError("closed-form flat coordinates are available for n = 3 only")
    if abs(cfg.total - 1.0) < 1e-12:
        raise ConfigError("flat coordinates need sum(eps) != 1")


def flat_coordinate_fields(cfg: EpsilonConfig, tol: Tolerance = DEFAULT_TOL):
    """(f1, f2, f3) as ScalarFields; f1 = sum eps_l u^l, f2, f3 of degree 1 - sum(eps)."""
    _check_flat_config(cfg)
    e1, e2, e3 = cfg.eps
    S = cfg.total
    k = 1.0 - S
    e = np.array(cfg.eps)
    f1 = ScalarField(lambda u: float(e @ u), lambda u: e.copy(), 1.0, "f1")
    v2, g2 = _hyp_branch(k + e3, -e3, e3, 1 - e1, 2 - e1 - e2, tol)
    v3, g3 = _hyp_branch(0.0, k, S - 1, e2, e1 + e2, tol)
    return (
        f1,
        ScalarField(lambda u: v2(check_chart(u)), lambda u: g2(check_chart(u)), k, "f2"),
        ScalarField(lambda u: v3(check_chart(u)), lambda u: g3(check_chart(u)), k, "f3"),
    )


def flat_coordinates_n3(cfg: EpsilonConfig, u, tol: Tolerance = DEFAULT_TOL):
    u = check_chart(u)
    return tuple(f(u) for f in flat_coordinate_fields(cfg, tol))


def euler_residuals(K: ScalarField, u):
    """(e(K), E(K) - deg K) from the gradient."""
    u = np.asarray(u, dtype=float)
    g = K.grad(u)
    deg = 0.0 if K.degree is None else K.degree
    return float(g.sum()), float(u @ g - deg * K(u))


# ---------------------------------------------------------------------------
# Principal hierarchy
# ---------------------------------------------------------------------------

def hierarchy_step(K_prev: ScalarField, cfg: EpsilonConfig, p: int, alpha: int) -> ScalarField:
    """K_(p, alpha) from K_(p, alpha - 1).

    The gradient is propagated exactly, d_i K_next = u^i d_i K_prev - eps_i K_prev,
    and the value follows from the Euler identity with degree alpha + 1
    (p = 1) or alpha + 1 + sum(eps) (p >= 2).
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    e = np.array(cfg.eps)
    denom = alpha + 1.0 if p == 1 else alpha + 1.0 + cfg.total
    if abs(denom) < 1e-12:
        raise NormalizationPole(f"resonant normalization at p = {p}, alpha = {alpha}")

    def grad(u):
        u = np.asarray(u, dtype=float)
        return u * K_prev.grad(u) - e * K_prev(u)

    def value(u):
        u = np.asarray(u, dtype=float)
        return float((u * u) @ K_prev.grad(u) - (e @ u) * K_prev(u)) / denom

    return ScalarField(value, grad, denom, f"K({p},{alpha})")


def flow_normalization(cfg: EpsilonConfig, p: int, alpha: int) -> float:
    if p == 1:
        N = 1.0
        for j in range(1, alpha + 1):
            N *= j - cfg.total
        if abs(N) < 1e-12:
            raise NormalizationPole(f"sum(eps) hits a resonance at alpha = {alpha}")
        return N
    return float(math.factorial(alpha))


def flow_field_Y(K: ScalarField, cfg: EpsilonConfig):
    e = np.array(cfg.eps)
    if np.any(e == 0):
        raise ZeroEpsilon("flow fields need every eps_i != 0")
    return lambda u: -K.grad(np.asarray(u, dtype=float)) / e


def hierarchy_flow_field(K: ScalarField, cfg: EpsilonConfig, u, p: int, alpha: int) -> np.ndarray:
    Y = flow_field_Y(K, cfg)
    return Y(u) / flow_normalization(cfg, p, alpha)


def _flow_X(K, cfg, p, alpha):
    Y = flow_field_Y(K, cfg)
    N = flow_normalization(cfg, p, alpha)
    return lambda u: Y(u) / N


def _covariant(gamma: ChristoffelField, V: Callable, u):
    """M[i, j] = d_j V^i + Gamma^i_jk V^k."""
    u = np.asarray(u, dtype=float)
    return fd_jacobian(V, u, order=4) + np.einsum("ijk,k->ij", gamma(u), V(u))


def recursion_residual(X_prev: Callable, X_next: Callable, cfg: EpsilonConfig, u) -> float:
    """max |nabla_j X_next^i - delta^i_j X_prev^i| with the natural connection."""
    gamma = natural_connection(*epsilon_fields(cfg))
    M = _covariant(gamma, X_next, u)
    target = np.zeros_like(M) if X_prev is None else np.diag(X_prev(u))
    return float(np.max(np.abs(M - target)))


def commutator_residual(X_prev: Callable, X_next: Callable, u) -> float:
    """max |[e, X_next] - X_prev| with [e, X]^i = sum_k d_k X^i."""
    u = np.asarray(u, dtype=float)
    lie = fd_jacobian(X_next, u, order=4).sum(axis=1)
    return float(np.max(np.abs(lie - X_prev(u))))


def third_connection(cfg: EpsilonConfig) -> ChristoffelField:
    """Dual connection shifted by (1 - sum(eps)) / u^i on the (i, i, i) entries."""
    dual = dual_connection(*epsilon_fields(cfg))
    shift = 1.0 - cfg.total

    def gamma(u):
        G = dual(u).copy()
        idx = np.arange(cfg.n)
        G[idx, idx, idx] += shift / u
        return G

    return ChristoffelField(cfg.n, gamma, "twisted")


def twisted_lm_residual(Y_pair, cfg: EpsilonConfig, u) -> float:
    """max |nabla1_j Y_next^i - nabla3_j (E o Y_prev)^i| with (E o Y)^i = u^i Y^i."""
    Y_prev, Y_next = Y_pair
    u = check_chart(u, dual=True)
    g1 = natural_connection(*epsilon_fields(cfg))
    lhs = _covariant(g1, Y_next, u)
    rhs = _covariant(third_connection(cfg), lambda v: np.asarray(v) * Y_prev(v), u)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class HierarchyTable:
    cfg: EpsilonConfig
    depth: int
    K: dict = field(default_factory=dict)

    def Y(self, p, alpha):
        return flow_field_Y(self.K[(p, alpha)], self.cfg)

    def X(self, p, alpha):
        return _flow_X(self.K[(p, alpha)], self.cfg, p, alpha)

    def residuals(self, u) -> dict:
        """Per (p, alpha): recursion, commutator, exactness and twisted chain residuals."""
        out = {}
        for (p, a) in sorted(self.K):
            X = self.X(p, a)
            Xp = self.X(p, a - 1) if a > 0 else None
            r = {"recursion": recursion_residual(Xp, X, self.cfg, u),
                 "exactness": exactness_residual(self.K[(p, a)], self.cfg, u)}
            if a > 0:
                r["commutator"] = commutator_residual(Xp, X, u)
                r["twisted_lm"] = twisted_lm_residual((self.Y(p, a - 1), self.Y(p, a)), self.cfg, u)
            out[(p, a)] = r
        return out

    def to_dict(self, grid) -> dict:
        num = lambda x: float(f"{x:.17g}")  # noqa: E731
        tree = {}
        for (p, a), K in sorted(self.K.items()):
            X = self.X(p, a)
            tree[f"{p},{a}"] = {
                "p": p,
                "alpha": a,
                "K": [num(K(u)) for u in grid],
                "X": [[num(x) for x in X(u)] for u in grid],
            }
        return {"schema": 1, "eps": [num(e) for e in self.cfg.eps],
                "grid": [[num(x) for x in u] for u in grid], "fields": tree}


def exactness_residual(K: ScalarField, cfg: EpsilonConfig, u) -> float:
    """max over i != j of |(u^i - u^j) d_j d_i K + eps_j d_i K - eps_i d_j K|."""
    u = check_chart(u)
    e = np.array(cfg.eps)
    g = K.grad(u)
    Hs = fd_jacobian(K.grad, u, order=4)
    diff = u[:, None] - u[None, :]
    R = diff * Hs + e[None, :] * g[:, None] - e[:, None] * g[None, :]
    off = ~np.eye(cfg.n, dtype=bool)
    return float(np.max(np.abs(R[off])))


def build_hierarchy(cfg: EpsilonConfig, depth: int = 3, ps=None, tol: Tolerance = DEFAULT_TOL) -> HierarchyTable:
    """K_(1, alpha) from f1 and, for n = 3, K_(p, alpha) from the flat
    coordinates of the system with eps -> -eps."""
    table = HierarchyTable(cfg, depth)
    e = np.array(cfg.eps)
    seeds = {1: ScalarField(lambda u: float(e @ np.asarray(u)), lambda u: e.copy(), 1.0, "K(1,0)")}
    if cfg.n == 3:
        _, g2, g3 = flat_coordinate_fields(cfg.negated(), tol)
        seeds[2], seeds[3] = g2, g3
    ps = sorted(seeds) if ps is None else ps
    for p in ps:
        K = seeds[p]
        table.K[(p, 0)] = K
        for a in range(1, depth + 1):
            K = hierarchy_step(K, cfg, p, a)
            table.K[(p, a)] = K
    return table


# ---------------------------------------------------------------------------
# Reciprocal transformations
# ---------------------------------------------------------------------------

def reciprocal_transform(beta: RotationField, H: LameField, A, k: float):
    """beta~_ij = beta_ij - (H_i/H_j) d_j ln A, H~_i = H_i / A, degrees d - k."""
    if not isinstance(A, ScalarField):
        A = from_callable(A)
    n = beta.n

    def A_checked(u):
        a = A(u)
        if a == 0 or not math.isfinite(a):
            raise ZeroDenominator(f"A vanishes at u = {np.asarray(u).tolist()}")
        return a

    def new_beta(u):
        a = A_checked(u)
        h = H(u)
        dlog = A.grad(u) / a
        B = beta(u) - (h[:, None] / h[None, :]) * dlog[None, :]
        np.fill_diagonal(B, 0.0)
        return B

    def new_H(u):
        return H(u) / A_checked(u)

    d = np.asarray(beta.degrees, dtype=float) - k
    return RotationField(n, new_beta, d), LameField(n, new_H, d)


def write_flat_coordinates_csv(path, cfg: EpsilonConfig, points):
    fields = flat_coordinate_fields(cfg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"u{i + 1}" for i in range(3)] + ["f1", "f2", "f3"])
        for u in points:
            w.writerow([f"{x:.17g}" for x in list(u) + [f(u) for f in fields]])

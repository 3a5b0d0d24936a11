"""Numerical kernels: 2F1, Dormand-Prince integration, adaptive Simpson,
polynomial roots and finite differences.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateLeadingCoefficient,
    DomainError,
    NoConvergence,
    NonFinite,
    PoleAtC,
    StepFailure,
)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_steps: int = 100_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


DEFAULT_TOL = Tolerance()


# ---------------------------------------------------------------------------
# Gauss hypergeometric function
# ---------------------------------------------------------------------------

def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and abs(x - round(x)) < 1e-14


def _rgamma(x: float) -> float:
    if _is_nonpositive_int(x):
        return 0.0
    return 1.0 / math.gamma(x)


def _series(a, b, c, x, tol: Tolerance) -> float:
    total = 1.0
    term = 1.0
    small = 0
    for k in range(tol.max_steps):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * x
        total += term
        if term == 0.0:
            return total
        if abs(term) <= tol.rel_tol * 0.1 * abs(total):
            small += 1
            # two quiet terms in a row: the tail is below tolerance
            if small >= 2:
                return total
        else:
            small = 0
    raise NoConvergence(f"2F1({a}, {b}; {c}; {x}) series did not converge in {tol.max_steps} terms")


def hyp2f1(a: float, b: float, c: float, x: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; x) for real x < 1.

    Arguments in (-inf, -1/2) are mapped by the Pfaff transformation and
    arguments in (1/2, 1) by the 1 - x connection formula, so the power
    series is only summed for |x| <= 1/2 (except when c - a - b is an
    integer, where the direct series is summed instead).
    """
    if _is_nonpositive_int(c):
        raise PoleAtC(f"c = {c} is a non-positive integer")
    if not x < 1.0:
        raise DomainError(f"2F1 requires x < 1, got {x}")
    if x == 0.0 or a == 0.0 or b == 0.0:
        return 1.0
    if x < -0.5:
        # Pfaff: (1-x)^(-a) 2F1(a, c-b; c; x/(x-1)),  x/(x-1) in (1/3, 1)
        return (1.0 - x) ** (-a) * hyp2f1(a, c - b, c, x / (x - 1.0), tol)
    if x <= 0.5:
        return _series(a, b, c, x, tol)
    s = c - a - b
    if abs(s - round(s)) < 1e-6:
        return _series(a, b, c, x, tol)
    y = 1.0 - x
    t1 = math.gamma(c) * math.gamma(s) * _rgamma(c - a) * _rgamma(c - b)
    t2 = math.gamma(c) * math.gamma(-s) * _rgamma(a) * _rgamma(b)
    out = 0.0
    if t1 != 0.0:
        out += t1 * _series(a, b, 1.0 - s, y, tol)
    if t2 != 0.0:
        out += t2 * y**s * _series(c - a, c - b, 1.0 + s, y, tol)
    return out


def hyp2f1_deriv(a: float, b: float, c: float, x: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """d/dx 2F1(a, b; c; x)."""
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b / c * hyp2f1(a + 1.0, b + 1.0, c + 1.0, x, tol)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with dense output
# ---------------------------------------------------------------------------

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# difference between the 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (Shampine 1986)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@dataclass
class Trajectory:
    """Accepted steps of an integration, with 4th-order dense output."""

    z: np.ndarray
    y: np.ndarray
    stages: list = field(default_factory=list, repr=False)
    dense: bool = True

    def __post_init__(self):
        dz = np.diff(self.z)
        if len(dz) and not (np.all(dz > 0) or np.all(dz < 0)):
            raise ValueError("trajectory nodes must be strictly monotone")
        if not np.all(np.isfinite(self.y)):
            raise NonFinite("trajectory contains non-finite values")

    @property
    def z0(self) -> float:
        return float(self.z[0])

    @property
    def z1(self) -> float:
        return float(self.z[-1])

    def __call__(self, zq):
        """Evaluate the interpolant at a scalar or an array of abscissae."""
        scalar = np.ndim(zq) == 0
        zq = np.atleast_1d(np.asarray(zq, dtype=float))
        lo, hi = sorted((self.z0, self.z1))
        span = hi - lo
        if np.any(zq < lo - 1e-12 * span) or np.any(zq > hi + 1e-12 * span):
            raise ValueError("query outside the integrated interval")
        forward = self.z1 > self.z0
        key = self.z if forward else -self.z
        q = zq if forward else -zq
        idx = np.clip(np.searchsorted(key, q, side="right") - 1, 0, len(self.z) - 2)
        out = np.empty((len(zq), self.y.shape[1]))
        for m, (k, zz) in enumerate(zip(idx, zq)):
            h = self.z[k + 1] - self.z[k]
            theta = (zz - self.z[k]) / h
            powers = theta ** np.arange(1, 5)
            out[m] = self.y[k] + h * (self.stages[k].T @ (_P @ powers))
        return out[0] if scalar else out


def _initial_step(rhs, z0, y0, f0, direction, tol):
    scale = tol.abs_tol + tol.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = np.asarray(rhs(z0 + direction * h0, y1), dtype=float)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    z0: float,
    z1: float,
    y0,
    tol: Tolerance = DEFAULT_TOL,
    first_step: float | None = None,
) -> Trajectory:
    """Integrate y' = rhs(z, y) from z0 to z1 with the Dormand-Prince 5(4) pair."""
    y = np.array(y0, dtype=float).ravel()
    z = float(z0)
    if z1 == z0:
        return Trajectory(np.array([z]), y[None, :].copy(), [])
    direction = 1.0 if z1 > z0 else -1.0
    f = np.asarray(rhs(z, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFinite(f"rhs is not finite at z = {z}")
    h = first_step or _initial_step(rhs, z, y, f, direction, tol)
    h = min(abs(h), abs(z1 - z0))

    zs, ys, stages = [z], [y.copy()], []
    K = np.empty((7, y.size))
    nonfinite = False
    for _ in range(tol.max_steps):
        if direction * (z1 - z) <= 0:
            break
        h_min = 10 * EPS * max(abs(z), 1.0)
        if h < h_min:
            if nonfinite:
                raise NonFinite(f"solution left the finite domain near z = {z}")
            raise StepFailure(f"step size underflow at z = {z}")
        hs = direction * min(h, abs(z1 - z))
        K[0] = f
        for s in range(1, 7):
            K[s] = rhs(z + _C[s] * hs, y + hs * (np.asarray(_A[s]) @ K[:s]))
        y_new = y + hs * (_B @ K)
        if not np.all(np.isfinite(K)) or not np.all(np.isfinite(y_new)):
            nonfinite = True
            h *= 0.25
            continue
        nonfinite = False
        err = hs * (_E @ K)
        scale = tol.abs_tol + tol.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = np.sqrt(np.mean((err / scale) ** 2))
        if err_norm <= 1.0:
            stages.append(K.copy())
            z = z + hs if abs(z1 - (z + hs)) > 4 * EPS * abs(z1) else float(z1)
            y = y_new
            f = K[6].copy()
            zs.append(z)
            ys.append(y.copy())
            factor = 10.0 if err_norm == 0 else min(10.0, 0.9 * err_norm ** -0.2)
        else:
            factor = max(0.2, 0.9 * err_norm ** -0.2)
        h = abs(hs) * factor
    else:
        raise StepFailure(f"exceeded {tol.max_steps} steps before reaching z = {z1}")
    return Trajectory(np.array(zs), np.array(ys), stages)


# ---------------------------------------------------------------------------
# Adaptive Simpson quadrature
# ---------------------------------------------------------------------------

MAX_DEPTH = 40


def quadrature(g: Callable[[float], float], a: float, b: float, tol: Tolerance = DEFAULT_TOL) -> float:
    """Adaptive Simpson rule with Richardson correction and depth cap 40."""
    if a == b:
        return 0.0
    fa, fm, fb = g(a), g(0.5 * (a + b)), g(b)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    eps = max(tol.abs_tol, tol.rel_tol * abs(whole))
    total = 0.0
    evals = 3
    stack = [(a, b, fa, fm, fb, whole, eps, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, e, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = g(lm), g(rm)
        evals += 2
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        delta = left + right - s
        if abs(delta) <= 15 * e:
            total += left + right + delta / 15.0
            continue
        if depth + 1 >= MAX_DEPTH or evals > tol.max_steps:
            raise NoConvergence(f"adaptive Simpson budget exhausted on [{lo}, {hi}]")
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * e, depth + 1))
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * e, depth + 1))
    if not math.isfinite(total):
        raise NoConvergence("integrand produced a non-finite value")
    return total


# ---------------------------------------------------------------------------
# Eigenvalues and polynomial roots
# ---------------------------------------------------------------------------

def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a real square matrix (LAPACK Hessenberg QR)."""
    return np.linalg.eigvals(np.asarray(M, dtype=float))


def _polish(coeffs, r):
    p = np.poly1d(coeffs)
    dp = p.deriv()
    best, best_res = r, abs(p(r))
    for _ in range(3):
        d = dp(r)
        if d == 0:
            break
        r = r - p(r) / d
        if abs(p(r)) < best_res:
            best, best_res = r, abs(p(r))
    return best


def _coeff_error(monic, roots) -> float:
    got = np.poly(roots)
    return float(np.max(np.abs(got - monic) / np.maximum(1.0, np.abs(monic))))


def quartic_roots(c4, c3, c2, c1, c0) -> np.ndarray:
    """All four complex roots of c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0."""
    if c4 == 0:
        raise DegenerateLeadingCoefficient("leading coefficient vanishes")
    monic = np.array([1.0, c3 / c4, c2 / c4, c1 / c4, c0 / c4])
    companion = np.zeros((4, 4))
    companion[0, :] = -monic[1:]
    companion[1:, :-1] = np.eye(3)
    roots = eigenvalues(companion).astype(complex)
    # Newton on a member of a root cluster breaks the cluster's symmetric
    # error, so keep the polished set only if it reproduces the coefficients better
    polished = np.array([_polish(monic, r) for r in roots])
    if _coeff_error(monic, polished) <= _coeff_error(monic, roots):
        roots = polished
    # conjugate pairs stay paired; tiny imaginary parts are rounding
    roots = np.where(np.abs(roots.imag) <= 1e-12 * (1 + np.abs(roots.real)), roots.real + 0j, roots)
    return np.array(sorted(roots, key=lambda r: (r.real, r.imag)))


def elementary_symmetric(values) -> tuple:
    """(e1, e2, e3, e4) of four numbers."""
    v = np.asarray(values)
    e1 = v.sum()
    e2 = sum(v[i] * v[j] for i in range(4) for j in range(i + 1, 4))
    e3 = sum(v[i] * v[j] * v[k] for i in range(4) for j in range(i + 1, 4) for k in range(j + 1, 4))
    e4 = np.prod(v)
    return e1, e2, e3, e4


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def default_step(x: float, order: int = 2) -> float:
    base = 1e-5 if order == 2 else 2e-4
    return max(base, base * abs(x))


def fd_partial(f: Callable, u, i: int, h: float | None = None, order: int = 2):
    """Central difference of f along coordinate i (O(h^2), or O(h^4) with order=4).

    f may return scalars or arrays.
    """
    u = np.asarray(u, dtype=float)
    h = default_step(u[i], order) if h is None else h
    e = np.zeros_like(u)
    e[i] = h
    if order == 2:
        return (np.asarray(f(u + e)) - np.asarray(f(u - e))) / (2 * h)
    if order == 4:
        return (
            -np.asarray(f(u + 2 * e)) + 8 * np.asarray(f(u + e))
            - 8 * np.asarray(f(u - e)) + np.asarray(f(u - 2 * e))
        ) / (12 * h)
    raise ValueError("order must be 2 or 4")


def fd_partial2(f: Callable, u, i: int, j: int | None = None, h: float | None = None):
    """Second partial derivative d^2 f / du^i du^j by central differences."""
    u = np.asarray(u, dtype=float)
    j = i if j is None else j
    if h is None:
        h = EPS ** 0.25 * max(1.0, abs(u[i]), abs(u[j]))
    ei = np.zeros_like(u)
    ei[i] = h
    if i == j:
        return (np.asarray(f(u + ei)) - 2 * np.asarray(f(u)) + np.asarray(f(u - ei))) / h**2
    ej = np.zeros_like(u)
    ej[j] = h
    return (
        np.asarray(f(u + ei + ej)) - np.asarray(f(u + ei - ej))
        - np.asarray(f(u - ei + ej)) + np.asarray(f(u - ei - ej))
    ) / (4 * h**2)


def fd_jacobian(f: Callable, u, order: int = 2) -> np.ndarray:
    """Stack of partials: result[..., k] = d f / du^k."""
    u = np.asarray(u, dtype=float)
    return np.stack([fd_partial(f, u, k, order=order) for k in range(len(u))], axis=-1)

"""Three-dimensional reduction: the F-system, its first integrals and the
correspondence with the sigma form of Painleve VI.

The six functions are always ordered ``(F12, F21, F13, F31, F23, F32)`` and
degree differences are ``dij = di - dj``.

Coefficient provenance.  The quadratic equation for f and the shifted
equation for phi = f - a z - b were checked against an exact expansion of
``[z(z-1)f'']^2 = 4 f' g1 g2 + (D - d23 g1 - d13 g2)^2`` (see
``tests/test_symbolic_gate.py``).  Two coefficients of the quartic whose
roots are the v_k^2 differ from the commonly quoted form:

* lambda^3:  ``2R^2 + d13^2 + d21 d23``  (not ``2R^2 + d13^2 - d21 d13``)
* lambda^1:  the ``R^4/4 (d21^2 + (d13 + d23)^2)`` term enters with ``+``.

``quartic_coefficients(..., source="displayed")`` keeps the quoted form for
comparison; everything else uses ``source="derived"``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BranchFailure, InconsistentIntegrals, InconsistentSystem, SingularZ
from .numerics import Tolerance, elementary_symmetric, integrate_ode, quadrature, quartic_roots

NAMES = ("F12", "F21", "F13", "F31", "F23", "F32")


def _check_z(z):
    if z == 0 or z == 1:
        raise SingularZ(f"z = {z} is a fixed singularity")


@dataclass(frozen=True)
class FSystemState:
    z: float
    F: np.ndarray
    degrees: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float).reshape(6)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "degrees", tuple(float(d) for d in self.degrees))
        if not np.all(np.isfinite(F)):
            raise ValueError("non-finite F values")

    def __getattr__(self, name):
        if name in NAMES:
            return float(self.F[NAMES.index(name)])
        raise AttributeError(name)

    @property
    def d13(self):
        return self.degrees[0] - self.degrees[2]

    @property
    def d23(self):
        return self.degrees[1] - self.degrees[2]

    @property
    def d21(self):
        return self.degrees[1] - self.degrees[0]


def _rhs(z, F, d):
    F12, F21, F13, F31, F23, F32 = F
    d1, d2, d3 = d
    zz = z * (z - 1)
    return np.array([
        F13 * F32 / zz,
        F23 * F31 / zz,
        -F12 * F23 / (z - 1) + (d1 - d3) * F13 / z,
        -F32 * F21 / (z - 1) + (d3 - d1) * F31 / z,
        F21 * F13 / z + (d2 - d3) * F23 / (z - 1),
        F31 * F12 / z + (d3 - d2) * F32 / (z - 1),
    ])


def f_system_rhs(state: FSystemState) -> np.ndarray:
    _check_z(state.z)
    return _rhs(state.z, state.F, state.degrees)


def conserved_quantities(state: FSystemState):
    """(R2, D) with R2 = -(F12 F21 + F13 F31 + F23 F32)."""
    F12, F21, F13, F31, F23, F32 = state.F
    R2 = -(F12 * F21 + F13 * F31 + F23 * F32)
    D = F23 * F31 * F12 - F13 * F32 * F21 + state.d23 * F13 * F31 + state.d13 * F23 * F32
    return float(R2), float(D)


def epsilon_to_fstate(eps, z: float) -> FSystemState:
    """F_ij of the epsilon-system read off on the chart u = (0, 1, z)."""
    from .epsilon import EpsilonConfig, epsilon_fields

    _check_z(z)
    cfg = EpsilonConfig(tuple(eps))
    if cfg.n != 3:
        raise ValueError("the F-system needs three epsilons")
    beta, _ = epsilon_fields(cfg)
    B = beta(np.array([0.0, 1.0, z]))
    F = [B[0, 1], B[1, 0], z * B[0, 2], z * B[2, 0], (z - 1) * B[1, 2], (z - 1) * B[2, 1]]
    return FSystemState(z, np.array(F), tuple(cfg.degrees))


@dataclass
class FTrajectory:
    """Integrated F-system with dense output."""

    traj: object
    degrees: tuple

    @property
    def z(self):
        return self.traj.z

    def state(self, z) -> FSystemState:
        return FSystemState(float(z), self.traj(z), self.degrees)

    def states(self):
        return [FSystemState(float(z), y, self.degrees) for z, y in zip(self.traj.z, self.traj.y)]

    def conserved_drift(self):
        """Max deviation of (R2, D) from their initial values over the nodes."""
        vals = np.array([conserved_quantities(s) for s in self.states()])
        return tuple(float(x) for x in np.max(np.abs(vals - vals[0]), axis=0))


FSYSTEM_TOL = Tolerance(abs_tol=1e-13, rel_tol=1e-13, max_steps=200_000)


def integrate_fsystem(state0: FSystemState, z1: float, tol: Tolerance = FSYSTEM_TOL) -> FTrajectory:
    lo, hi = sorted((state0.z, z1))
    if lo <= 0 <= hi or lo <= 1 <= hi:
        raise SingularZ(f"interval [{lo}, {hi}] contains a fixed singularity")
    d = state0.degrees
    traj = integrate_ode(lambda z, y: _rhs(z, y, d), state0.z, z1, state0.F, tol)
    return FTrajectory(traj, d)


# ---------------------------------------------------------------------------
# Sigma-form side
# ---------------------------------------------------------------------------

@dataclass
class SigmaSolution:
    """f(z) -> (f, f', f'') together with the constants (R2, D, d13, d23)."""

    f: Callable[[float], tuple]
    R2: float
    D: float
    d13: float
    d23: float
    shift: tuple = (0.0, 0.0)
    anchor_offset: float | None = None

    @property
    def d21(self):
        return self.d23 - self.d13

    def __call__(self, z):
        return self.f(z)

    def g1(self, z):
        f, fp, _ = self.f(z)
        return f - z * fp - self.R2 / 2

    def g2(self, z):
        f, fp, _ = self.f(z)
        return -f + (z - 1) * fp - self.R2 / 2

    def varphi(self, z):
        return self.D - self.d23 * self.g1(z) - self.d13 * self.g2(z)


def f_from_state(ftraj: FTrajectory, f_anchor: float | None = None, z_anchor: float | None = None,
                 tol: float = 1e-8) -> SigmaSolution:
    """Build f with f' = F12 F21 and the constant fixed by F13 F31 = f - z f' - R2/2.

    f'' is taken from the F-system itself, z(z-1) f'' = F21 F13 F32 + F12 F31 F23.
    """
    states = ftraj.states()
    s0 = states[0]
    R2, D = conserved_quantities(s0)
    drift = ftraj.conserved_drift()
    scale = 1.0 + abs(R2) + abs(D)
    if max(drift) > tol * scale:
        raise InconsistentIntegrals(f"first integrals drift by {drift}")

    def f(z):
        F12, F21, F13, F31, F23, F32 = ftraj.traj(z)
        fp = F12 * F21
        fv = F13 * F31 + z * fp + R2 / 2
        fpp = (F21 * F13 * F32 + F12 * F31 * F23) / (z * (z - 1))
        return fv, fp, fpp

    sol = SigmaSolution(f, R2, D, s0.d13, s0.d23)
    for s in states:
        fv, fp, _ = f(s.z)
        g2_gap = s.F23 * s.F32 - ((s.z - 1) * fp - fv - R2 / 2)
        if abs(g2_gap) > tol * scale:
            raise InconsistentIntegrals(f"g2 identity fails by {g2_gap} at z = {s.z}")
    if f_anchor is not None:
        sol.anchor_offset = float(f(z_anchor)[0] - f_anchor)
    return sol


def painleve_vi2_lhs(f, fp, fpp, z, R2, D, d13, d21, d23):
    """Left side of the second-order equation for f (pure arithmetic)."""
    w = z * fp - f
    R4 = R2 * R2
    return (
        z**2 * (z - 1) ** 2 * fpp**2
        + 4 * (fp * w**2 - fp**2 * w)
        - (2 * R2 + d13**2) * fp**2
        - d21**2 * w**2
        - 2 * d21 * d13 * fp * w
        - ((d13 + d23) * R2 + 2 * D) * d21 * w
        - (((d13 + d23) * R2 + 2 * D) * d13 + R4) * fp
        - (D + (d13 + d23) * R2 / 2) ** 2
    )


def factorization_residual(sol: SigmaSolution, z: float) -> float:
    """(z(z-1)f'')^2 - varphi^2 - 4 f' g1 g2."""
    _, fp, fpp = sol(z)
    phi = sol.varphi(z)
    return float((z * (z - 1) * fpp) ** 2 - phi**2 - 4 * fp * sol.g1(z) * sol.g2(z))


def quartic_coefficients(R2, D, d13, d21, d23, source: str = "derived"):
    """(e1, e2, e3, vprod): the quartic is l^4 - e1 l^3 + e2 l^2 - e3 l + vprod^2.

    vprod is the bracket whose square is the constant term and is used as
    v1 v2 v3 v4 in the sigma form.  Works with plain numbers or sympy symbols.
    """
    R4 = R2 * R2
    s = d13 + d23
    e2 = (
        R4 + D * (2 * d13 + d21)
        + (d13 * d21 / 2 + d23 * d21 / 2 + d21**2 + d13**2 + d23 * d13) * R2
        - d21**2 * d23**2 / 4 + d21**4 / 8 + d21**3 * d13 / 4
        + d21**2 * d13 * d23 / 2 + d21**3 * d23 / 2 + d21**2 * d13**2 / 2
    )
    vprod = D / 2 * d21 + R2 / 4 * (d13 * d21 + d23 * d21) + d21**4 / 16 + d21**3 * d13 / 8
    rest = (
        D * R2 * s + D / 2 * d21**2 * s
        + R2 / 8 * d21**2 * (d21**2 + 4 * d13 * d23 + 2 * d13**2 + 2 * d23**2)
        + d21**4 / 16 * (d23 * d21 + d13**2 + 2 * d13 * d23)
    )
    if source == "derived":
        e1 = 2 * R2 + d13**2 + d21 * d23
        e3 = D**2 + R4 / 4 * (d21**2 + s**2) + rest
    elif source == "displayed":
        e1 = 2 * R2 + d13**2 - d21 * d13
        e3 = D**2 - R4 / 4 * (d21**2 + s**2) + rest
    else:
        raise ValueError("source must be 'derived' or 'displayed'")
    return e1, e2, e3, vprod


@dataclass
class SigmaParameters:
    R2: float
    D: float
    d13: float
    d21: float
    d23: float
    coefficients: tuple = ()
    v2: np.ndarray = field(default_factory=lambda: np.zeros(4, complex))
    vprod: float = 0.0
    source: str = "derived"

    def vieta_residuals(self):
        """|e_k(v^2) - expected e_k| for k = 1..4, relative to max(1, |expected|)."""
        e1, e2, e3, vprod = self.coefficients
        got = elementary_symmetric(self.v2)
        want = (e1, e2, e3, vprod**2)
        return tuple(float(abs(g - w) / max(1.0, abs(w))) for g, w in zip(got, want))

    def to_dict(self):
        def num(x):
            return float(f"{x:.17g}")

        return {
            "schema": 1,
            "R2": num(self.R2),
            "D": num(self.D),
            "d13": num(self.d13),
            "d21": num(self.d21),
            "d23": num(self.d23),
            "coefficient_source": self.source,
            "e1": num(self.coefficients[0]),
            "e2": num(self.coefficients[1]),
            "e3": num(self.coefficients[2]),
            "v1v2v3v4": num(self.vprod),
            "v2": [[num(v.real), num(v.imag)] for v in self.v2],
            "vieta_residuals": [num(r) for r in self.vieta_residuals()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def painleve_parameters(R2, D, d13, d21, d23, source: str = "derived") -> SigmaParameters:
    if abs(d21 - (d23 - d13)) > 1e-12 * (1 + abs(d21) + abs(d23) + abs(d13)):
        raise ValueError("degree differences must satisfy d21 = d23 - d13")
    e1, e2, e3, vprod = quartic_coefficients(R2, D, d13, d21, d23, source)
    roots = quartic_roots(1.0, -e1, e2, -e3, vprod**2)
    return SigmaParameters(R2, D, d13, d21, d23, (e1, e2, e3, vprod), roots, vprod, source)


def parameters_of(sol: SigmaSolution, source: str = "derived") -> SigmaParameters:
    return painleve_parameters(sol.R2, sol.D, sol.d13, sol.d21, sol.d23, source)


def sigma_residual(sol: SigmaSolution, params: SigmaParameters, z: float) -> float:
    _check_z(z)
    f, fp, fpp = sol(z)
    return float(painleve_vi2_lhs(f, fp, fpp, z, params.R2, params.D, params.d13, params.d21, params.d23))


def shift_to_sigma(sol: SigmaSolution, d21: float, d23: float) -> SigmaSolution:
    """phi(z) = f(z) - a z - b with a = d21^2/4, b = -d21 d23/4."""
    a, b = d21**2 / 4, -d21 * d23 / 4

    def phi(z):
        f, fp, fpp = sol(z)
        return f - a * z - b, fp - a, fpp

    return SigmaSolution(phi, sol.R2, sol.D, sol.d13, sol.d23, shift=(a, b))


def sigma_form_lhs(s, sp, spp, z, e1, e2, e3, vprod):
    """Left side of the sigma form with symmetric functions of the v_k^2."""
    w = z * sp - s
    return (
        z**2 * (z - 1) ** 2 * spp**2
        + 4 * (sp * w**2 - sp**2 * w)
        - 4 * vprod * w
        - sp**2 * e1
        - sp * (e2 - 2 * vprod)
        - e3
    )


def canonical_sigma_residual(sol: SigmaSolution, v2, z: float, vprod: float | None = None) -> float:
    """Sigma form residual; e1, e2, e3 are taken from the four values v2.

    ``v2`` may be a SigmaParameters, in which case v1 v2 v3 v4 is its signed
    bracket.  Otherwise ``vprod`` must be given (the sign is not recoverable
    from the v_k^2 alone).
    """
    _check_z(z)
    if isinstance(v2, SigmaParameters):
        v2, vprod = v2.v2, v2.vprod if vprod is None else vprod
    if vprod is None:
        raise ValueError("vprod is required when v2 is a plain sequence")
    e1, e2, e3, _ = elementary_symmetric(np.asarray(v2, dtype=complex))
    s, sp, spp = sol(z)
    val = sigma_form_lhs(s, sp, spp, z, e1, e2, e3, vprod)
    return float(abs(val)) if abs(val.imag) > 1e-9 * (1 + abs(val)) else float(val.real)


# ---------------------------------------------------------------------------
# Inverse direction
# ---------------------------------------------------------------------------

QUAD_TOL = Tolerance(abs_tol=1e-11, rel_tol=1e-11, max_steps=2_000_000)


@dataclass
class CijSolution:
    """Integration constants with the sign pattern of the square roots."""

    C: np.ndarray
    signs: np.ndarray
    residual: float
    rank: int


def _sign(x, what):
    if x == 0 or not math.isfinite(x):
        raise BranchFailure(f"{what} vanishes")
    return 1.0 if x > 0 else -1.0


# coefficient rows over (C12, C21, C13, C31, C23, C32); flag: which of P+ / P-
_CIJ_ROWS = [
    ([-1, 0, 1, 0, 0, 1], "-"),
    ([0, -1, 0, 1, 1, 0], "+"),
    ([1, 0, -1, 0, 1, 0], "+"),
    ([0, 1, 0, -1, 0, 1], "-"),
    ([0, 1, 1, 0, -1, 0], "-"),
    ([1, 0, 0, 1, 0, -1], "+"),
]
# F12 F21 = f', F13 F31 = g1, F23 F32 = g2 force C_ij + C_ji = 0
_PRODUCT_ROWS = [[1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1]]


def solve_Cij(sol: SigmaSolution, z0: float, tol: float = 1e-10) -> CijSolution:
    """Minimum-norm constants of the linear system, plus the sign pattern.

    Square roots and logarithms are taken of absolute values; the signs of
    f', g1, g2 and z(z-1)f'' -/+ varphi fix the signs of the six functions up to
    the gauge F_ij -> s_i s_j F_ij.
    """
    _check_z(z0)
    _, fp, fpp = sol(z0)
    g1, g2, phi = sol.g1(z0), sol.g2(z0), sol.varphi(z0)
    zz = z0 * (z0 - 1)
    p_plus, p_minus = (zz * fpp + phi) / 2, (zz * fpp - phi) / 2
    s_fp, s_g1, s_g2 = _sign(fp, "f'"), _sign(g1, "g1"), _sign(g2, "g2")
    s_plus = _sign(p_plus, "z(z-1)f'' + varphi")
    s_minus = _sign(p_minus, "z(z-1)f'' - varphi")
    signs = np.ones(6)
    signs[1] = s_fp            # F21
    signs[3] = s_g1            # F31
    signs[5] = s_minus * signs[1] * signs[2]   # F21 F13 F32 has the sign of P-
    signs[4] = s_g2 * signs[5]                 # F23
    if signs[0] * signs[3] * signs[4] != s_plus:
        raise InconsistentSystem("sign pattern of f', g1, g2 and z(z-1)f'' +/- varphi is inconsistent")
    base = math.log(2.0) + 0.5 * math.log(abs(fp * g1 * g2))
    L = {"+": math.log(2 * abs(p_plus)) - base, "-": math.log(2 * abs(p_minus)) - base}
    A = np.array([r for r, _ in _CIJ_ROWS] + _PRODUCT_ROWS, dtype=float)
    rhs = np.array([L[k] for _, k in _CIJ_ROWS] + [0.0, 0.0, 0.0])
    C, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    residual = float(np.max(np.abs(A @ C - rhs)))
    rank = int(np.linalg.matrix_rank(A))
    if residual > tol:
        raise InconsistentSystem(f"linear system for C_ij is inconsistent (residual {residual:.3e})")
    return CijSolution(C, signs, residual, rank)


def _integrands(sol: SigmaSolution):
    def i12(t):
        _, fp, _ = sol(t)
        return sol.varphi(t) / (2 * t * (t - 1) * fp)

    def i13(t):
        return sol.varphi(t) / (2 * (t - 1) * sol.g1(t)) - sol.d13 / t

    def i23(t):
        return sol.varphi(t) / (2 * t * sol.g2(t)) - sol.d23 / (t - 1)

    return i12, i13, i23


def _check_branch(sol: SigmaSolution, z0: float, z: float, samples: int = 33):
    ts = np.linspace(z0, z, samples)
    for name, fn in (("f'", lambda t: sol(t)[1]), ("g1", sol.g1), ("g2", sol.g2)):
        vals = np.array([fn(t) for t in ts])
        if np.any(vals == 0) or (np.any(vals > 0) and np.any(vals < 0)):
            raise BranchFailure(f"{name} changes sign on [{z0}, {z}]")


def _assemble(sol, z, I, C, signs, degrees):
    _, fp, _ = sol(z)
    g1, g2 = sol.g1(z), sol.g2(z)
    I12, I13, I23 = I
    r = np.sqrt(np.abs([fp, fp, g1, g1, g2, g2]))
    expo = np.array([-I12, I12, -I13, I13, -I23, I23]) + C
    return FSystemState(z, signs * r * np.exp(expo), degrees)


def reconstruct_F(sol: SigmaSolution, z0: float, z: float, C, degrees=None,
                  tol: Tolerance = QUAD_TOL) -> FSystemState:
    """Evaluate the six quadrature formulas at z.

    ``C`` is a CijSolution (constants and signs) or six constants with
    positive roots.  ``degrees`` only labels the returned state; by default
    (d13, 0, 0)-style degrees with the right differences are used.
    """
    _check_z(z0)
    _check_z(z)
    lo, hi = sorted((z0, z))
    if lo < 0 < hi or lo < 1 < hi:
        raise SingularZ("path crosses a fixed singularity")
    if isinstance(C, CijSolution):
        consts, signs = C.C, C.signs
    else:
        consts, signs = np.asarray(C, dtype=float), np.ones(6)
    _check_branch(sol, z0, z)
    I = tuple(quadrature(g, z0, z, tol) for g in _integrands(sol))
    if degrees is None:
        degrees = (sol.d13, sol.d23, 0.0)
    return _assemble(sol, z, I, consts, signs, degrees)


def reconstruct_path(sol: SigmaSolution, z0: float, zs, C, degrees=None,
                     tol: Tolerance = QUAD_TOL) -> list:
    """reconstruct_F on an increasing or decreasing grid, integrating piecewise."""
    if isinstance(C, CijSolution):
        consts, signs = C.C, C.signs
    else:
        consts, signs = np.asarray(C, dtype=float), np.ones(6)
    if degrees is None:
        degrees = (sol.d13, sol.d23, 0.0)
    zs = list(zs)
    _check_branch(sol, min([z0] + zs), max([z0] + zs))
    fns = _integrands(sol)
    out, I, prev = [], np.zeros(3), z0
    for z in zs:
        _check_z(z)
        I = I + np.array([quadrature(g, prev, z, tol) for g in fns])
        prev = z
        out.append(_assemble(sol, z, tuple(I), consts, signs, degrees))
    return out


def gauge_align(states, reference: FSystemState):
    """Apply F_ij -> (l_i / l_j) F_ij so that F12 and F13 of the first state
    match ``reference``; the remaining four entries are then predictions."""
    first = states[0]
    l2 = first.F12 / reference.F12
    l3 = first.F13 / reference.F13
    lam = np.array([1.0, l2, l3])
    pairs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]
    factor = np.array([lam[i] / lam[j] for i, j in pairs])
    return [FSystemState(s.z, s.F * factor, reference.degrees) for s in states]


def polynomial_f(coeffs, R2=0.0, D=0.0, d13=0.0, d23=0.0) -> SigmaSolution:
    """SigmaSolution for a polynomial f (coefficients lowest degree first)."""
    p = np.polynomial.Polynomial(coeffs)
    dp, ddp = p.deriv(), p.deriv(2)
    return SigmaSolution(lambda z: (float(p(z)), float(dp(z)), float(ddp(z))), R2, D, d13, d23)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("z",) + NAMES + ("R2", "D", "f", "fp", "fpp", "sigma_residual")


def trajectory_rows(ftraj: FTrajectory, sol: SigmaSolution, params: SigmaParameters, zs):
    rows = []
    for z in zs:
        s = ftraj.state(z)
        R2, D = conserved_quantities(s)
        f, fp, fpp = sol(z)
        rows.append([z, *s.F, R2, D, f, fp, fpp, sigma_residual(sol, params, z)])
    return rows


def write_trajectory_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=",", lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([f"{float(x):.17g}" for x in r])

import csv
import json

import numpy as np
import pytest

from biflat.errors import BranchFailure, InconsistentIntegrals, InconsistentSystem, SingularZ
from biflat.numerics import Trajectory
from biflat.painleve3 import (
    CSV_COLUMNS, FSystemState, FTrajectory, SigmaSolution, canonical_sigma_residual,
    conserved_quantities, epsilon_to_fstate, f_from_state, f_system_rhs, factorization_residual,
    gauge_align, integrate_fsystem, painleve_parameters, parameters_of, polynomial_f,
    reconstruct_F, reconstruct_path, shift_to_sigma, sigma_residual, solve_Cij, trajectory_rows,
    write_trajectory_csv,
)

from conftest import EPS_FIXTURE

ZS = np.linspace(2.0, 5.0, 50)


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.abs(b)))


def test_rhs_trivial_cases():
    assert np.all(f_system_rhs(FSystemState(2.0, np.zeros(6))) == 0)
    F = np.arange(1.0, 7.0)
    plain = f_system_rhs(FSystemState(3.0, F, (0.4, 0.4, 0.4)))
    F12, F21, F13, F31, F23, F32 = F
    assert plain[2] == pytest.approx(-F12 * F23 / 2)
    assert plain[4] == pytest.approx(F21 * F13 / 3)
    with pytest.raises(SingularZ):
        f_system_rhs(FSystemState(1.0, F))


@pytest.mark.parametrize("z", [2.0, 3.0, 5.0])
def test_rhs_matches_closed_form_derivative(z):
    h = 1e-4
    dF = (epsilon_to_fstate(EPS_FIXTURE, z + h).F - epsilon_to_fstate(EPS_FIXTURE, z - h).F) / (2 * h)
    assert np.max(np.abs(dF - f_system_rhs(epsilon_to_fstate(EPS_FIXTURE, z)))) < 1e-7


def test_epsilon_state_products():
    e1, e2, e3 = EPS_FIXTURE
    s = epsilon_to_fstate(EPS_FIXTURE, 3.7)
    assert s.F12 * s.F21 == pytest.approx(-e1 * e2)
    assert s.F13 * s.F31 == pytest.approx(-e1 * e3)
    assert s.F23 * s.F32 == pytest.approx(-e2 * e3)
    R2, _ = conserved_quantities(s)
    assert R2 == pytest.approx(e1 * e2 + e1 * e3 + e2 * e3, abs=1e-15)
    assert np.all(epsilon_to_fstate((0, 0, 0), 2.0).F == 0)
    assert conserved_quantities(FSystemState(2.0, np.zeros(6))) == (0.0, 0.0)
    with pytest.raises(SingularZ):
        epsilon_to_fstate(EPS_FIXTURE, 0.0)


def test_conservation_and_oracle(eps_trajectory):
    assert max(eps_trajectory.conserved_drift()) < 1e-8
    for z in np.linspace(2, 5, 13):
        assert rel_err(eps_trajectory.state(z).F, epsilon_to_fstate(EPS_FIXTURE, z).F) < 1e-6


def test_conservation_wide_interval():
    s0 = FSystemState(2.0, epsilon_to_fstate(EPS_FIXTURE, 2.0).F + 0.05, (-0.7, -0.2, -0.1))
    for z1 in (10.0, 1.5):
        assert max(integrate_fsystem(s0, z1).conserved_drift()) < 1e-8


def test_integration_refuses_singular_interval():
    with pytest.raises(SingularZ):
        integrate_fsystem(epsilon_to_fstate(EPS_FIXTURE, 2.0), 0.5)


def test_f_from_state(eps_trajectory):
    sol = f_from_state(eps_trajectory, f_anchor=0.19, z_anchor=2.0)
    s = eps_trajectory.state(3.0)
    f, fp, _ = sol(3.0)
    assert fp == pytest.approx(s.F12 * s.F21)
    assert sol.g1(3.0) == pytest.approx(s.F13 * s.F31)
    assert sol.g2(3.0) == pytest.approx(s.F23 * s.F32)
    assert abs(sol.anchor_offset) < 1e-12
    # the epsilon-system f is linear
    assert f == pytest.approx(0.19 + 0.06 * (3.0 - 2.0), rel=1e-10)


def test_f_from_zero_state():
    sol = f_from_state(integrate_fsystem(FSystemState(2.0, np.zeros(6)), 3.0))
    assert sol(2.5) == (0.0, 0.0, 0.0)


def test_inconsistent_integrals_detected(eps_trajectory):
    t = eps_trajectory.traj
    y = t.y.copy()
    y[-1, 0] *= 1.01
    bad = FTrajectory(Trajectory(t.z, y, t.stages, t.dense), eps_trajectory.degrees)
    with pytest.raises(InconsistentIntegrals):
        f_from_state(bad)


def test_sigma_residual_and_factorization(generic_trajectory):
    sol = f_from_state(integrate_fsystem(epsilon_to_fstate(EPS_FIXTURE, 1.5), 5.0))
    P = parameters_of(sol)
    assert max(abs(sigma_residual(sol, P, z)) for z in np.linspace(1.5, 5, 20)) < 1e-8
    gen = f_from_state(generic_trajectory)
    Pg = parameters_of(gen)
    assert max(abs(sigma_residual(gen, Pg, z)) for z in ZS) < 1e-6
    assert max(abs(factorization_residual(gen, z)) for z in ZS) < 1e-6
    zero = polynomial_f([0.0])
    assert sigma_residual(zero, painleve_parameters(0, 0, 0, 0, 0), 2.0) == 0.0
    with pytest.raises(SingularZ):
        sigma_residual(gen, Pg, 1.0)


def test_shift():
    sol = polynomial_f([0.3, 0.2, 0.1])
    phi = shift_to_sigma(sol, 2.0, 1.0)
    assert phi.shift == (1.0, -0.5)
    assert phi(2.0)[0] == pytest.approx(sol(2.0)[0] - 2.0 + 0.5)
    same = shift_to_sigma(sol, 0.0, 0.0)
    assert same(3.0) == sol(3.0)


def test_parameters_frozen_for_fixture(eps_trajectory):
    P = parameters_of(f_from_state(eps_trajectory))
    assert np.allclose(np.sort(P.v2.real), [0.05**2, 0.05**2, 0.25**2, 0.45**2], atol=1e-6)
    assert max(P.vieta_residuals()) < 1e-9
    assert P.coefficients == pytest.approx((0.27, 0.0139875, 6.49375e-05, 2.8125e-04), rel=1e-9)


def test_parameters_without_degrees():
    R2, D = 0.7, 0.3
    P = painleve_parameters(R2, D, 0.0, 0.0, 0.0)
    assert P.coefficients == pytest.approx((2 * R2, R2**2, D**2, 0.0))
    roots = np.sort_complex(P.v2)
    cubic = np.sort_complex(np.roots([1, -2 * R2, R2**2, -D**2]))
    assert abs(roots[0]) < 1e-12
    assert np.allclose(np.sort_complex(roots[1:]), cubic, atol=1e-10)
    assert np.all(painleve_parameters(0, 0, 0, 0, 0).v2 == 0)
    with pytest.raises(ValueError):
        painleve_parameters(R2, D, 0.1, 0.1, 0.1)  # d21 != d23 - d13
    with pytest.raises(ValueError):
        painleve_parameters(R2, D, 0, 0, 0, source="other")


@pytest.mark.parametrize("eps", [(0.1, 0.2, 0.3), EPS_FIXTURE])
def test_canonical_sigma_residual(eps):
    tr = integrate_fsystem(epsilon_to_fstate(eps, 2.0), 5.0)
    sol = f_from_state(tr)
    P = parameters_of(sol)
    phi = shift_to_sigma(sol, P.d21, P.d23)
    assert max(abs(canonical_sigma_residual(phi, P, z)) for z in ZS) < 1e-6
    assert max(abs(canonical_sigma_residual(phi, P.v2, z, P.vprod)) for z in ZS) < 1e-6


def test_displayed_coefficients_fail_on_generic_data(generic_trajectory):
    sol = f_from_state(generic_trajectory)
    P = parameters_of(sol, source="displayed")
    phi = shift_to_sigma(sol, P.d21, P.d23)
    assert max(abs(canonical_sigma_residual(phi, P, z)) for z in ZS) > 1e-6


def test_canonical_trivial():
    assert canonical_sigma_residual(polynomial_f([0.0]), np.zeros(4), 2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        canonical_sigma_residual(polynomial_f([0.0]), np.zeros(4), 2.0)


@pytest.mark.parametrize("which", ["eps", "generic"])
def test_round_trip(which, eps_trajectory, generic_trajectory):
    traj = eps_trajectory if which == "eps" else generic_trajectory
    sol = f_from_state(traj)
    C = solve_Cij(sol, 2.0)
    assert C.residual < 1e-10 and C.rank == 4
    rec = reconstruct_path(sol, 2.0, list(np.linspace(2, 4, 9)), C)
    for r, a in zip(rec, gauge_align(rec, traj.state(2.0))):
        ref = traj.state(r.z)
        assert rel_err(a.F, ref.F) < 1e-5
        # products are gauge invariant and need no alignment
        assert r.F12 * r.F21 == pytest.approx(ref.F12 * ref.F21, rel=1e-9)
        assert r.F23 * r.F32 == pytest.approx(ref.F23 * ref.F32, rel=1e-9)


def test_round_trip_without_degrees():
    traj = integrate_fsystem(epsilon_to_fstate((0.2, 0.2, 0.2), 2.0), 4.0)
    sol = f_from_state(traj)
    assert sol.d13 == 0 and sol.d23 == 0
    assert sol.varphi(3.0) == sol.D
    C = solve_Cij(sol, 2.0)
    rec = [reconstruct_F(sol, 2.0, 2.0, C)] + reconstruct_path(sol, 2.0, [3.0, 4.0], C)
    for a in gauge_align(rec, traj.state(2.0)):
        assert rel_err(a.F, traj.state(a.z).F) < 1e-5


def test_gauge_shift_leaves_products(eps_trajectory):
    sol = f_from_state(eps_trajectory)
    C = solve_Cij(sol, 2.0)
    gamma = np.array([1.0, 0.0, 0.0])
    pairs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]
    shifted = C.C + np.array([gamma[i] - gamma[j] for i, j in pairs])
    a = reconstruct_F(sol, 2.0, 3.0, C)
    b = reconstruct_F(sol, 2.0, 3.0, type(C)(shifted, C.signs, C.residual, C.rank))
    for i, j in ((0, 1), (2, 3), (4, 5)):
        assert a.F[i] * a.F[j] == pytest.approx(b.F[i] * b.F[j], rel=1e-13)
    assert a.F12 * a.F23 * a.F31 == pytest.approx(b.F12 * b.F23 * b.F31, rel=1e-13)


def test_non_solutions_are_rejected(eps_trajectory):
    sol = f_from_state(eps_trajectory)
    with pytest.raises(InconsistentSystem):
        solve_Cij(polynomial_f([0, 0, 0, 1], sol.R2, sol.D, sol.d13, sol.d23), 2.0)
    bent = SigmaSolution(
        lambda z: (sol(z)[0] + 1e-3 * z * z, sol(z)[1] + 2e-3 * z, sol(z)[2] + 2e-3),
        sol.R2, sol.D, sol.d13, sol.d23,
    )
    with pytest.raises(InconsistentSystem, match="residual"):
        solve_Cij(bent, 2.0)


def test_branch_failure():
    sol = polynomial_f([0.0, -3.0, 0.5])  # f' = z - 3 changes sign on [2, 4]
    with pytest.raises(BranchFailure):
        reconstruct_F(sol, 2.0, 4.0, np.zeros(6))
    with pytest.raises(BranchFailure):
        solve_Cij(sol, 3.0)


def test_exports(tmp_path, eps_trajectory):
    sol = f_from_state(eps_trajectory)
    P = parameters_of(sol)
    rows = trajectory_rows(eps_trajectory, sol, P, [2.0, 3.0])
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, rows)
    text = path.read_bytes()
    assert b"\r" not in text
    got = list(csv.reader(path.open()))
    assert tuple(got[0]) == CSV_COLUMNS
    assert float(got[2][0]) == 3.0
    d = json.loads(P.to_json())
    assert d["coefficient_source"] == "derived" and len(d["v2"]) == 4


def test_second_derivative_matches_fd_of_first(generic_trajectory):
    sol = f_from_state(generic_trajectory)
    h = 1e-4
    for z in (2.3, 3.1, 4.6):
        fd = (sol(z + h)[1] - sol(z - h)[1]) / (2 * h)
        assert sol(z)[2] == pytest.approx(fd, rel=1e-6, abs=1e-9)
        fd0 = (sol(z + h)[0] - sol(z - h)[0]) / (2 * h)
        assert sol(z)[1] == pytest.approx(fd0, rel=1e-6, abs=1e-9)

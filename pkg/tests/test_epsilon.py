import csv
import json

import numpy as np
import pytest

from biflat.darboux_egorov import ed_residual, lame_residual
from biflat.epsilon import (
    EpsilonConfig, ScalarField, build_hierarchy, commutator_residual, epsilon_fields,
    euler_residuals, exactness_residual, flat_coordinate_fields, flat_coordinates_n3,
    flat_form_residual, flow_normalization, from_callable, hierarchy_flow_field, hierarchy_step,
    reciprocal_transform, recursion_residual, third_connection, twisted_lm_residual,
    write_flat_coordinates_csv,
)
from biflat.errors import ConfigError, NormalizationPole, PoleAtC, ZeroDenominator, ZeroEpsilon
from biflat.geometry import sample_ordered_points, verify_biflat
from biflat.numerics import fd_jacobian

CFG = EpsilonConfig((0.1, 0.2, 0.3))
U0 = np.array([1.0, 2.5, 4.0])
# mpmath, 30 digits
FLAT_AT_U0 = (1.8, 1.0565736303513331642, 1.3053539099974005327)


def test_config_basics():
    assert np.allclose(EpsilonConfig((0.2,) * 4).degrees, -3 * 0.2)
    assert np.allclose(CFG.degrees, [-0.5, -0.4, -0.3])
    assert CFG.negated().eps == (-0.1, -0.2, -0.3)
    with pytest.raises(ValueError):
        EpsilonConfig((0.3,))


def test_zero_eps_gives_zero_rotation():
    beta, H = epsilon_fields(EpsilonConfig((0.0, 0.0, 0.0)))
    assert np.all(beta(U0) == 0) and np.all(H(U0) == 1)


def test_flat_form_trivial_solution():
    e = np.array(CFG.eps)
    assert flat_form_residual(lambda u: e, CFG, U0) < 1e-12


def test_flat_coordinates_frozen():
    assert flat_coordinates_n3(CFG, U0) == pytest.approx(FLAT_AT_U0, rel=1e-12)


@pytest.mark.parametrize("eps", [(0.1, 0.2, 0.3), (-0.2, 0.3, 0.4), (0.35, -0.15, 0.25), (-0.4, -0.3, 0.1)])
def test_flat_coordinates_properties(rng, eps):
    cfg = EpsilonConfig(eps)
    fields = flat_coordinate_fields(cfg)
    for u in sample_ordered_points(3, 5, rng):
        for f in fields:
            assert flat_form_residual(f.grad, cfg, u) < 1e-6
            # analytic gradient agrees with differences of the value
            assert np.allclose(f.grad(u), fd_jacobian(f.value, u, order=4), atol=1e-8)
            e, E = euler_residuals(f, u)
            assert abs(E) < 1e-12
            if f.label != "f1":
                assert abs(e) < 1e-12
                assert f.degree == pytest.approx(1 - cfg.total)


def test_flat_form_sum_is_constant(rng):
    _, f2, _ = flat_coordinate_fields(CFG)
    a, b = sample_ordered_points(3, 2, rng)
    assert abs(f2.grad(a).sum() - f2.grad(b).sum()) < 1e-7


def test_flat_coordinate_preconditions():
    with pytest.raises(ConfigError):
        flat_coordinates_n3(EpsilonConfig((0.5, 0.3, 0.2)), U0)
    with pytest.raises(PoleAtC):
        flat_coordinates_n3(EpsilonConfig((0.2, -0.2, 0.3)), U0)  # c = eps1 + eps2 = 0
    with pytest.raises(ValueError):
        flat_coordinate_fields(EpsilonConfig((0.1, 0.2)))


def test_first_hierarchy_step_closed_form():
    e = np.array(CFG.eps)
    K0 = ScalarField(lambda u: float(e @ u), lambda u: e.copy(), 1.0)
    K1 = hierarchy_step(K0, CFG, 1, 1)
    expected = 0.5 * (e @ U0**2 - (e @ U0) ** 2)
    assert K1(U0) == pytest.approx(expected, rel=1e-14)


def test_step_with_zero_eps():
    cfg = EpsilonConfig((0.0, 0.0, 0.0))
    K = ScalarField(lambda u: float(u @ u), lambda u: 2 * u, 2.0)
    K1 = hierarchy_step(K, cfg, 1, 1)
    assert K1(U0) == pytest.approx(float(U0**2 @ (2 * U0)) / 2)


def test_step_gradient_recursion(rng):
    table = build_hierarchy(CFG, 3)
    e = np.array(CFG.eps)
    for (p, a), K in table.K.items():
        if a == 0:
            continue
        prev = table.K[(p, a - 1)]
        for u in sample_ordered_points(3, 3, rng):
            # dK_(a) = d_L K_(a-1) - K_(a-1) df1, checked on the value
            lhs = fd_jacobian(K.value, u, order=4)
            rhs = u * fd_jacobian(prev.value, u, order=4) - prev(u) * e
            assert np.max(np.abs(lhs - rhs)) < 1e-7 * max(1.0, np.max(np.abs(rhs)))


def test_normalization_poles():
    K = ScalarField(lambda u: 1.0, lambda u: np.zeros(3))
    with pytest.raises(NormalizationPole):
        hierarchy_step(K, EpsilonConfig((-0.7, -0.7, -0.6)), 2, 1)
    with pytest.raises(NormalizationPole):
        flow_normalization(EpsilonConfig((0.5, 0.3, 0.2)), 1, 2)
    assert flow_normalization(CFG, 2, 3) == 6
    assert flow_normalization(CFG, 1, 2) == pytest.approx((1 - 0.6) * (2 - 0.6))
    with pytest.raises(ValueError):
        hierarchy_step(K, CFG, 1, 0)


def test_zero_epsilon_forbidden_for_flows():
    cfg = EpsilonConfig((0.0, 0.2, 0.3))
    K = ScalarField(lambda u: 1.0, lambda u: np.zeros(3))
    with pytest.raises(ZeroEpsilon):
        hierarchy_flow_field(K, cfg, U0, 1, 0)


def test_hierarchy_residuals(rng):
    table = build_hierarchy(EpsilonConfig((-0.2, 0.3, 0.4)), 3)
    assert len(table.K) == 12
    for u in sample_ordered_points(3, 3, rng):
        for key, res in table.residuals(u).items():
            assert max(res.values()) < 1e-6, (key, res)


def test_flat_flow_fields_and_commutator():
    table = build_hierarchy(CFG, 1, ps=[2])
    X0, X1 = table.X(2, 0), table.X(2, 1)
    assert recursion_residual(None, X0, CFG, U0) < 1e-6
    assert recursion_residual(X0, X1, CFG, U0) < 1e-6
    assert commutator_residual(X0, X1, U0) < 1e-6
    # a wrong pairing is detected
    assert commutator_residual(lambda u: 2 * X0(u), X1, U0) > 1e-3


def test_twisted_chain_trivial_cases():
    zero = lambda u: np.zeros(3)  # noqa: E731
    assert twisted_lm_residual((zero, zero), CFG, U0) == 0.0
    G = third_connection(EpsilonConfig((0.0, 0.0, 0.0)))(U0)
    assert np.allclose(G, 0.0)


def test_exactness_detects_non_flat_function():
    K = from_callable(lambda u: float(u[0] * u[1] ** 2))
    assert exactness_residual(K, CFG, U0) > 1e-2


def test_reciprocal_identity():
    beta, H = epsilon_fields(CFG)
    one = ScalarField(lambda u: 1.0, lambda u: np.zeros(3), 0.0)
    b2, H2 = reciprocal_transform(beta, H, one, 0.0)
    assert np.allclose(b2(U0), beta(U0)) and np.allclose(H2(U0), H(U0))
    assert np.allclose(b2.degrees, beta.degrees)


def test_reciprocal_with_flat_coordinate(rng):
    beta, H = epsilon_fields(CFG)
    _, f2, _ = flat_coordinate_fields(CFG)
    b2, H2 = reciprocal_transform(beta, H, f2, 1 - CFG.total)
    assert np.allclose(b2.degrees, CFG.degrees - 1 + CFG.total)
    pts = sample_ordered_points(3, 4, rng)
    for u in pts:
        assert max(ed_residual(b2, u)) < 1e-5
        assert max(lame_residual(b2, H2, u)) < 1e-5
    assert verify_biflat(b2, H2, pts, 1e-5, 1e-5).passed


def test_reciprocal_zero_denominator():
    beta, H = epsilon_fields(CFG)
    A = ScalarField(lambda u: float(u[0] - 1.0), lambda u: np.array([1.0, 0, 0]))
    b2, _ = reciprocal_transform(beta, H, A, 1.0)
    with pytest.raises(ZeroDenominator):
        b2(U0)


def test_exports(tmp_path):
    table = build_hierarchy(CFG, 1)
    d = table.to_dict([U0])
    assert set(d["fields"]) == {"1,0", "1,1", "2,0", "2,1", "3,0", "3,1"}
    json.dumps(d)
    path = tmp_path / "flat.csv"
    write_flat_coordinates_csv(path, CFG, [U0])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["u1", "u2", "u3", "f1", "f2", "f3"]
    assert float(rows[1][4]) == pytest.approx(FLAT_AT_U0[1], rel=1e-15)

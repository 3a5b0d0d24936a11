import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from biflat.darboux_egorov import d1_in_spectrum
from biflat.dim2 import build_dim2, build_dim2_branch, dim2_fields, violated_dim2
from biflat.errors import DegenerateCoupling
from biflat.geometry import natural_connection, sample_ordered_points, verify_biflat


def test_reference_family():
    fam = build_dim2(1, -1, 1)
    assert (fam.d2, fam.D2) == (1.0, -1.0)
    beta, H = dim2_fields(fam)
    G = natural_connection(beta, H)(np.array([1.0, 3.0]))
    # Gamma^1_12 = d1/(u2 - u1), Gamma^2_21 = d2/(u1 - u2)
    assert G[0, 0, 1] == pytest.approx(0.5)
    assert G[1, 1, 0] == pytest.approx(-0.5)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_constraints_hold_exactly(C1, C2, d1):
    assume(abs(C1) > 0.05 and abs(d1) > 0.05)
    fam = build_dim2(C1, C2, d1)
    r = fam.constraint_residuals()
    assert abs(r[0]) <= 1e-12 * max(1, abs(C1 * C2))
    assert abs(r[1]) <= 1e-12 * max(1, abs(d1))


def test_random_families_are_biflat(rng):
    for _ in range(4):
        C1, C2 = rng.uniform(0.3, 1.5, 2) * rng.choice([-1, 1], 2)
        fam = build_dim2(C1, C2, rng.uniform(0.3, 1.5))
        beta, H = dim2_fields(fam)
        pts = sample_ordered_points(2, 6, rng)
        rep = verify_biflat(beta, H, pts, 1e-6, 1e-6)
        assert rep.passed, rep.failed()
        assert max(d1_in_spectrum(beta, u) for u in pts) < 1e-7


def test_violated_family_fails_lame(rng):
    beta, H = dim2_fields(violated_dim2(1.0, 0.5, 0.8, 0.3))
    rep = verify_biflat(beta, H, sample_ordered_points(2, 4, rng), 1e-6, 1e-6)
    assert "lame1" in rep.failed()


def test_degenerate_inputs():
    with pytest.raises(DegenerateCoupling):
        build_dim2(1.0, 1.0, 0.0)
    with pytest.raises(DegenerateCoupling):
        build_dim2(0.0, 1.0, 1.0)
    fam = build_dim2(0.0, 0.0, 0.0, d2=0.3, D2=0.0)
    assert fam.d2 == 0.3 and fam.constraint_residuals() == (0.0, 0.0, 0.0)
    with pytest.raises(DegenerateCoupling):
        build_dim2(0.0, 0.0, 0.0, d2=0.3)  # d2 D2 = C2 D1 forces D2 = 0


def test_branch_builder():
    fam = build_dim2_branch(0.5, -0.3, 0.7, "plus")
    assert fam.d1 - fam.d2 == pytest.approx(0.7)
    assert fam.d1 * fam.d2 + fam.C1 * fam.C2 == pytest.approx(0, abs=1e-14)
    lam = fam.eigenvalues()
    assert min(abs(l - fam.d1) for l in lam) < 1e-12
    with pytest.raises(DegenerateCoupling):
        build_dim2_branch(1.0, 1.0, 0.1)

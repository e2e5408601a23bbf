import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msclimate.errors import AtThreshold, InvalidParameters
from msclimate.integrate import IntegratorConfig, integrate
from msclimate.melnikov import (
    HamiltonianOrbit, R, R_curve, cycle_census_unfolded, dR, find_fold, homoclinic_sech_integrals,
    melnikov, orbit_quadrature, sample, time_domain_integrals,
)
from msclimate.models import Model, UnfoldParams
from msclimate.quadrature import gauss_kronrod

SQRT2 = math.sqrt(2.0)

# Frozen from an independent oracle: scipy QUADPACK with the algebraic endpoint
# weight (u-a)^(1/2) (b-u)^(1/2) on the factored potential, relative tolerance 1e-13.
ORACLE = {
    1.2: (0.21924514407151235, 0.21369247360570195),
    1.6: (6.029409725842399, 4.855538402633283),
    2.0: (15.196529053830695, 17.62676585459795),
    3.0: (60.392095818513724, 151.80046113895804),
}
ORACLE_NEG = {0.5: 0.0633391874037377, 1.5: 0.5946130146069771}
# minimize_scalar on the same oracle
ORACLE_FOLD = (1.4712076106721177, 0.7522556404058334)


def test_homoclinic_constants():
    orb = HamiltonianOrbit.homoclinic()
    assert orbit_quadrature(orb, 0) == pytest.approx(4 / 3, abs=1e-12)
    assert orbit_quadrature(orb, 2) == pytest.approx(16 / 15, abs=1e-12)
    assert melnikov(0.8, SQRT2) == pytest.approx(0.0, abs=1e-12)
    i0, i2 = homoclinic_sech_integrals()
    assert (i0, i2) == pytest.approx((4 / 3, 16 / 15), abs=1e-10)


@pytest.mark.parametrize("x", sorted(ORACLE))
def test_integrals_match_oracle(x):
    s = sample(x)
    i0, i2 = ORACLE[x]
    assert s.I0 == pytest.approx(i0, rel=1e-11)
    assert s.I2 == pytest.approx(i2, rel=1e-11)


@pytest.mark.parametrize("x", sorted(ORACLE_NEG))
def test_negative_mu_matches_oracle(x):
    assert R(x, -1.0) == pytest.approx(ORACLE_NEG[x], rel=1e-11)


@pytest.mark.parametrize("x", [1.05, 1.3, 1.41, 1.42, 1.8, 4.0])
def test_time_domain_route_agrees(x):
    i0, i2, period = time_domain_integrals(x)
    s = sample(x, derivative=False)
    assert i0 == pytest.approx(s.I0, rel=1e-9)
    assert i2 == pytest.approx(s.I2, rel=1e-9)
    assert period > 0


def test_small_inner_orbit_period_tends_to_linear():
    # the centers (+-1, 0) have frequency sqrt(2)
    _, _, period = time_domain_integrals(1.0005)
    assert period == pytest.approx(2 * math.pi / SQRT2, rel=1e-5)


@pytest.mark.parametrize("x", [1.2, 2.0])
def test_i0_is_enclosed_area(x):
    _, _, period = time_domain_integrals(x)
    cfg = IntegratorConfig(method="rk4", step=period / 20000, t_end=period)
    orb = integrate(Model.HAMILTONIAN, UnfoldParams(0.0, 1.0, 0.0), (x, 0.0), cfg)
    u, v = orb.states[:, 0], orb.states[:, 1]
    area = 0.5 * abs(np.dot(u, np.roll(v, -1)) - np.dot(v, np.roll(u, -1)))
    assert area == pytest.approx(sample(x).I0, rel=1e-6)


@given(st.floats(0.2, 4.0), st.floats(1.05, 3.0))
def test_mu_scaling(mu, sx):
    x = sx * math.sqrt(mu)
    if abs(sx - SQRT2) < 1e-3:
        return
    s = sample(x, mu, derivative=False)
    ref = sample(sx, 1.0, derivative=False)
    assert s.I0 == pytest.approx(mu ** 1.5 * ref.I0, rel=1e-10)
    assert s.I2 == pytest.approx(mu ** 2.5 * ref.I2, rel=1e-10)


@given(st.floats(1.02, 6.0))
def test_derivative_matches_finite_difference(x):
    if abs(x - SQRT2) < 2e-3:
        return
    h = 1e-5
    fd = (R(x + h) - R(x - h)) / (2 * h)
    assert dR(x) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_r_curve_shape():
    assert R(1 + 1e-3) == pytest.approx(1.0, abs=5e-3)
    xs = np.linspace(1.001, SQRT2 - 1e-6, 80)
    assert np.all(np.diff([R(x) for x in xs]) < 0)
    assert R(SQRT2) == pytest.approx(0.8, abs=1e-6)
    xstar, _ = find_fold()
    xs = np.linspace(xstar + 1e-3, 12.0, 80)
    assert np.all(np.diff([R(x) for x in xs]) > 0)
    ratios = [R(x) / x ** 2 for x in (10.0, 20.0, 30.0)]
    assert max(ratios) / min(ratios) - 1 < 0.05


def test_r_curve_runs():
    curve = R_curve(1.0, np.linspace(1.01, 3.0, 60))
    trends = [run["trend"] for run in curve.metadata["monotone_runs"]]
    assert trends == ["decreasing", "increasing"]
    with pytest.raises(InvalidParameters):
        R_curve(1.0, [0.9, 1.2])


def test_fold_location():
    xstar, lam = find_fold()
    assert xstar == pytest.approx(ORACLE_FOLD[0], abs=1e-6)
    assert lam == pytest.approx(ORACLE_FOLD[1], abs=1e-12)
    assert 1.466 <= xstar <= 1.476 and 0.750 <= lam <= 0.754


@pytest.mark.parametrize("lam,expected", [
    (1.2, {"stable outer": 1}),
    (0.9, {"stable outer": 1, "unstable inner": 2}),
    (0.78, {"stable outer": 1, "unstable outer": 1}),
    (0.7, {}),
])
def test_census_prediction(lam, expected):
    assert cycle_census_unfolded(lam).counts() == expected


def test_census_negative_mu():
    assert cycle_census_unfolded(0.5, -1.0).counts() == {"stable simple": 1}
    assert cycle_census_unfolded(-0.5, -1.0).counts() == {}


def test_threshold_is_refused():
    with pytest.raises(AtThreshold):
        cycle_census_unfolded(0.8)
    with pytest.raises(AtThreshold):
        cycle_census_unfolded(find_fold()[1])


def test_orbit_labels():
    assert HamiltonianOrbit.from_label(1.2).kind == "inner"
    assert HamiltonianOrbit.from_label(SQRT2).kind == "homoclinic"
    assert HamiltonianOrbit.from_label(1.5).kind == "outer"
    assert HamiltonianOrbit.from_label(0.5, -1.0).kind == "simple"
    with pytest.raises(InvalidParameters):
        HamiltonianOrbit.from_label(0.9)


def test_gauss_kronrod():
    v, _ = gauss_kronrod(np.sin, 0.0, math.pi)
    assert v == pytest.approx(2.0, abs=1e-14)
    v, _ = gauss_kronrod(lambda t: np.exp(-t * t), -8.0, 8.0)
    assert v == pytest.approx(math.sqrt(math.pi), rel=1e-13)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msclimate.errors import InvalidParameters
from msclimate.integrate import IntegratorConfig, integrate
from msclimate.models import (
    AsymParams, HatParams, Model, MsParams, SymParams, UnfoldParams, asym_vector_field,
    from_rotated, hamiltonian_value, hamiltonian_vector_field, ms_vector_field, nondimensionalize,
    pencil_line, pencil_slope, rotated_vector_field, sym_vector_field, to_rotated,
    unfolded_vector_field, unfolding_map,
)

coord = st.floats(-5, 5, allow_nan=False)
pos = st.floats(0.01, 5)


def test_ms_field_examples():
    prm = MsParams(1.0, 1.2, 0.8, 0.8)
    assert np.array_equal(ms_vector_field((0, 0, 0), prm), [0, 0, 0])
    assert np.allclose(ms_vector_field((1, 0, 0), prm), [-1, 0, -1.2], atol=1e-15)
    assert np.allclose(ms_vector_field((0, 1, 1), prm), [-1, -0.4, -1.2], atol=1e-15)


def test_planar_field_examples():
    assert np.allclose(sym_vector_field((1, -1), SymParams(0.5, 1.5)), 0, atol=1e-15)
    assert np.allclose(asym_vector_field((1, 1), AsymParams(1, 1, 0.8)), [-2, 1.8], atol=1e-15)
    assert np.allclose(rotated_vector_field((1, 0), AsymParams(1, 2, 0)), 0, atol=1e-15)
    assert np.allclose(unfolded_vector_field((1, 0), UnfoldParams(0.3, 1, 0.2)), 0, atol=1e-15)
    v = unfolded_vector_field((math.sqrt(2), 0), UnfoldParams(0.8, 1, 0.01))
    assert np.allclose(v, [0, -math.sqrt(2)], atol=1e-14)


def test_hamiltonian_levels():
    assert hamiltonian_value((0, 0), 1) == 0
    assert hamiltonian_value((1, 0), 1) == -0.25
    assert abs(hamiltonian_value((math.sqrt(2), 0), 1)) < 1e-15


@given(coord, coord, pos, pos)
def test_z2_equivariance(x, y, p, r):
    prm = SymParams(p, r)
    assert np.array_equal(sym_vector_field((-x, -y), prm), -sym_vector_field((x, y), prm))
    a = AsymParams(p, r, 0.0)
    assert np.array_equal(rotated_vector_field((-x, -y), a), -rotated_vector_field((x, y), a))
    u = UnfoldParams(p, r, 0.05)
    assert np.array_equal(unfolded_vector_field((-x, -y), u), -unfolded_vector_field((x, y), u))


@given(coord, coord, pos, pos, st.floats(-3, 3))
def test_reduction_chain(x, y, p, r, lam):
    assert np.array_equal(asym_vector_field((x, y), AsymParams(p, r, 0.0)),
                          sym_vector_field((x, y), SymParams(p, r)))
    assert np.array_equal(unfolded_vector_field((x, y), UnfoldParams(lam, r, 0.0)),
                          hamiltonian_vector_field((x, y), r))


@given(coord, coord, pos, pos, st.floats(0, 2))
def test_rotation_pushes_field_forward(x, y, p, r, s):
    prm = AsymParams(p, r, s)
    f = asym_vector_field((x, y), prm)
    pushed = np.array([f[0], -(f[0] + f[1])])
    g = rotated_vector_field(to_rotated((x, y)), prm)
    assert np.allclose(pushed, g, rtol=1e-12, atol=1e-9)
    assert np.allclose(from_rotated(to_rotated((x, y))), (x, y), rtol=0, atol=1e-12)


def test_conjugate_trajectories():
    prm = AsymParams(1.55, 1.6, 0.8)
    cfg = IntegratorConfig(method="rk4", step=1e-3, t_end=10.0)
    y0 = np.array([0.7, -0.2])
    a = integrate(Model.ASYM, prm, y0, cfg)
    b = integrate(Model.ROTATED, prm, to_rotated(y0), cfg)
    assert np.array_equal(a.times, b.times)
    assert np.max(np.abs(to_rotated(a.states) - b.states)) < 1e-9


def test_large_q_approaches_planar_model():
    p, r, s = 1.0, 0.8, 0.8
    x0, y0 = 0.6, -0.3
    cfg = IntegratorConfig(t_end=5.0, atol=1e-11, rtol=1e-11, hmax=1e-3)
    ref = integrate(Model.ASYM, AsymParams(p, r, s), (x0, y0), cfg)
    devs = []
    for q in (10.0, 1e2, 1e3):
        orb = integrate(Model.MS, MsParams(p, q, r, s), (x0, y0, -x0), cfg)
        xy = np.column_stack([np.interp(ref.times, orb.times, orb.states[:, k]) for k in (0, 1)])
        devs.append(np.max(np.abs(xy - ref.states)))
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 1e-2


def test_unfolding_and_pencil():
    u = unfolding_map(1.0, 1.0, 0.1)
    assert (u.lam, u.mu) == (0.0, 0.0)
    assert pencil_slope(0.8) == pytest.approx(-4.0, abs=1e-12)
    assert pencil_slope(0.752) == pytest.approx(-3.03, abs=0.01)
    with pytest.raises(InvalidParameters):
        unfolding_map(1.0, 1.0, 0.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.001, 0.5))
def test_pencil_inverts_unfolding(lam, mu, eta):
    p, r = pencil_line(lam, mu, eta)
    back = unfolding_map(p, r, eta)
    assert back.lam == pytest.approx(lam, abs=1e-9)
    assert back.mu == pytest.approx(mu, abs=1e-9)
    assert (lam - mu) * (r - 1) == pytest.approx(lam * (p - 1), abs=1e-12)


def test_nondimensionalize():
    ones = nondimensionalize(HatParams(1, 1, 1, 1, 1, 1, 1))
    assert (ones.p, ones.q, ones.r, ones.s) == (1, 1, 1, 1)
    assert nondimensionalize(HatParams(1, 1, 1, 0, 1, 1, 1)).s == 0
    m = nondimensionalize(HatParams(a1h=1.2, b1h=0.8, b2h=1, b3h=0.96, b4h=1, c0h=1, c2h=1.2))
    assert (m.p, m.q, m.r) == pytest.approx((1.0, 1.2, 0.8))
    assert m.s == pytest.approx(0.96)
    with pytest.raises(InvalidParameters):
        nondimensionalize(HatParams(0, 1, 1, 1, 1, 1, 1))


def test_parameter_validation():
    with pytest.raises(InvalidParameters):
        SymParams(-1, 1)
    with pytest.raises(InvalidParameters):
        AsymParams(1, 1, -0.1)
    with pytest.raises(InvalidParameters):
        MsParams(1, 0.5, 1, 0).validate()
    with pytest.raises(InvalidParameters):
        UnfoldParams(1, 1, -0.1)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msclimate.curves import CurveKind
from msclimate.equilibria import (
    Kind, bt_points, characteristic_residual, codim1_loci, find_equilibria, hopf_analysis,
    hopf_frequencies, jacobian, region_classify, spiral_node_curves, stable_labels,
)
from msclimate.errors import BoundaryPoint, NotOnHopfCurve
from msclimate.models import AsymParams, Model, MsParams, SymParams, vector_field

pos = st.floats(0.01, 3.0)


def _by_label(reps):
    return {r.label: r for r in reps}


def test_equilibrium_examples():
    assert [r.label for r in find_equilibria(Model.SYM, SymParams(1.5, 0.5))] == ["P0"]
    eq = _by_label(find_equilibria(Model.SYM, SymParams(0.5, 1.5)))
    assert np.allclose(eq["P1"].location, [1, -1])
    assert np.allclose(eq["P2"].location, [-1, 1])
    eq = _by_label(find_equilibria(Model.ASYM, AsymParams(1, 1, 0.8)))
    assert sorted(float(e.location[0]) for e in eq.values() if e.label != "P0") == \
        pytest.approx([-0.8, 0.0], abs=1e-15)
    assert eq["P0"].degenerate


def test_jacobian_examples():
    p, r, s = 1.55, 1.6, 0.8
    for e in find_equilibria(Model.ASYM, AsymParams(p, r, s)):
        x = e.location[0]
        expect = [[-1, -1], [p + 2 * s * x + 2 * x * x, r - x * x]]
        assert np.allclose(e.jacobian, expect, atol=1e-14)
    for s in (0.0, 0.3, 0.8):
        J = jacobian(Model.ROTATED, AsymParams(1, 1, s), (0, 0))
        assert np.array_equal(J, [[0, 1], [0, 0]])


@pytest.mark.parametrize("model,params", [
    (Model.SYM, SymParams(0.5, 1.5)),
    (Model.ASYM, AsymParams(1.55, 2.5, 0.8)),
    (Model.ROTATED, AsymParams(0.7, 1.2, 0.4)),
    (Model.MS, MsParams(1.0, 1.2, 1.3, 0.8)),
])
def test_jacobian_matches_central_differences(model, params):
    h = 1e-5
    for e in find_equilibria(model, params):
        n = e.location.size
        fd = np.empty((n, n))
        for k in range(n):
            d = np.zeros(n)
            d[k] = h
            fd[:, k] = (vector_field(model, e.location + d, params)
                        - vector_field(model, e.location - d, params)) / (2 * h)
        assert np.max(np.abs(fd - e.jacobian)) <= 1e-6


def test_stability_examples():
    assert _by_label(find_equilibria(Model.SYM, SymParams(0.5, 0.25)))["P0"].stable
    assert _by_label(find_equilibria(Model.SYM, SymParams(0.5, 0.8)))["P1"].stable
    assert _by_label(find_equilibria(Model.ASYM, AsymParams(1.55, 3.0, 0.8)))["P2"].stable


@given(pos, pos, st.floats(0, 1.5))
def test_equilibria_and_eigenvalues_are_exact(p, r, s):
    for model, prm in ((Model.SYM, SymParams(p, r)), (Model.ASYM, AsymParams(p, r, s)),
                       (Model.MS, MsParams(p, 1.5, r, s))):
        for e in find_equilibria(model, prm):
            assert np.max(np.abs(vector_field(model, e.location, prm))) <= 1e-10
            for lam in e.eigenvalues:
                assert characteristic_residual(e.jacobian, lam) <= 1e-10


def test_pitchfork_branch_is_linear_in_r():
    p = 0.6
    rs = np.linspace(p + 1e-3, p + 0.1, 25)
    x2 = [_by_label(find_equilibria(Model.SYM, SymParams(p, r)))["P1"].location[0] ** 2
          for r in rs]
    slope, icpt = np.polyfit(rs, x2, 1)
    resid = np.asarray(x2) - (slope * rs + icpt)
    assert slope == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(resid)) < 1e-12


def test_region_examples():
    assert region_classify(SymParams(2.0, 1.5)).label == "I"
    assert region_classify(SymParams(1.5, 2.0)).label == "II"
    assert region_classify(SymParams(0.5, 0.25)).label == "O"
    assert region_classify(SymParams(0.5, 0.8)).label == "III"
    with pytest.raises(BoundaryPoint):
        region_classify(SymParams(1.2, 1.2))
    # either side of the shifted diagonal r = p - 0.16, which meets r = 1.1 at p = 1.26
    eps = 1e-3
    inside = AsymParams(1.26 - eps, 1.1, 0.8)
    assert region_classify(inside, "asym").label == "IIIo"
    assert stable_labels(Model.ASYM, inside) == {"P2"}
    assert region_classify(AsymParams(1.26 + eps, 1.1, 0.8), "asym").label == "I"
    with pytest.raises(BoundaryPoint):
        region_classify(AsymParams(1.26, 1.1, 0.8), "asym")


def test_spiral_node_notes_follow_eigenvalues():
    rng = np.random.default_rng(3)
    for p, r in rng.uniform(0.05, 3, (400, 2)):
        c = spiral_node_curves(p)
        if min(abs(r - c["C1"]), abs(r - c["C2"]), abs(r - p), abs(r - 1), abs(p - 1)) < 1e-6:
            continue
        notes = region_classify(SymParams(p, r)).notes
        eq = _by_label(find_equilibria(Model.SYM, SymParams(p, r)))
        node0 = all(z.imag == 0 for z in eq["P0"].eigenvalues)
        assert ("P0 node" in notes) == node0
        if "P1" in eq:
            node1 = all(z.imag == 0 for z in eq["P1"].eigenvalues)
            assert ("P1/P2 node" in notes) == node1


def test_hopf_examples():
    h = hopf_analysis("sym", SymParams(2.0, 1.0), "P0")
    assert (h.criticality, h.omega) == ("supercritical", pytest.approx(1.0))
    h = hopf_analysis("sym", SymParams(1.0, 2.0), "P1")
    assert h.criticality == "subcritical"
    assert h.omega == pytest.approx(math.sqrt(2))
    r = 1.7
    f = hopf_frequencies(r, 1.0, 0.0)
    assert f["P2"] == pytest.approx(math.sqrt(2 * (r - 1)))
    with pytest.raises(NotOnHopfCurve):
        hopf_analysis("sym", SymParams(2.0, 1.3), "P0")


@given(st.floats(1.01, 3.0), st.floats(0.0, 1.2))
def test_asym_hopf_frequencies_on_e1_e2(r, s):
    p1 = 1.0 - s * math.sqrt(r - 1.0)
    if p1 > 0.01:
        h = hopf_analysis("asym", AsymParams(p1, r, s), "P1")
        assert h.omega == pytest.approx(hopf_frequencies(r, p1, s)["P1"], rel=1e-9)
    if r > 1 + 0.25 * s * s + 1e-3:
        p2 = 1.0 + s * math.sqrt(r - 1.0)
        h = hopf_analysis("asym", AsymParams(p2, r, s), "P2")
        assert h.omega == pytest.approx(hopf_frequencies(r, p2, s)["P2"], rel=1e-9)


def test_bt_points():
    sym = bt_points("sym")
    assert [(q.p, q.r) for q in sym] == [(1.0, 1.0)]
    q1, q2 = bt_points("asym", 0.8)
    assert (q2.p, q2.r) == pytest.approx((1.32, 1.16), abs=1e-15)
    for q in (q1, q2):
        assert abs(q.trace) <= 1e-12 and abs(q.det) <= 1e-12
    a, b = bt_points("asym", 0.0)
    assert (a.p, a.r) == (b.p, b.r) == (1.0, 1.0)


def test_codim1_loci():
    (pf,) = codim1_loci("sym")
    assert pf.kind is CurveKind.PITCHFORK and np.array_equal(pf.p, pf.r)
    tc, sn = codim1_loci("asym", 0.8)
    assert tc.kind is CurveKind.TRANSCRITICAL and np.all(tc.p <= 1.0)
    assert sn.kind is CurveKind.SADDLE_NODE_EQ
    assert np.allclose(sn.p - sn.r, 0.16)


def test_stable_labels_in_ms_model():
    assert stable_labels(Model.MS, MsParams(0.5, 1.2, 0.25, 0.0)) == {"P0"}
    kinds = {e.kind for e in find_equilibria(Model.MS, MsParams(1.0, 1.2, 0.8, 0.8))}
    assert Kind.UNSTABLE_SPIRAL in kinds or Kind.SADDLE in kinds

import math
from collections import Counter

import numpy as np
import pytest

from msclimate.errors import InvalidParameters, NoCycleFound, NonFiniteState, StepLimitExceeded
from msclimate.integrate import (
    IntegratorConfig, census_attractors, estimate_cycle, integrate, random_initial_state, xbar,
)
from msclimate.models import (
    AsymParams, Model, MsParams, SymParams, UnfoldParams, hamiltonian_value,
)

MS_PRM = MsParams(1.0, 1.2, 0.8, 0.8)
HAM = UnfoldParams(0.0, 1.0, 0.0)


def test_equilibrium_start_stays_put():
    orb = integrate(Model.SYM, SymParams(0.7, 1.3), (0.0, 0.0), IntegratorConfig(t_end=20))
    assert np.all(orb.states == 0.0)
    assert np.all(np.diff(orb.times) > 0)


def test_rk4_is_fourth_order():
    ref = integrate(Model.HAMILTONIAN, HAM, (1.2, 0.0),
                    IntegratorConfig(atol=1e-14, rtol=1e-14, t_end=10, hmax=0.01)).final_state
    errs = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        end = integrate(Model.HAMILTONIAN, HAM, (1.2, 0.0),
                        IntegratorConfig(method="rk4", step=h, t_end=10)).final_state
        errs.append(np.max(np.abs(end - ref)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 16) <= 0.2 * 16)


def test_hamiltonian_drift():
    orb = integrate(Model.HAMILTONIAN, HAM, (math.sqrt(2) - 1e-4, 0.0),
                    IntegratorConfig(atol=1e-10, rtol=1e-10, t_end=50))
    h = np.array([hamiltonian_value(s, 1.0) for s in orb.states])
    assert np.max(np.abs(h - h[0])) <= 1e-8


def test_determinism():
    cfg = IntegratorConfig(t_end=30)
    y0 = random_initial_state(42, 3)
    a = integrate(Model.MS, MS_PRM, y0, cfg, seed=42)
    b = integrate(Model.MS, MS_PRM, random_initial_state(42, 3), cfg, seed=42)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    assert not np.array_equal(random_initial_state(42, 2, 0), random_initial_state(42, 2, 1))


def test_integrator_errors():
    with pytest.raises(StepLimitExceeded):
        integrate(Model.MS, MS_PRM, (0.5, 0, 0), IntegratorConfig(t_end=100, max_steps=10))
    with pytest.raises(NonFiniteState) as exc:
        integrate(Model.SYM, SymParams(1.0, 1.0), (3.0, 3.0), IntegratorConfig(t_end=10),
                  direction="reverse")
    assert 0 < exc.value.last_time < 10
    with pytest.raises(InvalidParameters):
        IntegratorConfig(atol=0)
    with pytest.raises(InvalidParameters):
        integrate(Model.SYM, SymParams(1, 1), (0, 0, 0))


def test_reverse_time_runs_backwards():
    cfg = IntegratorConfig(t_end=2.0, atol=1e-12, rtol=1e-12)
    fwd = integrate(Model.SYM, SymParams(0.7, 1.3), (0.4, -0.1), cfg)
    back = integrate(Model.SYM, SymParams(0.7, 1.3), fwd.final_state, cfg, direction="reverse")
    assert np.allclose(back.final_state, (0.4, -0.1), atol=1e-9)


def test_xbar_examples():
    rng_states = [random_initial_state(7, 2, k) for k in range(3)]
    for y0 in rng_states:
        assert abs(xbar(Model.SYM, SymParams(2.0, 0.5), y0)) <= 1e-4
        v = xbar(Model.SYM, SymParams(0.5, 0.8), y0)
        assert min(abs(v - math.sqrt(0.3)), abs(v + math.sqrt(0.3))) <= 1e-3
        assert xbar(Model.SYM, SymParams(2.0, 1.5), y0) > 0.1


def test_xbar_tolerance_invariance():
    vals = [xbar(Model.SYM, SymParams(2.0, 1.5), (0.3, 0.1),
                 IntegratorConfig(t_end=500, atol=tol, rtol=tol)) for tol in (1e-8, 1e-9)]
    assert abs(vals[0] - vals[1]) < 1e-8


def test_xbar_symmetry_under_grid_negation():
    prm = SymParams(0.5, 0.8)
    grid = [(a, b) for a in np.linspace(-2, 2, 5) for b in np.linspace(-2, 2, 5) if a or b]

    def outcomes(sign):
        return Counter(round(xbar(Model.SYM, prm, (sign * a, sign * b)), 3) for a, b in grid)

    assert outcomes(1) == outcomes(-1)


def test_ms_cycle():
    c = estimate_cycle(Model.MS, MS_PRM, (0.5, 0.0, 0.0))
    assert c.stability == "stable"
    assert c.period == pytest.approx(10.0, abs=1.5)
    cfg = IntegratorConfig(t_end=300, atol=1e-9, rtol=1e-9, hmax=0.1)
    coarse = estimate_cycle(Model.MS, MS_PRM, (0.5, 0.0, 0.0), config=cfg)
    assert abs(coarse.period - c.period) < 1e-8


def test_reverse_time_cycle_around_p2():
    prm = AsymParams(1.55, 1.6, 0.8)
    c = estimate_cycle(Model.ASYM, prm, (-0.9, 0.9), direction="reverse")
    assert c.stability == "unstable" and c.direction == "reverse"
    x2 = 0.5 * (-0.8 - math.sqrt(0.64 + 4 * 0.05))
    assert c.encloses((x2, -x2))
    assert not c.encloses((0.0, 0.0))


def test_hopf_amplitude_scales_like_sqrt():
    amps = []
    for d in (1e-3, 4e-3):
        c = estimate_cycle(Model.SYM, SymParams(2.0, 1.0 + d), (0.05, 0.0))
        assert c.stability == "stable"
        amps.append(c.amplitude_x)
    assert amps[1] / amps[0] == pytest.approx(2.0, rel=0.05)
    assert amps[0] == pytest.approx(2 * math.sqrt(1e-3), rel=0.1)


def test_subcritical_hopf_gives_small_unstable_cycle():
    p, r = 0.995, 1.5
    x1 = math.sqrt(r - p)
    c = estimate_cycle(Model.SYM, SymParams(p, r), (x1 + 0.05, -x1), direction="reverse")
    assert c.stability == "unstable"
    assert 0 < c.amplitude_x - x1 < 0.15
    assert c.encloses((x1, -x1)) and not c.encloses((0.0, 0.0))


def test_no_cycle_found():
    with pytest.raises(NoCycleFound):
        estimate_cycle(Model.SYM, SymParams(2.0, 0.5), (0.5, 0.0))


def test_stability_flip_between_homoclinic_and_fold():
    # sym (0.9, 1.37): a stable outer cycle encloses an unstable one
    prm = AsymParams(0.9, 1.37, 0.0)
    outer = estimate_cycle(Model.ROTATED, prm, (1.2, 0.0))
    inner = estimate_cycle(Model.ROTATED, prm, (1.03, 0.0), direction="reverse")
    assert outer.stability == "stable" and inner.stability == "unstable"
    assert inner.amplitude_x < outer.amplitude_x
    for c in (outer, inner):
        assert all(c.encloses((x, 0.0)) for x in (-math.sqrt(0.47), 0.0, math.sqrt(0.47)))


# reference phase portraits along p = 1.55 at s = 0.8;
# ``encloses`` lists, per cycle stability, the equilibria each such cycle surrounds
FRAMES = {
    1.2: dict(stable=1, unstable=0, attract_eq=set(), encloses={"stable": {"P0"}}),
    1.45: dict(stable=1, unstable=0, attract_eq=set(),
               encloses={"stable": {"P0", "P1", "P2"}}),
    1.6: dict(stable=1, unstable=1, attract_eq={"P2"}, encloses={"unstable": {"P2"}}),
    2.0: dict(stable=1, unstable=0, attract_eq={"P2"}),
    2.5: dict(stable=1, unstable=1, attract_eq={"P2"},
              encloses={"stable": {"P0", "P1", "P2"}, "unstable": {"P0", "P1", "P2"}}),
    3.0: dict(stable=0, unstable=0, attract_eq={"P2"}),
}


@pytest.mark.parametrize("r", sorted(FRAMES))
def test_phase_portrait_census(r):
    summary = census_attractors(Model.ASYM, AsymParams(1.55, r, 0.8))
    want = FRAMES[r]
    assert summary.stable_cycles == want["stable"]
    assert summary.unstable_cycles == want["unstable"]
    assert set(summary.stable_equilibria) == want["attract_eq"]
    assert all(c.confirmed for c in summary.cycles)
    for c in summary.cycles:
        if c.stability in want.get("encloses", {}):
            assert set(c.encloses) == want["encloses"][c.stability]


def test_census_nesting_in_region_iiia():
    summary = census_attractors(Model.SYM, SymParams(0.9, 1.6))
    assert summary.counts()["stable cycles"] == 1
    assert summary.counts()["unstable cycles"] == 2
    outer = max(range(3), key=lambda k: summary.cycles[k].x_max)
    assert sorted(j for i, j in summary.nesting() if i == outer) == \
        sorted(k for k in range(3) if k != outer)

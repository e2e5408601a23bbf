"""Trajectories, lim-sup statistics, limit cycles and phase-portrait censuses.

Poincare section.  Every crossing test uses the nullcline of the first
component, {x' = 0}, crossed from x' > 0 to x' < 0, so section points are the
local maxima of x.  For all model variants that set is a linear hyperplane
(x + y = 0, or y = 0 in the frames where x' = y) and it passes through every
equilibrium.  In reverse time the same rule applies to the reversed field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _kernels as K
from .equilibria import EquilibriumReport, Kind, find_equilibria
from .errors import (InvalidParameters, NoCycleFound, NonConvergentReturns, NonFiniteState,
                     NotConverged, NumericalError, StepLimitExceeded)
from .models import AsymParams, Model, SymParams, UnfoldParams, params_array

IC_HALF_WIDTH = 2.5
XBAR_TOL = 1e-4
RETURN_TOL = 1e-9
DISPLACEMENT_NOISE = 1e-9

_METHODS = {"rk4": K.RK4, "rk45": K.RK45}


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    step: float = 1e-2  # fixed step for rk4, initial step for rk45
    atol: float = 1e-9
    rtol: float = 1e-9
    t_end: float = 100.0
    max_steps: int = 20_000_000
    hmax: float = 0.5

    def __post_init__(self):
        if self.method not in _METHODS:
            raise InvalidParameters(f"unknown method {self.method!r}")
        if not (self.atol > 0 and self.rtol > 0):
            raise InvalidParameters("tolerances must be positive")
        if not self.t_end > 0:
            raise InvalidParameters("t_end must be positive")
        if not (self.step > 0 and self.hmax > 0):
            raise InvalidParameters("step and hmax must be positive")
        if self.max_steps < 1:
            raise InvalidParameters("max_steps must be at least 1")

    @property
    def method_id(self) -> int:
        return _METHODS[self.method]

    def replace(self, **kw) -> "IntegratorConfig":
        d = self.to_dict()
        d.update(kw)
        return IntegratorConfig(**d)

    def to_dict(self) -> dict:
        return {"method": self.method, "step": self.step, "atol": self.atol, "rtol": self.rtol,
                "t_end": self.t_end, "max_steps": self.max_steps, "hmax": self.hmax}


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    model: Model
    params: object
    times: np.ndarray
    states: np.ndarray
    config: IntegratorConfig
    seed: int | None = None
    direction: str = "forward"
    diverged: bool = False

    def __len__(self):
        return self.times.size

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def period_kyr(self, period: float) -> float:
        from .models import KYR_PER_TIME_UNIT
        return period * KYR_PER_TIME_UNIT


def _sign(direction: str) -> float:
    if direction == "forward":
        return 1.0
    if direction == "reverse":
        return -1.0
    raise InvalidParameters(f"direction must be 'forward' or 'reverse', got {direction!r}")


def _check_state(model: Model, state) -> np.ndarray:
    y = np.asarray(state, dtype=float)
    if y.shape != (model.dim,):
        raise InvalidParameters(f"{model.name} needs a state of length {model.dim}")
    return y


def random_initial_state(seed: int, dim: int, cell_index: int | None = None) -> np.ndarray:
    """Uniform on [-2.5, 2.5]^dim; one independent stream per (seed, cell_index)."""
    key = () if cell_index is None else (int(cell_index),)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
    return rng.uniform(-IC_HALF_WIDTH, IC_HALF_WIDTH, size=dim)


def _raise_status(status: int, t: float, what: str):
    if status == K.STEP_LIMIT:
        raise StepLimitExceeded(f"{what}: step limit reached at t={t:.6g}")
    if status == K.NONFINITE:
        raise NonFiniteState(f"{what}: state left the finite region after t={t:.6g}", t)
    if status == K.STEP_UNDERFLOW:
        raise NumericalError(f"{what}: step size underflow at t={t:.6g}")


def integrate(model: Model, params, initial_state, config: IntegratorConfig | None = None,
              seed: int | None = None, direction: str = "forward") -> OrbitRecord:
    config = config or IntegratorConfig()
    model = Model(model)
    y0 = _check_state(model, initial_state)
    prm = params_array(model, params)
    ts, ys, n, status = K.integrate_path(int(model), prm, y0, _sign(direction), config.method_id,
                                         config.step, config.atol, config.rtol, config.t_end,
                                         config.max_steps, config.hmax)
    _raise_status(status, float(ts[-1]), "integrate")
    return OrbitRecord(model=model, params=params, times=ts.copy(), states=ys.copy(),
                       config=config, seed=seed, direction=direction)


def xbar(model: Model, params, initial_state, config: IntegratorConfig | None = None,
         transient_fraction: float = 0.5, tol: float = XBAR_TOL) -> float:
    """Finite-horizon lim sup of x(t).

    The first ``transient_fraction`` of [0, t_end] is discarded and the rest is
    split in two half-windows; their sups must agree within ``tol``.
    """
    config = config or IntegratorConfig(t_end=500.0, atol=1e-8, rtol=1e-8)
    if not 0.0 <= transient_fraction < 1.0:
        raise InvalidParameters("transient_fraction must lie in [0, 1)")
    model = Model(model)
    y0 = _check_state(model, initial_state)
    prm = params_array(model, params)
    sa, sb, status, t, _ = K.window_sup(int(model), prm, y0, 1.0, config.method_id, config.step,
                                        config.atol, config.rtol, config.t_end,
                                        transient_fraction * config.t_end, config.max_steps,
                                        config.hmax)
    _raise_status(status, t, "xbar")
    if abs(sa - sb) > tol:
        raise NotConverged(f"window sups {sa:.8g} and {sb:.8g} differ by more than {tol}")
    return float(max(sa, sb))


# --- limit cycles ----------------------------------------------------------

def _section_embed(model: Model):
    """(embed, project) between section coordinates and full states."""
    if model is Model.MS:
        return (lambda xi: np.array([xi[0], -xi[0], xi[1]]),
                lambda y: np.array([y[0], y[2]]))
    if model.lienard_frame:
        return (lambda xi: np.array([xi[0], 0.0]), lambda y: np.array([y[0]]))
    return (lambda xi: np.array([xi[0], -xi[0]]), lambda y: np.array([y[0]]))


@dataclass(frozen=True, eq=False)
class CycleEstimate:
    period: float
    amplitude_x: float
    stability: str
    section_points: np.ndarray
    multipliers: tuple
    direction: str = "forward"
    returns: int = 1
    trace: np.ndarray = field(default=None, repr=False)

    def encloses(self, point) -> bool:
        """Winding test of the traced cycle (x, y projection) around ``point``."""
        pts = self.trace[:, :2] - np.asarray(point, dtype=float)[:2]
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        d = np.diff(np.concatenate([ang, ang[:1]]))
        d = (d + np.pi) % (2.0 * np.pi) - np.pi
        return abs(d.sum()) > np.pi

    def to_dict(self) -> dict:
        return {"period": self.period, "amplitude_x": self.amplitude_x,
                "stability": self.stability, "direction": self.direction,
                "returns": self.returns,
                "section_points": [[float(v) for v in p] for p in self.section_points],
                "multipliers": [[float(m.real), float(m.imag)] for m in self.multipliers]}


class _ReturnMap:
    def __init__(self, model, prm, sign, atol, rtol, hmax, t_max):
        self.model, self.prm, self.sign = int(model), prm, sign
        self.atol, self.rtol, self.hmax, self.t_max = atol, rtol, hmax, t_max
        self.embed, self.project = _section_embed(Model(model))

    def __call__(self, xi, k):
        ct, cy, cnt, status, t, _ = K.crossings(self.model, self.prm, self.embed(xi), self.sign,
                                                K.RK45, 1e-3, self.atol, self.rtol, self.t_max,
                                                10_000_000, self.hmax, k)
        if cnt < k:
            return None
        return self.project(cy[k - 1]), float(ct[k - 1]), cy


def _newton_cycle(pmap: _ReturnMap, xi0, k, tol, anchors=(), max_iter=40):
    xi = np.asarray(xi0, dtype=float)
    n = xi.size
    for _ in range(max_iter):
        out = pmap(xi, k)
        if out is None:
            return None
        px, period, pts = out
        F = px - xi
        J = np.empty((n, n))
        for j in range(n):
            e = 1e-6 * max(1.0, abs(xi[j]))
            xj = xi.copy()
            xj[j] += e
            oj = pmap(xj, k)
            if oj is None:
                return None
            J[:, j] = (oj[0] - px) / e
        if np.max(np.abs(F)) < tol:
            return xi, period, pts, J
        step = np.linalg.lstsq(J - np.eye(n), -F, rcond=None)[0]
        # never step more than halfway to an equilibrium, where P(xi) = xi trivially
        gaps = [np.max(np.abs(xi - a)) for a in anchors]
        lim = 0.5 * min(gaps) if gaps else np.inf
        if np.max(np.abs(step)) > lim:
            step *= lim / np.max(np.abs(step))
        xi = xi + step
    return None


def estimate_cycle(model: Model, params, near_state, direction: str = "forward",
                   config: IntegratorConfig | None = None, transient: float | None = None,
                   max_returns: int = 2, tol: float = RETURN_TOL) -> CycleEstimate:
    """Locate the cycle that attracts ``near_state`` in the given time direction.

    After a transient the last section point seeds a Newton iteration on the
    k-th return map (k = 1, then up to ``max_returns``).  Multipliers are the
    eigenvalues of its finite-difference Jacobian.  Cycles found in reverse
    time are unstable for the forward flow.
    """
    config = config or IntegratorConfig(t_end=300.0, atol=1e-10, rtol=1e-10, hmax=0.1)
    model = Model(model)
    sign = _sign(direction)
    prm = params_array(model, params)
    y0 = _check_state(model, near_state)
    t_tr = config.t_end if transient is None else transient
    n_cross = 400
    ct, cy, cnt, status, t, y = K.crossings(int(model), prm, y0, sign, K.RK45, 1e-3, config.atol,
                                            config.rtol, max(t_tr, 1e-9), config.max_steps,
                                            config.hmax, n_cross)
    if status == K.NONFINITE:
        raise NoCycleFound(f"trajectory diverges (t={t:.4g})")
    if status in (K.STEP_LIMIT, K.STEP_UNDERFLOW):
        _raise_status(status, t, "estimate_cycle")
    pmap = _ReturnMap(model, prm, sign, 1e-11, 1e-11, min(config.hmax, 0.1), 1e4)
    if cnt > 0:
        start = pmap.project(cy[cnt - 1])
    else:
        # no section point yet: advance to the first one
        first = K.crossings(int(model), prm, y, sign, K.RK45, 1e-3, config.atol, config.rtol, 1e4,
                            config.max_steps, config.hmax, 1)
        if first[2] == 0:
            raise NoCycleFound("trajectory never returns to the section")
        start = pmap.project(first[1][0])
    eqs = [e.location for e in find_equilibria(model, params)] if model is not Model.HAMILTONIAN else []
    embed = pmap.embed
    anchors = [pmap.project(e) for e in eqs]
    for k in range(1, max_returns + 1):
        res = _newton_cycle(pmap, start, k, tol, anchors)
        if res is None:
            continue
        xi, period, pts, J = res
        xfull = embed(xi)
        if any(np.linalg.norm(xfull - e) < 1e-6 for e in eqs) or period <= 0:
            raise NoCycleFound("return map converged onto an equilibrium")
        mult = tuple(complex(m) for m in np.linalg.eigvals(J)) if J.size else ()
        if sign < 0:
            stability = "unstable"
        else:
            stability = "stable" if all(abs(m) < 1.0 for m in mult) else "unstable"
        trace, amp = _cycle_trace(model, prm, xfull, period)
        return CycleEstimate(period=period, amplitude_x=amp, stability=stability,
                             section_points=np.array(pts[:k]), multipliers=mult,
                             direction=direction, returns=k, trace=trace)
    if cnt >= 2:
        spread = np.max(np.abs(np.diff(cy[-min(cnt, 10):, 0])))
        if spread < 1e-8:
            raise NonConvergentReturns("section points settled but Newton failed")
    # distinguish an approach to a point from genuinely wandering returns
    dists = [np.linalg.norm(y - e) for e in eqs]
    if cnt == 0 or (dists and min(dists) < 1e-3):
        raise NoCycleFound("trajectory converges to an equilibrium")
    raise NonConvergentReturns(f"no fixed point of the first {max_returns} return maps")


def _cycle_trace(model, prm, y0, period, samples=800):
    """Forward trace of one period and the largest x on it."""
    hmax = period / samples
    ts, ys, n, status = K.integrate_path(int(model), prm, y0, 1.0, K.RK45, hmax, 1e-11, 1e-11,
                                         period, 10_000_000, hmax)
    ct, cy, cnt, _, _, _ = K.crossings(int(model), prm, y0, 1.0, K.RK45, hmax, 1e-11, 1e-11,
                                       period * (1.0 + 1e-9), 10_000_000, hmax, 64)
    amp = max(float(np.max(ys[:, 0])), float(np.max(cy[:cnt, 0])) if cnt else -np.inf)
    return ys.copy(), amp


# --- phase-portrait census -------------------------------------------------

@dataclass(frozen=True)
class CycleInfo:
    x_max: float
    x_min: float
    period: float
    stability: str
    encloses: tuple
    confirmed: bool

    def to_dict(self) -> dict:
        return {"x_max": self.x_max, "x_min": self.x_min, "period": self.period,
                "stability": self.stability, "encloses": list(self.encloses),
                "confirmed": self.confirmed}


@dataclass(frozen=True, eq=False)
class PortraitSummary:
    model: Model
    params: object
    equilibria: tuple
    cycles: tuple

    @property
    def stable_cycles(self) -> int:
        return sum(c.stability == "stable" for c in self.cycles)

    @property
    def unstable_cycles(self) -> int:
        return sum(c.stability == "unstable" for c in self.cycles)

    @property
    def stable_equilibria(self) -> tuple:
        return tuple(e.label for e in self.equilibria if e.kind.stable)

    @property
    def unstable_equilibria(self) -> tuple:
        return tuple(e.label for e in self.equilibria if not e.kind.stable)

    @property
    def attractors(self) -> tuple:
        return self.stable_equilibria + tuple(
            f"cycle@{c.x_max:.6g}" for c in self.cycles if c.stability == "stable")

    def nesting(self) -> list:
        """(outer, inner) index pairs of cycles, by x-range containment."""
        out = []
        for i, a in enumerate(self.cycles):
            for j, b in enumerate(self.cycles):
                if i != j and a.x_min < b.x_min and b.x_max < a.x_max:
                    out.append((i, j))
        return out

    def counts(self) -> dict:
        return {"stable cycles": self.stable_cycles, "unstable cycles": self.unstable_cycles,
                "stable equilibria": len(self.stable_equilibria),
                "unstable equilibria": len(self.unstable_equilibria)}

    def to_dict(self) -> dict:
        return {"model": self.model.name.lower(), "params": self.params.to_dict(),
                "counts": self.counts(),
                "equilibria": [e.to_dict() for e in self.equilibria],
                "cycles": [c.to_dict() for c in self.cycles],
                "nesting": self.nesting()}


def _lienard_model(model: Model, params):
    if model in (Model.SYM, Model.ASYM, Model.ROTATED):
        s = params.s if isinstance(params, (SymParams, AsymParams)) else 0.0
        return Model.ROTATED, AsymParams(params.p, params.r, s)
    if model is Model.UNFOLDED:
        if not isinstance(params, UnfoldParams):
            raise InvalidParameters("UNFOLDED expects UnfoldParams")
        return Model.UNFOLDED, params
    raise InvalidParameters(f"census needs a planar dissipative model, got {model.name}")


class _Displacement:
    def __init__(self, model, prm, lo, hi, t_max, rtol):
        self.model, self.prm, self.lo, self.hi = int(model), prm, lo, hi
        self.t_max, self.rtol = t_max, rtol

    def many(self, xs):
        xr, tr, st = K.first_returns(self.model, self.prm, np.asarray(xs, dtype=float),
                                     self.lo, self.hi, 1.0, self.rtol, self.rtol, self.t_max, 0.2)
        return xr - xs, tr, st

    def __call__(self, x):
        d, _, st = self.many(np.array([x]))
        if st[0] not in (0, 5):
            raise _Undefined(x)
        return float(d[0])

    def is_cycle(self, x) -> bool:
        """A root is a cycle only if the orbit closes inside the segment."""
        d, _, st = self.many(np.array([x]))
        return st[0] == 0 and abs(d[0]) < 1e-8 * max(1.0, abs(x))


class _Undefined(Exception):
    pass


def _scan_grid(lo, hi, n, scale=1.0):
    """Scan points in (lo, hi); unbounded rays are dense over a few ``scale``."""
    if math.isfinite(hi):
        w = hi - lo
        return lo + w * (0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, n + 2)[1:-1]))
    near = lo + np.linspace(0.0, 3.0 * scale, n)[1:]
    far = lo + np.geomspace(1e-3 * scale, 8.0, n // 2)
    return np.unique(np.concatenate([near, far]))


def _zeros_of_displacement(disp: _Displacement, xs, d, ok):
    """Roots (x, slope sign) of d on valid stretches, including near-double roots."""
    roots = []
    idx = np.flatnonzero(ok)
    for a, b in zip(idx[:-1], idx[1:]):
        if b != a + 1:
            continue
        if d[a] == 0.0:
            roots.append((xs[a], 0))
        elif d[a] * d[b] < 0:
            try:
                xr = brentq(disp, xs[a], xs[b], xtol=1e-12, rtol=1e-12)
            except _Undefined:
                continue
            if disp.is_cycle(xr):
                roots.append((xr, -1 if d[a] > 0 else 1))
    # local extrema of |d| that stay on one side may hide a pair of close roots
    for i in range(1, len(xs) - 1):
        if not (ok[i - 1] and ok[i] and ok[i + 1]):
            continue
        if d[i - 1] * d[i] <= 0 or d[i] * d[i + 1] <= 0:
            continue
        sgn = np.sign(d[i])
        if not (sgn * d[i] < sgn * d[i - 1] and sgn * d[i] < sgn * d[i + 1]):
            continue
        try:
            res = minimize_scalar(lambda x: sgn * disp(x), bounds=(xs[i - 1], xs[i + 1]),
                                  method="bounded", options={"xatol": 1e-10})
            # res.fun is the least value of sgn * d; dips within noise of zero are ignored
            if res.fun >= -DISPLACEMENT_NOISE:
                continue
            xm = res.x
            left = brentq(disp, xs[i - 1], xm, xtol=1e-12)
            right = brentq(disp, xm, xs[i + 1], xtol=1e-12)
        except (_Undefined, ValueError):
            continue
        if disp.is_cycle(left) and disp.is_cycle(right):
            # d changes sign -sgn then back, so slopes alternate
            roots.append((left, int(-sgn)))
            roots.append((right, int(sgn)))
    return sorted(roots)


def census_attractors(model: Model, params, ic_grid: int = 160,
                      config: IntegratorConfig | None = None,
                      confirm: bool = True) -> PortraitSummary:
    """Equilibria and limit cycles of a planar model, with stability and nesting.

    Every closed orbit of a field x' = y meets {y = 0} exactly at its x-max and
    x-min, and encloses exactly the equilibria between them, so its x-max lies
    between a non-saddle equilibrium and the next equilibrium to the right.
    Those segments are scanned with ``ic_grid`` starting points; sign changes
    of the return displacement give the cycles (decreasing: stable).  With
    ``confirm`` each cycle is re-found by the return-map Newton solver, in
    reverse time for the unstable ones.
    """
    config = config or IntegratorConfig(t_end=200.0, atol=1e-11, rtol=1e-11)
    model = Model(model)
    lmodel, lparams = _lienard_model(model, params)
    prm = params_array(lmodel, lparams)
    reports = find_equilibria(model, params)
    lreports = find_equilibria(lmodel, lparams)
    eq_x = sorted(((float(e.location[0]), e) for e in lreports), key=lambda t: t[0])
    spread = eq_x[-1][0] - eq_x[0][0]
    scale = spread if spread > 1e-6 else 1.0
    cycles = []
    for i, (xe, rep) in enumerate(eq_x):
        if rep.kind is Kind.SADDLE:
            continue
        hi = eq_x[i + 1][0] if i + 1 < len(eq_x) else math.inf
        if hi - xe < 1e-9:
            continue
        xs = _scan_grid(xe, hi, ic_grid, scale)
        disp = _Displacement(lmodel, prm, xe, hi if math.isfinite(hi) else 1e300,
                             config.t_end, config.rtol)
        d, _, st = disp.many(xs)
        ok = (st == 0) | (st == 5)
        for xr, slope in _zeros_of_displacement(disp, xs, d, ok):
            if slope == 0:
                continue
            stab = "stable" if slope < 0 else "unstable"
            cycles.append(_describe_cycle(lmodel, lparams, prm, xr, stab, eq_x, confirm))
    cycles.sort(key=lambda c: (c.x_max, c.x_min))
    return PortraitSummary(model=model, params=params, equilibria=tuple(reports),
                           cycles=tuple(cycles))


def _describe_cycle(lmodel, lparams, prm, xr, stab, eq_x, confirm) -> CycleInfo:
    _, tr, st = K.first_returns(int(lmodel), prm, np.array([xr]), -1e300, 1e300, 1.0, 1e-11,
                                1e-11, 1e4, 0.05)
    period = float(tr[0])
    confirmed = False
    if confirm:
        try:
            est = estimate_cycle(lmodel, lparams, np.array([xr, 0.0]),
                                 "forward" if stab == "stable" else "reverse", transient=0.0)
            # reverse-time section points are still forward x-maxima
            x_est = float(est.section_points[0][0])
            confirmed = abs(x_est - xr) < 1e-5 * max(1.0, abs(xr)) and est.stability == stab
            if confirmed:
                period = est.period
        except NumericalError:
            confirmed = False
    trace, _ = _cycle_trace(lmodel, prm, np.array([xr, 0.0]), period)
    x_min = float(np.min(trace[:, 0]))
    encl = tuple(rep.label for xe, rep in eq_x if x_min < xe < xr)
    return CycleInfo(x_max=float(xr), x_min=x_min, period=period, stability=stab,
                     encloses=encl, confirmed=confirmed)

"""Parameter-plane products: Hopf curves, traced homoclinic and cycle-fold
curves, the region-III sub-partition and x-bar sweeps.

Tracers work column by column: for each p on the grid, r is bisected on a
boolean detector evaluated in the x' = y frame.

* Homoclinic: shoot one branch of the saddle's unstable manifold until it
  meets {y = 0} for the second time.  Landing on the near side of the saddle
  means the branch is captured inside the loop; the detector flips exactly when
  the branch returns to the saddle.
* Cycle fold: a stable cycle surrounding all equilibria exists, decided from
  sign changes of the return displacement on the ray right of the rightmost
  equilibrium.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .curves import BifurcationCurve, CurveKind
from .equilibria import Kind, find_equilibria, hopf_analysis
from .errors import DetectorFailed, InvalidParameters, NumericalError
from .integrate import (IntegratorConfig, _Displacement, _scan_grid, _zeros_of_displacement,
                        random_initial_state)
from .models import AsymParams, Model, MsParams, SymParams, params_array

BISECT_TOL = 1e-5
MANIFOLD_OFFSET = 1e-7


def _params(variant: str, p: float, r: float, s: float):
    if variant == "sym":
        return SymParams(p, r)
    if variant == "asym":
        return AsymParams(p, r, s)
    raise InvalidParameters(f"variant must be 'sym' or 'asym', got {variant!r}")


# --- Hopf curves -----------------------------------------------------------

def _criticality(variant, p, r, s, label):
    try:
        rep = hopf_analysis(variant, _params(variant, p, r, s), label, tol=1e-7)
        return rep.lyapunov
    except Exception:
        return float("nan")


def _hopf_kind(lyap):
    vals = [v for v in lyap if math.isfinite(v)]
    if not vals:
        return CurveKind.HOPF_SUB
    return CurveKind.HOPF_SUPER if np.median(vals) < 0 else CurveKind.HOPF_SUB


def hopf_curves(variant: str = "sym", s: float = 0.0, p_max: float = 3.0, r_max: float = 3.0,
                n: int = 121) -> list[BifurcationCurve]:
    """Closed-form Hopf loci.  Criticality is sampled along each curve."""
    if variant not in ("sym", "asym"):
        raise InvalidParameters(f"variant must be 'sym' or 'asym', got {variant!r}")
    if variant == "asym" and s == 0.0:
        variant = "sym"
    out = []
    p0 = np.linspace(1.0, p_max, n)[1:]
    r0 = np.ones_like(p0)
    lyap0 = [_criticality(variant, p, 1.0, s, "P0") for p in p0]
    out.append(BifurcationCurve(_hopf_kind(lyap0), p0, r0, "P0", meta={"lyapunov": lyap0}))
    rr = np.linspace(1.0, r_max, n)[1:]
    if variant == "sym":
        pp = np.ones_like(rr)
        lyap = [_criticality("sym", 1.0, r, 0.0, "P1") for r in rr]
        out.append(BifurcationCurve(_hopf_kind(lyap), pp, rr, "P1/P2", meta={"lyapunov": lyap}))
        return out
    # trace condition x^2 = r - 1 on the branch x^2 + s x = r - p
    p1 = 1.0 - s * np.sqrt(rr - 1.0)
    keep = p1 > 0
    lyap1 = [_criticality("asym", p, r, s, "P1") for p, r in zip(p1[keep], rr[keep])]
    out.append(BifurcationCurve(_hopf_kind(lyap1), p1[keep], rr[keep], "P1",
                                meta={"lyapunov": lyap1, "branch": "e1"}))
    r_q2 = 1.0 + 0.25 * s * s
    r2 = np.linspace(r_q2, max(r_max, r_q2), n)
    p2 = 1.0 + s * np.sqrt(r2 - 1.0)
    lyap2 = [_criticality("asym", p, r, s, "P2") for p, r in zip(p2[1:], r2[1:])]
    out.append(BifurcationCurve(_hopf_kind(lyap2), p2, r2, "P2",
                                meta={"lyapunov": [float("nan")] + lyap2, "branch": "e2"}))
    return out


# --- detectors -------------------------------------------------------------

def _lienard_equilibria(variant, p, r, s):
    reps = find_equilibria(Model.ROTATED, AsymParams(p, r, s if variant == "asym" else 0.0))
    return sorted(((float(e.location[0]), e) for e in reps), key=lambda t: t[0])


def _middle_saddle(variant, p, r, s):
    eqs = _lienard_equilibria(variant, p, r, s)
    if len(eqs) != 3:
        return None
    xm, rep = eqs[1]
    if rep.kind is not Kind.SADDLE or rep.degenerate:
        return None
    return xm, rep


def homoclinic_side(variant: str, p: float, r: float, s: float = 0.0,
                    branch: str = "right") -> str:
    """'inside' if the unstable-manifold branch is captured within its loop."""
    found = _middle_saddle(variant, p, r, s)
    if found is None:
        raise DetectorFailed(f"no saddle between two equilibria at (p, r) = ({p}, {r})")
    xm, rep = found
    (a, b) = rep.jacobian[1]
    lu = 0.5 * (b + math.sqrt(b * b + 4.0 * a))
    sgn = 1.0 if branch == "right" else -1.0
    eps = sgn * MANIFOLD_OFFSET * max(1.0, abs(xm))
    y0 = np.array([xm + eps, eps * lu])
    prm = params_array(Model.ROTATED, AsymParams(p, r, s if variant == "asym" else 0.0))
    x2, _, status = K.manifold_exit(K.ROTATED, prm, y0, 1.0, 1e-11, 1e-11, 5000.0, 0.05)
    if status == K.TIME_LIMIT:
        # absorbed by a node without turning: captured
        return "inside"
    if status != K.OK:
        return "outside"
    inside = x2 > xm if branch == "right" else x2 < xm
    return "inside" if inside else "outside"


def outer_stable_cycle(variant: str, p: float, r: float, s: float = 0.0,
                       n_scan: int = 120) -> bool:
    """True if a stable cycle has its x-max right of every equilibrium."""
    eqs = _lienard_equilibria(variant, p, r, s)
    xtop = eqs[-1][0]
    spread = xtop - eqs[0][0]
    prm = params_array(Model.ROTATED, AsymParams(p, r, s if variant == "asym" else 0.0))
    disp = _Displacement(Model.ROTATED, prm, xtop, 1e300, 200.0, 1e-11)
    xs = _scan_grid(xtop, math.inf, n_scan, spread if spread > 1e-6 else 1.0)
    d, _, st = disp.many(xs)
    ok = (st == 0) | (st == 5)
    roots = _zeros_of_displacement(disp, xs, d, ok)
    return any(slope < 0 for _, slope in roots)


def _bisect(detector, lo, hi, tol):
    flo, fhi = detector(lo), detector(hi)
    if flo == fhi:
        raise DetectorFailed(f"detector does not change on [{lo}, {hi}] ({flo})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if detector(mid) == flo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), hi - lo, flo, fhi


def _r_floor(variant, p, s):
    """Smallest r at which three distinct equilibria exist."""
    return max(p - 0.25 * s * s, 0.0) if variant == "asym" else p


def _auto_branch(variant, p, s):
    if variant == "sym" or p < 1.0:
        return "right"
    return "left"


def homoclinic_r(variant: str, p: float, s: float = 0.0, branch: str = "auto",
                 window: tuple | None = None, tol: float = BISECT_TOL) -> tuple:
    """(r, achieved width, saddle label, branch) of the homoclinic at this p."""
    if branch == "auto":
        branch = _auto_branch(variant, p, s)
    if window is None:
        lo = _r_floor(variant, p, s)
        lo += 1e-6 * max(1.0, lo)
        if variant == "asym" and p > 1.0 and branch == "left":
            lo = max(lo, p + 1e-6)
        hi = max(lo, 1.0) + 0.5
        # the curve lies above r = 1 near the organizing center; widen until it is bracketed
        for _ in range(8):
            if homoclinic_side(variant, p, hi, s, branch) != homoclinic_side(variant, p, lo, s, branch):
                break
            hi = lo + 2.0 * (hi - lo)
    else:
        lo, hi = window
    r, width, _, _ = _bisect(lambda rr: homoclinic_side(variant, p, rr, s, branch), lo, hi, tol)
    label = _middle_saddle(variant, p, r, s)[1].label
    return r, width, label, branch


def fold_r(variant: str, p: float, s: float = 0.0, window: tuple | None = None,
           tol: float = BISECT_TOL) -> tuple:
    """(r, achieved width) of the cycle fold at this p."""
    if window is None:
        r_hc = homoclinic_r(variant, p, s)[0]
        if variant == "sym" or p < 1.0:
            window = (_r_floor(variant, p, s) + 1e-6, r_hc)
        else:
            window = (r_hc + 1e-3, r_hc + 3.0)
    lo, hi = window
    r, width, _, _ = _bisect(lambda rr: outer_stable_cycle(variant, p, rr, s), lo, hi, tol)
    return r, width


def _p_grid(p_range, step):
    a, b = p_range
    n = max(1, int(round(abs(b - a) / step)))
    return np.linspace(a, b, n + 1)


def trace_homoclinic(variant: str = "sym", s: float = 0.0, p_range=(0.5, 0.99),
                     step: float = 0.05, branch: str = "auto",
                     tol: float = BISECT_TOL) -> BifurcationCurve:
    ps = _p_grid(p_range, step)
    rs, widths, saddles = [], [], []
    used = branch
    for p in ps:
        r, w, label, used = homoclinic_r(variant, float(p), s, branch, tol=tol)
        rs.append(r)
        widths.append(w)
        saddles.append(label)
    assoc = saddles[0] if len(set(saddles)) == 1 else "/".join(sorted(set(saddles)))
    return BifurcationCurve(CurveKind.HOMOCLINIC, ps, np.array(rs), assoc, provenance="traced",
                            tolerance=np.array(widths),
                            meta={"variant": variant, "s": s, "branch": used, "saddle": saddles})


def trace_cycle_fold(variant: str = "sym", s: float = 0.0, p_range=(0.5, 0.99),
                     step: float = 0.05, tol: float = BISECT_TOL) -> BifurcationCurve:
    ps = _p_grid(p_range, step)
    rs, widths = [], []
    for p in ps:
        r, w = fold_r(variant, float(p), s, tol=tol)
        rs.append(r)
        widths.append(w)
    return BifurcationCurve(CurveKind.CYCLE_FOLD, ps, np.array(rs), "cycles", provenance="traced",
                            tolerance=np.array(widths), meta={"variant": variant, "s": s})


def tangent_slope(kind: str, variant: str = "sym", s: float = 0.0,
                  delta: float = 2e-3) -> float:
    """Slope (r-1)/(p-1) of a traced curve at (1, 1), Richardson-extrapolated in p."""
    def slope(d):
        p = 1.0 - d
        r = homoclinic_r(variant, p, s, tol=1e-9 * d / 1e-3)[0] if kind == "homoclinic" \
            else fold_r(variant, p, s, tol=1e-9 * d / 1e-3)[0]
        return (r - 1.0) / (p - 1.0)
    return 2.0 * slope(delta) - slope(2.0 * delta)


@dataclass
class Subpartition:
    """Region-III sub-labels of the symmetric model from traced curves.

    IIIa lies above the homoclinic curve, IIIb between it and the cycle fold,
    IIIc below the fold.  Columns are traced on demand and cached.
    """

    tol: float = BISECT_TOL
    _cache: dict = field(default_factory=dict, repr=False)

    def column(self, p: float) -> tuple:
        if p not in self._cache:
            r_hc = homoclinic_r("sym", p, tol=self.tol)[0]
            r_f = fold_r("sym", p, window=(p + 1e-6, r_hc), tol=self.tol)[0]
            self._cache[p] = (r_f, r_hc)
        return self._cache[p]

    def sublabel(self, p: float, r: float) -> str:
        if not (p < 1.0 and r > p):
            raise InvalidParameters(f"(p, r) = ({p}, {r}) is not in region III")
        r_f, r_hc = self.column(p)
        if r > r_hc:
            return "IIIa"
        return "IIIb" if r > r_f else "IIIc"

    def curves(self, p_range=(0.5, 0.99), step: float = 0.05) -> list[BifurcationCurve]:
        ps = _p_grid(p_range, step)
        cols = [self.column(float(p)) for p in ps]
        fold = BifurcationCurve(CurveKind.CYCLE_FOLD, ps, np.array([c[0] for c in cols]), "cycles",
                                provenance="traced", tolerance=np.full(len(ps), self.tol),
                                meta={"boundary": "IIIb/IIIc"})
        hc = BifurcationCurve(CurveKind.HOMOCLINIC, ps, np.array([c[1] for c in cols]), "P0",
                              provenance="traced", tolerance=np.full(len(ps), self.tol),
                              meta={"boundary": "IIIa/IIIb"})
        return [hc, fold]


def region3_subpartition(s: float = 0.0, tol: float = BISECT_TOL) -> Subpartition:
    if s != 0.0:
        raise InvalidParameters("the region-III sub-partition is defined for the symmetric model")
    return Subpartition(tol=tol)


# --- x-bar sweeps ----------------------------------------------------------

STATUS_NAMES = {0: "ok", 1: "step-limit", 2: "diverged", 3: "step-underflow", 4: "time-limit",
                6: "not-converged", 7: "invalid"}


@dataclass(eq=False)
class SweepGrid:
    """x-bar over a (p, r) grid; ``values[i, j]`` belongs to (r_axis[i], p_axis[j])."""

    model: Model
    p_axis: np.ndarray
    r_axis: np.ndarray
    values: np.ndarray
    status: np.ndarray
    seed: int
    fixed: dict
    config: IntegratorConfig
    transient_fraction: float = 0.5

    @property
    def failures(self) -> int:
        return int(np.count_nonzero(self.status != 0))

    def cell_params(self, i: int, j: int):
        return _sweep_params(self.model, float(self.p_axis[j]), float(self.r_axis[i]), self.fixed)

    def initial_state(self, i: int, j: int) -> np.ndarray:
        return random_initial_state(self.seed, self.model.dim, i * self.p_axis.size + j)

    def classify(self, tol: float = 1e-3) -> np.ndarray:
        out = np.empty(self.values.shape, dtype=object)
        for i in range(self.r_axis.size):
            for j in range(self.p_axis.size):
                if self.status[i, j] != 0:
                    out[i, j] = "failed"
                    continue
                out[i, j] = classify_xbar(self.model, self.cell_params(i, j), self.values[i, j], tol)
        return out

    def same_as(self, other: "SweepGrid") -> bool:
        return (np.array_equal(self.values, other.values, equal_nan=True)
                and np.array_equal(self.status, other.status)
                and np.array_equal(self.p_axis, other.p_axis)
                and np.array_equal(self.r_axis, other.r_axis))


def classify_xbar(model: Model, params, value: float, tol: float = 1e-3) -> str:
    """'trivial', 'equilibrium' or 'cycle' by comparing x-bar with the equilibria."""
    for rep in find_equilibria(model, params):
        if abs(value - rep.location[0]) < tol:
            return "trivial" if rep.label == "P0" else "equilibrium"
    return "cycle"


def _sweep_params(model: Model, p: float, r: float, fixed: dict):
    if model is Model.SYM:
        return SymParams(p, r)
    if model is Model.ASYM:
        return AsymParams(p, r, fixed["s"])
    if model is Model.MS:
        return MsParams(p, fixed["q"], r, fixed.get("s", 0.0)).validate()
    raise InvalidParameters(f"sweeps support ms, sym and asym, not {model.name}")


def sweep_xbar(model: Model, fixed: dict | None, p_axis, r_axis, seed: int,
               config: IntegratorConfig | None = None, transient_fraction: float = 0.5,
               tol: float = 1e-4, retry_factor: float = 4.0) -> SweepGrid:
    """One random initial condition per cell; failures are recorded, not raised.

    Cells whose half-window sups disagree are re-run once from the same initial
    state with the horizon stretched by ``retry_factor`` (0 disables this);
    slowly decaying spirals near a Hopf line need it.
    """
    model = Model(model)
    fixed = dict(fixed or {})
    config = config or IntegratorConfig(t_end=500.0, atol=1e-8, rtol=1e-8)
    p_axis = np.asarray(p_axis, dtype=float)
    r_axis = np.asarray(r_axis, dtype=float)
    if p_axis.size == 0 or r_axis.size == 0:
        raise InvalidParameters("axes must be nonempty")
    npc, nr = p_axis.size, r_axis.size
    prms = np.zeros((nr * npc, 4))
    y0s = np.zeros((nr * npc, model.dim))
    valid = np.ones(nr * npc, dtype=bool)
    for i in range(nr):
        for j in range(npc):
            k = i * npc + j
            try:
                prms[k] = params_array(model, _sweep_params(model, p_axis[j], r_axis[i], fixed))
            except InvalidParameters:
                valid[k] = False
            y0s[k] = random_initial_state(seed, model.dim, k)
    sa, sb, st = K.window_sup_batch(int(model), prms[valid], y0s[valid], config.method_id,
                                    config.step, config.atol, config.rtol, config.t_end,
                                    transient_fraction * config.t_end, config.max_steps,
                                    config.hmax)
    values = np.full(nr * npc, np.nan)
    status = np.full(nr * npc, 7, dtype=np.int64)
    vals = np.maximum(sa, sb)
    stv = st.copy()
    stv[(stv == 0) & (np.abs(sa - sb) > tol)] = 6
    redo = np.flatnonzero(stv == 6)
    if retry_factor > 0 and redo.size:
        t2 = retry_factor * config.t_end
        sa2, sb2, st2 = K.window_sup_batch(int(model), prms[valid][redo], y0s[valid][redo],
                                           config.method_id, config.step, config.atol,
                                           config.rtol, t2, transient_fraction * t2,
                                           int(config.max_steps), config.hmax)
        vals[redo] = np.maximum(sa2, sb2)
        st2 = st2.copy()
        st2[(st2 == 0) & (np.abs(sa2 - sb2) > tol)] = 6
        stv[redo] = st2
    vals[(stv != 0) & (stv != 6)] = np.nan
    values[valid] = vals
    status[valid] = stv
    return SweepGrid(model=model, p_axis=p_axis, r_axis=r_axis, values=values.reshape(nr, npc),
                     status=status.reshape(nr, npc), seed=int(seed), fixed=fixed, config=config,
                     transient_fraction=transient_fraction)

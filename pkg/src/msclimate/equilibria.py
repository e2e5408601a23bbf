"""Equilibria, Jacobians, linear stability, parameter-plane regions, Hopf and BT points.

Eigenvalues come from the characteristic polynomial: closed-form quadratic for
planar fields, and for the three-variable model the trigonometric form of the
cubic when all roots are real and Cardano's formula otherwise, each root then
polished by two complex Newton steps.  No general eigensolver is involved.

The asymmetric region boundaries are all closed form:

    d0   r = p                     (P0 determinant)
    sd   r = p - s^2/4             (P1, P2 born in a saddle-node; 'd2' below Q2)
    e0   r = 1, p > 1              (P0 trace)
    e1   p = 1 - s sqrt(r - 1)     (P1 trace, left branch of the Hopf parabola)
    e2   p = 1 + s sqrt(r - 1),  r > 1 + s^2/4   (P2 trace)

They follow from trace = r - 1 - x*^2 and det = p - r + 3 x*^2 + 2 s x* with x*
on the corresponding branch.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import BifurcationCurve, CurveKind
from .errors import BoundaryPoint, NotOnHopfCurve
from .models import AsymParams, Model, MsParams, SymParams, UnfoldParams, params_array

NONHYPERBOLIC_TOL = 1e-9
BOUNDARY_TOL = 1e-9


class Kind(str, enum.Enum):
    STABLE_NODE = "stable node"
    STABLE_SPIRAL = "stable spiral"
    UNSTABLE_NODE = "unstable node"
    UNSTABLE_SPIRAL = "unstable spiral"
    SADDLE = "saddle"
    NONHYPERBOLIC = "nonhyperbolic"

    @property
    def stable(self) -> bool:
        return self in (Kind.STABLE_NODE, Kind.STABLE_SPIRAL)


@dataclass
class EquilibriumReport:
    location: np.ndarray
    jacobian: np.ndarray
    eigenvalues: tuple
    kind: Kind
    label: str
    degenerate: bool = False

    @property
    def stable(self) -> bool:
        return self.kind.stable

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "location": [float(v) for v in self.location],
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
            "eigenvalues": [[float(ev.real), float(ev.imag)] for ev in self.eigenvalues],
            "kind": self.kind.value,
            "stable": self.stable,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class RegionLabel:
    variant: str
    label: str
    sublabel: str | None = None
    notes: tuple = ()

    @property
    def name(self) -> str:
        return self.sublabel or self.label

    def to_dict(self) -> dict:
        return {"variant": self.variant, "label": self.label, "sublabel": self.sublabel,
                "notes": list(self.notes)}


@dataclass(frozen=True)
class HopfReport:
    label: str
    criticality: str
    lyapunov: float
    omega: float

    def to_dict(self) -> dict:
        return {"label": self.label, "criticality": self.criticality,
                "lyapunov": self.lyapunov, "omega": self.omega}


@dataclass(frozen=True)
class BTPoint:
    name: str
    p: float
    r: float
    equilibrium: str
    trace: float
    det: float
    meta: dict = field(default_factory=dict)


# --- polynomial roots ------------------------------------------------------

def _quadratic_roots(tr: float, det: float) -> tuple[complex, complex]:
    """Roots of z^2 - tr z + det, cancellation-free in the real case."""
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        sq = math.sqrt(disc)
        qq = 0.5 * (tr + math.copysign(sq, tr)) if tr != 0.0 else 0.5 * sq
        if qq == 0.0:
            return complex(0.0), complex(0.0)
        z1, z2 = qq, det / qq
        return complex(max(z1, z2)), complex(min(z1, z2))
    im = 0.5 * math.sqrt(-disc)
    return complex(0.5 * tr, im), complex(0.5 * tr, -im)


def _cubic_roots(a: float, b: float, c: float) -> tuple[complex, complex, complex]:
    """Roots of z^3 + a z^2 + b z + c.

    Depressed form t^3 + P t + Q with z = t - a/3.  Three real roots (D <= 0)
    use the cosine form with principal arccos; otherwise the real root comes
    from real cube roots and the conjugate pair from Vieta.
    """
    P = b - a * a / 3.0
    Q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    D = (Q / 2.0) ** 2 + (P / 3.0) ** 3
    shift = -a / 3.0
    if D <= 0.0 and P < 0.0:
        m = 2.0 * math.sqrt(-P / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * Q / (P * m)))
        th = math.acos(arg) / 3.0
        roots = [complex(m * math.cos(th - 2.0 * math.pi * k / 3.0) + shift) for k in range(3)]
    else:
        sq = math.sqrt(max(D, 0.0))
        u = np.cbrt(-Q / 2.0 + sq)
        v = np.cbrt(-Q / 2.0 - sq)
        t1 = float(u + v)
        re = -0.5 * t1
        im = 0.5 * math.sqrt(3.0) * float(u - v)
        roots = [complex(t1 + shift), complex(re + shift, im), complex(re + shift, -im)]

    def poly(z):
        return ((z + a) * z + b) * z + c

    def dpoly(z):
        return (3.0 * z + 2.0 * a) * z + b

    out = []
    for z in roots:
        for _ in range(3):
            d = dpoly(z)
            if d == 0:
                break
            step = poly(z) / d
            z = z - step
            if abs(step) <= 1e-16 * max(1.0, abs(z)):
                break
        out.append(z)
    if abs(out[1].imag) > 0 and abs(out[1].imag) < 1e-14 * max(1.0, abs(out[1])):
        out = [complex(z.real) for z in out]
    return tuple(sorted(out, key=lambda z: (-z.real, -z.imag)))


def characteristic_coefficients(J: np.ndarray) -> tuple:
    J = np.asarray(J, dtype=float)
    if J.shape == (2, 2):
        return (float(np.trace(J)), float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]))
    if J.shape == (3, 3):
        tr = float(np.trace(J))
        m2 = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
                   + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
                   + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
        det = float(J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
                    - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
                    + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0]))
        return (tr, m2, det)
    raise ValueError(f"unsupported Jacobian shape {J.shape}")


def eigenvalues(J) -> tuple:
    coeffs = characteristic_coefficients(J)
    if len(coeffs) == 2:
        return _quadratic_roots(*coeffs)
    tr, m2, det = coeffs
    return _cubic_roots(-tr, m2, -det)


def characteristic_residual(J, lam: complex) -> float:
    coeffs = characteristic_coefficients(J)
    if len(coeffs) == 2:
        tr, det = coeffs
        return abs(lam * lam - tr * lam + det)
    tr, m2, det = coeffs
    return abs(((lam - tr) * lam + m2) * lam - det)


# --- equilibria ------------------------------------------------------------

def _branch_roots(p: float, r: float, s: float):
    """Nonzero equilibria x1* >= x2* of x^2 + s x - (r - p) = 0, or None."""
    D = s * s + 4.0 * (r - p)
    scale = max(s * s, 4.0 * abs(r - p), 1e-300)
    if D < -1e-14 * scale:
        return None
    if D <= 1e-14 * scale:
        return -0.5 * s, -0.5 * s, True
    sq = math.sqrt(D)
    # x1 = (sq - s)/2 rewritten to avoid cancellation when r is close to p
    x1 = 2.0 * (r - p) / (s + sq) if s + sq > 0 else 0.0
    x2 = -0.5 * (s + sq)
    return x1, x2, False


def jacobian(model: Model, params, location) -> np.ndarray:
    model = Model(model)
    prm = params_array(model, params)
    y = np.asarray(location, dtype=float)
    if model is Model.MS:
        p, q, r, s = prm
        x, yy, z = y
        return np.array([[-1.0, -1.0, 0.0],
                         [0.0, r - z * z, -p + 2.0 * s * z - 2.0 * yy * z],
                         [-q, 0.0, -q]])
    if model in (Model.SYM, Model.ASYM):
        p, r, s = prm[0], prm[1], (prm[2] if model is Model.ASYM else 0.0)
        x, yy = y
        return np.array([[-1.0, -1.0], [p + 2.0 * s * x - 2.0 * x * yy, r - x * x]])
    if model is Model.ROTATED:
        p, r, s = prm[0], prm[1], prm[2]
        x, yy = y
        return np.array([[0.0, 1.0],
                         [(r - p) - 2.0 * (s + yy) * x - 3.0 * x * x, (r - 1.0) - x * x]])
    if model is Model.UNFOLDED:
        lam, mu, eta = prm[0], prm[1], prm[2]
        u, v = y
        return np.array([[0.0, 1.0],
                         [mu - 3.0 * u * u - 2.0 * eta * u * v, eta * (lam - u * u)]])
    mu = prm[0]
    u, _ = y
    return np.array([[0.0, 1.0], [mu - 3.0 * u * u, 0.0]])


def classify_stability(J) -> tuple[tuple, Kind]:
    """Eigenvalues and linear type of a 2x2 or 3x3 Jacobian."""
    ev = eigenvalues(J)
    re = [z.real for z in ev]
    if any(abs(v) < NONHYPERBOLIC_TOL for v in re):
        return ev, Kind.NONHYPERBOLIC
    if len(ev) == 2:
        tr, det = characteristic_coefficients(J)
        if det < 0:
            return ev, Kind.SADDLE
        spiral = tr * tr - 4.0 * det < 0
        if tr < 0:
            return ev, Kind.STABLE_SPIRAL if spiral else Kind.STABLE_NODE
        return ev, Kind.UNSTABLE_SPIRAL if spiral else Kind.UNSTABLE_NODE
    if max(re) < 0:
        return ev, Kind.STABLE_SPIRAL if any(z.imag != 0 for z in ev) else Kind.STABLE_NODE
    if min(re) > 0:
        return ev, Kind.UNSTABLE_SPIRAL if any(z.imag != 0 for z in ev) else Kind.UNSTABLE_NODE
    return ev, Kind.SADDLE


def equilibrium_report(model: Model, params, location, label: str,
                       degenerate: bool = False) -> EquilibriumReport:
    loc = np.asarray(location, dtype=float)
    J = jacobian(model, params, loc)
    ev, kind = classify_stability(J)
    return EquilibriumReport(location=loc, jacobian=J, eigenvalues=ev, kind=kind, label=label,
                             degenerate=degenerate)


def equilibrium_coordinates(model: Model, params) -> list[tuple[str, np.ndarray, bool]]:
    """(label, location, degenerate) for every equilibrium, without linearization."""
    model = Model(model)
    prm = params_array(model, params)
    if model in (Model.UNFOLDED, Model.HAMILTONIAN):
        mu = prm[1] if model is Model.UNFOLDED else prm[0]
        out = [("P0", np.zeros(2), mu == 0.0)]
        if mu > 0:
            sq = math.sqrt(mu)
            out += [("P1", np.array([sq, 0.0]), False), ("P2", np.array([-sq, 0.0]), False)]
        return out
    if model is Model.MS:
        p, _, r, s = prm
    elif model is Model.SYM:
        p, r, s = prm[0], prm[1], 0.0
    else:
        p, r, s = prm[0], prm[1], prm[2]
    roots = _branch_roots(p, r, s)

    def place(x):
        if model is Model.MS:
            return np.array([x, -x, -x])
        if model is Model.ROTATED:
            return np.array([x, 0.0])
        return np.array([x, -x])

    out = [("P0", place(0.0), False)]
    if roots is None:
        return out
    x1, x2, double = roots
    coincide = x1 == 0.0 or x2 == 0.0
    if coincide:
        out[0] = ("P0", place(0.0), True)
    if model is Model.SYM and x1 == 0.0:
        return out
    out.append(("P1", place(x1), bool(double or x1 == 0.0)))
    out.append(("P2", place(x2), bool(double or x2 == 0.0)))
    return out


def find_equilibria(model: Model, params) -> list[EquilibriumReport]:
    return [equilibrium_report(model, params, loc, label, degenerate)
            for label, loc, degenerate in equilibrium_coordinates(model, params)]


# --- regions ---------------------------------------------------------------

SYM_STABLE = {"O": {"P0"}, "I": set(), "II": set(), "III": {"P1", "P2"}}
ASYM_STABLE = {"Oa": {"P0", "P2"}, "Ob": {"P0"}, "I": set(), "IIa": set(),
               "III": {"P1", "P2"}, "IIIo": {"P2"}}


def spiral_node_curves(p: float) -> dict:
    """r-values of the node/spiral boundaries of the symmetric model at this p.

    P0 is a node iff p <= (r+1)^2/4; P1, P2 are nodes iff (p-1)^2 >= 8 (r - p).
    """
    c1 = 2.0 * math.sqrt(p) - 1.0
    return {"C1": c1, "C2": p + (p - 1.0) ** 2 / 8.0}


def _sym_region(p, r):
    if r < p:
        if r < 1.0:
            return "O"
        return "I"
    if p < 1.0:
        return "III"
    return "II"


def _sym_distances(p, r):
    d = {"pitchfork": abs(r - p)}
    if p >= 1.0 - BOUNDARY_TOL:
        d["hopf-P0"] = abs(r - 1.0)
    if r >= 1.0 - BOUNDARY_TOL:
        d["hopf-P1P2"] = abs(p - 1.0)
    return d


def asym_boundaries(p: float, r: float, s: float) -> dict:
    """Signed offsets of (p, r) from each asymmetric boundary curve (r-offset or p-offset)."""
    out = {"d0": r - p, "sd": r - (p - 0.25 * s * s)}
    if p >= 1.0 - BOUNDARY_TOL:
        out["e0"] = r - 1.0
    if r > 1.0:
        out["e1"] = p - (1.0 - s * math.sqrt(r - 1.0))
        if r > 1.0 + 0.25 * s * s:
            out["e2"] = p - (1.0 + s * math.sqrt(r - 1.0))
    return out


def _asym_region(p, r, s):
    exists = r > p - 0.25 * s * s
    p0_stable = r < 1.0 and r < p
    if p0_stable:
        return "Oa" if exists else "Ob"
    if not exists:
        return "I"
    p1_stable = r > p and (r <= 1.0 or p < 1.0 - s * math.sqrt(r - 1.0))
    if p1_stable:
        return "III"
    p2_stable = r <= 1.0 + 0.25 * s * s or p < 1.0 + s * math.sqrt(r - 1.0)
    return "IIIo" if p2_stable else "IIa"


def region_classify(params, variant: str = "sym", subpartition=None,
                    boundary_tol: float = BOUNDARY_TOL) -> RegionLabel:
    """Region of (p, r) in the stability atlas of the planar models.

    ``subpartition`` may be any object with ``sublabel(p, r)`` (see
    :func:`msclimate.bifurcation.region3_subpartition`); it refines region III
    of the symmetric model into IIIa/IIIb/IIIc.
    """
    p, r = float(params.p), float(params.r)
    if variant == "sym":
        dist = _sym_distances(p, r)
        hits = [k for k, v in dist.items() if v < boundary_tol]
        if hits:
            raise BoundaryPoint(f"(p, r) = ({p}, {r}) lies on {', '.join(hits)}", hits)
        label = _sym_region(p, r)
        c = spiral_node_curves(p)
        notes = []
        notes.append("P0 node" if r >= c["C1"] else "P0 spiral")
        if r > p:
            notes.append("P1/P2 node" if r <= c["C2"] else "P1/P2 spiral")
        sub = None
        if label == "III" and subpartition is not None:
            sub = subpartition.sublabel(p, r)
        return RegionLabel("sym", label, sub, tuple(notes))
    if variant == "asym":
        s = float(params.s)
        offs = asym_boundaries(p, r, s)
        hits = [k for k, v in offs.items() if abs(v) < boundary_tol]
        if hits:
            raise BoundaryPoint(f"(p, r, s) = ({p}, {r}, {s}) lies on {', '.join(hits)}", hits)
        label = _asym_region(p, r, s)
        return RegionLabel("asym", label)
    raise ValueError(f"unknown variant {variant!r}")


def stable_labels(model: Model, params) -> set[str]:
    return {rep.label for rep in find_equilibria(model, params) if rep.stable}


# --- Hopf ------------------------------------------------------------------

def _lienard(p, r, s):
    """f, f', f'' and g', g'' of x'' + g(x) x' + f(x) = 0 for the planar models."""
    def f1(x):
        return 3.0 * x * x + 2.0 * s * x - (r - p)

    def f2(x):
        return 6.0 * x + 2.0 * s

    def g1(x):
        return 2.0 * x

    def g2(x):
        return 2.0

    return f1, f2, g1, g2


def hopf_analysis(variant: str, params, label: str, tol: float = NONHYPERBOLIC_TOL) -> HopfReport:
    """First Lyapunov coefficient of a Hopf point of the planar models.

    With f, g from the Lienard form,  l* = (w/8) (f'' g' - f' g'') / f'^2  at x*,
    and w = sqrt(f'(x*)).
    """
    if variant == "sym":
        model, prm = Model.SYM, SymParams(params.p, params.r)
        s = 0.0
    elif variant == "asym":
        model, prm = Model.ASYM, AsymParams(params.p, params.r, params.s)
        s = float(params.s)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    eqs = {lab: loc for lab, loc, _ in equilibrium_coordinates(model, prm)}
    if label not in eqs:
        raise NotOnHopfCurve(f"{label} does not exist at {params}")
    x = float(eqs[label][0])
    J = jacobian(model, prm, eqs[label])
    tr, det = characteristic_coefficients(J)
    if abs(tr) > tol or det <= 0:
        raise NotOnHopfCurve(f"{label} has trace {tr:.3e}, det {det:.3e}; not a Hopf point")
    f1, f2, g1, g2 = _lienard(params.p, params.r, s)
    fp = f1(x)
    omega = math.sqrt(fp)
    ell = omega / 8.0 * (f2(x) * g1(x) - fp * g2(x)) / (fp * fp)
    return HopfReport(label=label, criticality="supercritical" if ell < 0 else "subcritical",
                      lyapunov=ell, omega=omega)


def hopf_frequencies(r: float, p: float, s: float) -> dict:
    """Natural frequencies on e0, e1, e2 (asymmetric model)."""
    out = {"P0": math.sqrt(p - 1.0) if p > 1 else float("nan")}
    if r > 1:
        w = math.sqrt(r - 1.0)
        out["P1"] = math.sqrt(2.0 * (r - 1.0) + s * w)
        a = 2.0 * (r - 1.0) - s * w
        out["P2"] = math.sqrt(a) if a > 0 else float("nan")
    return out


# --- codimension-2 and codimension-1 loci -----------------------------------

def _rotated_trace_det(p, r, s, x):
    J = jacobian(Model.ROTATED, AsymParams(p, r, s), np.array([x, 0.0]))
    tr, det = characteristic_coefficients(J)
    return tr, det


def bt_points(variant: str = "sym", s: float = 0.0) -> list[BTPoint]:
    if variant == "sym":
        tr, det = _rotated_trace_det(1.0, 1.0, 0.0, 0.0)
        return [BTPoint("Q", 1.0, 1.0, "P0/P1/P2", tr, det)]
    if variant != "asym":
        raise ValueError(f"unknown variant {variant!r}")
    q1 = BTPoint("Q1", 1.0, 1.0, "P0", *_rotated_trace_det(1.0, 1.0, s, 0.0))
    p2, r2 = 1.0 + 0.5 * s * s, 1.0 + 0.25 * s * s
    # P1 and P2 coincide at x* = -s/2 on the shifted diagonal
    q2 = BTPoint("Q2", p2, r2, "P1/P2", *_rotated_trace_det(p2, r2, s, -0.5 * s))
    return [q1, q2]


def codim1_loci(variant: str = "sym", s: float = 0.0, p_max: float = 3.0,
                n: int = 121) -> list[BifurcationCurve]:
    if variant == "sym":
        p = np.linspace(0.0, p_max, n)
        return [BifurcationCurve(CurveKind.PITCHFORK, p, p.copy(), "P0/P1/P2")]
    if variant != "asym":
        raise ValueError(f"unknown variant {variant!r}")
    pt = np.linspace(0.0, 1.0, max(2, n // 3))
    p_sd = np.linspace(0.25 * s * s, p_max, n)
    return [
        BifurcationCurve(CurveKind.TRANSCRITICAL, pt, pt.copy(), "P0/P1"),
        BifurcationCurve(CurveKind.SADDLE_NODE_EQ, p_sd, p_sd - 0.25 * s * s, "P1/P2",
                         meta={"q2_p": 1.0 + 0.5 * s * s}),
    ]

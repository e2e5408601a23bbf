"""Hamiltonian orbits of the unfolded system and their Melnikov integrals.

At eta = 0 the unfolded field is Hamiltonian with

    H(u, v) = v^2/2 - mu u^2/2 + u^4/4.

Closed orbits are labelled by their largest u-value ``x`` (the level is then
H(x, 0)).  For mu = +1 the right-hand family splits into inner orbits
(1 < x < sqrt 2) around (1, 0), the homoclinic loop x = sqrt 2, and outer orbits
x > sqrt 2 around all three equilibria; for mu = -1 every x > 0 gives a simple
orbit around the origin.

The Melnikov function of the perturbation eta (lambda - u^2) v is
M(lambda, x) = lambda I0(x) - I2(x), with I_k = \\oint u^k v du over the clockwise
orbit, so its zeros are lambda = R(x) = I2/I0, and the sign of R'(x) at a zero
gives the stability of the persisting cycle (R' > 0 stable).

Quadrature.  On the orbit  2(h - U(u)) = (b^2 - u^2)(u^2 - c^2)/2  with
b = x and c^2 = 2 mu - x^2.  Writing the u-range as [a, b] and
u = m + w sin(theta), the endpoint factor sqrt((b-u)(u-a)) becomes w cos(theta)
and

    I_k = 2 \\int_{-pi/2}^{pi/2} u^k w^2 cos^2(theta) sqrt(G(u)/2) dtheta,

with G smooth and positive on the orbit.  The same substitution turns
dI_k/dh = 2 \\int u^k / v du into a regular integral, which gives R'(x)
without differencing.

General mu reduces to mu = +-1 by u = sqrt|mu| U, v = |mu| V:
I_k^mu(x) = |mu|^((k+3)/2) I_k^(+-1)(x / sqrt|mu|).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .errors import AtThreshold, InvalidParameters, NonFiniteState
from .models import hamiltonian_value
from .quadrature import gauss_kronrod

SQRT2 = math.sqrt(2.0)
HOMOCLINIC_LAMBDA = 0.8
QUAD_RTOL = 1e-13
# orbits this close to sqrt 2 are treated as the homoclinic loop itself
HOMOCLINIC_SNAP = 1e-14


@dataclass(frozen=True)
class HamiltonianOrbit:
    mu: float
    x: float
    kind: str
    level: float

    @classmethod
    def from_label(cls, x: float, mu: float = 1.0) -> "HamiltonianOrbit":
        if mu == 0:
            raise InvalidParameters("mu = 0 has no closed-orbit family")
        sx = x / math.sqrt(abs(mu))
        if mu > 0:
            if sx <= 1.0:
                raise InvalidParameters(f"label x must exceed sqrt(mu) for mu > 0, got {x}")
            if abs(sx - SQRT2) <= HOMOCLINIC_SNAP:
                kind = "homoclinic"
            elif sx < SQRT2:
                kind = "inner"
            else:
                kind = "outer"
        else:
            if x <= 0:
                raise InvalidParameters(f"label x must be positive, got {x}")
            kind = "simple"
        return cls(mu=float(mu), x=float(x), kind=kind,
                   level=float(hamiltonian_value((x, 0.0), mu)))

    @classmethod
    def homoclinic(cls, mu: float = 1.0) -> "HamiltonianOrbit":
        return cls(mu=float(mu), x=SQRT2 * math.sqrt(mu), kind="homoclinic", level=0.0)


@dataclass(frozen=True)
class MelnikovSample:
    x: float
    I0: float
    I2: float
    R: float
    dR: float = float("nan")


def level_of(x: float, mu: float = 1.0) -> float:
    return float(hamiltonian_value((x, 0.0), mu))


def _canonical(orbit: HamiltonianOrbit):
    scale = math.sqrt(abs(orbit.mu))
    return orbit.x / scale, (1.0 if orbit.mu > 0 else -1.0), scale


def _geometry(x: float, sign: float, kind: str):
    """(a, b, G) for the canonical orbit; see the module docstring."""
    b = x
    c2 = 2.0 * sign - x * x
    if kind == "inner":
        a = math.sqrt(c2)

        def G(u):
            return (b + u) * (u + a)
    elif kind == "homoclinic":
        a = 0.0

        def G(u):
            return (b + u) * u
    else:
        a = -x

        def G(u):
            return u * u - c2
    return a, b, G


def _integrals(x: float, sign: float, kind: str, derivative: bool = False,
               rtol: float = QUAD_RTOL):
    a, b, G = _geometry(x, sign, kind)
    m = 0.5 * (a + b)
    w = 0.5 * (b - a)
    half = 0.5 * math.pi

    def integrand(k):
        def f(th):
            u = m + w * np.sin(th)
            return 2.0 * u ** k * (w * np.cos(th)) ** 2 * np.sqrt(0.5 * np.maximum(G(u), 0.0))
        return f

    i0, _ = gauss_kronrod(integrand(0), -half, half, rtol=rtol)
    i2, _ = gauss_kronrod(integrand(2), -half, half, rtol=rtol)
    if not derivative:
        return i0, i2
    if kind == "homoclinic":
        return i0, i2, float("inf"), float("inf")

    def dintegrand(k):
        def f(th):
            u = m + w * np.sin(th)
            return 2.0 * u ** k / np.sqrt(0.5 * G(u))
        return f

    d0, _ = gauss_kronrod(dintegrand(0), -half, half, rtol=rtol * 10)
    d2, _ = gauss_kronrod(dintegrand(2), -half, half, rtol=rtol * 10)
    return i0, i2, d0, d2


def orbit_quadrature(orbit: HamiltonianOrbit, moment: int) -> float:
    """The contour integral of u^moment v du over the clockwise orbit."""
    if moment not in (0, 2):
        raise ValueError("moment must be 0 or 2")
    x, sign, scale = _canonical(orbit)
    i0, i2 = _integrals(x, sign, orbit.kind)
    val = i0 if moment == 0 else i2
    return val * scale ** (moment + 3)


def sample(x: float, mu: float = 1.0, derivative: bool = True) -> MelnikovSample:
    orbit = HamiltonianOrbit.from_label(x, mu)
    cx, sign, scale = _canonical(orbit)
    if derivative:
        i0, i2, d0, d2 = _integrals(cx, sign, orbit.kind, derivative=True)
        dh = -sign * cx + cx ** 3
        dI0, dI2 = d0 * dh, d2 * dh
        dR = (dI2 * i0 - i2 * dI0) / (i0 * i0) if math.isfinite(d0) else -math.inf
    else:
        i0, i2 = _integrals(cx, sign, orbit.kind)
        dR = float("nan")
    # R^mu(x) = |mu| R(x/sqrt|mu|) and R^mu'(x) = sqrt|mu| R'(x/sqrt|mu|)
    return MelnikovSample(x=x, I0=i0 * scale ** 3, I2=i2 * scale ** 5,
                          R=(i2 / i0) * scale ** 2, dR=dR * scale)


def R(x: float, mu: float = 1.0) -> float:
    return sample(x, mu, derivative=False).R


def dR(x: float, mu: float = 1.0) -> float:
    return sample(x, mu, derivative=True).dR


def melnikov(lam: float, x: float, mu_sign: float = 1.0) -> float:
    orbit = HamiltonianOrbit.from_label(x, mu_sign)
    return lam * orbit_quadrature(orbit, 0) - orbit_quadrature(orbit, 2)


@dataclass
class RCurve:
    mu_sign: float
    samples: list
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def x(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def R(self) -> np.ndarray:
        return np.array([s.R for s in self.samples])


def _runs(x, sgn):
    """Maximal runs of constant sign as [(x_start, x_end, sign)]."""
    out = []
    start = 0
    for i in range(1, len(sgn) + 1):
        if i == len(sgn) or sgn[i] != sgn[start]:
            out.append((float(x[start]), float(x[i - 1]), int(sgn[start])))
            start = i
    return out


def R_curve(mu_sign: float, x_grid) -> RCurve:
    xs = np.asarray(x_grid, dtype=float)
    if mu_sign > 0 and np.any(xs <= 1.0):
        raise InvalidParameters("mu = +1 labels must exceed 1")
    if mu_sign < 0 and np.any(xs <= 0.0):
        raise InvalidParameters("mu = -1 labels must be positive")
    samples = [sample(float(x), mu_sign, derivative=True) for x in xs]
    slope = np.sign([s.dR for s in samples]).astype(int)
    meta = {"monotone_runs": [
        {"from": a, "to": b, "trend": "increasing" if sg > 0 else "decreasing"}
        for a, b, sg in _runs(xs, slope)]}
    return RCurve(mu_sign=mu_sign, samples=samples, metadata=meta)


def golden_section_min(f, a: float, b: float, xtol: float = 1e-7):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


_FOLD_CACHE: dict = {}


def find_fold(mu_sign: float = 1.0, xtol: float = 1e-7) -> tuple[float, float]:
    """Minimizer x* of R beyond the homoclinic orbit, and lambda* = R(x*)."""
    if mu_sign <= 0:
        raise InvalidParameters("R has no interior minimum for mu < 0")
    key = xtol
    if key not in _FOLD_CACHE:
        _FOLD_CACHE[key] = golden_section_min(lambda x: R(x, 1.0), SQRT2 * (1 + 1e-9), 2.0, xtol)
    return _FOLD_CACHE[key]


@dataclass(frozen=True)
class PredictedCycle:
    x: float
    kind: str
    stability: str
    multiplicity: int = 1


@dataclass(frozen=True)
class UnfoldedCensus:
    lam: float
    mu_sign: float
    cycles: tuple

    def counts(self) -> dict:
        out: dict = {}
        for c in self.cycles:
            key = f"{c.stability} {c.kind}"
            out[key] = out.get(key, 0) + c.multiplicity
        return out


def _upper_bracket(target, x0, mu):
    hi = max(2.0 * x0, 2.0)
    while R(hi, mu) < target:
        hi *= 2.0
    return hi


def cycle_census_unfolded(lam: float, mu_sign: float = 1.0,
                          threshold_tol: float = 1e-6) -> UnfoldedCensus:
    """Leading-order limit cycles of the unfolded system for small eta > 0."""
    cycles = []
    if mu_sign > 0:
        xs, lam_s = find_fold(1.0)
        for thr in (HOMOCLINIC_LAMBDA, lam_s):
            if abs(lam - thr) < threshold_tol:
                raise AtThreshold(f"lambda = {lam} is within {threshold_tol} of {thr}")
        if HOMOCLINIC_LAMBDA < lam < 1.0:
            xr = brentq(lambda x: R(x) - lam, 1.0 + 1e-12, SQRT2 * (1 - 1e-12), xtol=1e-12)
            cycles.append(PredictedCycle(xr, "inner", "unstable", 2))
        if lam_s < lam < HOMOCLINIC_LAMBDA:
            xr = brentq(lambda x: R(x) - lam, SQRT2 * (1 + 1e-12), xs, xtol=1e-12)
            cycles.append(PredictedCycle(xr, "outer", "unstable"))
        if lam > lam_s:
            hi = _upper_bracket(lam, xs, 1.0)
            xr = brentq(lambda x: R(x) - lam, xs, hi, xtol=1e-12)
            cycles.append(PredictedCycle(xr, "outer", "stable"))
    else:
        if lam > 0:
            hi = _upper_bracket(lam, 1.0, -1.0)
            xr = brentq(lambda x: R(x, -1.0) - lam, 1e-6, hi, xtol=1e-12)
            cycles.append(PredictedCycle(xr, "simple", "stable"))
    for c in cycles:
        d = dR(c.x, mu_sign)
        expect = "stable" if d > 0 else "unstable"
        if expect != c.stability:
            raise AssertionError(f"R' sign {d} contradicts {c}")
    return UnfoldedCensus(lam=lam, mu_sign=mu_sign, cycles=tuple(cycles))


def time_domain_integrals(x: float, mu: float = 1.0, rtol: float = 1e-12) -> tuple:
    """(I0, I2, period) by integrating the Hamiltonian flow over one period.

    Independent of the contour quadrature: the running integrals of v^2 and
    u^2 v^2 ride along as extra state components.
    """
    y0 = np.array([x, 0.0, 0.0, 0.0])
    prm = np.array([mu, 0.0, 0.0, 0.0])
    ct, cy, cnt, status, _, _ = K.crossings(K.HAM_QUAD, prm, y0, 1.0, K.RK45, 1e-3, rtol * 1e-2,
                                            rtol, 1e4, 50_000_000, 0.05, 1)
    if cnt != 1:
        raise NonFiniteState(f"orbit x={x} did not close (status {status})")
    return float(cy[0, 2]), float(cy[0, 3]), float(ct[0])


def homoclinic_sech_integrals() -> tuple:
    """I0, I2 on the homoclinic loop from its closed-form time parametrization."""
    from scipy.integrate import quad

    def v2(t):
        return 2.0 * (np.tanh(t) / np.cosh(t)) ** 2

    def u2v2(t):
        return 2.0 / np.cosh(t) ** 2 * v2(t)

    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
    i0 = 2.0 * quad(v2, 0.0, 40.0, **opts)[0]
    i2 = 2.0 * quad(u2v2, 0.0, 40.0, **opts)[0]
    return i0, i2

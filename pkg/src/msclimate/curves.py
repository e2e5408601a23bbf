from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class CurveKind(str, enum.Enum):
    HOPF_SUPER = "hopf-super"
    HOPF_SUB = "hopf-sub"
    HOMOCLINIC = "homoclinic"
    CYCLE_FOLD = "cycle-fold"
    PITCHFORK = "pitchfork"
    TRANSCRITICAL = "transcritical"
    SADDLE_NODE_EQ = "saddle-node-eq"


@dataclass
class BifurcationCurve:
    """A bifurcation locus in the (p, r) plane as a polyline over p.

    ``tolerance`` holds the per-point bisection width for traced curves and is
    empty for closed-form ones.
    """

    kind: CurveKind
    p: np.ndarray
    r: np.ndarray
    association: str
    provenance: str = "closed-form"
    tolerance: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = CurveKind(self.kind)
        self.p = np.asarray(self.p, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.p.shape != self.r.shape:
            raise ValueError("p and r must have the same shape")

    def __len__(self):
        return self.p.size

    def r_at(self, p: float) -> float:
        """Linear interpolation of r(p); NaN outside the traced range."""
        order = np.argsort(self.p)
        pp, rr = self.p[order], self.r[order]
        ok = np.isfinite(rr)
        pp, rr = pp[ok], rr[ok]
        if pp.size == 0 or p < pp[0] or p > pp[-1]:
            return float("nan")
        return float(np.interp(p, pp, rr))

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "association": self.association,
            "provenance": self.provenance,
            "p": [float(v) for v in self.p],
            "r": [float(v) for v in self.r],
            "meta": self.meta,
        }
        if self.tolerance is not None:
            out["tolerance"] = [float(v) for v in self.tolerance]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "BifurcationCurve":
        tol = d.get("tolerance")
        return cls(kind=d["kind"], p=np.array(d["p"]), r=np.array(d["r"]),
                   association=d["association"], provenance=d.get("provenance", "closed-form"),
                   tolerance=None if tol is None else np.array(tol), meta=d.get("meta", {}))

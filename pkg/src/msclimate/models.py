"""Model variants of the Maasch-Saltzman climate system and the maps between them.

Variables are dimensionless anomalies: x ice mass, y atmospheric CO2, z North
Atlantic Deep Water volume.  One unit of dimensionless time is about 10 Kyr.

The dimensional equations (with b0 = 0, as in the original model) are carried
here only through :func:`nondimensionalize`; simulation always happens in
nondimensional form.  The reference scales used for the hatted coefficients are
not fixed numerically, so :class:`HatParams` has no default.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels as K
from .errors import InvalidParameters

__all__ = [
    "KYR_PER_TIME_UNIT",
    "Model",
    "MsParams",
    "SymParams",
    "AsymParams",
    "UnfoldParams",
    "HatParams",
    "ms_vector_field",
    "sym_vector_field",
    "asym_vector_field",
    "rotated_vector_field",
    "unfolded_vector_field",
    "hamiltonian_vector_field",
    "hamiltonian_value",
    "vector_field",
    "to_rotated",
    "from_rotated",
    "unfolding_map",
    "pencil_line",
    "pencil_slope",
    "nondimensionalize",
]

KYR_PER_TIME_UNIT = 10.0


class Model(enum.IntEnum):
    MS = K.MS
    SYM = K.SYM
    ASYM = K.ASYM
    ROTATED = K.ROTATED
    UNFOLDED = K.UNFOLDED
    HAMILTONIAN = K.HAMILTONIAN

    @property
    def dim(self) -> int:
        return 3 if self is Model.MS else 2

    @property
    def planar(self) -> bool:
        return self is not Model.MS

    @property
    def lienard_frame(self) -> bool:
        """True when the field already has the form x' = y."""
        return self in (Model.ROTATED, Model.UNFOLDED, Model.HAMILTONIAN)

    @property
    def params_type(self):
        return _PARAMS_TYPE[self]


def _require(cond: bool, msg: str):
    if not cond:
        raise InvalidParameters(msg)


@dataclass(frozen=True)
class MsParams:
    """Parameters of the three-variable model.

    ``q > 1`` is the modelling assumption (NADW relaxes faster than ice); it is
    enforced by :meth:`validate`, while construction only requires ``q > 0`` so
    that degenerate coefficient sets can still be represented.
    """

    p: float
    q: float
    r: float
    s: float = 0.0

    def __post_init__(self):
        _require(self.p > 0, f"p must be positive, got {self.p}")
        _require(self.q > 0, f"q must be positive, got {self.q}")
        _require(self.r > 0, f"r must be positive, got {self.r}")
        _require(self.s >= 0, f"s must be nonnegative, got {self.s}")

    def validate(self) -> "MsParams":
        _require(self.q > 1, f"q > 1 violated (q={self.q})")
        return self

    def to_array(self) -> np.ndarray:
        return np.array([self.p, self.q, self.r, self.s], dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SymParams:
    p: float
    r: float

    def __post_init__(self):
        _require(self.p > 0, f"p must be positive, got {self.p}")
        _require(self.r > 0, f"r must be positive, got {self.r}")

    @property
    def s(self) -> float:
        return 0.0

    def validate(self) -> "SymParams":
        return self

    def to_array(self) -> np.ndarray:
        return np.array([self.p, self.r, 0.0, 0.0], dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AsymParams:
    p: float
    r: float
    s: float

    def __post_init__(self):
        _require(self.p > 0, f"p must be positive, got {self.p}")
        _require(self.r > 0, f"r must be positive, got {self.r}")
        _require(self.s >= 0, f"s must be nonnegative, got {self.s}")

    def validate(self) -> "AsymParams":
        return self

    def to_array(self) -> np.ndarray:
        return np.array([self.p, self.r, self.s, 0.0], dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class UnfoldParams:
    """Parameters of the rescaled system near the organizing center.

    ``eta = 0`` is accepted and gives the Hamiltonian limit.
    """

    lam: float
    mu: float
    eta: float

    def __post_init__(self):
        _require(self.eta >= 0, f"eta must be nonnegative, got {self.eta}")

    def validate(self) -> "UnfoldParams":
        return self

    def to_array(self) -> np.ndarray:
        return np.array([self.lam, self.mu, self.eta, 0.0], dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HatParams:
    a1h: float
    b1h: float
    b2h: float
    b3h: float
    b4h: float
    c0h: float
    c2h: float


_PARAMS_TYPE = {
    Model.MS: MsParams,
    Model.SYM: SymParams,
    Model.ASYM: AsymParams,
    Model.ROTATED: AsymParams,
    Model.UNFOLDED: UnfoldParams,
    Model.HAMILTONIAN: UnfoldParams,
}


def params_array(model: Model, params) -> np.ndarray:
    model = Model(model)
    if model in (Model.ASYM, Model.ROTATED) and isinstance(params, SymParams):
        params = AsymParams(params.p, params.r, 0.0)
    if not isinstance(params, model.params_type):
        raise InvalidParameters(
            f"{model.name} expects {model.params_type.__name__}, got {type(params).__name__}")
    if model is Model.HAMILTONIAN:
        return np.array([params.mu, 0.0, 0.0, 0.0])
    return params.to_array()


def _state(state, n: int) -> np.ndarray:
    arr = np.asarray(state, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"expected a state of length {n}, got shape {arr.shape}")
    return arr


def vector_field(model: Model, state, params) -> np.ndarray:
    model = Model(model)
    return K.rhs(int(model), _state(state, model.dim), params_array(model, params), 1.0)


def ms_vector_field(state, params: MsParams) -> np.ndarray:
    return vector_field(Model.MS, state, params)


def sym_vector_field(state, params: SymParams) -> np.ndarray:
    return vector_field(Model.SYM, state, params)


def asym_vector_field(state, params: AsymParams) -> np.ndarray:
    return vector_field(Model.ASYM, state, params)


def rotated_vector_field(state, params: AsymParams) -> np.ndarray:
    """Field in the frame (x, -(x+y)) -> (x, y); ``SymParams`` gives the s = 0 case."""
    return vector_field(Model.ROTATED, state, params)


def unfolded_vector_field(state, params: UnfoldParams) -> np.ndarray:
    return vector_field(Model.UNFOLDED, state, params)


def hamiltonian_vector_field(state, mu: float) -> np.ndarray:
    return vector_field(Model.HAMILTONIAN, state, UnfoldParams(0.0, mu, 0.0))


def hamiltonian_value(state, mu: float) -> float:
    u, v = _state(state, 2)
    return 0.5 * v * v - 0.5 * mu * u * u + 0.25 * u ** 4


def to_rotated(state) -> np.ndarray:
    """Original (x, y) to the frame where the planar models read x' = y."""
    arr = np.asarray(state, dtype=float)
    return np.stack([arr[..., 0], -(arr[..., 0] + arr[..., 1])], axis=-1)


def from_rotated(state) -> np.ndarray:
    arr = np.asarray(state, dtype=float)
    return np.stack([arr[..., 0], -(arr[..., 0] + arr[..., 1])], axis=-1)


def unfolding_map(p: float, r: float, eta: float) -> UnfoldParams:
    """(p, r) at scale eta to (lambda, mu)."""
    _require(eta > 0, f"eta must be positive, got {eta}")
    return UnfoldParams(lam=(r - 1.0) / eta ** 2, mu=(r - p) / eta ** 2, eta=eta)


def pencil_line(lam: float, mu: float, eta: float) -> tuple[float, float]:
    """The (p, r) point with the given unfolding coordinates.

    All eta share the same line through (1, 1):  (lam - mu)(r - 1) = lam (p - 1).
    """
    _require(eta > 0, f"eta must be positive, got {eta}")
    return 1.0 + (lam - mu) * eta ** 2, 1.0 + lam * eta ** 2


def pencil_slope(lam: float, mu: float = 1.0) -> float:
    """Slope (r - 1)/(p - 1) of the pencil line labelled by lambda."""
    if lam == mu:
        return math.inf
    return lam / (lam - mu)


def nondimensionalize(hats: HatParams) -> MsParams:
    for name, val in asdict(hats).items():
        if name == "b3h":
            _require(val >= 0, f"{name} must be nonnegative, got {val}")
        else:
            _require(val > 0, f"{name} must be positive, got {val}")
    h = hats
    return MsParams(
        p=h.a1h * h.b2h * h.c0h / h.c2h,
        q=h.c2h,
        r=h.b1h,
        s=h.a1h * h.b3h * h.c0h / (h.c2h * math.sqrt(h.b4h)),
    )

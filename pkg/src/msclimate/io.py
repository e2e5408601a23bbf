"""File formats: versioned CSV, JSON, raw binary matrices and minimal SVG.

Floats are written with ``repr`` so every value round-trips exactly.  Each CSV
starts with one comment line ``# msclimate <kind> v<SCHEMA_VERSION> key=value ...``.
All writes go to a temporary file in the target directory and are renamed
into place.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .curves import BifurcationCurve
from .integrate import IntegratorConfig, OrbitRecord
from .models import Model

SCHEMA_VERSION = 1
TRIVIAL_TOL = 1e-4


def fmt(v) -> str:
    return repr(float(v))


def atomic_write(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _header(kind: str, **meta) -> str:
    extra = " ".join(f"{k}={v}" for k, v in meta.items())
    return f"# msclimate {kind} v{SCHEMA_VERSION}" + (f" {extra}" if extra else "") + "\n"


def _parse_header(line: str) -> tuple[str, int, dict]:
    parts = line[1:].split()
    if len(parts) < 3 or parts[0] != "msclimate":
        raise ValueError(f"not an msclimate CSV header: {line!r}")
    meta = dict(p.split("=", 1) for p in parts[3:])
    return parts[1], int(parts[2].lstrip("v")), meta


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# --- orbits ----------------------------------------------------------------

_STATE_NAMES = {3: ("x", "y", "z"), 2: ("x", "y")}


def orbit_csv(record: OrbitRecord) -> str:
    names = _STATE_NAMES[record.states.shape[1]]
    lines = [_header("orbit", model=record.model.name.lower(), direction=record.direction),
             ",".join(("t",) + names) + "\n"]
    for t, y in zip(record.times, record.states):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in y]) + "\n")
    return "".join(lines)


def orbit_dict(record: OrbitRecord) -> dict:
    return {"schema": SCHEMA_VERSION, "kind": "orbit", "model": record.model.name.lower(),
            "params": record.params.to_dict(), "seed": record.seed,
            "config": record.config.to_dict(), "direction": record.direction,
            "times": [float(t) for t in record.times],
            "states": [[float(v) for v in y] for y in record.states]}


def read_orbit_csv(path) -> tuple[np.ndarray, np.ndarray, dict]:
    with open(path) as fh:
        kind, _, meta = _parse_header(fh.readline())
        if kind != "orbit":
            raise ValueError(f"expected an orbit file, got {kind}")
        fh.readline()
        data = np.array([[float(v) for v in ln.split(",")] for ln in fh if ln.strip()])
    return data[:, 0], data[:, 1:], meta


def orbit_from_dict(d: dict) -> OrbitRecord:
    model = Model[d["model"].upper()]
    params = model.params_type(**d["params"])
    return OrbitRecord(model=model, params=params, times=np.array(d["times"]),
                       states=np.array(d["states"]), config=IntegratorConfig(**d["config"]),
                       seed=d["seed"], direction=d["direction"])


# --- Melnikov samples ------------------------------------------------------

def rcurve_csv(curve) -> str:
    lines = [_header("rcurve", mu_sign=fmt(curve.mu_sign)), "x,I0,I2,R,dR\n"]
    for s in curve:
        lines.append(",".join(fmt(v) for v in (s.x, s.I0, s.I2, s.R, s.dR)) + "\n")
    return "".join(lines)


# --- sweeps ----------------------------------------------------------------

def sweep_csv(grid) -> str:
    lines = [_header("sweep", model=grid.model.name.lower(), seed=grid.seed),
             "p,r,xbar,status\n"]
    for i, r in enumerate(grid.r_axis):
        for j, p in enumerate(grid.p_axis):
            lines.append(f"{fmt(p)},{fmt(r)},{fmt(grid.values[i, j])},{int(grid.status[i, j])}\n")
    return "".join(lines)


def sweep_header(grid, matrix_file: str) -> dict:
    return {"schema": SCHEMA_VERSION, "kind": "sweep", "model": grid.model.name.lower(),
            "seed": grid.seed, "fixed": grid.fixed, "config": grid.config.to_dict(),
            "transient_fraction": grid.transient_fraction,
            "p_axis": [float(v) for v in grid.p_axis], "r_axis": [float(v) for v in grid.r_axis],
            "matrix": {"file": matrix_file, "dtype": "<f8", "order": "C",
                       "shape": list(grid.values.shape), "rows": "r", "cols": "p"},
            "status": [[int(v) for v in row] for row in grid.status]}


def write_sweep(grid, directory, stem: str = "sweep") -> list[Path]:
    directory = Path(directory)
    bin_name = f"{stem}.bin"
    out = [atomic_write(directory / f"{stem}.csv", sweep_csv(grid)),
           atomic_write(directory / bin_name, grid.values.astype("<f8").tobytes(order="C")),
           atomic_write(directory / f"{stem}.json", dumps_json(sweep_header(grid, bin_name)))]
    return out


def read_sweep(json_path) -> tuple[dict, np.ndarray]:
    json_path = Path(json_path)
    head = json.loads(json_path.read_text())
    m = head["matrix"]
    raw = (json_path.parent / m["file"]).read_bytes()
    return head, np.frombuffer(raw, dtype=m["dtype"]).reshape(m["shape"])


# --- curves ----------------------------------------------------------------

def curves_csv(curves: list[BifurcationCurve]) -> str:
    lines = [_header("curves"), "curve,kind,association,provenance,p,r,tolerance\n"]
    for k, c in enumerate(curves):
        tol = c.tolerance if c.tolerance is not None else [float("nan")] * len(c)
        for p, r, t in zip(c.p, c.r, tol):
            lines.append(f"{k},{c.kind.value},{c.association},{c.provenance},"
                         f"{fmt(p)},{fmt(r)},{fmt(t)}\n")
    return "".join(lines)


# --- SVG -------------------------------------------------------------------

_PALETTE = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#222222"]
XBAR_COLORS = {"trivial": "#b8e0a8", "equilibrium": "#2e7d32", "cycle": "#f39c12",
               "failed": "#9e9e9e"}


def xbar_bin(value: float) -> str:
    if not np.isfinite(value):
        return "failed"
    if abs(value) <= TRIVIAL_TOL:
        return "trivial"
    return "equilibrium" if value < 0 else "cycle"


class _Frame:
    def __init__(self, xlim, ylim, width, height, pad=50):
        self.xlim, self.ylim, self.w, self.h, self.pad = xlim, ylim, width, height, pad

    def X(self, x):
        a, b = self.xlim
        return self.pad + (x - a) / (b - a or 1.0) * (self.w - 2 * self.pad)

    def Y(self, y):
        a, b = self.ylim
        return self.h - self.pad - (y - a) / (b - a or 1.0) * (self.h - 2 * self.pad)

    def axes(self, xlabel, ylabel, title):
        p, w, h = self.pad, self.w, self.h
        out = [f'<rect x="{p}" y="{p}" width="{w - 2 * p}" height="{h - 2 * p}" '
               'fill="none" stroke="black"/>',
               f'<text x="{w / 2}" y="{h - 12}" text-anchor="middle">{xlabel}</text>',
               f'<text x="14" y="{h / 2}" transform="rotate(-90 14 {h / 2})" '
               f'text-anchor="middle">{ylabel}</text>',
               f'<text x="{w / 2}" y="{p - 16}" text-anchor="middle">{title}</text>']
        for v in np.linspace(*self.xlim, 5):
            out.append(f'<text x="{self.X(v):.2f}" y="{h - p + 16}" font-size="10" '
                       f'text-anchor="middle">{v:.3g}</text>')
        for v in np.linspace(*self.ylim, 5):
            out.append(f'<text x="{p - 6}" y="{self.Y(v) + 3:.2f}" font-size="10" '
                       f'text-anchor="end">{v:.3g}</text>')
        return out


def _svg(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'font-family="sans-serif" font-size="12">\n' + "\n".join(body) + "\n</svg>\n")


def svg_lines(series, xlabel="t", ylabel="", title="", width=720, height=420) -> str:
    """``series`` is a list of (xs, ys, label) tuples."""
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    fr = _Frame((xs[ok].min(), xs[ok].max()), (ys[ok].min(), ys[ok].max()), width, height)
    body = fr.axes(xlabel, ylabel, title)
    for k, (sx, sy, label) in enumerate(series):
        col = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{fr.X(a):.2f},{fr.Y(b):.2f}" for a, b in zip(sx, sy)
                       if np.isfinite(a) and np.isfinite(b))
        body.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.2" points="{pts}"/>')
        body.append(f'<text x="{width - 60}" y="{60 + 16 * k}" fill="{col}">{label}</text>')
    return _svg(width, height, body)


def svg_heatmap(grid, curves=(), title="xbar(p, r)", width=640, height=640) -> str:
    """Three-way x-bar map (trivial / equilibrium / cycle) with optional curve overlay."""
    p, r = grid.p_axis, grid.r_axis
    dp = (p[-1] - p[0]) / max(len(p) - 1, 1) or 1.0
    dr = (r[-1] - r[0]) / max(len(r) - 1, 1) or 1.0
    fr = _Frame((p[0] - dp / 2, p[-1] + dp / 2), (r[0] - dr / 2, r[-1] + dr / 2), width, height)
    body = []
    cw = fr.X(p[0] + dp) - fr.X(p[0])
    ch = fr.Y(r[0]) - fr.Y(r[0] + dr)
    for i, rv in enumerate(r):
        for j, pv in enumerate(p):
            v = grid.values[i, j] if grid.status[i, j] in (0, 6) else float("nan")
            col = XBAR_COLORS[xbar_bin(v)]
            body.append(f'<rect x="{fr.X(pv - dp / 2):.2f}" y="{fr.Y(rv + dr / 2):.2f}" '
                        f'width="{cw:.2f}" height="{ch:.2f}" fill="{col}"/>')
    body += fr.axes("p", "r", title)
    for k, c in enumerate(curves):
        col = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{fr.X(a):.2f},{fr.Y(b):.2f}" for a, b in zip(c.p, c.r)
                       if np.isfinite(b))
        body.append(f'<polyline fill="none" stroke="{col}" stroke-width="2" points="{pts}">'
                    f'<title>{c.kind.value}</title></polyline>')
    return _svg(width, height, body)


def svg_curves(curves, title="bifurcation curves", width=640, height=640) -> str:
    series = [(c.p, c.r, f"{c.kind.value} ({c.association})") for c in curves]
    return svg_lines(series, xlabel="p", ylabel="r", title=title, width=width, height=height)

"""Joint kinematics from 2-D pose landmark time series.

Landmarks come in as a CSV (one row per video frame, ``<name>_x``,
``<name>_y`` and optional ``<name>_v`` visibility columns). From those we
compute interior joint angles, angular velocity by finite differences and
the RMS angular speed that is used to rank candidate harvesting joints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence, TextIO

import numpy as np

from . import tables
from .errors import (
    DegenerateGeometryError,
    DuplicateKeyError,
    InputError,
    InsufficientDataError,
    ParseError,
)

DEFAULT_VISIBILITY_THRESHOLD = 0.5
DEFAULT_SMOOTHING_WINDOW = 5
GAITS = ("walking", "running")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_increasing(t: np.ndarray, what: str) -> None:
    if t.ndim != 1:
        raise InputError(f"{what}: timestamps must be one-dimensional")
    if not np.all(np.isfinite(t)):
        raise InputError(f"{what}: non-finite timestamp")
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        i = int(bad[0]) + 1
        raise InputError(f"{what}: timestamps not strictly increasing at index {i} (t={t[i]!r})")


@dataclass(frozen=True)
class LandmarkSeries:
    """Timestamped 2-D landmark positions, stored column-wise.

    ``xy[name]`` is an ``(n, 2)`` array, ``visibility[name]`` an ``(n,)``
    array or ``None`` when the source carried no visibility column.
    """

    names: tuple[str, ...]
    t: np.ndarray
    xy: Mapping[str, np.ndarray]
    visibility: Mapping[str, np.ndarray | None]
    sample_rate: float

    def __post_init__(self):
        t = _frozen(self.t)
        object.__setattr__(self, "t", t)
        if t.size == 0:
            raise InsufficientDataError("no frames")
        _check_increasing(t, "landmark series")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InputError(f"sample_rate must be positive, got {self.sample_rate!r}")
        if len(set(self.names)) != len(self.names):
            raise InputError("duplicate landmark names")
        xy, vis = {}, {}
        for name in self.names:
            if name not in self.xy:
                raise InputError(f"landmark {name!r} declared but has no positions")
            p = _frozen(self.xy[name])
            if p.shape != (t.size, 2):
                raise InputError(f"landmark {name!r}: expected shape {(t.size, 2)}, got {p.shape}")
            if not np.all(np.isfinite(p)):
                raise InputError(f"landmark {name!r}: non-finite position")
            xy[name] = p
            v = self.visibility.get(name) if self.visibility else None
            if v is not None:
                v = _frozen(v)
                if v.shape != (t.size,):
                    raise InputError(f"landmark {name!r}: visibility shape mismatch")
                if not np.all((v >= 0) & (v <= 1)):
                    raise InputError(f"landmark {name!r}: visibility outside [0, 1]")
            vis[name] = v
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "visibility", vis)

    @classmethod
    def from_arrays(cls, t, positions: Mapping[str, Sequence], visibility=None,
                    sample_rate: float | None = None) -> "LandmarkSeries":
        t = np.asarray(t, dtype=float)
        if sample_rate is None:
            if t.size < 2:
                raise InputError("cannot infer sample_rate from fewer than 2 frames")
            sample_rate = 1.0 / float(np.median(np.diff(t)))
        return cls(tuple(positions), t, dict(positions), dict(visibility or {}), float(sample_rate))

    def __len__(self) -> int:
        return int(self.t.size)

    def frame(self, i: int) -> tuple[float, dict[str, tuple[float, float, float | None]]]:
        """Row view ``(t, {name: (x, y, visibility)})`` of frame ``i``."""
        out = {}
        for name in self.names:
            v = self.visibility[name]
            out[name] = (float(self.xy[name][i, 0]), float(self.xy[name][i, 1]),
                         None if v is None else float(v[i]))
        return float(self.t[i]), out


@dataclass(frozen=True)
class JointDefinition:
    """A joint as three landmarks; the angle is measured at ``vertex``."""

    name: str
    proximal: str
    vertex: str
    distal: str

    def __post_init__(self):
        if len({self.proximal, self.vertex, self.distal}) != 3:
            raise InputError(f"joint {self.name!r}: landmarks must be three distinct names")

    @property
    def landmarks(self) -> tuple[str, str, str]:
        return (self.proximal, self.vertex, self.distal)


@dataclass(frozen=True)
class AngleSeries:
    joint: str
    t: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        t, theta = _frozen(self.t), _frozen(self.theta)
        if t.shape != theta.shape:
            raise InputError("angle series: t and theta differ in length")
        _check_increasing(t, f"angle series {self.joint!r}")
        if not np.all((theta >= 0) & (theta <= math.pi)):
            raise InputError(f"angle series {self.joint!r}: theta outside [0, pi]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "theta", theta)

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True)
class OmegaSeries:
    joint: str
    t: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        t, omega = _frozen(self.t), _frozen(self.omega)
        if t.shape != omega.shape:
            raise InputError("omega series: t and omega differ in length")
        _check_increasing(t, f"omega series {self.joint!r}")
        if not np.all(np.isfinite(omega)):
            raise InputError(f"omega series {self.joint!r}: non-finite value")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "omega", omega)

    def __len__(self) -> int:
        return int(self.t.size)


# -- landmark CSV -------------------------------------------------------------

_AXES = ("x", "y", "z", "v")


def _parse_header(header: list[str], source) -> tuple[list[str], dict[tuple[str, str], int]]:
    if not header or header[0] != "t":
        raise ParseError("first column must be 't'", row=1, source=source)
    names: list[str] = []
    cols: dict[tuple[str, str], int] = {}
    for i, col in enumerate(header[1:], start=1):
        name, sep, axis = col.rpartition("_")
        if not sep or not name or axis not in _AXES:
            raise ParseError(f"unrecognised column {col!r}; expected <name>_x/_y/_v", row=1,
                             source=source)
        if name not in names:
            names.append(name)
        cols[(name, axis)] = i
    for name in names:
        if (name, "x") not in cols or (name, "y") not in cols:
            raise ParseError(f"landmark {name!r} needs both _x and _y columns", row=1, source=source)
    if not names:
        raise ParseError("no landmark columns in header", row=1, source=source)
    return names, cols


def parse_landmark_series(stream: TextIO, sample_rate: float | None = None,
                          source=None) -> LandmarkSeries:
    """Parse the landmark CSV format into a validated :class:`LandmarkSeries`.

    Errors carry the offending line number (the header is line 1). A
    ``<name>_z`` column is accepted and ignored. ``sample_rate`` defaults
    to the reciprocal of the median frame interval.
    """
    header, rows = tables.read_rows(stream, source=source)
    names, cols = _parse_header(header, source)
    if not rows:
        raise ParseError("no frames", source=source)

    n = len(rows)
    t = np.empty(n)
    xy = {name: np.empty((n, 2)) for name in names}
    vis = {name: (np.empty(n) if (name, "v") in cols else None) for name in names}
    for k, (lineno, cells) in enumerate(rows):
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(cells)}", row=lineno,
                             source=source)
        t[k] = tables.parse_float(cells[0], row=lineno, column="t", source=source)
        if k and t[k] <= t[k - 1]:
            raise ParseError(f"timestamp {cells[0]} is not after previous {t[k - 1]!r}",
                             row=lineno, source=source)
        for name in names:
            for j, axis in enumerate("xy"):
                cell = cells[cols[(name, axis)]]
                if cell == "":
                    raise ParseError(f"missing landmark {name!r}", row=lineno, source=source)
                xy[name][k, j] = tables.parse_float(cell, row=lineno, column=f"{name}_{axis}",
                                                    source=source)
            if vis[name] is not None:
                v = tables.parse_float(cells[cols[(name, "v")]], row=lineno,
                                       column=f"{name}_v", source=source)
                if not 0.0 <= v <= 1.0:
                    raise ParseError(f"visibility {v!r} for {name!r} outside [0, 1]",
                                     row=lineno, source=source)
                vis[name][k] = v

    if sample_rate is None:
        if n < 2:
            raise ParseError("cannot infer sample rate from a single frame", source=source)
        sample_rate = 1.0 / float(np.median(np.diff(t)))
    return LandmarkSeries(tuple(names), t, xy, vis, float(sample_rate))


def write_landmark_csv(stream: TextIO, series: LandmarkSeries) -> None:
    header = ["t"]
    for name in series.names:
        header += [f"{name}_x", f"{name}_y"]
        if series.visibility[name] is not None:
            header.append(f"{name}_v")
    rows = []
    for i in range(len(series)):
        row = [series.t[i]]
        for name in series.names:
            row += [series.xy[name][i, 0], series.xy[name][i, 1]]
            v = series.visibility[name]
            if v is not None:
                row.append(v[i])
        rows.append(row)
    tables.write_rows(stream, header, rows)


# -- angles and velocities ----------------------------------------------------

def _interior_angles(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    u = a - b
    w = c - b
    nu = np.hypot(u[:, 0], u[:, 1])
    nw = np.hypot(w[:, 0], w[:, 1])
    bad = (nu == 0) | (nw == 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DegenerateGeometryError(f"coincident points at vertex (sample {i})")
    cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    dot = u[:, 0] * w[:, 0] + u[:, 1] * w[:, 1]
    # atan2 keeps full precision near 0 and pi where arccos(dot) does not
    return np.arctan2(np.abs(cross), dot)


def joint_angle(a, b, c) -> float:
    """Interior angle at ``b`` between rays b->a and b->c, in radians [0, pi]."""
    pts = [np.asarray(p, dtype=float).reshape(1, 2) for p in (a, b, c)]
    return float(_interior_angles(*pts)[0])


def angle_series(series: LandmarkSeries, joint: JointDefinition,
                 visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD) -> AngleSeries:
    """Per-frame joint angle; frames where any involved landmark is less
    visible than ``visibility_threshold`` are dropped, not interpolated."""
    missing = [n for n in joint.landmarks if n not in series.xy]
    if missing:
        raise InputError(f"joint {joint.name!r}: landmark(s) {missing} not in series")
    keep = np.ones(len(series), dtype=bool)
    for name in joint.landmarks:
        v = series.visibility[name]
        if v is not None:
            keep &= v >= visibility_threshold
    if keep.sum() < 2:
        raise InsufficientDataError(
            f"joint {joint.name!r}: {int(keep.sum())} frame(s) at visibility >= "
            f"{visibility_threshold}, need at least 2")
    a, b, c = (series.xy[n][keep] for n in joint.landmarks)
    return AngleSeries(joint.name, series.t[keep], _interior_angles(a, b, c))


def finite_difference(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """dy/dt: (y[i+1] - y[i-1]) / (t[i+1] - t[i-1]) inside, forward/backward at the ends."""
    d = np.empty_like(y, dtype=float)
    d[0] = (y[1] - y[0]) / (t[1] - t[0])
    d[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])
    d[1:-1] = (y[2:] - y[:-2]) / (t[2:] - t[:-2])
    return d


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically near the ends."""
    x = np.asarray(x, dtype=float)
    if window == 1:
        return x.copy()
    half = window // 2
    n = x.size
    out = np.empty(n)
    if n > 2 * half:
        out[half:n - half] = np.convolve(x, np.full(window, 1.0 / window), mode="valid")
    for i in range(min(half, n)):
        h = min(i, n - 1 - i)
        out[i] = x[i - h:i + h + 1].mean()
        j = n - 1 - i
        h = min(j, n - 1 - j)
        out[j] = x[j - h:j + h + 1].mean()
    return out


def angular_velocity(angles: AngleSeries,
                     smoothing_window: int = DEFAULT_SMOOTHING_WINDOW) -> OmegaSeries:
    """Finite-difference angular velocity (central inside, one-sided at the
    two ends), then a centered moving average of ``smoothing_window`` samples.
    """
    n = len(angles)
    if n < 2:
        raise InsufficientDataError(f"angular velocity needs at least 2 samples, got {n}")
    if not isinstance(smoothing_window, (int, np.integer)) or smoothing_window < 1 \
            or smoothing_window % 2 == 0:
        raise InputError(f"smoothing_window must be an odd positive integer, got {smoothing_window!r}")
    if smoothing_window > n:
        raise InputError(f"smoothing_window {smoothing_window} exceeds sample count {n}")
    omega = finite_difference(angles.theta, angles.t)
    return OmegaSeries(angles.joint, angles.t, moving_average(omega, int(smoothing_window)))


def rms(omega) -> float:
    """Root mean square of an :class:`OmegaSeries` (or a plain sequence)."""
    values = omega.omega if isinstance(omega, OmegaSeries) else np.asarray(omega, dtype=float)
    if values.size == 0:
        raise InsufficientDataError("rms of an empty series")
    return float(np.sqrt(np.mean(np.square(values))))


# -- cross-joint comparison ---------------------------------------------------

class ComparisonInput(NamedTuple):
    label: str
    speed_kmh: float
    gait: str
    omega: OmegaSeries


class ComparisonRow(NamedTuple):
    joint: str
    gait: str
    speed_kmh: float
    rms_rad_s: float


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    best: tuple[ComparisonRow, ...] = field(default=())

    CSV_HEADER = ("joint", "gait", "speed_kmh", "rms_rad_s")

    def rms_of(self, joint: str, gait: str, speed_kmh: float) -> float:
        for r in self.rows:
            if (r.joint, r.gait, r.speed_kmh) == (joint, gait, speed_kmh):
                return r.rms_rad_s
        raise KeyError((joint, gait, speed_kmh))

    def best_for(self, speed_kmh: float) -> ComparisonRow:
        for r in self.best:
            if r.speed_kmh == speed_kmh:
                return r
        raise KeyError(speed_kmh)

    def write_csv(self, stream: TextIO, comment: str | None = None) -> None:
        tables.write_rows(stream, self.CSV_HEADER, self.rows, comment=comment)

    def to_json(self) -> dict:
        return {
            "rows": [r._asdict() for r in self.rows],
            "argmax": [
                {"speed_kmh": b.speed_kmh, "joint": b.joint, "gait": b.gait,
                 "rms_rad_s": b.rms_rad_s}
                for b in self.best
            ],
        }

    def dumps_json(self, **extra) -> str:
        return json.dumps({**extra, **self.to_json()}, indent=2, sort_keys=True) + "\n"


def joint_comparison_report(inputs: Iterable) -> ComparisonReport:
    """RMS angular speed per (joint, gait, speed) plus the best joint per speed.

    Each input is ``(label, speed_kmh, gait, omega_series)``. Ties for the
    best joint go to whichever came first.
    """
    rows: list[ComparisonRow] = []
    seen = set()
    for item in inputs:
        label, speed, gait, omega = ComparisonInput(*item)
        if gait not in GAITS:
            raise InputError(f"gait must be one of {GAITS}, got {gait!r}")
        speed = float(speed)
        key = (label, gait, speed)
        if key in seen:
            raise DuplicateKeyError(f"duplicate comparison key {key}")
        seen.add(key)
        rows.append(ComparisonRow(label, gait, speed, rms(omega)))
    if not rows:
        raise InsufficientDataError("joint comparison needs at least one series")

    best: dict[float, ComparisonRow] = {}
    for r in rows:
        if r.speed_kmh not in best or r.rms_rad_s > best[r.speed_kmh].rms_rad_s:
            best[r.speed_kmh] = r
    return ComparisonReport(tuple(rows), tuple(best[s] for s in sorted(best)))


def parse_comparison_csv(stream: TextIO, source=None) -> tuple[ComparisonRow, ...]:
    header, rows = tables.read_rows(stream, source=source)
    if tuple(header) != ComparisonReport.CSV_HEADER:
        raise ParseError(f"expected header {','.join(ComparisonReport.CSV_HEADER)}", row=1,
                         source=source)
    out = []
    for lineno, cells in rows:
        if len(cells) != 4:
            raise ParseError("expected 4 fields", row=lineno, source=source)
        out.append(ComparisonRow(
            cells[0], cells[1],
            tables.parse_float(cells[2], row=lineno, column="speed_kmh", source=source),
            tables.parse_float(cells[3], row=lineno, column="rms_rad_s", source=source)))
    return tuple(out)

"""Time-domain simulation of the arm -> gears -> generator -> load chain,
load sweeps over that chain, and supercapacitor charging by energy balance.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import tables
from .electromech import (
    GeneratorParams,
    LoadSweepRecord,
    _argmax_smallest,
    efficiency,
    output_speed,
    power_split,
)
from .errors import ConfigurationError, InputError, OverVoltageError, ParseError
from .kinematics import AngleSeries, angular_velocity


@dataclass(frozen=True)
class SwingProfile:
    """Sinusoidal elbow swing between two angles (degrees).

    ``angle_min == angle_max`` is allowed and describes a held arm.
    """

    angle_min: float
    angle_max: float
    cadence_hz: float
    duration_s: float
    sample_rate_hz: float

    def __post_init__(self):
        if not (0 <= self.angle_min <= self.angle_max <= 180):
            raise InputError(f"need 0 <= angle_min <= angle_max <= 180 degrees, got "
                             f"{self.angle_min!r}..{self.angle_max!r}")
        for name in ("cadence_hz", "duration_s", "sample_rate_hz"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InputError(f"{name} must be positive, got {value!r}")
        if self.sample_rate_hz < 20 * self.cadence_hz:
            raise InputError(f"sample_rate_hz ({self.sample_rate_hz}) must be at least 20x "
                             f"cadence_hz ({self.cadence_hz})")

    @property
    def amplitude_rad(self) -> float:
        return math.radians((self.angle_max - self.angle_min) / 2)

    @property
    def mean_rad(self) -> float:
        return math.radians((self.angle_max + self.angle_min) / 2)

    @property
    def omega_peak(self) -> float:
        return self.amplitude_rad * 2 * math.pi * self.cadence_hz

    @property
    def omega_rms(self) -> float:
        """Analytic RMS arm speed over whole periods."""
        return self.omega_peak / math.sqrt(2)


@dataclass(frozen=True)
class CapacitorSpec:
    capacitance_f: float
    rated_voltage_v: float
    initial_voltage_v: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.capacitance_f) and self.capacitance_f > 0):
            raise InputError(f"capacitance_f must be positive, got {self.capacitance_f!r}")
        if not (0 <= self.initial_voltage_v <= self.rated_voltage_v):
            raise InputError(f"need 0 <= initial_voltage_v <= rated_voltage_v, got "
                             f"{self.initial_voltage_v!r} / {self.rated_voltage_v!r}")


@dataclass(frozen=True)
class CapacitorResult:
    final_voltage_v: float
    stored_energy_j: float
    clamped: bool

    def to_json(self) -> dict:
        return {"final_voltage_v": self.final_voltage_v,
                "stored_energy_j": self.stored_energy_j,
                "clamped": self.clamped}


TRACE_HEADER = ("t", "theta_rad", "omega_arm", "omega_gen", "v", "i", "p_out", "p_internal")


@dataclass(frozen=True)
class ChainTrace:
    """Sampled chain state. ``v`` is the generator EMF, ``i`` the loop current."""

    t: np.ndarray
    theta: np.ndarray
    omega_arm: np.ndarray
    omega_gen: np.ndarray
    v: np.ndarray
    i: np.ndarray
    p_out: np.ndarray
    p_internal: np.ndarray
    energy_out_j: float
    energy_total_j: float
    r_load_ohm: float
    r_internal_ohm: float

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def duration_s(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def v_load(self) -> np.ndarray:
        return self.i * self.r_load_ohm

    def write_csv(self, stream: TextIO, comment: str | None = None) -> None:
        cols = [self.t, self.theta, self.omega_arm, self.omega_gen, self.v, self.i,
                self.p_out, self.p_internal]
        tables.write_rows(stream, TRACE_HEADER, zip(*cols), comment=comment)


def parse_trace_csv(stream: TextIO, source=None) -> dict[str, np.ndarray]:
    """Columns of an exported trace, keyed by header name."""
    _, cols = tables.read_float_table(stream, TRACE_HEADER, source=source)
    return {k: np.array(v) for k, v in cols.items()}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _trapezoid(y: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum((y[1:] + y[:-1]) * np.diff(t)) / 2) if t.size > 1 else 0.0


def synth_swing(profile: SwingProfile, joint: str = "elbow") -> AngleSeries:
    """theta(t) = mid + A sin(2 pi cadence t), sampled on [0, duration]."""
    n = int(math.floor(profile.duration_s * profile.sample_rate_hz + 1e-9)) + 1
    t = np.arange(n) / profile.sample_rate_hz
    theta = profile.mean_rad + profile.amplitude_rad * np.sin(2 * np.pi * profile.cadence_hz * t)
    return AngleSeries(joint, t, np.clip(theta, 0.0, math.pi))


def simulate_chain(angles: AngleSeries, ratio: float, params: GeneratorParams,
                   r_load_ohm: float) -> ChainTrace:
    """Run the full chain sample by sample, with trapezoidal energy totals.

    ``ratio`` must agree with ``params.ratio``; it is passed separately so a
    gear train computed elsewhere cannot silently disagree with the
    generator configuration.
    """
    if not math.isclose(ratio, params.ratio, rel_tol=1e-12, abs_tol=0.0):
        raise ConfigurationError(f"gear ratio {ratio!r} does not match generator ratio "
                                 f"{params.ratio!r}")
    if not (math.isfinite(r_load_ohm) and r_load_ohm > 0):
        raise InputError(f"r_load_ohm must be positive, got {r_load_ohm!r}")
    omega_arm = angular_velocity(angles, smoothing_window=1).omega
    omega_gen = output_speed(omega_arm, ratio)
    v = params.k_g * omega_gen
    i = v / (params.r_internal_ohm + r_load_ohm)
    p_out, p_internal, p_total = power_split(i, params.r_internal_ohm, r_load_ohm)
    return ChainTrace(
        t=angles.t, theta=angles.theta,
        omega_arm=omega_arm, omega_gen=_readonly(omega_gen), v=_readonly(v), i=_readonly(i),
        p_out=_readonly(p_out), p_internal=_readonly(p_internal),
        energy_out_j=_trapezoid(p_out, angles.t),
        energy_total_j=_trapezoid(p_total, angles.t),
        r_load_ohm=float(r_load_ohm), r_internal_ohm=float(params.r_internal_ohm),
    )


@dataclass(frozen=True)
class SweepResult:
    records: tuple[LoadSweepRecord, ...]
    efficiencies: tuple[float, ...]
    argmax: int

    CSV_HEADER = ("r_load_ohm", "v_rms", "p_out_mean_w")

    @property
    def best(self) -> LoadSweepRecord:
        return self.records[self.argmax]

    def by_resistance(self) -> dict[float, LoadSweepRecord]:
        return {r.r_load_ohm: r for r in self.records}

    def write_csv(self, stream: TextIO, comment: str | None = None) -> None:
        tables.write_rows(stream, self.CSV_HEADER,
                          [(r.r_load_ohm, r.v_rms, r.power_w) for r in self.records],
                          comment=comment)

    def to_json(self) -> dict:
        best = self.best
        return {
            "n_points": len(self.records),
            "argmax": {"r_load_ohm": best.r_load_ohm, "v_rms": best.v_rms,
                       "p_out_mean_w": best.power_w,
                       "efficiency": self.efficiencies[self.argmax]},
        }


def parse_sweep_result_csv(stream: TextIO, source=None) -> list[LoadSweepRecord]:
    linenos, cols = tables.read_float_table(stream, SweepResult.CSV_HEADER, source=source)
    out = []
    for lineno, r, v, p in zip(linenos, *cols.values()):
        try:
            out.append(LoadSweepRecord(r, v, p))
        except InputError as exc:
            raise ParseError(str(exc), row=lineno, source=source) from None
    return out


def _sweep_point(angles, ratio, params, r_load):
    trace = simulate_chain(angles, ratio, params, r_load)
    v_rms = float(np.sqrt(np.mean(np.square(trace.v_load))))
    p_mean = float(np.mean(trace.p_out))
    p_total = p_mean + float(np.mean(trace.p_internal))
    if p_total > 0:
        eff = efficiency(p_mean, p_total)
    else:
        eff = r_load / (params.r_internal_ohm + r_load)
    return LoadSweepRecord(float(r_load), v_rms, p_mean), eff


def sweep_load(angles: AngleSeries, ratio: float, params: GeneratorParams,
               grid: Sequence[float], max_workers: int | None = None) -> SweepResult:
    """One chain simulation per load; record (R_l, RMS load voltage, mean load power).

    Results are in grid order whether or not points run concurrently. The
    best load is the highest mean power, ties to the smaller resistance.
    """
    grid = [float(r) for r in grid]
    if not grid:
        raise InputError("load grid is empty")
    if any(not (math.isfinite(r) and r > 0) for r in grid):
        raise InputError("load grid resistances must be positive")
    work = lambda r: _sweep_point(angles, ratio, params, r)  # noqa: E731
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            points = list(pool.map(work, grid))
    else:
        points = [work(r) for r in grid]
    records = tuple(p[0] for p in points)
    idx = _argmax_smallest([r.power_w for r in records], grid)
    return SweepResult(records, tuple(p[1] for p in points), idx)


def capacitor_energy(cap: CapacitorSpec, voltage: float) -> float:
    if voltage < 0:
        raise InputError(f"voltage must be non-negative, got {voltage!r}")
    if voltage > cap.rated_voltage_v:
        raise OverVoltageError(f"{voltage} V exceeds rating {cap.rated_voltage_v} V")
    return 0.5 * cap.capacitance_f * voltage * voltage


def simulate_capacitor(source_power_w: float, cap: CapacitorSpec,
                       duration_s: float) -> CapacitorResult:
    """Charge at constant average power: 1/2 C V^2 grows by P*t, clamped at the rating."""
    if not (math.isfinite(source_power_w) and source_power_w >= 0):
        raise InputError(f"source_power_w must be >= 0, got {source_power_w!r}")
    if not (math.isfinite(duration_s) and duration_s >= 0):
        raise InputError(f"duration_s must be >= 0, got {duration_s!r}")
    energy = 0.5 * cap.capacitance_f * cap.initial_voltage_v ** 2 + source_power_w * duration_s
    v = math.sqrt(2 * energy / cap.capacitance_f)
    clamped = v > cap.rated_voltage_v
    if clamped:
        v = cap.rated_voltage_v
    return CapacitorResult(v, capacitor_energy(cap, v), clamped)


def charging_power(cap: CapacitorSpec, final_voltage_v: float, duration_s: float) -> float:
    """Average power that takes ``cap`` from its initial voltage to
    ``final_voltage_v`` in ``duration_s``."""
    if duration_s <= 0:
        raise InputError("duration_s must be positive")
    gained = capacitor_energy(cap, final_voltage_v) - capacitor_energy(cap, cap.initial_voltage_v)
    if gained < 0:
        raise InputError("final voltage below initial voltage")
    return gained / duration_s


def dumps_capacitor(result: CapacitorResult, **extra) -> str:
    return json.dumps({**extra, **result.to_json()}, indent=2, sort_keys=True) + "\n"

"""Generator circuit model, load-sweep fitting and load matching.

The generator is an ideal EMF source ``E = k_g * ratio * omega_arm`` in
series with its winding resistance, driving a resistive load. All steady
state quantities (voltage, current, power) are RMS values.

Only the product ``E`` is observable from a load sweep, so :func:`fit_sweep`
estimates ``(E, R_g)``; ``k_g`` follows once the arm speed and gear ratio
are known (:meth:`FitResult.to_params`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, TextIO

import numpy as np

from . import tables
from .errors import (
    FitError,
    InputError,
    ParseError,
    SingularCircuitError,
    UndefinedEfficiencyError,
    UnderdeterminedFitError,
)


def _positive(value, what):
    if not (math.isfinite(value) and value > 0):
        raise InputError(f"{what} must be positive, got {value!r}")


@dataclass(frozen=True)
class GeneratorParams:
    k_g: float
    r_internal_ohm: float
    ratio: float

    def __post_init__(self):
        _positive(self.k_g, "k_g")
        _positive(self.ratio, "ratio")
        if not (math.isfinite(self.r_internal_ohm) and self.r_internal_ohm >= 0):
            raise InputError(f"r_internal_ohm must be >= 0, got {self.r_internal_ohm!r}")


@dataclass(frozen=True)
class LoadSweepRecord:
    r_load_ohm: float
    v_rms: float
    power_w: float

    def __post_init__(self):
        _positive(self.r_load_ohm, "r_load_ohm")
        if not (math.isfinite(self.v_rms) and self.v_rms >= 0):
            raise InputError(f"v_rms must be >= 0, got {self.v_rms!r}")
        if not (math.isfinite(self.power_w) and self.power_w >= 0):
            raise InputError(f"power_w must be >= 0, got {self.power_w!r}")

    @classmethod
    def from_vrms(cls, r_load_ohm: float, v_rms: float) -> "LoadSweepRecord":
        return cls(r_load_ohm, v_rms, power_from_vrms(v_rms, r_load_ohm))


@dataclass(frozen=True)
class FitResult:
    emf_rms: float
    r_internal_ohm: float
    residual_rms: float
    iterations: int = 0

    def to_json(self) -> dict:
        return {"emf_rms_v": self.emf_rms, "r_internal_ohm": self.r_internal_ohm,
                "residual_rms_v": self.residual_rms}

    @classmethod
    def from_json(cls, data: dict) -> "FitResult":
        return cls(float(data["emf_rms_v"]), float(data["r_internal_ohm"]),
                   float(data["residual_rms_v"]))

    def to_params(self, ratio: float, omega_arm_rms: float) -> GeneratorParams:
        """Recover ``k_g`` given the gear ratio and the RMS arm speed of the sweep."""
        return GeneratorParams(k_g_from_emf(self.emf_rms, ratio, omega_arm_rms),
                               self.r_internal_ohm, ratio)


class PowerSplit(NamedTuple):
    p_out: float
    p_internal: float
    p_total: float


# -- circuit equations --------------------------------------------------------

def output_speed(omega_arm, ratio: float):
    """Generator shaft speed after the gear train."""
    _positive(ratio, "ratio")
    return omega_arm * ratio


def emf(params: GeneratorParams, omega_arm):
    return params.k_g * params.ratio * omega_arm


def k_g_from_emf(emf_rms: float, ratio: float, omega_arm_rms: float) -> float:
    _positive(ratio, "ratio")
    _positive(omega_arm_rms, "omega_arm_rms")
    return emf_rms / (ratio * omega_arm_rms)


def mechanical_input_power(torque_nm, omega_arm):
    """Shaft power delivered by the arm (torque times angular speed)."""
    return torque_nm * omega_arm


def _series_resistance(r_internal_ohm: float, r_load_ohm: float) -> float:
    if r_internal_ohm < 0 or r_load_ohm < 0:
        raise InputError("resistances must be non-negative")
    total = r_internal_ohm + r_load_ohm
    if total == 0:
        raise SingularCircuitError("internal and load resistance are both zero")
    return total


def load_current(params: GeneratorParams, omega_arm, r_load_ohm: float):
    return emf(params, omega_arm) / _series_resistance(params.r_internal_ohm, r_load_ohm)


def power_split(current, r_internal_ohm: float, r_load_ohm: float) -> PowerSplit:
    if r_internal_ohm < 0 or r_load_ohm < 0:
        raise InputError("resistances must be non-negative")
    i2 = current * current
    p_out = i2 * r_load_ohm
    p_internal = i2 * r_internal_ohm
    return PowerSplit(p_out, p_internal, p_out + p_internal)


def power_from_vrms(v_rms: float, r_load_ohm: float) -> float:
    """Power dissipated in the load from the RMS voltage across it."""
    if r_load_ohm == 0:
        raise SingularCircuitError("zero load resistance")
    if r_load_ohm < 0:
        raise InputError(f"load resistance must be positive, got {r_load_ohm!r}")
    return v_rms * v_rms / r_load_ohm


def efficiency(p_out: float, p_total: float) -> float:
    if p_total == 0:
        raise UndefinedEfficiencyError("efficiency undefined at zero total power")
    if p_total < 0 or p_out < 0 or p_out > p_total * (1 + 1e-12):
        raise InputError(f"need 0 <= p_out <= p_total, got p_out={p_out!r}, p_total={p_total!r}")
    return min(p_out / p_total, 1.0)


def load_voltage(emf_rms, r_internal_ohm: float, r_load_ohm):
    """Voltage across the load for a source ``emf_rms`` behind ``r_internal_ohm``."""
    return emf_rms * r_load_ohm / (r_internal_ohm + r_load_ohm)


# -- fitting ------------------------------------------------------------------

GRID_POINTS = 200
GRID_LOG10_RANGE = (-2.0, 2.0)
MAX_ITERATIONS = 100
REL_TOLERANCE = 1e-10


def _sse(e, g, r, v):
    res = v - e * r / (g + r)
    return float(res @ res)


def _grid_seed(r: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    e_grid = np.logspace(*GRID_LOG10_RANGE, GRID_POINTS)
    g_grid = np.logspace(*GRID_LOG10_RANGE, GRID_POINTS)
    x = r[None, :] / (g_grid[:, None] + r[None, :])
    # SSE(E, G) = sum v^2 - 2 E sum(x v) + E^2 sum(x^2), expanded to avoid a 3-D array
    xv = x @ v
    xx = np.einsum("ij,ij->i", x, x)
    sse = (v @ v) - 2.0 * e_grid[None, :] * xv[:, None] + e_grid[None, :] ** 2 * xx[:, None]
    gi, ei = np.unravel_index(int(np.argmin(sse)), sse.shape)
    return float(e_grid[ei]), float(g_grid[gi])


def fit_sweep(records: Sequence[LoadSweepRecord]) -> FitResult:
    """Least-squares fit of ``v_rms = E * R_l / (R_g + R_l)`` to a load sweep.

    A 200x200 log grid over [0.01, 100]^2 seeds a damped Gauss-Newton
    refinement (at most 100 iterations, stop when the relative parameter
    change drops below 1e-10). ``R_g`` is kept non-negative.
    """
    r = np.array([rec.r_load_ohm for rec in records], dtype=float)
    v = np.array([rec.v_rms for rec in records], dtype=float)
    if np.unique(r).size < 2:
        raise UnderdeterminedFitError(
            f"need at least 2 distinct load resistances, got {np.unique(r).size}")

    e, g = _grid_seed(r, v)
    s = _sse(e, g, r, v)
    history = [(e, g, s)]
    for it in range(1, MAX_ITERATIONS + 1):
        d = g + r
        x = r / d
        res = v - e * x
        jac = np.column_stack([x, -e * r / d ** 2])
        step, *_ = np.linalg.lstsq(jac, res, rcond=None)
        lam = 1.0
        while True:
            e_new = max(e + lam * step[0], np.finfo(float).tiny)
            g_new = max(g + lam * step[1], 0.0)
            s_new = _sse(e_new, g_new, r, v)
            if s_new <= s or lam < 1e-12:
                break
            lam *= 0.5
        change = max(abs(e_new - e) / abs(e), abs(g_new - g) / max(abs(g), 1e-300))
        if s_new > s:
            # no descent along the GN direction: at a minimum up to rounding
            if change < 1e-6:
                break
            raise FitError("Gauss-Newton line search failed",
                           diagnostics={"iteration": it, "history": history})
        e, g, s = e_new, g_new, s_new
        history.append((e, g, s))
        if change < REL_TOLERANCE:
            break
    else:
        raise FitError(f"no convergence after {MAX_ITERATIONS} iterations",
                       diagnostics={"history": history[-5:]})
    return FitResult(float(e), float(g), math.sqrt(s / r.size), iterations=len(history) - 1)


def _argmax_smallest(values: Sequence[float], keys: Sequence[float]) -> int:
    """Index of the largest value; ties go to the smallest key."""
    best = None
    for k, (val, key) in enumerate(zip(values, keys)):
        if best is None or val > values[best] or (val == values[best] and key < keys[best]):
            best = k
    return best


class OptimalLoad(NamedTuple):
    analytic_opt: float
    grid_opt: float


def predicted_power(source: GeneratorParams | FitResult, r_load_ohm, omega_arm: float = 1.0):
    """Load power for each ``r_load_ohm``. For :class:`GeneratorParams` the
    EMF is evaluated at ``omega_arm``; a :class:`FitResult` carries its own."""
    if isinstance(source, FitResult):
        e = source.emf_rms
    else:
        e = emf(source, omega_arm)
    r_l = np.asarray(r_load_ohm, dtype=float)
    return e * e * r_l / (source.r_internal_ohm + r_l) ** 2


def optimal_load(source: GeneratorParams | FitResult, grid: Sequence[float]) -> OptimalLoad:
    """Maximum-power load: analytically ``R_g``, and the best point on ``grid``."""
    grid = [float(x) for x in grid]
    if not grid:
        raise InputError("optimal_load needs a non-empty grid")
    if any(not (x > 0) for x in grid):
        raise InputError("grid resistances must be positive")
    p = predicted_power(source, grid)
    return OptimalLoad(float(source.r_internal_ohm), grid[_argmax_smallest(list(p), grid)])


def measured_optimal_load(records: Sequence[LoadSweepRecord]) -> float:
    """Load with the highest measured power (ties to the smaller load)."""
    if not records:
        raise InputError("no records")
    idx = _argmax_smallest([r.power_w for r in records], [r.r_load_ohm for r in records])
    return records[idx].r_load_ohm


def predict_sweep(fit: FitResult, grid: Sequence[float]) -> list[LoadSweepRecord]:
    return [LoadSweepRecord.from_vrms(r, float(load_voltage(fit.emf_rms, fit.r_internal_ohm, r)))
            for r in grid]


# -- sweep CSV / fit JSON -----------------------------------------------------

SWEEP_HEADER = ("r_load_ohm", "v_rms", "power_w")


def parse_sweep_csv(stream: TextIO, source=None) -> list[LoadSweepRecord]:
    """Read ``r_load_ohm,v_rms[,power_w]``; missing power is computed as V^2/R."""
    linenos, cols = tables.read_float_table(stream, SWEEP_HEADER[:2], SWEEP_HEADER[2:],
                                            source=source)
    out = []
    for lineno, r, v, p in zip(linenos, cols["r_load_ohm"], cols["v_rms"], cols["power_w"]):
        try:
            out.append(LoadSweepRecord.from_vrms(r, v) if p is None else LoadSweepRecord(r, v, p))
        except InputError as exc:
            raise ParseError(str(exc), row=lineno, source=source) from None
    return out


def write_sweep_csv(stream: TextIO, records: Sequence[LoadSweepRecord],
                    comment: str | None = None) -> None:
    tables.write_rows(stream, SWEEP_HEADER,
                      [(r.r_load_ohm, r.v_rms, r.power_w) for r in records], comment=comment)


def dumps_fit(fit: FitResult, **extra) -> str:
    return json.dumps({**extra, **fit.to_json()}, indent=2, sort_keys=True) + "\n"

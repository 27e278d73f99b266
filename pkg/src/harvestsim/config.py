"""YAML configuration for the ``harvestsim`` command line.

Every physical quantity uses a unit-suffixed key (``module_mm``,
``r_internal_ohm``, ``cadence_hz``). Relative file paths resolve against
the directory holding the config file. See ``configs/`` for complete
examples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .electromech import GeneratorParams
from .errors import ConfigurationError, InputError
from .geartrain import GearStage, GearTrain
from .kinematics import (
    DEFAULT_SMOOTHING_WINDOW,
    DEFAULT_VISIBILITY_THRESHOLD,
    GAITS,
    JointDefinition,
)
from .simulate import CapacitorSpec, SwingProfile


@dataclass(frozen=True)
class GearTrainBlock:
    train: GearTrain
    expected_center_distances: list[float | None] | None
    expected_pitch_diameters: list[tuple[float | None, float | None]] | None
    expected_ratio: float | None


@dataclass(frozen=True)
class GeneratorBlock:
    """Generator settings; any field may be left to a fit of ``paths.sweep_csv``."""

    k_g: float | None = None
    r_internal_ohm: float | None = None
    ratio: float | None = None
    omega_arm_rms_rad_s: float | None = None


@dataclass(frozen=True)
class AnalyzeInput:
    file: Path
    joint: str
    label: str
    gait: str
    speed_kmh: float


@dataclass(frozen=True)
class KinematicsBlock:
    joints: dict[str, JointDefinition]
    inputs: list[AnalyzeInput]
    visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD
    smoothing_window: int = DEFAULT_SMOOTHING_WINDOW


@dataclass(frozen=True)
class SweepBlock:
    grid_ohm: list[float]
    max_workers: int | None = None


@dataclass(frozen=True)
class CapacitorBlock:
    spec: CapacitorSpec
    duration_s: float
    charging_power_w: float | None = None


@dataclass(frozen=True)
class ToolkitConfig:
    source: Path | None = None
    geartrain: GearTrainBlock | None = None
    generator: GeneratorBlock | None = None
    swing: SwingProfile | None = None
    r_load_ohm: float | None = None
    sweep: SweepBlock | None = None
    capacitor: CapacitorBlock | None = None
    kinematics: KinematicsBlock | None = None
    sweep_csv: Path | None = None
    out_dir: Path | None = None

    def require(self, block: str):
        value = getattr(self, block)
        if value is None:
            raise ConfigurationError(f"{self.source or 'config'}: missing required '{block}' section")
        return value


class _Section:
    """Typed accessors over one mapping that report errors by dotted path."""

    def __init__(self, data, path: str, where: str):
        if not isinstance(data, dict):
            raise ConfigurationError(f"{where}: '{path}' must be a mapping")
        self.data = data
        self.path = path
        self.where = where
        self.used: set[str] = set()

    def _name(self, key):
        if not key:
            return self.path or "<root>"
        return f"{self.path}.{key}" if self.path else key

    def fail(self, key, msg):
        raise ConfigurationError(f"{self.where}: {self._name(key)}: {msg}")

    def has(self, key) -> bool:
        return key in self.data and self.data[key] is not None

    def get(self, key, kind, default=None, required=False):
        self.used.add(key)
        if not self.has(key):
            if required:
                self.fail(key, "required field missing")
            return default
        value = self.data[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) \
                    or not math.isfinite(value):
                self.fail(key, f"expected a number, got {value!r}")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(key, f"expected an integer, got {value!r}")
            return value
        if kind is str:
            if not isinstance(value, (str, int, float)) or isinstance(value, bool):
                self.fail(key, f"expected a string, got {value!r}")
            return str(value)
        if kind is list:
            if not isinstance(value, list):
                self.fail(key, f"expected a list, got {value!r}")
            return value
        if kind is dict:
            return _Section(value, self._name(key), self.where)
        raise TypeError(kind)

    def section(self, key):
        return self.get(key, dict)

    def items(self, key, required=False):
        seq = self.get(key, list, default=[], required=required)
        return [_Section(item, f"{self._name(key)}[{k}]", self.where) for k, item in enumerate(seq)]

    def check_unknown(self):
        unknown = sorted(set(self.data) - self.used)
        if unknown:
            self.fail(unknown[0], "unknown key")

    def build(self, key, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except InputError as exc:
            self.fail(key, str(exc))


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _geartrain(sec: _Section) -> GearTrainBlock:
    stages, distances, diameters = [], [], []
    for k, st in enumerate(sec.items("stages", required=True)):
        stage = st.build("", GearStage,
                         st.get("id", str, default=f"S{k + 1}"),
                         st.get("module_mm", float, required=True),
                         st.get("teeth_large", int, required=True),
                         st.get("teeth_small", int, required=True))
        stages.append(stage)
        cd = st.get("expected_center_distance_mm", float)
        if k == 0 and cd is not None:
            st.fail("expected_center_distance_mm", "the input stage has no upstream mesh")
        if k > 0:
            distances.append(cd)
        diameters.append((st.get("pitch_diameter_large_mm", float),
                          st.get("pitch_diameter_small_mm", float)))
        st.check_unknown()
    train = sec.build("stages", GearTrain, stages)
    block = GearTrainBlock(
        train,
        distances if any(d is not None for d in distances) else None,
        diameters if any(d != (None, None) for d in diameters) else None,
        sec.get("expected_ratio", float),
    )
    sec.check_unknown()
    return block


def _generator(sec: _Section) -> GeneratorBlock:
    block = GeneratorBlock(
        k_g=sec.get("k_g_v_per_rad_s", float),
        r_internal_ohm=sec.get("r_internal_ohm", float),
        ratio=sec.get("ratio", float),
        omega_arm_rms_rad_s=sec.get("omega_arm_rms_rad_s", float),
    )
    if block.k_g is not None and block.r_internal_ohm is not None and block.ratio is not None:
        sec.build("", GeneratorParams, block.k_g, block.r_internal_ohm, block.ratio)
    for key in ("k_g_v_per_rad_s", "ratio", "omega_arm_rms_rad_s"):
        if sec.has(key) and not sec.data[key] > 0:
            sec.fail(key, "must be positive")
    if block.r_internal_ohm is not None and block.r_internal_ohm < 0:
        sec.fail("r_internal_ohm", "must be non-negative")
    sec.check_unknown()
    return block


def _swing(sec: _Section) -> SwingProfile:
    profile = sec.build("", SwingProfile,
                        sec.get("angle_min_deg", float, required=True),
                        sec.get("angle_max_deg", float, required=True),
                        sec.get("cadence_hz", float, required=True),
                        sec.get("duration_s", float, required=True),
                        sec.get("sample_rate_hz", float, required=True))
    sec.check_unknown()
    return profile


def _sweep(sec: _Section) -> SweepBlock:
    if sec.has("grid_ohm"):
        grid = [float(x) for x in sec.get("grid_ohm", list)]
    else:
        start = sec.get("start_ohm", float, required=True)
        stop = sec.get("stop_ohm", float, required=True)
        step = sec.get("step_ohm", float, required=True)
        if step <= 0 or stop < start:
            sec.fail("step_ohm", "need step_ohm > 0 and stop_ohm >= start_ohm")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        grid = [start + k * step for k in range(n)]
    if not grid or any(not (r > 0) for r in grid):
        sec.fail("grid_ohm", "grid must be non-empty with positive resistances")
    workers = sec.get("max_workers", int)
    sec.check_unknown()
    return SweepBlock(grid, workers)


def _capacitor(sec: _Section) -> CapacitorBlock:
    spec = sec.build("", CapacitorSpec,
                     sec.get("capacitance_f", float, required=True),
                     sec.get("rated_voltage_v", float, required=True),
                     sec.get("initial_voltage_v", float, default=0.0))
    duration = sec.get("duration_s", float, required=True)
    if duration < 0:
        sec.fail("duration_s", "must be non-negative")
    power = sec.get("charging_power_w", float)
    if power is not None and power < 0:
        sec.fail("charging_power_w", "must be non-negative")
    sec.check_unknown()
    return CapacitorBlock(spec, duration, power)


def _kinematics(sec: _Section, base: Path) -> KinematicsBlock:
    joints = {}
    for js in sec.items("joints"):
        j = js.build("", JointDefinition, js.get("name", str, required=True),
                     js.get("proximal", str, required=True), js.get("vertex", str, required=True),
                     js.get("distal", str, required=True))
        if j.name in joints:
            js.fail("name", f"duplicate joint {j.name!r}")
        joints[j.name] = j
        js.check_unknown()
    inputs = []
    for item in sec.items("inputs"):
        joint = item.get("joint", str, required=True)
        if joints and joint not in joints:
            item.fail("joint", f"unknown joint {joint!r}; defined: {sorted(joints)}")
        gait = item.get("gait", str, required=True)
        if gait not in GAITS:
            item.fail("gait", f"must be one of {GAITS}")
        inputs.append(AnalyzeInput(
            _resolve(base, item.get("file", str, required=True)), joint,
            item.get("label", str, default=joint), gait,
            item.get("speed_kmh", float, required=True)))
        item.check_unknown()
    threshold = sec.get("visibility_threshold", float, default=DEFAULT_VISIBILITY_THRESHOLD)
    if not 0 <= threshold <= 1:
        sec.fail("visibility_threshold", "must be in [0, 1]")
    window = sec.get("smoothing_window", int, default=DEFAULT_SMOOTHING_WINDOW)
    if window < 1 or window % 2 == 0:
        sec.fail("smoothing_window", "must be an odd positive integer")
    sec.check_unknown()
    return KinematicsBlock(joints, inputs, threshold, window)


def parse_config(data: dict, source: Path | None = None, base: Path | None = None) -> ToolkitConfig:
    where = str(source) if source else "config"
    base = base or (source.parent if source else Path.cwd())
    root = _Section(data if data is not None else {}, "", where)
    kw: dict[str, Any] = {"source": source}
    if root.has("geartrain"):
        kw["geartrain"] = _geartrain(root.section("geartrain"))
    if root.has("generator"):
        kw["generator"] = _generator(root.section("generator"))
    if root.has("swing"):
        kw["swing"] = _swing(root.section("swing"))
    if root.has("load"):
        load = root.section("load")
        r = load.get("r_load_ohm", float, required=True)
        if r <= 0:
            load.fail("r_load_ohm", "must be positive")
        load.check_unknown()
        kw["r_load_ohm"] = r
    if root.has("sweep"):
        kw["sweep"] = _sweep(root.section("sweep"))
    if root.has("capacitor"):
        kw["capacitor"] = _capacitor(root.section("capacitor"))
    if root.has("kinematics"):
        kw["kinematics"] = _kinematics(root.section("kinematics"), base)
    if root.has("paths"):
        paths = root.section("paths")
        if paths.has("sweep_csv"):
            kw["sweep_csv"] = _resolve(base, paths.get("sweep_csv", str))
        if paths.has("out_dir"):
            kw["out_dir"] = _resolve(base, paths.get("out_dir", str))
        paths.check_unknown()
    root.check_unknown()
    return ToolkitConfig(**kw)


def load_config(path: str | Path) -> ToolkitConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return parse_config(data or {}, source=path)

"""Compound double-sided spur gear trains.

Each stage is one shaft carrying a large and a small gear. The large gear
of stage ``i`` drives the small gear of stage ``i + 1``, so every mesh
multiplies speed by ``teeth_large[i] / teeth_small[i + 1]``. Meshing is
ideal (no losses).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import IncompatibleMeshError, InputError

# |computed - expected| above this fraction of expected triggers a ratio warning
RATIO_WARNING_FRACTION = 0.01
DISTANCE_TOLERANCE_MM = 1e-9


@dataclass(frozen=True)
class GearStage:
    id: str
    module_mm: float
    teeth_large: int
    teeth_small: int

    def __post_init__(self):
        if not (isinstance(self.module_mm, (int, float)) and math.isfinite(self.module_mm)
                and self.module_mm > 0):
            raise InputError(f"stage {self.id!r}: module_mm must be positive, got {self.module_mm!r}")
        for side in ("teeth_large", "teeth_small"):
            n = getattr(self, side)
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise InputError(f"stage {self.id!r}: {side} must be a positive integer, got {n!r}")
        if self.teeth_large < self.teeth_small:
            raise InputError(f"stage {self.id!r}: teeth_large ({self.teeth_large}) < "
                             f"teeth_small ({self.teeth_small})")


@dataclass(frozen=True)
class GearTrain:
    """Stages in drive order, input stage first.

    Uniform module is a design requirement but is checked by
    :func:`validate_train` rather than here, so a mis-specified train can
    still be loaded and reported on.
    """

    stages: tuple[GearStage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise InputError("gear train needs at least one stage")
        ids = [s.id for s in self.stages]
        if len(set(ids)) != len(ids):
            raise InputError(f"duplicate stage ids in {ids}")

    def meshes(self) -> list[tuple[GearStage, GearStage]]:
        return list(zip(self.stages[:-1], self.stages[1:]))

    def __add__(self, other: "GearTrain") -> "GearTrain":
        return GearTrain(self.stages + other.stages)


def pitch_diameter(stage: GearStage, side: str) -> float:
    if side == "large":
        return stage.module_mm * stage.teeth_large
    if side == "small":
        return stage.module_mm * stage.teeth_small
    raise InputError(f"side must be 'large' or 'small', got {side!r}")


def mesh_center_distance(upstream: GearStage, downstream: GearStage) -> float:
    """Shaft spacing when ``upstream``'s large gear drives ``downstream``'s small gear."""
    if upstream.module_mm != downstream.module_mm:
        raise IncompatibleMeshError(
            f"cannot mesh {upstream.id} (module {upstream.module_mm}) with "
            f"{downstream.id} (module {downstream.module_mm})")
    return (pitch_diameter(upstream, "large") + pitch_diameter(downstream, "small")) / 2


def mesh_ratio(upstream: GearStage, downstream: GearStage) -> float:
    return upstream.teeth_large / downstream.teeth_small


def overall_ratio(train: GearTrain) -> float:
    """Output/input speed ratio; 1.0 for a single stage."""
    ratio = 1.0
    for up, down in train.meshes():
        ratio *= mesh_ratio(up, down)
    return ratio


@dataclass
class Check:
    name: str
    passed: bool
    observed: object = None
    expected: object = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = f"observed={self.observed!r}"
        if self.expected is not None:
            detail += f" expected={self.expected!r}"
        return f"{status} {self.name}: {detail}"


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    ratio: float = float("nan")
    center_distances_mm: list[float | None] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_train(train: GearTrain,
                   expected_center_distances: Sequence[float | None] | None = None,
                   expected_pitch_diameters: Sequence[tuple[float | None, float | None]] | None = None,
                   expected_ratio: float | None = None) -> ValidationReport:
    """Check a train against its design table. Failures are report entries.

    ``expected_center_distances`` has one entry per mesh (``None`` skips a
    mesh). ``expected_pitch_diameters`` has one ``(large, small)`` pair per
    stage. A ratio more than 1% away from ``expected_ratio`` is reported as
    a warning, not a failure.
    """
    report = ValidationReport()
    modules = sorted({s.module_mm for s in train.stages})
    report.checks.append(Check("uniform_module", len(modules) == 1, observed=modules))

    for k, stage in enumerate(train.stages):
        exp = expected_pitch_diameters[k] if expected_pitch_diameters else (None, None)
        for side, want in zip(("large", "small"), exp):
            pd = pitch_diameter(stage, side)
            teeth = stage.teeth_large if side == "large" else stage.teeth_small
            ok = math.isfinite(pd) and pd > 0 and math.isclose(pd / stage.module_mm, teeth)
            if want is not None:
                ok = ok and abs(pd - want) <= DISTANCE_TOLERANCE_MM
            report.checks.append(Check(f"pitch_diameter[{stage.id}.{side}]", ok,
                                       observed=pd, expected=want))

    meshes = train.meshes()
    if expected_center_distances is not None and len(expected_center_distances) != len(meshes):
        raise InputError(f"expected {len(meshes)} center distances, got "
                         f"{len(expected_center_distances)}")
    for k, (up, down) in enumerate(meshes):
        name = f"center_distance[{up.id}->{down.id}]"
        want = expected_center_distances[k] if expected_center_distances else None
        try:
            cd = mesh_center_distance(up, down)
        except IncompatibleMeshError:
            report.center_distances_mm.append(None)
            report.checks.append(Check(name, False, observed="module mismatch", expected=want))
            continue
        report.center_distances_mm.append(cd)
        if want is not None:
            report.checks.append(Check(name, abs(cd - want) <= DISTANCE_TOLERANCE_MM,
                                       observed=cd, expected=want))

    report.ratio = overall_ratio(train)
    if expected_ratio is not None:
        deviation = abs(report.ratio - expected_ratio) / abs(expected_ratio)
        if deviation > RATIO_WARNING_FRACTION:
            report.warnings.append(
                f"computed ratio {report.ratio:.4f} deviates {deviation:.2%} from expected "
                f"{expected_ratio}")
    return report

import io
import math

import numpy as np
import pytest

from harvestsim.electromech import LoadSweepRecord
from harvestsim.geartrain import GearStage, GearTrain
from harvestsim.kinematics import LandmarkSeries, write_landmark_csv

# Published load sweep: (load ohm, RMS volts, watts)
FIGURE7 = [
    (5.0, 0.72, 0.10),
    (6.8, 0.85, 0.11),
    (8.2, 1.01, 0.12),
    (9.1, 1.2, 0.16),
    (10.0, 1.2, 0.14),
    (14.3, 1.35, 0.13),
    (20.0, 1.6, 0.13),
]

TABLE3_STAGES = [
    ("G1", 42, 18),
    ("G2", 40, 20),
    ("G3", 32, 22),
    ("G4", 30, 14),
    ("G5", 10, 10),
]
TABLE3_PITCH_DIAMETERS = [(21, 9), (20, 10), (17, 11), (15, 7), (5, 5)]
TABLE3_CENTER_DISTANCES = [15.5, 15.5, 12.0, 10.0]


@pytest.fixture
def figure7_records():
    return [LoadSweepRecord(r, v, p) for r, v, p in FIGURE7]


def table3_train(module_mm=0.5):
    return GearTrain([GearStage(i, module_mm, big, small) for i, big, small in TABLE3_STAGES])


@pytest.fixture
def table3():
    return table3_train()


def arm_landmarks(t, theta, vertex=(0.5, 0.5), upper=0.2, fore=0.15, heading=-1.2,
                  visibility=None):
    """Shoulder/elbow/wrist positions whose interior elbow angle is ``theta``."""
    t = np.asarray(t, dtype=float)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), t.shape)
    elbow = np.tile(np.asarray(vertex, dtype=float), (t.size, 1))
    shoulder = elbow + upper * np.array([math.cos(heading), math.sin(heading)])
    wrist = elbow + fore * np.column_stack([np.cos(heading + theta), np.sin(heading + theta)])
    positions = {"shoulder": shoulder, "elbow": elbow, "wrist": wrist}
    vis = None if visibility is None else {k: visibility for k in positions}
    return LandmarkSeries.from_arrays(t, positions, vis)


def landmark_csv_text(series):
    buf = io.StringIO()
    write_landmark_csv(buf, series)
    return buf.getvalue()


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])

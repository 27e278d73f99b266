import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harvestsim.errors import (
    DegenerateGeometryError,
    DuplicateKeyError,
    InputError,
    InsufficientDataError,
    ParseError,
)
from harvestsim.kinematics import (
    AngleSeries,
    JointDefinition,
    OmegaSeries,
    angle_series,
    angular_velocity,
    joint_angle,
    joint_comparison_report,
    moving_average,
    parse_comparison_csv,
    parse_landmark_series,
    rms,
)

from conftest import arm_landmarks, landmark_csv_text

ELBOW = JointDefinition("elbow", "shoulder", "elbow", "wrist")

THREE_ROWS = """t,shoulder_x,shoulder_y,shoulder_v,elbow_x,elbow_y,elbow_v,wrist_x,wrist_y,wrist_v
0.00,0.40,0.30,0.99,0.50,0.50,0.98,0.60,0.60,0.97
0.01,0.40,0.30,0.99,0.50,0.51,0.98,0.61,0.60,0.97
0.02,0.40,0.30,0.99,0.50,0.52,0.98,0.62,0.60,0.97
"""


def parse(text, **kw):
    return parse_landmark_series(io.StringIO(text), **kw)


# -- parsing ------------------------------------------------------------------

def test_parse_three_rows():
    s = parse(THREE_ROWS)
    assert len(s) == 3
    assert s.names == ("shoulder", "elbow", "wrist")
    assert s.xy["elbow"][2].tolist() == [0.5, 0.52]
    assert s.visibility["wrist"].tolist() == [0.97] * 3
    assert s.sample_rate == pytest.approx(100.0)
    t, frame = s.frame(1)
    assert t == 0.01 and frame["wrist"] == (0.61, 0.6, 0.97)


def test_parse_duplicate_timestamp_names_row():
    text = THREE_ROWS.replace("0.02,", "0.01,")
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert exc.value.row == 4
    assert "row 4" in str(exc.value)


def test_parse_header_only():
    with pytest.raises(ParseError, match="no frames"):
        parse(THREE_ROWS.splitlines()[0] + "\n")


def test_parse_missing_landmark_value():
    lines = THREE_ROWS.splitlines()
    cells = lines[2].split(",")
    cells[4] = ""
    lines[2] = ",".join(cells)
    with pytest.raises(ParseError, match="missing landmark 'elbow'") as exc:
        parse("\n".join(lines))
    assert exc.value.row == 3


@pytest.mark.parametrize("bad_row, message", [
    ("0.03,0.4,0.3,0.9,0.5", "expected 10 fields"),
    ("0.03,0.4,abc,0.9,0.5,0.5,0.9,0.6,0.6,0.9", "non-numeric"),
    ("0.03,0.4,0.3,1.5,0.5,0.5,0.9,0.6,0.6,0.9", "visibility"),
    ("0.03,0.4,nan,0.9,0.5,0.5,0.9,0.6,0.6,0.9", "non-finite"),
    ("0.005,0.4,0.3,0.9,0.5,0.5,0.9,0.6,0.6,0.9", "not after"),
])
def test_parse_malformed_rows(bad_row, message):
    with pytest.raises(ParseError, match=message) as exc:
        parse(THREE_ROWS + bad_row + "\n")
    assert exc.value.row == 5


def test_parse_ignores_z_and_accepts_no_visibility():
    text = "t,a_x,a_y,a_z,b_x,b_y\n0,0,0,9,1,1\n0.5,0,0,9,1,2\n"
    s = parse(text)
    assert s.names == ("a", "b")
    assert s.visibility["a"] is None
    assert s.sample_rate == 2.0


@pytest.mark.parametrize("header", ["x,a_x,a_y", "t,a_x", "t,a_x,a_y,a_q", "t"])
def test_parse_bad_header(header):
    with pytest.raises(ParseError) as exc:
        parse(header + "\n" + ",".join(["0"] * len(header.split(","))) + "\n")
    assert exc.value.row == 1


def test_landmark_csv_round_trip():
    t = np.arange(50) / 100
    series = arm_landmarks(t, 1.0 + 0.2 * np.sin(2 * np.pi * t), visibility=np.full(50, 0.9))
    again = parse(landmark_csv_text(series))
    assert np.array_equal(again.t, series.t)
    for name in series.names:
        assert np.array_equal(again.xy[name], series.xy[name])
        assert np.array_equal(again.visibility[name], series.visibility[name])


# -- joint angle --------------------------------------------------------------

@pytest.mark.parametrize("a, b, c, expected", [
    ((0, 0), (1, 0), (2, 0), math.pi),
    ((0, 1), (0, 0), (1, 0), math.pi / 2),
    ((1, 1), (0, 0), (1, 0), math.pi / 4),
    ((2, 0), (0, 0), (1, 0), 0.0),
])
def test_joint_angle_examples(a, b, c, expected):
    assert joint_angle(a, b, c) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("a, b, c", [((0, 0), (0, 0), (1, 0)), ((1, 0), (0, 0), (0, 0))])
def test_joint_angle_degenerate(a, b, c):
    with pytest.raises(DegenerateGeometryError):
        joint_angle(a, b, c)


coord = st.floats(-10, 10, allow_nan=False)
ray = st.tuples(st.floats(0.1, 2), st.floats(0, 2 * math.pi))


@settings(max_examples=200, deadline=None)
@given(b=st.tuples(coord, coord), r1=ray, r2=ray, rot=st.floats(0, 2 * math.pi),
       shift=st.tuples(coord, coord), scale=st.floats(0.1, 10))
def test_joint_angle_similarity_invariant(b, r1, r2, rot, shift, scale):
    b = np.array(b)
    a = b + r1[0] * np.array([math.cos(r1[1]), math.sin(r1[1])])
    c = b + r2[0] * np.array([math.cos(r2[1]), math.sin(r2[1])])
    base = joint_angle(a, b, c)
    assert 0 <= base <= math.pi
    assert joint_angle(c, b, a) == base
    rmat = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
    moved = [scale * (rmat @ p) + np.array(shift) for p in (a, b, c)]
    assert joint_angle(*moved) == pytest.approx(base, abs=1e-12)


# -- angle series -------------------------------------------------------------

def test_angle_series_matches_joint_angle_per_frame():
    t = np.arange(20) / 30
    series = arm_landmarks(t, np.linspace(0.5, 2.5, 20))
    angles = angle_series(series, ELBOW)
    expected = [joint_angle(series.xy["shoulder"][k], series.xy["elbow"][k], series.xy["wrist"][k])
                for k in range(20)]
    assert angles.theta.tolist() == expected
    assert angles.joint == "elbow"


def test_angle_series_sinusoid_round_trip():
    amplitude, f = 0.2182, 1.0
    t = np.arange(201) / 100
    theta = 1.35 + amplitude * np.sin(2 * np.pi * f * t)
    angles = angle_series(arm_landmarks(t, theta), ELBOW)
    assert np.max(np.abs(angles.theta - theta)) < 1e-9


def test_angle_series_drops_low_visibility_frames():
    t = np.arange(6) / 10
    vis = np.array([0.9, 0.2, 0.9, 0.49, 0.5, 0.9])
    angles = angle_series(arm_landmarks(t, 1.0, visibility=vis), ELBOW)
    assert angles.t.tolist() == [t[0], t[2], t[4], t[5]]
    assert np.all(np.diff(angles.t) > 0)


def test_angle_series_all_low_visibility():
    t = np.arange(5) / 10
    with pytest.raises(InsufficientDataError):
        angle_series(arm_landmarks(t, 1.0, visibility=np.full(5, 0.1)), ELBOW)


def test_angle_series_unknown_landmark():
    t = np.arange(5) / 10
    with pytest.raises(InputError, match="not in series"):
        angle_series(arm_landmarks(t, 1.0), JointDefinition("trunk", "hip", "shoulder", "elbow"))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=40), st.floats(0, 1))
def test_visibility_filter_keeps_monotonic(vis, threshold):
    t = np.arange(len(vis)) / 25
    series = arm_landmarks(t, 1.2, visibility=np.array(vis))
    try:
        angles = angle_series(series, ELBOW, visibility_threshold=threshold)
    except InsufficientDataError:
        return
    assert np.all(np.diff(angles.t) > 0)
    assert len(angles) == sum(v >= threshold for v in vis)


def test_joint_definition_requires_distinct_names():
    with pytest.raises(InputError):
        JointDefinition("x", "a", "a", "b")


# -- angular velocity ---------------------------------------------------------

def test_constant_angle_zero_velocity():
    t = np.arange(30) / 100
    omega = angular_velocity(AngleSeries("j", t, np.full(30, 1.1)))
    assert np.all(omega.omega == 0)


@pytest.mark.parametrize("window", [1, 3, 5, 9, 31])
def test_linear_ramp_exact_any_window(window):
    t = np.arange(32) / 64  # dyadic steps keep the differences exact
    omega = angular_velocity(AngleSeries("j", t, 2 * t), smoothing_window=window)
    assert np.array_equal(omega.t, t)
    assert np.max(np.abs(omega.omega - 2.0)) <= 1e-12


def test_linear_ramp_nonuniform_timestamps():
    t = np.cumsum([0.0, 0.01, 0.013, 0.009, 0.02, 0.011, 0.01])
    omega = angular_velocity(AngleSeries("j", t, 0.5 + 2 * t), smoothing_window=3)
    assert np.allclose(omega.omega, 2.0, rtol=0, atol=1e-12)


def test_sinusoid_peak_velocity():
    amplitude, f = 0.2182, 1.0
    t = np.arange(101) / 100
    theta = 1.3 + amplitude * np.sin(2 * np.pi * f * t)
    omega = angular_velocity(AngleSeries("j", t, theta), smoothing_window=1)
    peak = amplitude * 2 * np.pi * f
    assert np.max(np.abs(omega.omega)) == pytest.approx(peak, rel=1e-3)


def test_angular_velocity_preconditions():
    with pytest.raises(InsufficientDataError):
        angular_velocity(AngleSeries("j", [0.0], [1.0]), smoothing_window=1)
    series = AngleSeries("j", np.arange(4) / 10, np.ones(4))
    for bad in (0, 2, -1, 5):
        with pytest.raises(InputError):
            angular_velocity(series, smoothing_window=bad)


def test_moving_average_edges_shrink_symmetrically():
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    out = moving_average(x, 5)
    assert out[0] == 1.0
    assert out[1] == pytest.approx((1 + 2 + 4) / 3)
    assert out[2] == pytest.approx((1 + 2 + 4 + 8 + 16) / 5)
    assert out[-2] == pytest.approx((8 + 16 + 32) / 3)
    assert out[-1] == 32.0


# -- rms ----------------------------------------------------------------------

def test_rms_examples():
    assert rms(OmegaSeries("j", np.arange(4), np.full(4, 3.0))) == 3.0
    assert rms([3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(InsufficientDataError):
        rms([])


def test_rms_dense_sinusoid():
    amp = 2.5
    t = np.linspace(0, 1, 10_000, endpoint=False)
    assert rms(amp * np.sin(2 * np.pi * t)) == pytest.approx(amp / math.sqrt(2), rel=5e-3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50), st.randoms())
def test_rms_reorder_and_sign_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    base = rms(values)
    assert rms(shuffled) == pytest.approx(base, rel=1e-12, abs=1e-300)
    assert rms([-v for v in values]) == base


@pytest.mark.parametrize("rate", [50, 100, 400])
def test_sinusoid_rms_within_one_percent(rate):
    amplitude, f = 0.3, 1.0
    t = np.arange(3 * rate + 1) / rate
    theta = 1.5 + amplitude * np.sin(2 * np.pi * f * t)
    omega = angular_velocity(AngleSeries("j", t, theta), smoothing_window=1)
    target = amplitude * 2 * np.pi * f / math.sqrt(2)
    assert 0.99 * target <= rms(omega) <= 1.01 * target


# -- comparison report --------------------------------------------------------

def _const_omega(value, n=10):
    return OmegaSeries("x", np.arange(n) / 10, np.full(n, value))


def test_report_single_series():
    report = joint_comparison_report([("elbow", 4, "walking", _const_omega(1.5))])
    assert len(report.rows) == 1
    assert report.best_for(4.0).joint == "elbow"


def test_report_argmax_matches_published_ordering():
    report = joint_comparison_report([
        ("elbow", 6, "walking", _const_omega(7.1)),
        ("trunk", 6, "walking", _const_omega(0.6)),
    ])
    assert report.best_for(6.0).joint == "elbow"
    assert report.rms_of("elbow", "walking", 6.0) == pytest.approx(7.1)


def test_report_four_joints_against_direct_rms():
    rng = np.random.default_rng(7)
    series = {name: OmegaSeries(name, np.arange(40) / 20, rng.normal(0, s, 40))
              for name, s in [("elbow", 3.0), ("trunk", 1.0), ("wrist", 2.0), ("knee", 0.5)]}
    report = joint_comparison_report([(n, 5, "running", o) for n, o in series.items()])
    for name, o in series.items():
        oracle = math.sqrt(sum(v * v for v in o.omega) / len(o.omega))
        assert report.rms_of(name, "running", 5.0) == pytest.approx(oracle, rel=1e-12)
    assert report.best_for(5.0).joint == max(series, key=lambda n: rms(series[n]))


def test_report_duplicate_key():
    with pytest.raises(DuplicateKeyError):
        joint_comparison_report([("elbow", 4, "walking", _const_omega(1)),
                                 ("elbow", 4.0, "walking", _const_omega(2))])


def test_report_rejects_unknown_gait_and_empty():
    with pytest.raises(InputError):
        joint_comparison_report([("elbow", 4, "skipping", _const_omega(1))])
    with pytest.raises(InsufficientDataError):
        joint_comparison_report([])


def test_report_best_per_speed_and_tie_goes_first():
    report = joint_comparison_report([
        ("elbow", 4, "walking", _const_omega(1.5)),
        ("trunk", 4, "walking", _const_omega(1.1)),
        ("elbow", 5, "walking", _const_omega(2.0)),
        ("trunk", 5, "running", _const_omega(2.0)),
    ])
    assert [(b.speed_kmh, b.joint, b.gait) for b in report.best] == [
        (4.0, "elbow", "walking"), (5.0, "elbow", "walking")]


def test_report_csv_and_json():
    report = joint_comparison_report([
        ("elbow", 4, "walking", _const_omega(1.5)),
        ("trunk", 4, "walking", _const_omega(1.1)),
    ])
    buf = io.StringIO()
    report.write_csv(buf, comment="harvestsim test")
    text = buf.getvalue()
    assert text.splitlines()[1] == "joint,gait,speed_kmh,rms_rad_s"
    assert parse_comparison_csv(io.StringIO(text)) == report.rows
    data = report.to_json()
    assert data["argmax"] == [{"speed_kmh": 4.0, "joint": "elbow", "gait": "walking",
                               "rms_rad_s": 1.5}]

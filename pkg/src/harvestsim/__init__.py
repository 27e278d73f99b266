"""Design and simulation toolkit for a joint-mounted gear-and-generator
biomechanical energy harvester."""

__version__ = "0.1.0"

from .electromech import (  # noqa: E402
    FitResult,
    GeneratorParams,
    LoadSweepRecord,
    efficiency,
    emf,
    fit_sweep,
    load_current,
    optimal_load,
    output_speed,
    power_from_vrms,
    power_split,
)
from .geartrain import (  # noqa: E402
    GearStage,
    GearTrain,
    mesh_center_distance,
    overall_ratio,
    pitch_diameter,
    validate_train,
)
from .kinematics import (  # noqa: E402
    AngleSeries,
    JointDefinition,
    LandmarkSeries,
    OmegaSeries,
    angle_series,
    angular_velocity,
    joint_angle,
    joint_comparison_report,
    parse_landmark_series,
    rms,
)
from .simulate import (  # noqa: E402
    CapacitorSpec,
    ChainTrace,
    SwingProfile,
    capacitor_energy,
    simulate_capacitor,
    simulate_chain,
    sweep_load,
    synth_swing,
)

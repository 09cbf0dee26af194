"""Simulation and programming of modular Mach-Zehnder-interferometer meshes.

Chips holding one column of MZIs are stacked with alternating one-waveguide
offsets into a rectangular mesh. The package models imperfect chips,
compiles unitaries into phase settings, calibrates heaters from intensity
fringes and runs switching, tritter and random-unitary experiments.
"""

from .calibration import (
    CalibrationTable,
    FringeFit,
    FringeScan,
    calibrate,
    fit_tuning_curve,
    fringe_scan,
    measure_crosstalk,
    program,
)
from .config import DeviceConfig, load_config
from .decompose import MeshSettings, clements_decompose, reconstruct
from .errors import (
    ConvergenceError,
    DegenerateMeasurementError,
    DimensionError,
    FitError,
    MeshError,
    ModeIndexError,
    RoutingError,
    UnreachablePhaseError,
    ValidationError,
)
from .imperfections import (
    ImperfectionSpec,
    Layout,
    apply_crosstalk,
    apply_drive,
    quantize_drive,
    sample_hardware,
)
from .linalg import (
    amplitude_fidelity,
    column_normalize,
    dft_matrix,
    haar_random_unitary,
    is_unitary,
    unitarity_error,
)
from .mesh import (
    BAR,
    CROSS,
    Assembly,
    ChipModule,
    MZIHardware,
    MZISetting,
    NoiseSpec,
    TuningCurve,
    assembly_transfer,
    ideal_assembly,
    measure_intensities,
    module_transfer,
    mzi_transfer,
)
from .protocols import (
    ExperimentReport,
    configure_switch,
    measure_transfer_matrix,
    run_switch_experiment,
    run_universal_experiment,
    self_configure_tritter,
)

__version__ = "0.1.0"

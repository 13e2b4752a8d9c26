"""Angle-of-departure estimation from WiFi channel state and compressed
beamforming feedback.

Subpackages: :mod:`senselab.numerics` (bespoke small-matrix eigensolver
and SVD), :mod:`senselab.channel` (multipath MIMO-OFDM synthesis),
:mod:`senselab.bff_codec` (Givens-rotation feedback compression),
:mod:`senselab.music` (subspace estimation and calibration),
:mod:`senselab.sim` (scenes and Monte-Carlo evaluation), and
:mod:`senselab.cli` (command-line entry points).
"""

__version__ = "0.1.0"

from . import _kernels
from ._kernels import BACKEND
from .bff_codec import (
    BffReport,
    GivensAngles,
    QuantizationConfig,
    QuantizedAngles,
    angle_payload_bits,
    decode_bff,
    dequantize_angles,
    dump_bff,
    encode_bff,
    givens_angle_count,
    givens_decompose,
    givens_reconstruct,
    load_bff,
    pack_report,
    quantize_angles,
    unpack_report,
)
from .channel import (
    ArrayGeometry,
    CsiSet,
    Path,
    PathSet,
    SubcarrierGrid,
    add_noise,
    default_grid,
    dump_csi,
    inject_noise,
    load_csi,
    steering_vector,
    synthesize_csi,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DecodeError,
    DegenerateGeometryError,
    DimensionError,
    InputError,
    ParseError,
    PeakDeficitError,
    SenselabError,
)
from .music import (
    AodEstimate,
    Calibration,
    Covariance,
    EstimationParams,
    MusicSpectrum,
    angle_grid,
    average_covariances,
    covariance_from_bff,
    covariance_from_csi,
    dump_calibration,
    estimate_aod,
    estimate_calibration,
    find_peaks,
    load_calibration,
    music_spectrum,
    noise_subspace,
    spatial_smooth,
    write_spectrum_csv,
)
from .numerics import (
    MAX_EIG_DIM,
    EigenDecomposition,
    SvdDecomposition,
    hermitian_eig,
    svd,
)
from .sim import (
    ErrorTable,
    Scene,
    TrialConfig,
    aod_error,
    compute_spectrum,
    dump_spectrum,
    run_numerical_eval,
    two_path_scene,
)

__all__ = [
    "__version__",
    "BACKEND",
    "MAX_EIG_DIM",
    "AodEstimate",
    "ArrayGeometry",
    "BffReport",
    "Calibration",
    "ConfigurationError",
    "ConvergenceError",
    "Covariance",
    "CsiSet",
    "DecodeError",
    "DegenerateGeometryError",
    "DimensionError",
    "EigenDecomposition",
    "ErrorTable",
    "EstimationParams",
    "GivensAngles",
    "InputError",
    "MusicSpectrum",
    "ParseError",
    "Path",
    "PathSet",
    "PeakDeficitError",
    "QuantizationConfig",
    "QuantizedAngles",
    "Scene",
    "SenselabError",
    "SubcarrierGrid",
    "SvdDecomposition",
    "TrialConfig",
    "add_noise",
    "angle_grid",
    "angle_payload_bits",
    "aod_error",
    "average_covariances",
    "compute_spectrum",
    "covariance_from_bff",
    "covariance_from_csi",
    "decode_bff",
    "default_grid",
    "dequantize_angles",
    "dump_bff",
    "dump_calibration",
    "dump_csi",
    "dump_spectrum",
    "encode_bff",
    "estimate_aod",
    "estimate_calibration",
    "find_peaks",
    "givens_angle_count",
    "givens_decompose",
    "givens_reconstruct",
    "hermitian_eig",
    "inject_noise",
    "load_bff",
    "load_calibration",
    "load_csi",
    "music_spectrum",
    "noise_subspace",
    "pack_report",
    "quantize_angles",
    "run_numerical_eval",
    "spatial_smooth",
    "steering_vector",
    "svd",
    "synthesize_csi",
    "two_path_scene",
    "unpack_report",
    "write_spectrum_csv",
]

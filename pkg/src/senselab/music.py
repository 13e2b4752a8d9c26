"""Angle-of-departure estimation core.

Covariance construction from decoded feedback or raw CSI, per-antenna
phase calibration, forward spatial smoothing, the MUSIC pseudo-spectrum,
and peak extraction.  The estimation chain is:

    per-packet covariance -> average -> smooth -> noise subspace
        -> spectrum -> peaks
"""

import functools
import json
from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, ArrayGeometry, CsiSet, _steering_columns
from .bff_codec import BffReport, decode_bff
from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    DimensionError,
    InputError,
    ParseError,
    PeakDeficitError,
)
from .numerics import hermitian_eig

_HERM_REL = 1e-9
_PSD_REL = 1e-9
_UNIT_TOL = 1e-10
_ORTHO_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Covariance:
    """A Hermitian positive-semidefinite sample covariance."""

    matrix: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.matrix, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise DimensionError(f"covariance must be square, got shape {c.shape}")
        scale = float(np.linalg.norm(c))
        if not np.isfinite(scale):
            raise InputError("covariance contains non-finite entries")
        if np.linalg.norm(c - c.conj().T) > _HERM_REL * max(scale, 1.0):
            raise InputError("covariance is not Hermitian")
        if c.shape[0] > 1 and scale > 0:
            w = hermitian_eig(c).values
            if w[0] < -_PSD_REL * max(w[-1], 0.0):
                raise InputError("covariance is not positive semidefinite")
        object.__setattr__(self, "matrix", c)

    @property
    def dimension(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Calibration:
    """Per-subcarrier diagonal phase corrections.

    ``w`` has shape (K, N) with unit-modulus entries; the first antenna
    is the phase reference, so ``w[:, 0]`` is exactly 1.
    """

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.complex128)
        if w.ndim != 2 or w.shape[1] < 1:
            raise DimensionError("calibration must be (num_subcarriers, dimension)")
        if np.any(np.abs(np.abs(w) - 1.0) > _UNIT_TOL):
            raise InputError("calibration entries must have unit modulus")
        if not np.all(w[:, 0] == 1.0):
            raise InputError("the first calibration entry must be exactly 1")
        object.__setattr__(self, "w", w)

    @classmethod
    def identity(cls, num_subcarriers, dimension):
        return cls(w=np.ones((num_subcarriers, dimension), dtype=np.complex128))

    @property
    def num_subcarriers(self):
        return self.w.shape[0]

    @property
    def dimension(self):
        return self.w.shape[1]

    def arguments(self):
        """Per-subcarrier correction arguments in radians, shape (K, N)."""
        return np.angle(self.w)


@dataclass(frozen=True, eq=False)
class MusicSpectrum:
    """Pseudo-spectrum over an angle grid.

    ``quadform`` is the projection power onto the noise subspace per grid
    angle; ``values`` is its reciprocal g.  A quadform of exactly zero
    (steering vector inside the signal subspace) yields g = inf; no
    epsilon regularization is applied.
    """

    grid_deg: np.ndarray
    quadform: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid_deg, dtype=np.float64)
        q = np.asarray(self.quadform, dtype=np.float64)
        g = np.asarray(self.values, dtype=np.float64)
        if not (grid.ndim == 1 and q.shape == grid.shape and g.shape == grid.shape):
            raise DimensionError("grid, quadform and values must be equal-length 1-D")
        if np.any(q < 0):
            raise InputError("quadform must be non-negative")
        object.__setattr__(self, "grid_deg", grid)
        object.__setattr__(self, "quadform", q)
        object.__setattr__(self, "values", g)


@dataclass(frozen=True, eq=False)
class AodEstimate:
    """Estimated departure angles (degrees, ascending) plus the spectrum
    they were read from."""

    angles_deg: tuple
    spectrum: MusicSpectrum

    def __post_init__(self):
        angles = tuple(float(a) for a in self.angles_deg)
        if any(b < a for a, b in zip(angles, angles[1:])):
            raise InputError("estimated angles must be ascending")
        if any(not -90.0 < a < 90.0 for a in angles):
            raise InputError("estimated angles must lie inside (-90, 90) degrees")
        object.__setattr__(self, "angles_deg", angles)


def covariance_from_bff(v, gains, calibration=None):
    """Covariance from decoded feedback: C = (1/K) sum_k W_k V_k G V_k^H W_k^H.

    ``v`` holds the per-subcarrier orthonormal-column matrices (K, N, S),
    ``gains`` the linear-scale stream gains (S,).
    """
    try:
        v = np.asarray(v, dtype=np.complex128)
    except ValueError:
        raise DimensionError("per-subcarrier matrices must share one shape") from None
    gains = np.asarray(gains, dtype=np.float64)
    if v.ndim != 3:
        raise DimensionError("expected per-subcarrier matrices of shape (K, N, S)")
    k, n, s = v.shape
    if gains.shape != (s,):
        raise DimensionError(f"need one gain per stream: expected ({s},)")
    if np.any(gains < 0) or not np.all(np.isfinite(gains)):
        raise InputError("gains must be non-negative and finite")
    if k < 1:
        raise InputError("need at least one subcarrier")
    if calibration is not None:
        if calibration.dimension != n or calibration.num_subcarriers != k:
            raise DimensionError(
                f"calibration is {calibration.num_subcarriers}x{calibration.dimension}, "
                f"feedback needs {k}x{n}"
            )
        v = v * calibration.w[:, :, None]
    c = np.einsum("kns,s,kms->nm", v, gains, v.conj(), optimize=True) / k
    return Covariance(matrix=c)


def covariance_from_csi(csi, mode="full", calibration=None):
    """Covariance from raw CSI.

    ``full`` mode averages the Gram matrices H_k^H H_k; ``first_row``
    mode uses only each subcarrier's first receive antenna, h_k^H h_k.
    """
    if mode not in ("full", "first_row"):
        raise ConfigurationError(f"unknown CSI covariance mode {mode!r}")
    h = csi.h
    if calibration is not None:
        if calibration.dimension != csi.num_tx or (
            calibration.num_subcarriers != csi.num_subcarriers
        ):
            raise DimensionError(
                f"calibration is {calibration.num_subcarriers}x{calibration.dimension}, "
                f"CSI needs {csi.num_subcarriers}x{csi.num_tx}"
            )
        h = h * calibration.w.conj()[:, None, :]
    if mode == "full":
        c = np.einsum("kmn,kmp->np", h.conj(), h, optimize=True) / csi.num_subcarriers
    else:
        first = h[:, 0, :]
        c = np.einsum("kn,kp->np", first.conj(), first, optimize=True) / csi.num_subcarriers
    return Covariance(matrix=c)


def average_covariances(covariances, num_packets=None):
    """Element-wise mean of equally sized covariances."""
    covariances = list(covariances)
    if not covariances:
        raise InputError("cannot average an empty covariance list")
    if num_packets is not None and len(covariances) != num_packets:
        raise InputError(
            f"expected {num_packets} covariances, got {len(covariances)}"
        )
    dim = covariances[0].dimension
    if any(c.dimension != dim for c in covariances):
        raise DimensionError("covariances must share one dimension")
    return Covariance(matrix=np.mean([c.matrix for c in covariances], axis=0))


def spatial_smooth(covariance, subarray_size):
    """Forward spatial smoothing: mean of the contiguous principal blocks.

    Averages the M - M' + 1 submatrices C[j:j+M', j:j+M'] along the
    diagonal, restoring rank to coherent multipath at the cost of
    aperture.
    """
    m = covariance.dimension
    mp = int(subarray_size)
    if not 2 <= mp <= m:
        raise InputError(f"subarray size must lie in [2, {m}], got {subarray_size}")
    blocks = [covariance.matrix[j : j + mp, j : j + mp] for j in range(m - mp + 1)]
    return Covariance(matrix=np.mean(blocks, axis=0))


def noise_subspace(covariance, num_paths):
    """Eigenvectors of the smallest covariance eigenvalues.

    Returns the (M', M' - L) orthonormal noise-subspace basis.
    """
    mp = covariance.dimension
    l = int(num_paths)
    if l < 1:
        raise InputError("path count must be at least 1")
    if l >= mp:
        raise ConfigurationError(
            f"insufficient subarray size for {l} paths: need more than {mp} elements"
        )
    eig = hermitian_eig(covariance.matrix)
    return np.ascontiguousarray(eig.vectors[:, : mp - l])


@functools.lru_cache(maxsize=8)
def _steering_grid(num_elements, spacing, wavelength, grid_bytes, grid_len):
    grid = np.frombuffer(grid_bytes, dtype=np.float64, count=grid_len)
    geometry = ArrayGeometry(num_elements=num_elements, element_spacing=spacing)
    return _steering_columns(grid, geometry, wavelength)


def angle_grid(step_deg=0.02):
    """Uniform degree grid over [-90, 90] inclusive."""
    if not 0 < step_deg <= 180:
        raise InputError("grid step must lie in (0, 180] degrees")
    return np.linspace(-90.0, 90.0, int(round(180.0 / step_deg)) + 1)


def music_spectrum(noise_basis, geometry, wavelength, grid_deg):
    """Evaluate the MUSIC pseudo-spectrum over an angle grid.

    ``quadform(phi) = ||E_N^H a(phi)||^2`` and ``g = 1/quadform``, with
    the steering vector over the (sub)array described by ``geometry``.
    Grid angles may include the array endfires at +-90 degrees.
    """
    e_n = np.asarray(noise_basis, dtype=np.complex128)
    if e_n.ndim != 2 or e_n.shape[0] != geometry.num_elements:
        raise DimensionError(
            f"noise basis must be ({geometry.num_elements}, cols), got {e_n.shape}"
        )
    cols = e_n.shape[1]
    if cols and np.linalg.norm(e_n.conj().T @ e_n - np.eye(cols)) > _ORTHO_TOL:
        raise InputError("noise basis columns are not orthonormal")
    grid = np.asarray(grid_deg, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise InputError("grid must be a non-empty 1-D angle list")
    if np.any(grid[1:] <= grid[:-1]):
        raise InputError("grid must be strictly increasing")
    steering = _steering_grid(
        geometry.num_elements,
        geometry.element_spacing,
        wavelength,
        grid.tobytes(),
        grid.size,
    )
    if cols:
        proj = steering.conj() @ e_n
        quadform = np.einsum("gc,gc->g", proj, proj.conj(), optimize=True).real
        quadform = np.maximum(quadform, 0.0)
    else:
        quadform = np.zeros(grid.size)
    with np.errstate(divide="ignore"):
        values = np.where(quadform > 0, 1.0 / np.where(quadform > 0, quadform, 1.0), np.inf)
    return MusicSpectrum(grid_deg=grid, quadform=quadform, values=values)


def _refine_peak(grid, logq, i):
    """Parabolic vertex through three log-quadform points around index i."""
    x0, x1, x2 = grid[i - 1], grid[i], grid[i + 1]
    y0, y1, y2 = logq[i - 1], logq[i], logq[i + 1]
    if not (np.isfinite(y0) and np.isfinite(y1) and np.isfinite(y2)):
        return float(x1)
    da, db = x1 - x0, x1 - x2
    denom = da * (y1 - y2) - db * (y1 - y0)
    if denom >= 0:  # non-convex triple; keep the grid point
        return float(x1)
    vertex = x1 - 0.5 * (da * da * (y1 - y2) - db * db * (y1 - y0)) / denom
    return float(np.clip(vertex, x0, x2))


def find_peaks(spectrum, num_paths):
    """Extract the L sharpest spectrum peaks as refined angles.

    Peaks are interior strict local minima of the quadform; the L with
    the smallest values are kept, each refined by parabolic interpolation
    of the log-quadform over its 3-point neighborhood.  Grid boundary
    points are never peaks.  Raises PeakDeficitError (carrying the peaks
    that were found) when fewer than L exist.
    """
    l = int(num_paths)
    if l < 1:
        raise InputError("path count must be at least 1")
    grid = spectrum.grid_deg
    q = spectrum.quadform
    if grid.size < 3:
        raise InputError("peak finding needs a grid of at least 3 points")
    interior = np.flatnonzero((q[1:-1] < q[:-2]) & (q[1:-1] < q[2:])) + 1
    order = interior[np.argsort(q[interior], kind="stable")]
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    chosen = order[:l]
    refined = sorted(_refine_peak(grid, logq, i) for i in chosen)
    if len(chosen) < l:
        raise PeakDeficitError(
            f"found {len(chosen)} spectrum peaks, need {l}",
            found_deg=tuple(refined),
        )
    return AodEstimate(angles_deg=tuple(refined), spectrum=spectrum)


def _per_subcarrier_covariances(report):
    """Per-subcarrier N x N covariance stack (K, N, N) for one report."""
    if isinstance(report, CsiSet):
        return np.einsum("kmn,kmp->knp", report.h.conj(), report.h, optimize=True)
    if isinstance(report, BffReport):
        v, gains = decode_bff(report)
        return np.einsum("kns,s,kps->knp", v, gains, v.conj(), optimize=True)
    raise InputError(f"unsupported report type {type(report).__name__}")


def estimate_calibration(reports, known_aod_deg, geometry, grid=None):
    """Estimate per-antenna phase corrections from single-path captures.

    For each subcarrier, the top eigenvector x of the report-averaged
    covariance is an offset-rotated copy of the steering vector at the
    known departure angle; after normalizing x so its first entry is 1,
    the correction is w_n = a_n(known_aod) * conj(x_n) scaled to unit
    modulus.  CSI reports carry their own subcarrier grid; feedback
    reports need ``grid`` passed explicitly.
    """
    reports = list(reports)
    if not reports:
        raise InputError("need at least one report to calibrate")
    if isinstance(reports[0], CsiSet):
        grid = reports[0].grid
    elif grid is None:
        raise InputError("feedback reports need an explicit subcarrier grid")
    k = grid.num_subcarriers
    n = geometry.num_elements
    acc = np.zeros((k, n, n), dtype=np.complex128)
    for report in reports:
        per_k = _per_subcarrier_covariances(report)
        if per_k.shape != (k, n, n):
            raise DimensionError(
                f"report covariances have shape {per_k.shape}, expected {(k, n, n)}"
            )
        acc += per_k
    acc /= len(reports)
    lams = grid.wavelengths()
    w = np.empty((k, n), dtype=np.complex128)
    for ki in range(k):
        eig = hermitian_eig(acc[ki])
        x = eig.vectors[:, -1]
        if abs(x[0]) < 1e-6:
            raise DegenerateGeometryError(
                "calibration eigenvector has a vanishing first entry"
            )
        x = x / x[0]
        a = _steering_columns([known_aod_deg], geometry, lams[ki])[0]
        prod = a * x.conj()
        mags = np.abs(prod)
        if np.any(mags == 0):
            raise DegenerateGeometryError("calibration eigenvector has a zero entry")
        w[ki] = prod / mags
        w[ki, 0] = 1.0
    return Calibration(w=w)


@dataclass(frozen=True)
class EstimationParams:
    """Configuration for the end-to-end estimate.

    ``num_paths`` is the model order L, ``subarray_size`` the smoothing
    dimension M' (must exceed L; defaults to the full array, meaning no
    smoothing), ``num_packets`` the number of reports averaged,
    ``wavelength`` the single wavelength the spectrum is evaluated at.
    """

    geometry: ArrayGeometry
    wavelength: float
    num_paths: int
    subarray_size: int = None
    num_packets: int = 1
    grid_deg: np.ndarray = None
    calibration: Calibration = None
    csi_mode: str = "full"

    def __post_init__(self):
        if self.num_paths < 1:
            raise InputError("path count must be at least 1")
        if self.num_packets < 1:
            raise InputError("packet count must be at least 1")
        if not self.wavelength > 0:
            raise InputError("wavelength must be positive")
        mp = self.geometry.num_elements if self.subarray_size is None else int(self.subarray_size)
        object.__setattr__(self, "subarray_size", mp)
        if mp <= self.num_paths:
            raise ConfigurationError(
                f"subarray size {mp} cannot resolve {self.num_paths} paths; "
                "need subarray_size > num_paths"
            )
        grid = angle_grid() if self.grid_deg is None else np.asarray(self.grid_deg, float)
        object.__setattr__(self, "grid_deg", grid)
        if self.csi_mode not in ("full", "first_row"):
            raise ConfigurationError(f"unknown CSI covariance mode {self.csi_mode!r}")


def estimate_aod(reports, params):
    """Run the full estimation chain on a batch of reports.

    Reports are either CsiSets or BffReports (homogeneously typed); the
    first ``params.num_packets`` are used.
    """
    reports = list(reports)
    if len(reports) < params.num_packets:
        raise InputError(
            f"need at least {params.num_packets} reports, got {len(reports)}"
        )
    covs = []
    for report in reports[: params.num_packets]:
        if isinstance(report, CsiSet):
            covs.append(covariance_from_csi(report, params.csi_mode, params.calibration))
        elif isinstance(report, BffReport):
            v, gains = decode_bff(report)
            covs.append(covariance_from_bff(v, gains, params.calibration))
        else:
            raise InputError(f"unsupported report type {type(report).__name__}")
        if covs[-1].dimension != params.geometry.num_elements:
            raise DimensionError(
                f"report covariance dimension {covs[-1].dimension} does not match "
                f"the {params.geometry.num_elements}-element array"
            )
    c_ave = average_covariances(covs, params.num_packets)
    c_smt = spatial_smooth(c_ave, params.subarray_size)
    e_n = noise_subspace(c_smt, params.num_paths)
    sub_geometry = ArrayGeometry(
        num_elements=params.subarray_size,
        element_spacing=params.geometry.element_spacing,
    )
    spectrum = music_spectrum(e_n, sub_geometry, params.wavelength, params.grid_deg)
    return find_peaks(spectrum, params.num_paths)


def write_spectrum_csv(spectrum, fp):
    """Write a MusicSpectrum as CSV with columns angle_deg, quadform, g."""
    fp.write("angle_deg,quadform,g\n")
    for angle, q, g in zip(spectrum.grid_deg, spectrum.quadform, spectrum.values):
        fp.write(f"{float(angle)!r},{float(q)!r},{float(g)!r}\n")


def dump_calibration(calibration, fp):
    """Write a Calibration as JSON: per-subcarrier arguments in radians."""
    json.dump({"arguments": calibration.arguments().tolist()}, fp)


def load_calibration(fp):
    """Read a Calibration from JSON (inverse of dump_calibration)."""
    try:
        payload = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ParseError(f"calibration dump is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or "arguments" not in payload:
        raise ParseError("calibration dump is missing field 'arguments'")
    try:
        args = np.asarray(payload["arguments"], dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("calibration dump field 'arguments' must be numeric") from None
    if args.ndim != 2:
        raise ParseError("calibration dump field 'arguments' must be 2-D")
    if np.any(np.abs(args[:, 0]) > 1e-9):
        raise ParseError("calibration reference antenna must have zero argument")
    w = np.exp(1j * args)
    w[:, 0] = 1.0
    try:
        return Calibration(w=w)
    except (InputError, DimensionError) as exc:
        raise ParseError(f"calibration dump is inconsistent: {exc}") from None

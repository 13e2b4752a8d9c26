"""Discrete multipath propagation model.

Uniform linear arrays, OFDM subcarrier grids, steering vectors, CSI
synthesis from path sets, and observation-noise injection.  Angles are
degrees at the API boundary (broadside = 0, positive toward increasing
element index) and radians internally.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, ParseError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and inter-element spacing in meters."""

    num_elements: int
    element_spacing: float

    def __post_init__(self):
        if self.num_elements < 2:
            raise DimensionError("an array needs at least 2 elements")
        if not self.element_spacing > 0:
            raise InputError("element spacing must be positive")


@dataclass(frozen=True)
class Path:
    """One propagation path.

    Attributes
    ----------
    aod_deg, aoa_deg : float
        Departure / arrival angles, strictly inside (-90, 90).
    gain : complex
        Path amplitude at the receiver (free-space decay, reflection loss).
    excess_length : float
        Extra travel distance in meters relative to the scene's reference
        path; sets the per-subcarrier phase rotation.  The common absolute
        delay is unobservable in any covariance, so only differences matter.
    """

    aod_deg: float
    aoa_deg: float
    gain: complex
    excess_length: float = 0.0

    def __post_init__(self):
        if not (abs(self.aod_deg) < 90 and abs(self.aoa_deg) < 90):
            raise InputError("path angles must lie strictly inside (-90, 90) degrees")
        if not np.isfinite([self.aod_deg, self.aoa_deg, self.excess_length]).all():
            raise InputError("path parameters must be finite")
        if not np.isfinite(complex(self.gain)):
            raise InputError("path gain must be finite")


@dataclass(frozen=True)
class PathSet:
    """Ordered collection of propagation paths (at least one)."""

    paths: tuple

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if len(self.paths) < 1:
            raise InputError("a path set needs at least one path")

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def aods_deg(self):
        """Departure angles in path order."""
        return np.array([p.aod_deg for p in self.paths])


@dataclass(frozen=True)
class SubcarrierGrid:
    """OFDM subcarrier layout.

    Per-subcarrier frequency is ``center_frequency + index * spacing``.
    ``bandwidth`` is informational (nominal channel width); nothing is
    computed from it and serialized grids omit it.
    """

    center_frequency: float
    spacing: float
    indices: tuple
    bandwidth: float = None

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if len(self.indices) < 1:
            raise InputError("a subcarrier grid needs at least one index")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise InputError("subcarrier indices must be strictly increasing")
        if not self.center_frequency > 0 or self.spacing < 0:
            raise InputError("center frequency must be positive, spacing non-negative")
        if np.min(self.frequencies()) <= 0:
            raise InputError("all subcarrier frequencies must be positive")

    @property
    def num_subcarriers(self):
        return len(self.indices)

    def frequencies(self):
        """Per-subcarrier frequencies in Hz, shape (K,)."""
        return self.center_frequency + np.asarray(self.indices, dtype=float) * self.spacing

    def wavelengths(self):
        """Per-subcarrier wavelengths in meters, shape (K,)."""
        return SPEED_OF_LIGHT / self.frequencies()

    @property
    def center_wavelength(self):
        return SPEED_OF_LIGHT / self.center_frequency


def default_grid():
    """The 20 MHz legacy-OFDM layout used throughout: 52 data subcarriers
    (indices -26..-1, 1..26) at 312.5 kHz spacing around 5.18 GHz."""
    indices = tuple(i for i in range(-26, 27) if i != 0)
    return SubcarrierGrid(
        center_frequency=5.18e9, spacing=312.5e3, indices=indices, bandwidth=20e6
    )


@dataclass(frozen=True, eq=False)
class CsiSet:
    """Per-subcarrier channel matrices for one sounding packet.

    ``h`` has shape (K, M, N): receiver rows, transmitter columns.
    """

    h: np.ndarray
    grid: SubcarrierGrid

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        if h.ndim != 3:
            raise DimensionError(f"CSI array must be (K, M, N), got shape {h.shape}")
        if h.shape[0] != self.grid.num_subcarriers:
            raise DimensionError(
                f"CSI has {h.shape[0]} subcarriers but the grid has "
                f"{self.grid.num_subcarriers}"
            )
        if h.shape[1] < 1 or h.shape[2] < 1:
            raise DimensionError("CSI matrices need at least one row and column")
        if not (np.all(np.isfinite(h.real)) and np.all(np.isfinite(h.imag))):
            raise InputError("CSI contains non-finite entries")
        object.__setattr__(self, "h", h)

    @property
    def num_subcarriers(self):
        return self.h.shape[0]

    @property
    def num_rx(self):
        return self.h.shape[1]

    @property
    def num_tx(self):
        return self.h.shape[2]


def _steering_columns(angles_deg, geometry, wavelength):
    """Steering vectors for a batch of angles: shape (len(angles), M).

    Internal: accepts the closed interval [-90, 90] so spectrum grids may
    include the endpoints (sin(+-90 deg) = +-1 is perfectly evaluable).
    """
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    if np.any(np.abs(angles) > 90) or not np.all(np.isfinite(angles)):
        raise InputError("steering angles must lie in [-90, 90] degrees")
    if not wavelength > 0:
        raise InputError("wavelength must be positive")
    m = np.arange(geometry.num_elements)
    phase = (
        2.0
        * np.pi
        * geometry.element_spacing
        * np.sin(np.radians(angles))[:, None]
        * m[None, :]
        / wavelength
    )
    out = np.exp(1j * phase)
    out[:, 0] = 1.0  # exact, by convention
    return out


def steering_vector(angle_deg, geometry, wavelength):
    """Array response to a plane wave from ``angle_deg``.

    Element m (0-based) is exp(j*2*pi*d*sin(angle)*m/lambda); element 0 is
    exactly 1.  Angles must lie strictly inside (-90, 90) degrees.
    """
    if not abs(angle_deg) < 90:
        raise InputError("angle must lie strictly inside (-90, 90) degrees")
    return _steering_columns([angle_deg], geometry, wavelength)[0]


def synthesize_csi(paths, tx, rx, grid):
    """Build per-subcarrier channel matrices from a path set.

    Each path contributes the rank-1 term
    ``r_k * a_rx(aoa) a_tx(aod)^H`` per subcarrier, where
    ``r_k = gain * exp(-j*2*pi*f_k*excess_length/c)`` and both steering
    vectors use that subcarrier's own wavelength.
    """
    if len(paths) < 1:
        raise InputError("need at least one path")
    freqs = grid.frequencies()
    lams = grid.wavelengths()
    k = grid.num_subcarriers
    h = np.zeros((k, rx.num_elements, tx.num_elements), dtype=np.complex128)
    for path in paths:
        r_k = complex(path.gain) * np.exp(
            -2j * np.pi * freqs * path.excess_length / SPEED_OF_LIGHT
        )
        for ki in range(k):
            a_rx = _steering_columns([path.aoa_deg], rx, lams[ki])[0]
            a_tx = _steering_columns([path.aod_deg], tx, lams[ki])[0]
            h[ki] += r_k[ki] * np.outer(a_rx, a_tx.conj())
    return CsiSet(h=h, grid=grid)


def inject_noise(csi, noise_variance, rng_seed):
    """Add complex Gaussian noise of the given per-entry variance.

    Real and imaginary parts each get variance ``noise_variance / 2``.
    Deterministic for a fixed seed.
    """
    if noise_variance < 0:
        raise InputError("noise variance must be non-negative")
    if noise_variance == 0:
        return csi
    rng = np.random.default_rng(rng_seed)
    draws = rng.normal(scale=np.sqrt(noise_variance / 2.0), size=csi.h.shape + (2,))
    return CsiSet(h=csi.h + draws[..., 0] + 1j * draws[..., 1], grid=csi.grid)


def add_noise(csi, snr_db, rng_seed):
    """Add observation noise at a target SNR.

    The noise variance solves
    ``snr_db = 10*log10(mean_k ||H_k||_F^2 / (M*N*sigma^2))``.  An SNR of
    +inf disables noise and returns the input unchanged.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return csi
    power = float(np.mean(np.sum(np.abs(csi.h) ** 2, axis=(1, 2))))
    if power == 0:
        raise InputError("zero-signal CSI cannot define a finite SNR")
    entries = csi.num_rx * csi.num_tx
    sigma2 = power / (entries * 10.0 ** (snr_db / 10.0))
    return inject_noise(csi, sigma2, rng_seed)


def dump_csi(csi, fp):
    """Write a CsiSet as JSON to a file object."""
    payload = {
        "m": csi.num_rx,
        "n": csi.num_tx,
        "k": csi.num_subcarriers,
        "center_hz": csi.grid.center_frequency,
        "spacing_hz": csi.grid.spacing,
        "indices": list(csi.grid.indices),
        "h": [
            [[float(z.real), float(z.imag)] for z in hk.ravel()]
            for hk in csi.h
        ],
    }
    json.dump(payload, fp)


def load_csi(fp):
    """Read a CsiSet from a JSON file object (inverse of dump_csi)."""
    try:
        payload = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ParseError(f"CSI dump is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError("CSI dump must be a JSON object")
    for key in ("m", "n", "k", "center_hz", "spacing_hz", "indices", "h"):
        if key not in payload:
            raise ParseError(f"CSI dump is missing field {key!r}")
    try:
        m, n, k = int(payload["m"]), int(payload["n"]), int(payload["k"])
        grid = SubcarrierGrid(
            center_frequency=float(payload["center_hz"]),
            spacing=float(payload["spacing_hz"]),
            indices=[int(i) for i in payload["indices"]],
        )
    except (TypeError, ValueError, InputError) as exc:
        raise ParseError(f"CSI dump has a malformed header field: {exc}") from None
    if len(payload["indices"]) != k:
        raise ParseError("CSI dump field 'indices' length does not match 'k'")
    rows = payload["h"]
    if not isinstance(rows, list) or len(rows) != k:
        raise ParseError("CSI dump field 'h' must list one entry per subcarrier")
    h = np.empty((k, m, n), dtype=np.complex128)
    for ki, flat in enumerate(rows):
        if not isinstance(flat, list) or len(flat) != m * n:
            raise ParseError(
                f"CSI dump field 'h'[{ki}] must hold {m * n} [re, im] pairs"
            )
        try:
            arr = np.asarray(flat, dtype=float)
        except (TypeError, ValueError):
            raise ParseError(f"CSI dump field 'h'[{ki}] has non-numeric entries") from None
        if arr.shape != (m * n, 2):
            raise ParseError(f"CSI dump field 'h'[{ki}] entries must be [re, im] pairs")
        h[ki] = (arr[:, 0] + 1j * arr[:, 1]).reshape(m, n)
    try:
        return CsiSet(h=h, grid=grid)
    except (DimensionError, InputError) as exc:
        raise ParseError(f"CSI dump is inconsistent: {exc}") from None

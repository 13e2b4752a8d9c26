"""Two-path scene construction and the Monte-Carlo evaluation harness.

The evaluated geometry: a station at (0 m, 10 m), a specular reflector
at (5.5 m, 3 m), and an access point at (n_a - 5 m, 0 m) for integer
positions n_a in 0..10.  Arrays lie along the x axis with broadside +y;
departure angles are measured at the access point.
"""

import concurrent.futures
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .bff_codec import QuantizationConfig, encode_bff
from .channel import (
    ArrayGeometry,
    Path,
    PathSet,
    add_noise,
    default_grid,
    synthesize_csi,
)
from .errors import ConfigurationError, InputError, PeakDeficitError
from .music import EstimationParams, angle_grid, estimate_aod

_DEFICIT_ERROR_DEG = 180.0  # impossible-scale sentinel for an unresolved path

_DEFAULT_GRID = default_grid()
_LAMBDA_C = _DEFAULT_GRID.center_wavelength


def _default_ap_geometry():
    return ArrayGeometry(num_elements=4, element_spacing=_LAMBDA_C / 2)


def _default_sta_geometry():
    return ArrayGeometry(num_elements=2, element_spacing=_LAMBDA_C / 2)


@dataclass(frozen=True)
class Scene:
    """One placement of access point, station, and reflector."""

    ap_position: tuple
    sta_position: tuple = (0.0, 10.0)
    reflector_position: tuple = (5.5, 3.0)
    ap_geometry: ArrayGeometry = field(default_factory=_default_ap_geometry)
    sta_geometry: ArrayGeometry = field(default_factory=_default_sta_geometry)
    reflection_amplitude: float = 0.3

    def __post_init__(self):
        pts = [tuple(map(float, p)) for p in
               (self.ap_position, self.sta_position, self.reflector_position)]
        if len(set(pts)) != 3:
            raise InputError("AP, station, and reflector positions must be distinct")
        object.__setattr__(self, "ap_position", pts[0])
        object.__setattr__(self, "sta_position", pts[1])
        object.__setattr__(self, "reflector_position", pts[2])
        if not 0 < self.reflection_amplitude <= 1:
            raise InputError("reflection amplitude must lie in (0, 1]")

    @classmethod
    def from_ap_index(cls, ap_index, **overrides):
        n_a = int(ap_index)
        if not 0 <= n_a <= 10:
            raise InputError(f"AP index must lie in 0..10, got {ap_index}")
        return cls(ap_position=(float(n_a - 5), 0.0), **overrides)

    def _departure(self, target):
        """(angle_deg, distance) of the ray from the AP toward a point."""
        dx = target[0] - self.ap_position[0]
        dy = target[1] - self.ap_position[1]
        dist = math.hypot(dx, dy)
        return math.degrees(math.asin(dx / dist)), dist

    def _arrival(self, source):
        """(angle_deg, distance) of the ray reaching the station from a point."""
        dx = source[0] - self.sta_position[0]
        dy = source[1] - self.sta_position[1]
        dist = math.hypot(dx, dy)
        return math.degrees(math.asin(dx / dist)), dist

    def true_aods_deg(self, num_paths=2):
        """Geometric departure angles in path order (direct, then indirect)."""
        direct, _ = self._departure(self.sta_position)
        if num_paths == 1:
            return (direct,)
        indirect, _ = self._departure(self.reflector_position)
        return (direct, indirect)

    def paths(self, num_paths=2):
        """Propagation paths: free-space 1/distance amplitudes, reflection
        decayed by the scene's amplitude factor, excess length relative to
        the direct path."""
        if num_paths not in (1, 2):
            raise ConfigurationError(
                "the evaluation scene models 1 (direct) or 2 (direct + reflected) paths"
            )
        aod_d, len_d = self._departure(self.sta_position)
        aoa_d, _ = self._arrival(self.ap_position)
        direct = Path(
            aod_deg=aod_d, aoa_deg=aoa_d, gain=1.0 / len_d, excess_length=0.0
        )
        if num_paths == 1:
            return PathSet((direct,))
        aod_i, len_ar = self._departure(self.reflector_position)
        aoa_i, len_rs = self._arrival(self.reflector_position)
        total = len_ar + len_rs
        indirect = Path(
            aod_deg=aod_i,
            aoa_deg=aoa_i,
            gain=self.reflection_amplitude / total,
            excess_length=total - len_d,
        )
        return PathSet((direct, indirect))


def two_path_scene(ap_index):
    """PathSet for the standard scene with the AP at position ap_index."""
    return Scene.from_ap_index(ap_index).paths(num_paths=2)


def aod_error(estimated_deg, truth_deg):
    """Per-path absolute errors, order-matched to the truth list.

    The estimate order is permuted to minimize the total absolute error
    (optimal assignment), so the metric does not punish label swaps.
    """
    est = np.asarray(estimated_deg, dtype=np.float64)
    truth = np.asarray(truth_deg, dtype=np.float64)
    if est.shape != truth.shape or est.ndim != 1:
        raise InputError("estimated and true angle lists must have equal lengths")
    return _matched_errors(est, truth)


def _matched_errors(est, truth):
    """Assignment-matched |errors| aligned to truth order; unmatched true
    paths (short estimate lists) score the deficit sentinel."""
    errors = np.full(truth.shape, _DEFICIT_ERROR_DEG)
    if est.size:
        cost = np.abs(truth[:, None] - est[None, :])
        rows, cols = linear_sum_assignment(cost)
        errors[rows] = cost[rows, cols]
    return errors


@dataclass(frozen=True)
class TrialConfig:
    """Monte-Carlo sweep configuration."""

    snr_db: tuple = (5.0, 10.0, 20.0)
    ap_indices: tuple = tuple(range(11))
    trials: int = 200
    num_packets: int = 10
    quantization: QuantizationConfig = field(
        default_factory=lambda: QuantizationConfig.from_tag("pi32")
    )
    num_paths: int = 2
    subarray_size: int = None
    grid_step_deg: float = 0.02
    seed: int = 0
    workers: int = None

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "ap_indices", tuple(int(a) for a in self.ap_indices))
        if not self.snr_db:
            raise InputError("need at least one SNR point")
        if not self.ap_indices:
            raise InputError("need at least one AP position")
        if any(not 0 <= a <= 10 for a in self.ap_indices):
            raise InputError("AP indices must lie in 0..10")
        if self.trials < 1 or self.num_packets < 1:
            raise InputError("trials and packet count must be at least 1")
        if self.num_paths not in (1, 2):
            raise ConfigurationError("the evaluation supports 1 or 2 paths")
        if self.subarray_size is None:
            object.__setattr__(self, "subarray_size", self.num_paths + 1)

    @property
    def path_labels(self):
        return ("direct", "indirect")[: self.num_paths]


@dataclass(frozen=True)
class ErrorTable:
    """Median absolute estimation errors per (SNR, method, path)."""

    rows: tuple  # of (snr_db, method, path, median_abs_error_deg)

    def __post_init__(self):
        rows = tuple(
            (float(s), str(m), str(p), float(e)) for s, m, p, e in self.rows
        )
        if any(e < 0 for *_, e in rows):
            raise InputError("error entries must be non-negative")
        object.__setattr__(self, "rows", rows)

    def get(self, snr_db, method, path):
        for s, m, p, e in self.rows:
            if s == float(snr_db) and m == method and p == path:
                return e
        raise KeyError((snr_db, method, path))

    def write_csv(self, fp):
        fp.write("snr_db,method,path,median_abs_error_deg\n")
        for s, m, p, e in self.rows:
            fp.write(f"{float(s)!r},{m},{p},{float(e)!r}\n")

    def format_table(self):
        lines = [f"{'snr_db':>8}  {'method':<6}  {'path':<8}  median_abs_error_deg"]
        for s, m, p, e in self.rows:
            lines.append(f"{s:>8.1f}  {m:<6}  {p:<8}  {e:.4f}")
        return "\n".join(lines)


def _estimation_params(config, scene, calibration=None):
    return EstimationParams(
        geometry=scene.ap_geometry,
        wavelength=_LAMBDA_C,
        num_paths=config.num_paths,
        subarray_size=config.subarray_size,
        num_packets=config.num_packets,
        grid_deg=angle_grid(config.grid_step_deg),
        calibration=calibration,
    )


def _packet_seed(seed, snr_index, ap_index_pos, trial, packet):
    return np.random.SeedSequence((seed, snr_index, ap_index_pos, trial, packet))


def _estimate_or_deficit(reports, params, truth):
    try:
        est = estimate_aod(reports, params)
        angles = np.asarray(est.angles_deg)
    except PeakDeficitError as exc:
        angles = np.asarray(exc.found_deg)
    return _matched_errors(angles, np.asarray(truth))


def _run_block(config, snr_index, ap_pos):
    """All trials for one (SNR, AP position) cell.

    Returns errors of shape (trials, 2 methods, num_paths); method index
    0 is CSI, 1 is BFF.  Both pipelines see the same noisy packets.
    """
    snr = config.snr_db[snr_index]
    n_a = config.ap_indices[ap_pos]
    scene = Scene.from_ap_index(n_a)
    truth = scene.true_aods_deg(config.num_paths)
    clean = synthesize_csi(
        scene.paths(config.num_paths),
        scene.ap_geometry,
        scene.sta_geometry,
        _DEFAULT_GRID,
    )
    params = _estimation_params(config, scene)
    out = np.empty((config.trials, 2, config.num_paths))
    for trial in range(config.trials):
        packets = [
            add_noise(clean, snr, _packet_seed(config.seed, snr_index, ap_pos, trial, p))
            for p in range(config.num_packets)
        ]
        reports = [encode_bff(pkt, config.quantization) for pkt in packets]
        out[trial, 0] = _estimate_or_deficit(packets, params, truth)
        out[trial, 1] = _estimate_or_deficit(reports, params, truth)
    return out


def _resolve_workers(config):
    if config.workers is not None:
        return max(1, int(config.workers))
    env = os.environ.get("SENSELAB_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(
                f"SENSELAB_THREADS must be an integer, got {env!r}"
            ) from None
    return 1


def run_numerical_eval(config):
    """Run the Monte-Carlo sweep and return the median-error table.

    For every (SNR, AP position) cell, each trial draws ``num_packets``
    independent noisy packets, estimates departure angles from the raw
    CSI and from the encoded feedback on the same packets, and scores
    swap-matched per-path errors against the geometric truth.  Medians
    pool all AP positions and trials per SNR.  Bit-deterministic for a
    fixed config, independent of the worker count.
    """
    cells = [
        (si, ai)
        for si in range(len(config.snr_db))
        for ai in range(len(config.ap_indices))
    ]
    workers = _resolve_workers(config)
    results = {}
    if workers == 1 or len(cells) == 1:
        for si, ai in cells:
            results[(si, ai)] = _run_block(config, si, ai)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_run_block, config, si, ai): (si, ai) for si, ai in cells
            }
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()
    rows = []
    methods = ("csi", "bff")
    for si, snr in enumerate(config.snr_db):
        pooled = np.concatenate(
            [results[(si, ai)] for ai in range(len(config.ap_indices))], axis=0
        )
        for mi, method in enumerate(methods):
            for pi, path in enumerate(config.path_labels):
                rows.append((snr, method, path, float(np.median(pooled[:, mi, pi]))))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return ErrorTable(rows=tuple(rows))


def compute_spectrum(scene, snr_db, method, seed, *, quantization=None,
                     num_packets=10, num_paths=2, subarray_size=None,
                     grid_step_deg=0.02, calibration=None):
    """One estimate on a fresh noisy capture; returns the AodEstimate
    (which carries its MusicSpectrum).

    The packet noise depends only on ``seed``, so csi and bff runs at the
    same seed see identical packets.
    """
    if method not in ("csi", "bff"):
        raise ConfigurationError(f"unknown method {method!r}; expected csi or bff")
    config = TrialConfig(
        snr_db=(float(snr_db),),
        ap_indices=(0,),
        trials=1,
        num_packets=num_packets,
        quantization=quantization or QuantizationConfig.from_tag("pi32"),
        num_paths=num_paths,
        subarray_size=subarray_size,
        grid_step_deg=grid_step_deg,
        seed=seed,
    )
    clean = synthesize_csi(
        scene.paths(num_paths), scene.ap_geometry, scene.sta_geometry, _DEFAULT_GRID
    )
    packets = [
        add_noise(clean, float(snr_db), np.random.SeedSequence((int(seed), p)))
        for p in range(num_packets)
    ]
    if method == "bff":
        reports = [encode_bff(pkt, config.quantization) for pkt in packets]
    else:
        reports = packets
    params = _estimation_params(config, scene, calibration)
    return estimate_aod(reports, params)


def dump_spectrum(scene, snr_db, method, seed, fp, **kwargs):
    """Run compute_spectrum and write the spectrum CSV to ``fp``."""
    from .music import write_spectrum_csv

    estimate = compute_spectrum(scene, snr_db, method, seed, **kwargs)
    write_spectrum_csv(estimate.spectrum, fp)
    return estimate

"""Compressed beamforming-feedback codec.

Encoding pipeline, per sounding packet: thin SVD of each subcarrier's
channel matrix, Givens-rotation decomposition of the right singular
matrix into (phi, psi) angle lists, uniform scalar quantization of the
angles, and quantization of the subcarrier-averaged per-stream gains in
the dB domain.  Decoding reverses each step; quantization is the only
lossy stage.  A bit-packed wire form and a JSON dump form are provided.
"""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    ConfigurationError,
    DecodeError,
    DimensionError,
    InputError,
    ParseError,
)

GAIN_STEP_DB = 0.25
GAIN_FLOOR_DB = -200.0

_MAGIC = b"BFF1"
_TAG_STEPS = {
    "pi4": math.pi / 4,
    "pi8": math.pi / 8,
    "pi16": math.pi / 16,
    "pi32": math.pi / 32,
    "none": None,
}
_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class QuantizationConfig:
    """Angle and gain quantization step sizes.

    ``angle_step`` is one of pi/4, pi/8, pi/16, pi/32 radians, or None to
    disable quantization entirely (lossless test mode: raw angles and
    unrounded gains pass through).
    """

    angle_step: float = None
    gain_step: float = GAIN_STEP_DB

    def __post_init__(self):
        if not self.gain_step > 0:
            raise ConfigurationError("gain step must be positive")
        if self.angle_step is None:
            return
        for step in _TAG_STEPS.values():
            if step is not None and math.isclose(self.angle_step, step, rel_tol=1e-12):
                object.__setattr__(self, "angle_step", step)
                return
        raise ConfigurationError(
            "angle step must be one of pi/4, pi/8, pi/16, pi/32, or None"
        )

    @classmethod
    def from_tag(cls, tag):
        if tag not in _TAG_STEPS:
            raise ConfigurationError(
                f"unknown quantization tag {tag!r}; expected one of {sorted(_TAG_STEPS)}"
            )
        return cls(angle_step=_TAG_STEPS[tag])

    @property
    def tag(self):
        for name, step in _TAG_STEPS.items():
            if step is None and self.angle_step is None:
                return name
            if step is not None and self.angle_step == step:
                return name
        raise ConfigurationError("no tag for this angle step")  # unreachable

    @property
    def lossless(self):
        return self.angle_step is None

    @property
    def phi_bits(self):
        """Bits per phi index: log2(2*pi / angle_step)."""
        if self.lossless:
            raise ConfigurationError("lossless mode has no angle bit width")
        return int(round(math.log2(2.0 * math.pi / self.angle_step)))

    @property
    def psi_bits(self):
        """Bits per psi index: log2((pi/2) / angle_step)."""
        if self.lossless:
            raise ConfigurationError("lossless mode has no angle bit width")
        return int(round(math.log2((math.pi / 2.0) / self.angle_step)))


def givens_angle_count(rows, cols):
    """Number of phi (equivalently psi) angles for one rows x cols matrix."""
    return _kernels.givens_angle_count(rows, cols)


def _check_shape(shape):
    rows, cols = int(shape[0]), int(shape[1])
    if rows < 2 or cols < 1 or cols > rows:
        raise DimensionError(
            f"angle shape must satisfy rows >= 2 and 1 <= cols <= rows, got {(rows, cols)}"
        )
    return rows, cols


@dataclass(frozen=True, eq=False)
class GivensAngles:
    """Givens-rotation angles for one orthonormal-column matrix.

    ``phi`` holds column-phase angles in [0, 2*pi), ``psi`` holds real
    rotation angles in [0, pi/2]; both in decomposition loop order.
    """

    phi: np.ndarray
    psi: np.ndarray
    shape: tuple

    def __post_init__(self):
        rows, cols = _check_shape(self.shape)
        object.__setattr__(self, "shape", (rows, cols))
        count = givens_angle_count(rows, cols)
        phi = np.asarray(self.phi, dtype=np.float64)
        psi = np.asarray(self.psi, dtype=np.float64)
        if phi.shape != (count,) or psi.shape != (count,):
            raise DimensionError(
                f"shape {self.shape} needs {count} angles of each kind, "
                f"got {phi.shape} phi and {psi.shape} psi"
            )
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
            raise InputError("angles must be finite")
        if np.any(phi < 0) or np.any(phi >= 2.0 * np.pi):
            raise InputError("phi angles must lie in [0, 2*pi)")
        if np.any(psi < -1e-9) or np.any(psi > np.pi / 2.0 + 1e-9):
            raise InputError("psi angles must lie in [0, pi/2]")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", np.clip(psi, 0.0, np.pi / 2.0))


@dataclass(frozen=True, eq=False)
class QuantizedAngles:
    """Quantizer cell indices for one matrix's Givens angles."""

    phi_idx: np.ndarray
    psi_idx: np.ndarray
    shape: tuple

    def __post_init__(self):
        rows, cols = _check_shape(self.shape)
        object.__setattr__(self, "shape", (rows, cols))
        count = givens_angle_count(rows, cols)
        phi = np.asarray(self.phi_idx, dtype=np.int64)
        psi = np.asarray(self.psi_idx, dtype=np.int64)
        if phi.shape != (count,) or psi.shape != (count,):
            raise DimensionError(f"shape {self.shape} needs {count} indices of each kind")
        object.__setattr__(self, "phi_idx", phi)
        object.__setattr__(self, "psi_idx", psi)


def givens_decompose(v):
    """Decompose an orthonormal-column matrix into Givens angles.

    The decomposition first removes each column's last-row phase, so the
    angles are invariant to right multiplication by a diagonal
    unit-modulus matrix; reconstruction returns V times that (lost)
    diagonal factor.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 2:
        raise DimensionError("expected a 2-D matrix")
    rows, cols = _check_shape(v.shape)
    gram = v.conj().T @ v
    if np.linalg.norm(gram - np.eye(cols)) > _ORTHO_TOL:
        raise InputError("matrix columns are not orthonormal")
    phi, psi = _kernels.givens_decompose(v)
    return GivensAngles(phi=phi, psi=psi, shape=(rows, cols))


def givens_reconstruct(angles):
    """Rebuild the orthonormal-column matrix encoded by Givens angles.

    Exact inverse of givens_decompose up to the per-column phase factor
    the decomposition strips.
    """
    rows, cols = angles.shape
    return _kernels.givens_reconstruct(angles.phi, angles.psi, rows, cols)


def _quantize_values(values, step, levels):
    idx = np.floor(np.asarray(values, dtype=np.float64) / step).astype(np.int64)
    return np.clip(idx, 0, levels - 1)


def quantize_angles(angles, config):
    """Map angles to uniform cell indices (floor rule, clamped in range)."""
    if config.lossless:
        raise ConfigurationError("cannot quantize with a lossless config")
    step = config.angle_step
    return QuantizedAngles(
        phi_idx=_quantize_values(angles.phi, step, 1 << config.phi_bits),
        psi_idx=_quantize_values(angles.psi, step, 1 << config.psi_bits),
        shape=angles.shape,
    )


def dequantize_angles(indices, config):
    """Map cell indices back to angles at cell centers: (index + 1/2) * step."""
    if config.lossless:
        raise ConfigurationError("cannot dequantize with a lossless config")
    step = config.angle_step
    phi_levels, psi_levels = 1 << config.phi_bits, 1 << config.psi_bits
    if np.any(indices.phi_idx < 0) or np.any(indices.phi_idx >= phi_levels):
        raise InputError(f"phi indices out of range for {config.phi_bits} bits")
    if np.any(indices.psi_idx < 0) or np.any(indices.psi_idx >= psi_levels):
        raise InputError(f"psi indices out of range for {config.psi_bits} bits")
    return GivensAngles(
        phi=(indices.phi_idx + 0.5) * step,
        psi=(indices.psi_idx + 0.5) * step,
        shape=indices.shape,
    )


@dataclass(frozen=True, eq=False)
class BffReport:
    """One packet's compressed beamforming feedback.

    ``phi``/``psi`` have shape (K, count): integer cell indices when
    quantized, raw radians when the config is lossless.  ``gains_db``
    holds the subcarrier-averaged per-stream gains (dB), one per fed-back
    column; quantized configs round them to multiples of the gain step
    (floored at -200 dB, the silent-stream sentinel).
    """

    shape: tuple
    config: QuantizationConfig
    phi: np.ndarray
    psi: np.ndarray
    gains_db: np.ndarray

    def __post_init__(self):
        rows, cols = _check_shape(self.shape)
        object.__setattr__(self, "shape", (rows, cols))
        count = givens_angle_count(rows, cols)
        gains = np.asarray(self.gains_db, dtype=np.float64)
        if gains.shape != (cols,):
            raise DimensionError(f"need one gain per stream: expected ({cols},)")
        if not np.all(np.isfinite(gains)):
            raise InputError("gains must be finite")
        if self.config.lossless:
            phi = np.asarray(self.phi, dtype=np.float64)
            psi = np.asarray(self.psi, dtype=np.float64)
        else:
            phi = np.asarray(self.phi, dtype=np.int64)
            psi = np.asarray(self.psi, dtype=np.int64)
        if phi.ndim != 2 or phi.shape[1] != count or psi.shape != phi.shape:
            raise DimensionError(
                f"angle arrays must be (num_subcarriers, {count}), got {phi.shape}"
            )
        if self.config.lossless:
            if phi.size and (np.any(phi < 0) or np.any(phi >= 2 * np.pi)):
                raise InputError("phi angles must lie in [0, 2*pi)")
            if psi.size and (np.any(psi < 0) or np.any(psi > np.pi / 2)):
                raise InputError("psi angles must lie in [0, pi/2]")
        else:
            if phi.size and (np.any(phi < 0) or np.any(phi >= 1 << self.config.phi_bits)):
                raise InputError("phi indices out of range for the configured bit width")
            if psi.size and (np.any(psi < 0) or np.any(psi >= 1 << self.config.psi_bits)):
                raise InputError("psi indices out of range for the configured bit width")
            steps = gains / self.config.gain_step
            if np.any(np.abs(steps - np.round(steps)) > 1e-9):
                raise InputError("quantized gains must be multiples of the gain step")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "gains_db", gains)

    @property
    def num_subcarriers(self):
        return self.phi.shape[0]

    @property
    def num_streams(self):
        return self.shape[1]


def _gains_to_db(mean_sq, config):
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(mean_sq)
    db = np.maximum(db, GAIN_FLOOR_DB)
    if config.lossless:
        return db
    quantized = np.floor(db / config.gain_step + 0.5) * config.gain_step
    return np.maximum(quantized, GAIN_FLOOR_DB)


def encode_bff(csi, config, num_streams=None):
    """Compress a CsiSet into a BffReport.

    Per subcarrier: thin SVD, keep the leading ``num_streams`` right
    singular vectors (descending singular values; default min(M, N)),
    Givens-decompose, quantize.  Stream gains are the subcarrier average
    of the squared singular values, quantized in dB.
    """
    full = min(csi.num_rx, csi.num_tx)
    streams = full if num_streams is None else int(num_streams)
    if not 1 <= streams <= full:
        raise ConfigurationError(
            f"stream count must lie in [1, {full}] for {csi.num_rx}x{csi.num_tx} CSI"
        )
    if csi.num_tx < 2:
        raise DimensionError("beamforming feedback needs at least 2 tx antennas")
    _, sigma, v = _kernels.svd_batch(csi.h)
    sigma = sigma[:, :streams]
    v = np.ascontiguousarray(v[:, :, :streams])
    gains_db = _gains_to_db(np.mean(sigma**2, axis=0), config)
    phi, psi = _kernels.givens_decompose_batch(v)
    if not config.lossless:
        step = config.angle_step
        phi = _quantize_values(phi, step, 1 << config.phi_bits)
        psi = _quantize_values(psi, step, 1 << config.psi_bits)
    return BffReport(
        shape=(csi.num_tx, streams), config=config, phi=phi, psi=psi, gains_db=gains_db
    )


def decode_bff(report):
    """Expand a BffReport back to matrices.

    Returns ``(v, gains)``: the per-subcarrier orthonormal-column
    matrices, shape (K, N_tx, N_streams), and the linear-scale gain
    diagonal, shape (N_streams,).
    """
    rows, cols = report.shape
    if report.config.lossless:
        phi = report.phi
        psi = report.psi
    else:
        step = report.config.angle_step
        phi = (report.phi + 0.5) * step
        psi = (report.psi + 0.5) * step
    v = _kernels.givens_reconstruct_batch(
        np.ascontiguousarray(phi, dtype=np.float64),
        np.ascontiguousarray(psi, dtype=np.float64),
        rows,
        cols,
    )
    gains = 10.0 ** (report.gains_db / 10.0)
    return v, gains


def angle_payload_bits(shape, config):
    """Bits of angle payload per subcarrier for a report shape."""
    if config.lossless:
        raise ConfigurationError("lossless mode has no fixed bit budget")
    count = givens_angle_count(*_check_shape(shape))
    return count * (config.phi_bits + config.psi_bits)


class _BitWriter:
    def __init__(self):
        self._chunks = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, value, bits):
        self._acc = (self._acc << bits) | (int(value) & ((1 << bits) - 1))
        self._nbits += bits
        while self._nbits >= 8:
            self._nbits -= 8
            self._chunks.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def getvalue(self):
        out = bytes(self._chunks)
        if self._nbits:
            out += bytes([(self._acc << (8 - self._nbits)) & 0xFF])
        return out


class _BitReader:
    def __init__(self, data):
        self._data = data
        self._pos = 0

    def read(self, bits):
        out = 0
        need = bits
        while need:
            byte_i, bit_i = divmod(self._pos, 8)
            if byte_i >= len(self._data):
                raise DecodeError("angle payload is truncated")
            take = min(8 - bit_i, need)
            chunk = (self._data[byte_i] >> (8 - bit_i - take)) & ((1 << take) - 1)
            out = (out << take) | chunk
            self._pos += take
            need -= take
        return out


def pack_report(report):
    """Serialize a BffReport to bytes.

    Layout: 4-byte magic, big-endian u32 subcarrier count, per-stream
    gains (big-endian i16 gain-step counts, or f64 when lossless), then
    the angle payload: subcarrier-major, phi fields then psi fields in
    decomposition order, each index MSB-first at its configured width.
    Lossless reports store raw angles as big-endian f64 instead.
    """
    k = report.num_subcarriers
    out = bytearray(_MAGIC)
    out += struct.pack(">I", k)
    if report.config.lossless:
        out += struct.pack(f">{report.num_streams}d", *report.gains_db)
        for ki in range(k):
            out += struct.pack(
                f">{report.phi.shape[1]}d", *report.phi[ki]
            ) + struct.pack(f">{report.psi.shape[1]}d", *report.psi[ki])
        return bytes(out)
    steps = np.round(report.gains_db / report.config.gain_step).astype(np.int64)
    if np.any(steps < -(1 << 15)) or np.any(steps >= 1 << 15):
        raise InputError("gain out of packable range")
    out += struct.pack(f">{report.num_streams}h", *steps)
    writer = _BitWriter()
    bp, bs = report.config.phi_bits, report.config.psi_bits
    for ki in range(k):
        for val in report.phi[ki]:
            writer.write(val, bp)
        for val in report.psi[ki]:
            writer.write(val, bs)
    return bytes(out + writer.getvalue())


def unpack_report(data, shape, config):
    """Deserialize bytes produced by pack_report.

    The report shape and quantization config are side information (they
    are not stored in the byte stream).  Raises DecodeError on a bad
    magic, truncation, or trailing bytes.
    """
    rows, cols = _check_shape(shape)
    if len(data) < len(_MAGIC) + 4:
        raise DecodeError("report is shorter than its header")
    if bytes(data[: len(_MAGIC)]) != _MAGIC:
        raise DecodeError("bad magic; not a packed beamforming report")
    (k,) = struct.unpack_from(">I", data, len(_MAGIC))
    pos = len(_MAGIC) + 4
    count = givens_angle_count(rows, cols)
    try:
        if config.lossless:
            gains_db = np.array(struct.unpack_from(f">{cols}d", data, pos))
            pos += 8 * cols
            expected = pos + 16 * count * k
            if len(data) != expected:
                raise DecodeError(
                    f"expected {expected} bytes for a lossless report, got {len(data)}"
                )
            phi = np.empty((k, count))
            psi = np.empty((k, count))
            for ki in range(k):
                phi[ki] = struct.unpack_from(f">{count}d", data, pos)
                pos += 8 * count
                psi[ki] = struct.unpack_from(f">{count}d", data, pos)
                pos += 8 * count
        else:
            steps = struct.unpack_from(f">{cols}h", data, pos)
            pos += 2 * cols
            gains_db = np.asarray(steps, dtype=np.float64) * config.gain_step
            bits_per_sc = angle_payload_bits((rows, cols), config)
            expected = pos + (bits_per_sc * k + 7) // 8
            if len(data) != expected:
                raise DecodeError(
                    f"expected {expected} bytes for this shape and config, got {len(data)}"
                )
            reader = _BitReader(data[pos:])
            bp, bs = config.phi_bits, config.psi_bits
            phi = np.empty((k, count), dtype=np.int64)
            psi = np.empty((k, count), dtype=np.int64)
            for ki in range(k):
                for j in range(count):
                    phi[ki, j] = reader.read(bp)
                for j in range(count):
                    psi[ki, j] = reader.read(bs)
    except struct.error:
        raise DecodeError("report is truncated") from None
    try:
        return BffReport(
            shape=(rows, cols), config=config, phi=phi, psi=psi, gains_db=gains_db
        )
    except (InputError, DimensionError) as exc:
        raise DecodeError(f"unpacked report is invalid: {exc}") from None


def dump_bff(report, fp):
    """Write a BffReport as JSON to a file object."""
    payload = {
        "rows": report.shape[0],
        "cols": report.shape[1],
        "delta": report.config.tag,
        "gains_db": [float(g) for g in report.gains_db],
        "phi": report.phi.tolist(),
        "psi": report.psi.tolist(),
    }
    json.dump(payload, fp)


def load_bff(fp):
    """Read a BffReport from a JSON file object (inverse of dump_bff)."""
    try:
        payload = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ParseError(f"BFF dump is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError("BFF dump must be a JSON object")
    for key in ("rows", "cols", "delta", "gains_db", "phi", "psi"):
        if key not in payload:
            raise ParseError(f"BFF dump is missing field {key!r}")
    try:
        config = QuantizationConfig.from_tag(payload["delta"])
    except ConfigurationError as exc:
        raise ParseError(f"BFF dump field 'delta' is invalid: {exc}") from None
    try:
        dtype = np.float64 if config.lossless else np.int64
        report = BffReport(
            shape=(int(payload["rows"]), int(payload["cols"])),
            config=config,
            phi=np.asarray(payload["phi"], dtype=dtype),
            psi=np.asarray(payload["psi"], dtype=dtype),
            gains_db=np.asarray(payload["gains_db"], dtype=np.float64),
        )
    except (TypeError, ValueError, InputError, DimensionError) as exc:
        raise ParseError(f"BFF dump is malformed: {exc}") from None
    return report

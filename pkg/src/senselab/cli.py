"""Command-line interface.

Commands: ``eval`` (Monte-Carlo median-error table), ``spectrum`` (one
pseudo-spectrum dump), ``codec`` (encode / decode / roundtrip between
CSI dumps and feedback reports), and ``calibrate`` (per-antenna phase
corrections from single-path captures).  Every command writes a
``manifest.json`` beside its artifacts with the resolved parameters
needed to reproduce them bit-exactly.

Exit codes: 0 success, 2 usage, 3 parse/decode failure, 4 numerical
failure.
"""

import json
import os
import sys
from dataclasses import asdict, dataclass, field

import click
import numpy as np

from . import __version__, _kernels
from .bff_codec import (
    QuantizationConfig,
    angle_payload_bits,
    decode_bff,
    dump_bff,
    encode_bff,
    load_bff,
    pack_report,
    unpack_report,
)
from .channel import ArrayGeometry, CsiSet, default_grid, load_csi
from .errors import (
    ConvergenceError,
    DecodeError,
    DegenerateGeometryError,
    ParseError,
    PeakDeficitError,
    SenselabError,
)
from .music import dump_calibration, estimate_calibration
from .sim import Scene, TrialConfig, dump_spectrum, run_numerical_eval

_EXIT_USAGE = 2
_EXIT_PARSE = 3
_EXIT_NUMERICAL = 4

_DELTA_CHOICES = ("pi4", "pi8", "pi16", "pi32", "none")


@dataclass
class RunManifest:
    """Reproducibility record written alongside every output artifact."""

    command: str
    parameters: dict
    seed: int
    version: str
    outputs: list = field(default_factory=list)

    def write(self, directory):
        path = os.path.join(directory, "manifest.json")
        with open(path, "w") as fp:
            json.dump(asdict(self), fp, indent=2, sort_keys=True)
            fp.write("\n")
        return path


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, (ParseError, DecodeError)):
        sys.exit(_EXIT_PARSE)
    if isinstance(exc, (ConvergenceError, DegenerateGeometryError, PeakDeficitError)):
        sys.exit(_EXIT_NUMERICAL)
    sys.exit(_EXIT_USAGE)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SenselabError as exc:
            _fail(exc)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _parse_float_list(text, flag):
    try:
        return tuple(float(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise click.UsageError(f"{flag} expects a comma-separated number list, got {text!r}")


def _parse_ap_indices(text):
    if str(text).strip().lower() == "all":
        return tuple(range(11))
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise click.UsageError(f"--ap-index expects integers 0..10 or 'all', got {text!r}")


def _resolve_subarray(subarray_size, num_paths):
    """Default smoothing size: the smallest that leaves a noise subspace."""
    if subarray_size is not None:
        return int(subarray_size), False
    return num_paths + 1, num_paths == 2


def _ensure_outdir(output):
    os.makedirs(output, exist_ok=True)
    return output


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="senselab")
def main():
    """Angle-of-departure estimation from CSI and compressed beamforming
    feedback: simulation, codec, and calibration tools."""


@main.command("eval")
@click.option("--snr", default="5,10,20", show_default=True,
              help="Comma-separated SNR list in dB (inf disables noise).")
@click.option("--delta", type=click.Choice(_DELTA_CHOICES), default="pi32",
              show_default=True, help="Feedback angle quantization step.")
@click.option("--npct", type=int, default=10, show_default=True,
              help="Packets averaged per estimate.")
@click.option("--subarray-size", type=int, default=None,
              help="Smoothing subarray size; default: one more than --paths.")
@click.option("--paths", type=int, default=2, show_default=True,
              help="Number of propagation paths (1 or 2).")
@click.option("--grid-step", type=float, default=0.02, show_default=True,
              help="Spectrum grid step in degrees.")
@click.option("--trials", type=int, default=200, show_default=True,
              help="Monte-Carlo trials per (SNR, AP position).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ap-index", "ap_index", default="all", show_default=True,
              help="AP positions to sweep: comma list of 0..10, or 'all'.")
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Output directory.")
@_guarded
def cmd_eval(snr, delta, npct, subarray_size, paths, grid_step, trials, seed,
             ap_index, output):
    """Run the Monte-Carlo sweep and write the median-error table."""
    subarray, noted = _resolve_subarray(subarray_size, paths)
    if noted:
        click.echo(
            "note: subarray size not given; using 3, the smallest that can "
            "resolve 2 paths (a 2-element subarray leaves no noise subspace)."
        )
    config = TrialConfig(
        snr_db=_parse_float_list(snr, "--snr"),
        ap_indices=_parse_ap_indices(ap_index),
        trials=trials,
        num_packets=npct,
        quantization=QuantizationConfig.from_tag(delta),
        num_paths=paths,
        subarray_size=subarray,
        grid_step_deg=grid_step,
        seed=seed,
    )
    table = run_numerical_eval(config)
    outdir = _ensure_outdir(output)
    csv_path = os.path.join(outdir, "eval_errors.csv")
    with open(csv_path, "w") as fp:
        table.write_csv(fp)
    manifest = RunManifest(
        command="eval",
        parameters={
            "snr_db": list(config.snr_db),
            "ap_indices": list(config.ap_indices),
            "trials": config.trials,
            "npct": config.num_packets,
            "delta": config.quantization.tag,
            "paths": config.num_paths,
            "subarray_size": config.subarray_size,
            "grid_step_deg": config.grid_step_deg,
        },
        seed=seed,
        version=__version__,
        outputs=[csv_path],
    )
    manifest.write(outdir)
    click.echo(table.format_table())
    click.echo(f"wrote {csv_path}")


@main.command("spectrum")
@click.option("--ap-index", type=int, default=2, show_default=True,
              help="AP position 0..10.")
@click.option("--snr", type=float, default=20.0, show_default=True)
@click.option("--method", type=click.Choice(("csi", "bff")), default="bff",
              show_default=True)
@click.option("--delta", type=click.Choice(_DELTA_CHOICES), default="pi32",
              show_default=True)
@click.option("--npct", type=int, default=10, show_default=True)
@click.option("--paths", type=int, default=2, show_default=True)
@click.option("--subarray-size", type=int, default=None)
@click.option("--grid-step", type=float, default=0.02, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Output directory.")
@_guarded
def cmd_spectrum(ap_index, snr, method, delta, npct, paths, subarray_size,
                 grid_step, seed, output):
    """Estimate once and dump the pseudo-spectrum as CSV."""
    subarray, noted = _resolve_subarray(subarray_size, paths)
    if noted:
        click.echo(
            "note: subarray size not given; using 3, the smallest that can "
            "resolve 2 paths (a 2-element subarray leaves no noise subspace)."
        )
    scene = Scene.from_ap_index(ap_index)
    outdir = _ensure_outdir(output)
    csv_path = os.path.join(outdir, "spectrum.csv")
    with open(csv_path, "w") as fp:
        estimate = dump_spectrum(
            scene, snr, method, seed, fp,
            quantization=QuantizationConfig.from_tag(delta),
            num_packets=npct,
            num_paths=paths,
            subarray_size=subarray,
            grid_step_deg=grid_step,
        )
    manifest = RunManifest(
        command="spectrum",
        parameters={
            "ap_index": ap_index, "snr_db": snr, "method": method,
            "delta": delta, "npct": npct, "paths": paths,
            "subarray_size": subarray, "grid_step_deg": grid_step,
        },
        seed=seed,
        version=__version__,
        outputs=[csv_path],
    )
    manifest.write(outdir)
    angles = ", ".join(f"{a:.3f}" for a in estimate.angles_deg)
    click.echo(f"estimated angles (deg): {angles}")
    click.echo(f"wrote {csv_path}")


@main.group("codec")
def codec():
    """Encode, decode, and round-trip beamforming feedback."""


def _subspace_distances(v_ref, v_test):
    """Per-subcarrier distance sin(worst principal angle) between column spaces.

    Sine-based so losslessly round-tripped reports measure at machine
    precision instead of the arccos floor near 1.
    """
    out = np.empty(v_ref.shape[0])
    for k in range(v_ref.shape[0]):
        u = v_ref[k]
        resid = v_test[k] - u @ (u.conj().T @ v_test[k])
        sig = _kernels.svd(resid)[1]
        out[k] = min(float(np.max(sig)), 1.0)
    return out


@codec.command("encode")
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--delta", type=click.Choice(_DELTA_CHOICES), default="pi32",
              show_default=True)
@click.option("--streams", type=int, default=None,
              help="Fed-back columns; default min(rx, tx).")
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Output directory.")
@_guarded
def codec_encode(input_file, delta, streams, output):
    """Encode a CSI dump (JSON) into a feedback report (JSON)."""
    with open(input_file) as fp:
        csi = load_csi(fp)
    config = QuantizationConfig.from_tag(delta)
    report = encode_bff(csi, config, num_streams=streams)
    outdir = _ensure_outdir(output)
    out_path = os.path.join(outdir, "bff.json")
    with open(out_path, "w") as fp:
        dump_bff(report, fp)
    RunManifest(
        command="codec encode",
        parameters={"input": input_file, "delta": delta,
                    "streams": report.num_streams, "shape": list(report.shape)},
        seed=0,
        version=__version__,
        outputs=[out_path],
    ).write(outdir)
    if not config.lossless:
        bits = angle_payload_bits(report.shape, config)
        click.echo(f"angle payload: {bits} bits per subcarrier")
    click.echo(f"wrote {out_path}")


@codec.command("decode")
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Output directory.")
@_guarded
def codec_decode(input_file, output):
    """Decode a feedback report (JSON) into matrices (JSON)."""
    with open(input_file) as fp:
        report = load_bff(fp)
    v, gains = decode_bff(report)
    outdir = _ensure_outdir(output)
    out_path = os.path.join(outdir, "decoded.json")
    payload = {
        "rows": report.shape[0],
        "cols": report.shape[1],
        "k": report.num_subcarriers,
        "gains": [float(g) for g in gains],
        "v": [[[float(z.real), float(z.imag)] for z in vk.ravel()] for vk in v],
    }
    with open(out_path, "w") as fp:
        json.dump(payload, fp)
    RunManifest(
        command="codec decode",
        parameters={"input": input_file, "delta": report.config.tag},
        seed=0,
        version=__version__,
        outputs=[out_path],
    ).write(outdir)
    click.echo(f"wrote {out_path}")


@codec.command("roundtrip")
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--delta", type=click.Choice(_DELTA_CHOICES), default="pi32",
              show_default=True)
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Output directory.")
@_guarded
def codec_roundtrip(input_file, delta, output):
    """Encode, pack, unpack, decode; report payload size and fidelity."""
    with open(input_file) as fp:
        csi = load_csi(fp)
    config = QuantizationConfig.from_tag(delta)
    report = encode_bff(csi, config)
    packed = pack_report(report)
    unpacked = unpack_report(packed, report.shape, config)
    v_test, _ = decode_bff(unpacked)
    reference = encode_bff(csi, QuantizationConfig.from_tag("none"))
    v_ref, _ = decode_bff(reference)
    distances = _subspace_distances(v_ref, v_test)
    metrics = {
        "delta": delta,
        "shape": list(report.shape),
        "subcarriers": report.num_subcarriers,
        "packed_bytes": len(packed),
        "max_subspace_distance": float(np.max(distances)),
        "mean_subspace_distance": float(np.mean(distances)),
    }
    if not config.lossless:
        metrics["angle_bits_per_subcarrier"] = angle_payload_bits(report.shape, config)
    outdir = _ensure_outdir(output)
    out_path = os.path.join(outdir, "roundtrip.json")
    with open(out_path, "w") as fp:
        json.dump(metrics, fp, indent=2, sort_keys=True)
        fp.write("\n")
    RunManifest(
        command="codec roundtrip",
        parameters={"input": input_file, "delta": delta},
        seed=0,
        version=__version__,
        outputs=[out_path],
    ).write(outdir)
    if "angle_bits_per_subcarrier" in metrics:
        click.echo(f"angle payload: {metrics['angle_bits_per_subcarrier']} bits per subcarrier")
    click.echo(f"packed size: {metrics['packed_bytes']} bytes")
    click.echo(
        "subspace distance vs unquantized: "
        f"max {metrics['max_subspace_distance']:.6g}, "
        f"mean {metrics['mean_subspace_distance']:.6g}"
    )
    click.echo(f"wrote {out_path}")


@main.command("calibrate")
@click.argument("inputs", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--known-aod", type=float, required=True,
              help="Known departure angle of the captured path, degrees.")
@click.option("--spacing", type=float, default=None,
              help="Antenna spacing in meters; default: half the center wavelength.")
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Output directory.")
@_guarded
def cmd_calibrate(inputs, known_aod, spacing, output):
    """Estimate per-antenna phase corrections from single-path captures.

    INPUTS are CSI dumps or feedback-report dumps (JSON, auto-detected).
    Feedback reports carry no subcarrier layout and assume the default
    52-carrier grid.
    """
    reports = []
    for path in inputs:
        with open(path) as fp:
            try:
                payload = json.load(fp)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path} is not valid JSON: {exc}") from None
        with open(path) as fp:
            if isinstance(payload, dict) and "h" in payload:
                reports.append(load_csi(fp))
            elif isinstance(payload, dict) and "phi" in payload:
                reports.append(load_bff(fp))
            else:
                raise ParseError(f"{path} is neither a CSI dump nor a feedback report")
    first = reports[0]
    if isinstance(first, CsiSet):
        dim = first.num_tx
        grid = None
    else:
        dim = first.shape[0]
        grid = default_grid()
    if spacing is None:
        spacing = (grid or first.grid).center_wavelength / 2
    geometry = ArrayGeometry(num_elements=dim, element_spacing=spacing)
    calibration = estimate_calibration(reports, known_aod, geometry, grid=grid)
    outdir = _ensure_outdir(output)
    out_path = os.path.join(outdir, "calibration.json")
    with open(out_path, "w") as fp:
        dump_calibration(calibration, fp)
    RunManifest(
        command="calibrate",
        parameters={"inputs": list(inputs), "known_aod_deg": known_aod,
                    "spacing_m": spacing, "dimension": dim},
        seed=0,
        version=__version__,
        outputs=[out_path],
    ).write(outdir)
    mean_args = np.degrees(np.mean(calibration.arguments(), axis=0))
    args_text = ", ".join(f"{a:.3f}" for a in mean_args)
    click.echo(f"mean per-antenna corrections (deg): {args_text}")
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()

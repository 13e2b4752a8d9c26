"""Command-line interface: artifacts, manifests, exit codes, reproducibility."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from conftest import scene_csi
from senselab import CsiSet, default_grid, dump_csi
from senselab.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write_csi_dump(path, aods=(16.7, 70.6), gains=(1.0, 0.12), num_tx=3,
                   excess=(0.0, 4.3), offsets_rad=None, snr_db=None, seed=7):
    from senselab import add_noise

    csi = scene_csi(list(aods), list(gains), num_tx=num_tx, excess=list(excess))
    if offsets_rad is not None:
        csi = CsiSet(csi.h * np.exp(1j * np.asarray(offsets_rad))[None, None, :],
                     csi.grid)
    if snr_db is not None:
        csi = add_noise(csi, snr_db, rng_seed=seed)
    with open(path, "w") as fp:
        dump_csi(csi, fp)
    return path


class TestEval:
    def test_twelve_rows_and_manifest(self, runner, tmp_path):
        result = runner.invoke(main, [
            "eval", "--snr", "5,10,20", "--delta", "pi32", "--seed", "7",
            "--trials", "1", "--ap-index", "2", "--grid-step", "0.5",
            "-o", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "eval_errors.csv").read_text().strip().split("\n")
        assert len(lines) == 13  # header + 3 snr x 2 methods x 2 paths
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "eval"
        assert manifest["seed"] == 7
        assert manifest["parameters"]["delta"] == "pi32"
        assert manifest["outputs"] == [str(tmp_path / "eval_errors.csv")]

    def test_reruns_bit_identical(self, runner, tmp_path):
        args = ["eval", "--snr", "10", "--trials", "1", "--ap-index", "3",
                "--grid-step", "0.5", "--seed", "7"]
        r1 = runner.invoke(main, args + ["-o", str(tmp_path / "a")])
        r2 = runner.invoke(main, args + ["-o", str(tmp_path / "b")])
        assert r1.exit_code == r2.exit_code == 0
        assert ((tmp_path / "a" / "eval_errors.csv").read_bytes()
                == (tmp_path / "b" / "eval_errors.csv").read_bytes())

    def test_prints_subarray_note(self, runner, tmp_path):
        result = runner.invoke(main, [
            "eval", "--snr", "10", "--trials", "1", "--ap-index", "5",
            "--grid-step", "1.0", "-o", str(tmp_path),
        ])
        assert result.exit_code == 0
        assert "using 3" in result.output

    def test_bad_snr_is_usage_error(self, runner):
        result = runner.invoke(main, ["eval", "--snr", "abc"])
        assert result.exit_code == 2


class TestSpectrum:
    def test_one_degree_grid_rows(self, runner, tmp_path):
        result = runner.invoke(main, [
            "spectrum", "--ap-index", "2", "--snr", "20", "--method", "bff",
            "--grid-step", "1.0", "-o", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "spectrum.csv").read_text().strip().split("\n")
        assert lines[0] == "angle_deg,quadform,g"
        assert len(lines) == 182
        assert (tmp_path / "manifest.json").exists()

    def test_methods_same_seed_close_peaks(self, runner, tmp_path):
        import re

        angles = {}
        for method in ("csi", "bff"):
            result = runner.invoke(main, [
                "spectrum", "--ap-index", "2", "--snr", "20",
                "--method", method, "--grid-step", "0.1", "--seed", "3",
                "-o", str(tmp_path / method),
            ])
            assert result.exit_code == 0
            match = re.search(r"estimated angles \(deg\): (.+)", result.output)
            angles[method] = [float(x) for x in match.group(1).split(",")]
        # paired-run bound, see test_sim: empirical max 0.625, margin to 0.8
        np.testing.assert_allclose(angles["bff"], angles["csi"], atol=0.8)

    def test_numerical_failure_exit_code(self, runner, tmp_path):
        # a 4-point grid cannot host two interior minima
        result = runner.invoke(main, [
            "spectrum", "--ap-index", "2", "--grid-step", "60",
            "-o", str(tmp_path),
        ])
        assert result.exit_code == 4


class TestCodec:
    def test_roundtrip_reports_30_bits(self, runner, tmp_path):
        dump = write_csi_dump(tmp_path / "csi.json", snr_db=25.0)
        result = runner.invoke(main, [
            "codec", "roundtrip", str(dump), "--delta", "pi32",
            "-o", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        assert "30 bits per subcarrier" in result.output
        metrics = json.loads((tmp_path / "roundtrip.json").read_text())
        assert metrics["angle_bits_per_subcarrier"] == 30
        assert metrics["packed_bytes"] == 207  # 12-byte header + 195 payload

    def test_roundtrip_lossless_distance(self, runner, tmp_path):
        dump = write_csi_dump(tmp_path / "csi.json", snr_db=25.0)
        result = runner.invoke(main, [
            "codec", "roundtrip", str(dump), "--delta", "none",
            "-o", str(tmp_path),
        ])
        assert result.exit_code == 0
        metrics = json.loads((tmp_path / "roundtrip.json").read_text())
        assert metrics["max_subspace_distance"] <= 1e-9

    def test_encode_decode_gain_half_step(self, runner, tmp_path):
        dump = write_csi_dump(tmp_path / "csi.json", snr_db=25.0)
        r1 = runner.invoke(main, ["codec", "encode", str(dump),
                                  "--delta", "pi8", "-o", str(tmp_path)])
        assert r1.exit_code == 0, r1.output
        r2 = runner.invoke(main, ["codec", "decode", str(tmp_path / "bff.json"),
                                  "-o", str(tmp_path)])
        assert r2.exit_code == 0, r2.output
        decoded = json.loads((tmp_path / "decoded.json").read_text())
        with open(dump) as fp:
            from senselab import load_csi
            csi = load_csi(fp)
        lam_bar = np.mean(
            [np.linalg.svd(hk, compute_uv=False) ** 2 for hk in csi.h], axis=0)
        err = np.abs(10 * np.log10(decoded["gains"]) - 10 * np.log10(lam_bar))
        assert err.max() <= 0.125 + 1e-9

    def test_malformed_input_exit_three(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        for cmd in (["codec", "encode", str(bad)],
                    ["codec", "decode", str(bad)],
                    ["codec", "roundtrip", str(bad)]):
            result = runner.invoke(main, cmd + ["-o", str(tmp_path)])
            assert result.exit_code == 3

    def test_missing_file_usage_error(self, runner):
        result = runner.invoke(main, ["codec", "encode", "/nonexistent.json"])
        assert result.exit_code == 2


class TestCalibrate:
    def test_zero_offsets(self, runner, tmp_path):
        dump = write_csi_dump(tmp_path / "csi.json", aods=(0.0,), gains=(1.0,),
                              excess=(0.0,))
        result = runner.invoke(main, [
            "calibrate", str(dump), "--known-aod", "0.0", "-o", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        args = np.array(json.loads(
            (tmp_path / "calibration.json").read_text())["arguments"])
        assert np.abs(args).max() <= 1e-6

    def test_injected_offsets_recovered(self, runner, tmp_path):
        offsets = np.radians([0.0, 40.0, -70.0])
        dump = write_csi_dump(tmp_path / "csi.json", aods=(12.0,), gains=(1.0,),
                              excess=(0.0,), offsets_rad=offsets)
        result = runner.invoke(main, [
            "calibrate", str(dump), "--known-aod", "12.0", "-o", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        args = np.array(json.loads(
            (tmp_path / "calibration.json").read_text())["arguments"])
        np.testing.assert_allclose(args, np.tile(offsets, (52, 1)), atol=1e-6)

    def test_quantized_close_to_unquantized(self, runner, tmp_path):
        from senselab import QuantizationConfig, add_noise, dump_bff, encode_bff

        offsets = np.radians([0.0, 40.0, -70.0])
        clean = scene_csi([12.0], [1.0], num_tx=3, excess=[0.0])
        shifted = CsiSet(clean.h * np.exp(1j * offsets)[None, None, :], clean.grid)
        csi_files, bff_files = [], []
        for p in range(60):
            noisy = add_noise(shifted, 25.0, rng_seed=p)
            cpath = tmp_path / f"c{p}.json"
            with open(cpath, "w") as fp:
                dump_csi(noisy, fp)
            csi_files.append(str(cpath))
            bpath = tmp_path / f"b{p}.json"
            with open(bpath, "w") as fp:
                dump_bff(encode_bff(noisy, QuantizationConfig.from_tag("pi32")), fp)
            bff_files.append(str(bpath))
        r_csi = runner.invoke(main, ["calibrate", *csi_files,
                                     "--known-aod", "12.0",
                                     "-o", str(tmp_path / "csi_out")])
        r_bff = runner.invoke(main, ["calibrate", *bff_files,
                                     "--known-aod", "12.0",
                                     "-o", str(tmp_path / "bff_out")])
        assert r_csi.exit_code == 0 and r_bff.exit_code == 0
        a_csi = np.array(json.loads(
            (tmp_path / "csi_out" / "calibration.json").read_text())["arguments"])
        a_bff = np.array(json.loads(
            (tmp_path / "bff_out" / "calibration.json").read_text())["arguments"])
        gap = np.degrees(np.abs(np.angle(np.exp(1j * (a_bff - a_csi)))))
        assert gap.max() <= 2.3

    def test_unrecognized_payload_exit_three(self, runner, tmp_path):
        stray = tmp_path / "stray.json"
        stray.write_text(json.dumps({"foo": 1}))
        result = runner.invoke(main, ["calibrate", str(stray),
                                      "--known-aod", "5.0", "-o", str(tmp_path)])
        assert result.exit_code == 3


class TestTopLevel:
    def test_version(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.output

    def test_unknown_command_usage(self, runner):
        result = runner.invoke(main, ["frobnicate"])
        assert result.exit_code == 2

"""End-to-end tests of the hazeorder command line."""

import numpy as np
import pandas as pd
import pytest

from hazeorder import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, build_parser, main
from imaging.codecs import read_image, write_depth, write_image, write_pfm
from imaging.core import PlanarImage
from utils.reports import EVAL_COLUMNS, RUN_COLUMNS, STATUS_COLUMN

SIZE = 48
SMALL_R = ["--r", "15"]


@pytest.fixture
def files(scene_factory, work_dir):
    """A clear image, its depth and the matching hazy image on disk."""
    scene = scene_factory(height=SIZE, width=SIZE)
    paths = {
        "clear": write_image(scene.clear, work_dir / "clear.png"),
        "hazy": write_image(scene.hazy, work_dir / "hazy.png"),
        "depth": write_depth(scene.depth, work_dir / "depth.pfm"),
    }
    return paths


@pytest.mark.integration
class TestParser:
    """Test cases for argument parsing."""

    def test_missing_subcommand(self):
        """Test no subcommand is a usage error."""
        assert main([]) == EXIT_USAGE

    def test_ground_truth_flags_exclusive(self, files):
        """Test --gt-depth and --gt-clear cannot be combined."""
        code = main(["analyze", str(files["hazy"]), "--gt-depth", str(files["depth"]), "--gt-clear", str(files["clear"])])
        assert code == EXIT_USAGE

    @pytest.mark.parametrize("value", ["1.2,0.5,0.5", "0.5,0.5", "zero"])
    def test_bad_airlight(self, files, work_dir, value):
        """Test malformed airlight values are usage errors."""
        code = main(["dehaze", str(files["hazy"]), "-o", str(work_dir / "o.png"), "--airlight", value])
        assert code == EXIT_USAGE

    def test_bad_metrics(self, files):
        """Test unknown metric names are usage errors."""
        assert main(["eval", str(files["hazy"]), str(files["clear"]), "--metrics", "psnr,lpips"]) == EXIT_USAGE

    def test_defaults(self):
        """Test synth defaults to beta 1 and a white airlight."""
        args = build_parser().parse_args(["synth", "c.png", "--depth", "d.pfm", "-o", "h.png"])
        assert args.beta == 1.0
        assert tuple(args.airlight) == (1.0, 1.0, 1.0)


@pytest.mark.integration
class TestDehazeCommand:
    """Test cases for hazeorder dehaze."""

    def test_single_image_with_trace(self, files, work_dir, capsys):
        """Test output image, saved maps and one report row."""
        out = work_dir / "out" / "restored.png"
        trace = work_dir / "runs.csv"
        code = main([
            "dehaze", str(files["hazy"]), "-o", str(out), *SMALL_R, "--no-clahe",
            "--save-transmission", str(work_dir / "t.png"), "--save-theta", str(work_dir / "theta.png"),
            "--trace", str(trace), "--gt", str(files["clear"]),
        ])
        assert code == EXIT_OK
        assert read_image(out).shape == (SIZE, SIZE)
        assert (work_dir / "t.png").exists() and (work_dir / "theta.png").exists()

        frame = pd.read_csv(trace)
        assert list(frame.columns) == RUN_COLUMNS
        assert len(frame) == 1
        assert frame.loc[0, "r"] == 15
        assert frame.loc[0, "weight_fn"] == "phi2"
        assert frame.loc[0, "theta_hat"] > 0
        assert not pd.isna(frame.loc[0, "psnr_db"])
        assert "Wrote" in capsys.readouterr().out

    def test_trace_appends(self, files, work_dir):
        """Test a second run adds a second row under one header."""
        trace = work_dir / "runs.csv"
        for _ in range(2):
            assert main(["dehaze", str(files["hazy"]), "-o", str(work_dir / "o.png"), *SMALL_R, "--trace", str(trace)]) == EXIT_OK
        assert len(pd.read_csv(trace)) == 2

    def test_compare_weights(self, files, work_dir):
        """Test one extra output per weight function."""
        out = work_dir / "o.png"
        assert main(["dehaze", str(files["hazy"]), "-o", str(out), *SMALL_R, "--compare-weights"]) == EXIT_OK
        for fn in ("phi1", "phi2", "phi3"):
            assert (work_dir / f"o_{fn}.png").exists()

    def test_deterministic_output(self, files, work_dir):
        """Test identical inputs produce identical bytes."""
        first, second = work_dir / "a.png", work_dir / "b.png"
        for out in (first, second):
            assert main(["dehaze", str(files["hazy"]), "-o", str(out), *SMALL_R]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.parametrize("r", ["4", "1"])
    def test_bad_patch_size(self, files, work_dir, r):
        """Test even or too small r exits with a usage error."""
        assert main(["dehaze", str(files["hazy"]), "-o", str(work_dir / "o.png"), "--r", r]) == EXIT_USAGE

    def test_missing_input(self, work_dir):
        """Test a missing file is a runtime failure."""
        assert main(["dehaze", str(work_dir / "missing.png"), "-o", str(work_dir / "o.png")]) == EXIT_FAILURE

    def test_image_smaller_than_patch(self, rng, work_dir):
        """Test images below r x r fail without output."""
        small = write_image(PlanarImage(rng.uniform(size=(3, 20, 20))), work_dir / "small.png")
        out = work_dir / "o.png"
        assert main(["dehaze", str(small), "-o", str(out)]) == EXIT_FAILURE
        assert not out.exists()

    def test_environment_patch_size(self, files, work_dir, monkeypatch):
        """Test HAZEORDER_R supplies the default r."""
        monkeypatch.setenv("HAZEORDER_R", "15")
        trace = work_dir / "runs.csv"
        assert main(["dehaze", str(files["hazy"]), "-o", str(work_dir / "o.png"), "--trace", str(trace)]) == EXIT_OK
        assert pd.read_csv(trace).loc[0, "r"] == 15

    def test_batch_directory(self, scene_factory, work_dir):
        """Test every image gets a row and a broken file does not stop the batch."""
        inputs = work_dir / "hazy"
        inputs.mkdir()
        for name in ("a.png", "b.png"):
            write_image(scene_factory(height=SIZE, width=SIZE).hazy, inputs / name)
        (inputs / "broken.png").write_bytes(b"not a png")
        (inputs / "notes.txt").write_text("ignored")

        trace = work_dir / "batch.csv"
        code = main(["dehaze", str(inputs), "-o", str(work_dir / "out"), *SMALL_R, "--trace", str(trace), "--threads", "2"])
        assert code == EXIT_OK

        frame = pd.read_csv(trace)
        assert list(frame.columns) == RUN_COLUMNS + [STATUS_COLUMN]
        assert [name.rsplit("/", 1)[-1] for name in frame["input"]] == ["a.png", "b.png", "broken.png"]
        assert list(frame[STATUS_COLUMN].str.startswith("error")) == [False, False, True]
        assert (work_dir / "out" / "a.png").exists() and (work_dir / "out" / "b.png").exists()


@pytest.mark.integration
class TestSynthCommand:
    """Test cases for hazeorder synth."""

    def test_synthesize(self, files, work_dir):
        """Test a hazy image and transmission map are written."""
        out = work_dir / "synth.png"
        code = main([
            "synth", str(files["clear"]), "--depth", str(files["depth"]),
            "--beta", "1.2", "--airlight", "0.9,0.9,0.9", "-o", str(out), "--save-t", str(work_dir / "t.png"),
        ])
        assert code == EXIT_OK
        assert read_image(out).shape == (SIZE, SIZE)
        assert (work_dir / "t.png").exists()

    def test_zero_beta(self, files, work_dir):
        """Test beta = 0 is a usage error."""
        code = main(["synth", str(files["clear"]), "--depth", str(files["depth"]), "--beta", "0", "-o", str(work_dir / "s.png")])
        assert code == EXIT_USAGE

    @pytest.mark.parametrize("beta", ["0", "-1", "nan"])
    def test_bad_beta_checked_before_reading(self, work_dir, beta):
        """Test an invalid beta is a usage error even when the inputs are missing."""
        out = work_dir / "s.png"
        code = main([
            "synth", str(work_dir / "missing.png"), "--depth", str(work_dir / "missing.pfm"),
            "--beta", beta, "-o", str(out),
        ])
        assert code == EXIT_USAGE
        assert not out.exists()

    def test_depth_size_mismatch(self, files, work_dir):
        """Test a depth map of another size is a runtime failure."""
        other = work_dir / "other.pfm"
        write_pfm(np.ones((10, 10)), other)
        code = main(["synth", str(files["clear"]), "--depth", str(other), "-o", str(work_dir / "s.png")])
        assert code == EXIT_FAILURE


@pytest.mark.integration
class TestEvalCommand:
    """Test cases for hazeorder eval."""

    def test_identical_pair(self, files, work_dir, capsys):
        """Test an image against itself reports the PSNR cap."""
        report = work_dir / "eval.csv"
        assert main(["eval", str(files["clear"]), str(files["clear"]), "--csv", str(report)]) == EXIT_OK
        frame = pd.read_csv(report)
        assert list(frame.columns) == EVAL_COLUMNS
        assert frame.loc[0, "psnr_db"] == 99.0
        assert frame.loc[0, "ssim"] == pytest.approx(1.0)
        assert frame.loc[0, "ciede2000"] == pytest.approx(0.0, abs=1e-9)
        assert "psnr_db" in capsys.readouterr().out

    def test_directory_pairs(self, scene_factory, work_dir):
        """Test files are matched by name and unmatched ones skipped."""
        restored, truth = work_dir / "restored", work_dir / "truth"
        restored.mkdir()
        truth.mkdir()
        for name in ("1.png", "2.png", "3.png"):
            scene = scene_factory(height=SIZE, width=SIZE)
            write_image(scene.hazy, restored / name)
            write_image(scene.clear, truth / name)
        write_image(scene.hazy, restored / "orphan.png")

        report = work_dir / "eval.csv"
        assert main(["eval", str(restored), str(truth), "--metrics", "psnr,ssim", "--csv", str(report)]) == EXIT_OK
        frame = pd.read_csv(report)
        assert list(frame["image"]) == ["1.png", "2.png", "3.png"]
        assert frame["ciede2000"].isna().all()

    def test_mixed_file_and_directory(self, files, work_dir):
        """Test a file cannot be compared with a directory."""
        assert main(["eval", str(files["clear"]), str(work_dir)]) == EXIT_USAGE

    def test_size_mismatch(self, files, rng, work_dir):
        """Test differently sized images fail."""
        other = write_image(PlanarImage(rng.uniform(size=(3, 20, 20))), work_dir / "other.png")
        assert main(["eval", str(files["clear"]), str(other)]) == EXIT_FAILURE


@pytest.mark.integration
class TestAnalyzeCommand:
    """Test cases for hazeorder analyze."""

    def test_profile_to_stdout(self, files, capsys):
        """Test the row profile is printed bottom row first."""
        assert main(["analyze", str(files["hazy"]), *SMALL_R]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "row_index,mean_theta_r"
        assert len(lines) == SIZE + 1
        assert lines[1].startswith("0,")

    def test_profile_is_bottom_first(self, files, work_dir):
        """Test the near bottom rows come first with the larger theta_r."""
        profile = work_dir / "profile.csv"
        assert main(["analyze", str(files["hazy"]), *SMALL_R, "--profile", str(profile)]) == EXIT_OK
        values = pd.read_csv(profile)["mean_theta_r"].to_numpy()
        assert values[: SIZE // 3].mean() > values[-SIZE // 3:].mean()

    def test_identity_clear_reference(self, files, capsys):
        """Test the hazy image as its own clear reference gives rho = 1."""
        code = main(["analyze", str(files["hazy"]), "--gt-clear", str(files["hazy"]), *SMALL_R, "--rho", "--full-rank"])
        assert code == EXIT_OK
        assert float(capsys.readouterr().out.strip()) == pytest.approx(1.0)

    def test_depth_reference_report(self, files, work_dir):
        """Test the report row and optional artifacts."""
        report = work_dir / "analyze.csv"
        curve = work_dir / "eps.csv"
        plot = work_dir / "profile.png"
        code = main([
            "analyze", str(files["hazy"]), "--gt-depth", str(files["depth"]), *SMALL_R,
            "--report", str(report), "--epsilon-curve", str(curve), "--plot", str(plot),
        ])
        assert code == EXIT_OK
        row = pd.read_csv(report).iloc[0]
        assert row["image_id"] == "hazy"
        assert row["n_pixels"] == SIZE * SIZE
        assert row["rho"] > 0.5
        eps = pd.read_csv(curve)
        assert len(eps) == 21
        assert np.all(np.diff(eps["theta_eps"].to_numpy()) >= 0)
        assert plot.exists()

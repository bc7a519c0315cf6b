import os

import numpy as np
import pytest
from PIL import Image

from varenn.cli import main

SYNTH_CFG = """\
[synth]
n_cells = 14
n_years = 42
seed = 5

[variable.tmp]
base = 10.0
seasonal_amplitude = 4.0
seasonal_phase = 6.0
trend_levels = 0.325, 0.1875, 0.0625, -0.0625, -0.25
noise_sd = 0.05

[variable.pre]
base = 60.0
seasonal_amplitude = 15.0
seasonal_phase = 1.0
trend_spread = 2.0
noise_sd = 1.0
"""

FAST_NET = ["--conv1-filters", "4", "--conv2-filters", "6", "--fc-units", "16"]
FAST_TRAIN = ["--epochs", "1", "--batch-size", "32", "--lr", "0.02"]


@pytest.fixture
def workspace(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text(SYNTH_CFG)
    return tmp_path


def run(args):
    return main([str(a) for a in args])


class TestPipelineVerbs:
    def test_full_pipeline(self, workspace):
        ws = workspace
        cube = ws / "cube.vcube"
        assert run(["synth", "--spec", ws / "synth.cfg", "--out", cube]) == 0
        assert cube.exists()
        assert (str(cube) + ".params") and os.path.exists(str(cube) + ".params")

        png = ws / "window.png"
        assert run(["encode", "--cube", cube, "--inputs", "tmp", "--cell", "0",
                    "--start-year", "1901", "--out", png]) == 0
        img = np.asarray(Image.open(png))
        assert img.shape == (60, 60, 3)
        assert np.all(img[:, :, 1:] == 0)  # vacant channels

        manifest = ws / "data.tsv"
        cache = ws / "data.vimg"
        assert run(["dataset", "--cube", cube, "--target", "TMP", "--inputs", "tmp",
                    "--ct", "0.0", "--out-manifest", manifest, "--out-cache", cache]) == 0

        ckpt = ws / "net.vnet"
        log = ws / "train.tsv"
        assert run(["train", "--manifest", manifest, "--cache", cache,
                    *FAST_TRAIN, *FAST_NET,
                    "--out-checkpoint", ckpt, "--out-log", log]) == 0
        assert ckpt.exists() and log.exists()

        report = ws / "eval.txt"
        assert run(["eval", "--manifest", manifest, "--cache", cache,
                    "--checkpoint", ckpt, "--out", report]) == 0
        text = report.read_text()
        assert "accuracy =" in text and "confusion" in text

        assert run(["render", "--manifest", manifest, "--cache", cache,
                    "--checkpoint", ckpt, "--out-prefix", ws / "map"]) == 0
        assert (ws / "map_classes.png").exists()
        assert (ws / "map_errors.png").exists()

    def test_suite_and_report(self, workspace):
        ws = workspace
        cube = ws / "cube.vcube"
        run(["synth", "--spec", ws / "synth.cfg", "--out", cube])
        out_dir = ws / "suite"
        assert run(["suite", "--cube", cube, "--target", "TMP", "--ct", "0.0",
                    "--seed", "5", "--ids", "5,6", *FAST_TRAIN, *FAST_NET,
                    "--out-dir", out_dir]) == 0
        assert (out_dir / "suite.json").exists()
        assert (out_dir / "report.txt").exists()

        rebuilt = ws / "rebuilt.txt"
        assert run(["report", "--suite-json", out_dir / "suite.json", "--out", rebuilt]) == 0
        assert rebuilt.read_bytes() == (out_dir / "report.txt").read_bytes()

    def test_ablate(self, workspace):
        ws = workspace
        cube = ws / "cube.vcube"
        run(["synth", "--spec", ws / "synth.cfg", "--out", cube])
        out = ws / "ablation.txt"
        assert run(["ablate", "--cube", cube, "--target", "TMP", "--inputs", "tmp",
                    "--ct", "0.0", "--seed", "5", *FAST_TRAIN, *FAST_NET,
                    "--out", out]) == 0
        assert "10_year_training" in out.read_text()


class TestErrorHandling:
    def test_bad_cube_magic_exit_code(self, workspace):
        bad = workspace / "bad.vcube"
        bad.write_bytes(b"XXXXXX" + b"\x00" * 64)
        code = run(["encode", "--cube", bad, "--inputs", "tmp", "--cell", "0",
                    "--start-year", "1901", "--out", workspace / "x.png"])
        assert code == 2  # format error category

    def test_missing_file_exit_code(self, workspace):
        code = run(["encode", "--cube", workspace / "absent.vcube", "--inputs", "tmp",
                    "--cell", "0", "--start-year", "1901", "--out", workspace / "x.png"])
        assert code == 8  # io category

    def test_unsorted_inputs_exit_code(self, workspace):
        cube = workspace / "cube.vcube"
        run(["synth", "--spec", workspace / "synth.cfg", "--out", cube])
        code = run(["dataset", "--cube", cube, "--target", "TMP", "--inputs", "tmp,cld",
                    "--out-manifest", workspace / "m.tsv", "--out-cache", workspace / "c.vimg"])
        assert code == 3  # validation category


class TestConfigFile:
    def test_config_supplies_defaults(self, workspace):
        ws = workspace
        ini = ws / "run.ini"
        ini.write_text(f"[synth]\nspec = {ws / 'synth.cfg'}\nout = {ws / 'from_cfg.vcube'}\n")
        assert run(["--config", ini, "synth"]) == 0
        assert (ws / "from_cfg.vcube").exists()

    def test_cli_flag_overrides_config(self, workspace):
        ws = workspace
        ini = ws / "run.ini"
        ini.write_text(f"[synth]\nspec = {ws / 'synth.cfg'}\nout = {ws / 'a.vcube'}\n")
        assert run(["--config", ini, "synth", "--out", ws / "b.vcube"]) == 0
        assert (ws / "b.vcube").exists()
        assert not (ws / "a.vcube").exists()

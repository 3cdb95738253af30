import json

import numpy as np
import pytest

from contourvae.cli import main
from contourvae.ingest import load_ensemble
from contourvae.latent_stats import chi2_quantile
from contourvae.render import read_image
from contourvae.vae import load_model

TRAIN_FAST = ["--k", "2", "--s", "24", "--epochs", "30"]


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("synth", "--n", 12, "--seed", 3, "--out", root / "data") == 0
    assert run("train", "--input", root / "data" / "ensemble.json", *TRAIN_FAST,
               "--out", root / "model") == 0
    return root


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


class TestSynth:
    def test_deterministic(self, tmp_path):
        snaps = []
        for _ in range(2):
            assert run("synth", "--n", 95, "--seed", 7, "--out", tmp_path) == 0
            snaps.append(files(tmp_path))
        assert snaps[0] == snaps[1]
        assert len(load_ensemble(tmp_path / "ensemble.json")) == 95

    def test_family_params(self, tmp_path):
        assert run("synth", "--family", "phase-sine-band", "--n", 5, "--param", "amplitude=2",
                   "--out", tmp_path) == 0
        manifest = json.loads((tmp_path / "synth.manifest.json").read_text())
        assert manifest["config"]["param"] == [["amplitude", 2.0]]

    def test_single_member_rejected(self, tmp_path):
        assert run("synth", "--n", 1, "--out", tmp_path / "x") == 2
        assert not (tmp_path / "x").exists()

    def test_unknown_family_param(self, tmp_path):
        assert run("synth", "--param", "wobble=1", "--out", tmp_path / "x") == 2
        assert not (tmp_path / "x").exists()

    def test_manifest(self, tmp_path):
        run("synth", "--n", 4, "--out", tmp_path)
        m = json.loads((tmp_path / "synth.manifest.json").read_text())
        assert m["config"]["n"] == 4 and m["config"]["seed"] == 7
        assert set(m["outputs"]) == {"ensemble.json"} and m["tool_version"]


class TestTrain:
    def test_outputs(self, workdir):
        out = workdir / "model"
        model = load_model(out / "model.json")
        assert model.k == 2 and model.s == 24
        loss = json.loads((out / "loss.json").read_text())
        assert len(loss["history"]) == 30

    def test_checkpoint_bytes_deterministic(self, workdir):
        before = files(workdir / "model")
        assert run("train", "--input", workdir / "data" / "ensemble.json", *TRAIN_FAST,
                   "--out", workdir / "model") == 0
        assert files(workdir / "model") == before

    def test_k_zero(self, workdir, tmp_path):
        assert run("train", "--input", workdir / "data" / "ensemble.json", "--k", 0,
                   "--out", tmp_path / "x") == 2

    def test_missing_input(self, tmp_path):
        assert run("train", "--input", tmp_path / "nope.json", "--out", tmp_path / "x") == 3
        assert not (tmp_path / "x").exists()

    def test_divergence_exit_code(self, workdir, tmp_path):
        code = run("train", "--input", workdir / "data" / "ensemble.json", *TRAIN_FAST,
                   "--lr", "1e300", "--out", tmp_path / "x")
        assert code == 4
        assert not (tmp_path / "x").exists()

    def test_config_file_and_override(self, workdir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"# quick run\ninput = {workdir / 'data' / 'ensemble.json'}\n"
                       "k = 2\ns = 24\nepochs = 30\nalign = false\nseed = 1\n")
        assert run("train", "--config", cfg, "--seed", 42, "--out", tmp_path / "o") == 0
        m = json.loads((tmp_path / "o" / "train.manifest.json").read_text())
        assert m["config"]["seed"] == 42 and m["config"]["epochs"] == 30 and m["config"]["align"] is False
        assert (tmp_path / "o" / "model.json").read_bytes() == (workdir / "model" / "model.json").read_bytes()

    def test_config_unknown_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        assert run("synth", "--config", cfg, "--out", tmp_path / "x") == 2


class TestBands:
    def test_defaults(self, workdir, tmp_path):
        assert run("bands", "--input", workdir / "model" / "model.json", "--samples", 50,
                   "--width", 64, "--height", 48, "--out", tmp_path) == 0
        meta = json.loads((tmp_path / "bands.json").read_text())
        assert meta["levels"] == [0.25, 0.5, 0.9]
        for lv, r in zip(meta["levels"], meta["radii"]):
            assert abs(r - np.sqrt(chi2_quantile(2, lv))) < 1e-9
        cov = meta["covered_pixels"]
        assert cov[0] <= cov[1] <= cov[2] and cov[0] > 0
        assert read_image(tmp_path / "bands.ppm").shape == (48, 64, 3)

    def test_single_level(self, workdir, tmp_path):
        assert run("bands", "--input", workdir / "model" / "model.json", "--levels", "0.9",
                   "--samples", 20, "--width", 32, "--height", 32, "--out", tmp_path) == 0
        img = read_image(tmp_path / "bands.ppm").reshape(-1, 3)
        assert len(np.unique(img, axis=0)) == 2

    def test_surface_mode(self, workdir, tmp_path):
        assert run("bands", "--input", workdir / "model" / "model.json", "--mode", "surface",
                   "--samples", 20, "--width", 32, "--height", 32, "--out", tmp_path) == 0
        assert json.loads((tmp_path / "bands.json").read_text())["mode"] == "surface"

    def test_bad_levels(self, workdir, tmp_path):
        assert run("bands", "--input", workdir / "model" / "model.json", "--levels", "0.9,0.5",
                   "--out", tmp_path / "x") == 2

    def test_corrupt_checkpoint(self, tmp_path):
        (tmp_path / "m.json").write_text('{"format": "contourvae-checkpoint", "vers')
        assert run("bands", "--input", tmp_path / "m.json", "--out", tmp_path / "x") == 3
        assert not (tmp_path / "x").exists()


class TestDensity:
    def test_single_sample_binary(self, workdir, tmp_path):
        assert run("density", "--input", workdir / "model" / "model.json", "--samples", 1,
                   "--width", 40, "--height", 40, "--out", tmp_path) == 0
        assert set(np.unique(read_image(tmp_path / "density.pgm"))) == {0, 255}

    def test_deterministic(self, workdir, tmp_path):
        snaps = []
        for _ in range(2):
            assert run("density", "--input", workdir / "model" / "model.json", "--samples", 30,
                       "--width", 40, "--height", 30, "--out", tmp_path) == 0
            snaps.append(files(tmp_path))
        assert snaps[0] == snaps[1]
        assert read_image(tmp_path / "density.ppm").shape == (30, 40, 3)


class TestEval:
    def test_smoke(self, workdir, tmp_path):
        assert run("eval", "--input", workdir / "data" / "ensemble.json", "--model",
                   workdir / "model" / "model.json", "--seeds", "0,1", "--points", 30,
                   "--pca-k", 2, "--smoke", "--out", tmp_path) == 0
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["smoke"]["mmd_cd"] == 0.0
        assert [r["seed"] for r in rep["per_seed"]] == [0, 1]
        assert 0 <= rep["vae_wins"] <= 2 and rep["count"] == 12

    def test_deterministic(self, workdir, tmp_path):
        snaps = []
        for _ in range(2):
            assert run("eval", "--input", workdir / "data" / "ensemble.json", "--model",
                       workdir / "model" / "model.json", "--seeds", "3", "--points", 20,
                       "--pca-k", 2, "--out", tmp_path) == 0
            snaps.append(files(tmp_path))
        assert snaps[0] == snaps[1]


class TestSpaghetti:
    def test_every_member_visible(self, tmp_path):
        run("synth", "--n", 95, "--out", tmp_path / "d")
        assert run("spaghetti", "--input", tmp_path / "d" / "ensemble.json", "--out", tmp_path) == 0
        img = read_image(tmp_path / "spaghetti.ppm")
        assert img.shape == (256, 256, 3) and np.any(img != 255)

    def test_empty_window(self, workdir, tmp_path):
        assert run("spaghetti", "--input", workdir / "data" / "ensemble.json",
                   "--window", "50,50,60,60", "--width", 16, "--height", 16, "--out", tmp_path) == 0
        assert np.all(read_image(tmp_path / "spaghetti.ppm") == 255)

    def test_bad_window(self, workdir, tmp_path):
        assert run("spaghetti", "--input", workdir / "data" / "ensemble.json",
                   "--window", "1,1,0,0", "--out", tmp_path / "x") == 2


def test_no_stray_temp_files(workdir):
    for d in workdir.iterdir():
        assert not [p for p in d.iterdir() if p.name.endswith(".tmp")]

import json
import subprocess
import sys

import numpy as np
import pytest

from lvc.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "-o", str(d / "clips"), "--count", "1", "--frames", "4",
                 "--height", "64", "--width", "64"]) == 0
    (d / "train.yaml").write_text("framework: CRC\nstrategy: hybrid\nib: 3\nwidth: 8\nsteps: 50\n")
    for seed in ("0", "1"):
        assert main(["train", "--config", str(d / "train.yaml"), "--steps", "2", "--patch-size", "32",
                     "--batch-size", "1", "--seed", seed, "-o", str(d / f"m{seed}.pt")]) == 0
    return d


def run_json(capsys, argv):
    capsys.readouterr()
    code = main(argv)
    return code, capsys.readouterr().out


def test_flags_override_config(workspace):
    import torch

    ckpt = torch.load(workspace / "m0.pt", weights_only=False)
    assert ckpt["train_config"]["steps"] == 2  # flag beats config file
    assert ckpt["model_config"]["framework"] == "CRC" and ckpt["model_config"]["width"] == 8


def test_encode_decode_psnr_match(workspace, capsys):
    d = workspace
    clip = str(d / "clips" / "clip_000.npy")
    code, _ = run_json(capsys, ["encode", "--checkpoint", str(d / "m0.pt"), "-i", clip, "-o", str(d / "a.lvc"),
                                "--intra-period", "2", "--report", str(d / "enc.json")])
    assert code == 0
    enc = json.loads((d / "enc.json").read_text())
    assert [f["type"] for f in enc["per_frame"]] == ["I", "P", "I", "P"]
    code, out = run_json(capsys, ["decode", "--checkpoint", str(d / "m0.pt"), "-i", str(d / "a.lvc"),
                                  "--reference", clip, "-o", str(d / "dec.npy")])
    assert code == 0
    dec = json.loads(out)
    assert dec["per_frame_psnr"] == [f["psnr"] for f in enc["per_frame"]]
    assert np.load(d / "dec.npy").shape == (4, 64, 64, 3)


def test_exit_codes(workspace, capsys):
    d = workspace
    if not (d / "a.lvc").exists():
        main(["encode", "--checkpoint", str(d / "m0.pt"), "-i", str(d / "clips" / "clip_000.npy"),
              "-o", str(d / "a.lvc")])
    data = (d / "a.lvc").read_bytes()
    (d / "cut.lvc").write_bytes(data[:-3])
    assert main(["decode", "--checkpoint", str(d / "m1.pt"), "-i", str(d / "a.lvc")]) == 3
    assert main(["decode", "--checkpoint", str(d / "m0.pt"), "-i", str(d / "cut.lvc")]) == 3
    assert main(["decode", "--checkpoint", str(d / "m0.pt"), "-i", str(d / "nope.lvc")]) == 2
    assert main(["frobnicate"]) == 1
    assert main(["matrix", "--cells", "RC-explicit-3", "--dataset", "x=y"]) == 1
    assert main(["matrix", "--dataset", "novalue"]) == 1
    assert main(["profile", "--framework", "RC", "--strategy", "explicit", "--ib", "3"]) == 1
    assert main(["train", "--framework", "RC", "--strategy", "explicit", "--ib", "3"]) == 1


def test_bdrate_and_profile(tmp_path, capsys):
    a = [[0.05, 30.0], [0.1, 32.5], [0.2, 35.0], [0.4, 37.2]]
    (tmp_path / "a.json").write_text(json.dumps({"points": a}))
    (tmp_path / "b.csv").write_text("bpp,psnr\n" + "".join(f"{r * 1.1},{q}\n" for r, q in a))
    code, out = run_json(capsys, ["bdrate", "--anchor", str(tmp_path / "a.json"), "--test", str(tmp_path / "b.csv")])
    assert code == 0 and json.loads(out)["bd_rate"] == pytest.approx(10.0, abs=1e-6)
    code, out = run_json(capsys, ["profile", "--framework", "MCR", "--strategy", "implicit", "--ib", "6",
                                  "--width", "8", "--height", "64", "--frame-width", "64"])
    rep = json.loads(out)
    assert code == 0 and rep["buffer_channels"] == 6 and rep["dec_kmacs_per_pixel"] <= rep["enc_kmacs_per_pixel"]
    code, out = run_json(capsys, ["profile", "--width", "8", "--height", "64", "--frame-width", "64",
                                  "--format", "csv", "--framework", "RC", "--strategy", "explicit"])
    assert code == 0 and len(out.strip().splitlines()) == 2


def test_plot_empty_results(tmp_path, capsys):
    (tmp_path / "r.json").write_text("{}")
    code, out = run_json(capsys, ["plot", "--results", str(tmp_path / "r.json"), "-o", str(tmp_path / "p")])
    assert code == 0 and out == ""


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lvc", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("train", "encode", "decode", "eval", "bdrate", "profile", "matrix", "plot", "gen-data"):
        assert sub in proc.stdout

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from srkit.cli import main
from srkit.harness import save_config, TrainConfig
from srkit.image import save_image
from srkit.metrics import read_reports
from srkit.net import NetConfig, save_checkpoint, zero_params


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "srkit.cli", *args], capture_output=True, text=True)


@pytest.fixture
def pair_files(tmp_path):
    a = np.full((1, 32, 32), 100 / 255)
    # 0.1 is not a multiple of 1/255; 51/255 = 0.2 is exact in 8 bits
    b = a + 51 / 255
    save_image(a, tmp_path / "a.pgm")
    save_image(b, tmp_path / "b.pgm")
    return tmp_path / "a.pgm", tmp_path / "b.pgm"


def test_metric_psnr(pair_files):
    a, b = pair_files
    res = run_cli("metric", "psnr", "--a", str(a), "--b", str(b))
    assert res.returncode == 0, res.stderr
    # gray is scored through the luma map, which scales differences by 219/255
    assert float(res.stdout) == pytest.approx(-20 * math.log10(0.2 * 219 / 255), abs=1e-4)


def test_metric_identical(pair_files, capsys):
    a, _ = pair_files
    assert main(["metric", "psnr", "--a", str(a), "--b", str(a)]) == 0
    assert capsys.readouterr().out.strip() == "inf"
    assert main(["metric", "ssim", "--a", str(a), "--b", str(a)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.0, abs=1e-9)


def test_error_line(tmp_path):
    res = run_cli("metric", "ssim", "--a", str(tmp_path / "nope.png"), "--b", str(tmp_path / "nope.png"))
    assert res.returncode != 0
    lines = res.stderr.strip().splitlines()
    assert len(lines) == 1
    err = json.loads(lines[0])
    assert set(err) == {"error", "message"} and "nope.png" in err["message"]


def test_usage_error_line():
    res = run_cli("eval", "--ckpt", "x")
    assert res.returncode != 0
    assert json.loads(res.stderr.strip())["error"] == "UsageError"


def test_degrade_and_eval(tmp_path, capsys):
    hr = tmp_path / "hr"
    hr.mkdir()
    r = np.random.default_rng(0)
    for i in range(2):
        save_image(r.random((3, 40, 44)), hr / f"x{i}.png")
    assert main(["degrade", "--in", str(hr), "--out", str(tmp_path / "deg"), "--scale", "2"]) == 0
    assert (tmp_path / "deg" / "manifest.csv").exists()

    cfg = NetConfig(blocks=1, channels=2)
    save_checkpoint(tmp_path / "z.ckpt", zero_params(cfg), cfg)
    capsys.readouterr()
    assert main(["eval", "--ckpt", str(tmp_path / "z.ckpt"), "--hr", str(hr), "--scale", "2", "--out", str(tmp_path / "e.csv")]) == 0
    rows = read_reports(tmp_path / "e.csv")
    assert [x.image_id for x in rows] == ["x0", "x1", "mean"]
    assert " & " in capsys.readouterr().out


def test_train_and_ablate(tmp_path, capsys):
    hr = tmp_path / "hr"
    hr.mkdir()
    save_image(np.random.default_rng(1).random((3, 56, 56)), hr / "a.png")
    cfg = TrainConfig(str(hr), str(tmp_path / "run"), epochs=1, batch_size=2, patches_per_epoch=2,
                      net=NetConfig(blocks=1, channels=2))
    save_config(cfg, tmp_path / "cfg.json")
    assert main(["train", "--config", str(tmp_path / "cfg.json")]) == 0
    assert (tmp_path / "run" / "checkpoint.ckpt").exists()
    out = tmp_path / "abl.csv"
    assert main(["ablate", "--config", str(tmp_path / "cfg.json"), "--lambdas", "0,1", "--out", str(out), "--max-steps", "1"]) == 0
    assert out.read_text().splitlines()[0] == "lambda,dataset,scale,psnr,ssim"
    assert main(["ablate", "--config", str(tmp_path / "cfg.json"), "--lambdas", "1,1", "--out", str(out)]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "ValueError"

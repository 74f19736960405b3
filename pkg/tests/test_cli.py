import json

import pytest

from stridedpose.cli import main


def test_flops_prints_reference_ratio(capsys):
    assert main(["flops", "--frames", "27", "--dim", "256"]) == 0
    out = capsys.readouterr().out
    assert "alpha  = 1.3525" in out
    assert "F_VTE  = 43,587,072 MACs" in out
    assert "F_STE  = 20,866,560 MACs" in out


def test_flops_csv(tmp_path, capsys):
    path = tmp_path / "f.csv"
    assert main(["flops", "--frames", "81", "--dim", "64", "--csv", str(path)]) == 0
    assert path.read_text().startswith("quantity,value\n")


def test_gen_data_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.sps", tmp_path / "b.sps"
    args = ["gen-data", "--seed", "7", "--sequences", "2", "--frames", "30", "--sigma", "3", "--window", "9"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_missing_config_is_runtime_error(tmp_path, capsys):
    code = main(["train", "--config", str(tmp_path / "missing.json"), "--data", "x", "--out", str(tmp_path)])
    assert code == 2
    assert "missing.json" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["flops", "--bogus"], ["dance"], [], ["gen-data", "--out", "x"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "usage:" in capsys.readouterr().err


def test_bad_config_key_is_runtime_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 1, "warmup": 3}))
    assert main(["train", "--config", str(cfg), "--data", "x", "--out", str(tmp_path)]) == 2


def test_train_eval_attn_round_trip(tmp_path, capsys):
    data = tmp_path / "d.sps"
    assert main(["gen-data", "--seed", "1", "--sequences", "2", "--frames", "20", "--window", "9", "--out", str(data)]) == 0
    cfg = tmp_path / "c.json"
    model = dict(frames=9, d_model=16, d_ff=32, heads=2, n_vte=1, n_ste=2, s_m=[3, 3])
    cfg.write_text(json.dumps({"model": model, "epochs": 2, "batch_size": 16}))
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--data", str(data), "--eval-data", str(data), "--out", str(run)]) == 0
    assert (run / "best.ckpt").exists() and (run / "log.csv").exists()
    report = tmp_path / "r.csv"
    assert main(["eval", "--checkpoint", str(run / "best.ckpt"), "--data", str(data), "--csv", str(report)]) == 0
    assert report.read_text().splitlines()[-1].startswith("Avg.,")
    attn = tmp_path / "attn"
    assert main(["attn", "--checkpoint", str(run / "best.ckpt"), "--data", str(data), "--index", "3", "--out", str(attn)]) == 0
    assert len(list(attn.glob("*.png"))) == 3 * 2
    assert main(["attn", "--checkpoint", str(run / "best.ckpt"), "--data", str(data), "--index", "999", "--out", str(attn)]) == 2

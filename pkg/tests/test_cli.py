import json

from bfssl.cli import main

TINY = """episodes = 1
slots = 2
max_local_iters = 1
simco.input_dim = 6
simco.hidden_dim = 8
simco.embed_dim = 8
simco.proj_dim = 8
data.samples_per_vehicle = 16
data.eval_samples = 16
sac.hidden = (8,)
pso.max_iterations = 3
pso.swarm_size = 3
"""


def test_train_test_baseline(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY)
    train_dir = tmp_path / "train"
    assert main(["train", "--config", str(cfg), "--out", str(train_dir), "--seed", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows"] == 2 and summary["seed"] == 2
    assert (train_dir / "agent.bin").exists() and (train_dir / "metrics.csv").exists()

    test_dir = tmp_path / "test"
    assert main(["test", "--config", str(cfg), "--checkpoint", str(train_dir / "agent.bin"),
                 "--out", str(test_dir), "--slots", "2"]) == 0
    assert json.loads((test_dir / "summary.json").read_text())["mode"] == "test"

    assert main(["baseline", "pso", "--config", str(cfg), "--out", str(tmp_path / "pso")]) == 0


def test_errors_return_nonzero(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("channel.unknown = 1\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["test", "--checkpoint", str(tmp_path / "missing.bin"), "--out", str(tmp_path / "y")]) == 2

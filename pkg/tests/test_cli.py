"""End-to-end command-line surface: every subcommand, exit codes, and
agreement between CLI output and direct library calls."""

import json

import numpy as np
import pytest

from earfa import cli
from earfa.data import load_png, save_png, synthetic_image
from earfa.model import EARFA, ModelConfig, super_resolve
from earfa.weights import load_weights


@pytest.fixture
def dataset_dir(tmp_path):
    rng = np.random.default_rng(99)
    d = tmp_path / "dataset"
    d.mkdir()
    for i in range(3):
        save_png(synthetic_image(rng, 48, 48), d / f"img{i}.png")
    return d


@pytest.fixture
def tiny_weights(tmp_path):
    model = EARFA(ModelConfig.tiny(2), seed=5)
    path = tmp_path / "tiny.earfa"
    model.save(path)
    return path


def test_train_subcommand(tmp_path, dataset_dir, capsys):
    out = tmp_path / "run"
    code = cli.main([
        "train", "--variant", "tiny", "--scale", "2",
        "--dataset", str(dataset_dir), "--out", str(out),
        "--iters", "4", "--batch", "1", "--patch", "8",
        "--milestones", "2", "--seed", "3",
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "resolved configuration:" in text and "seed: 3" in text
    assert (out / "final.earfa").exists()
    assert (out / "log.csv").read_text().startswith("iter,lr,loss,eval_psnr")
    assert (out / "model.cfg").exists()


def test_train_missing_dataset_dir_is_io_error(tmp_path, capsys):
    code = cli.main([
        "train", "--variant", "tiny", "--scale", "2",
        "--dataset", str(tmp_path / "absent"), "--out", str(tmp_path / "o"),
        "--iters", "2", "--batch", "1", "--patch", "8", "--milestones", "1",
    ])
    assert code in (2, 3)  # empty/missing data; FileNotFound or validation


def test_infer_writes_default_name_and_is_deterministic(tmp_path, tiny_weights, capsys):
    rng = np.random.default_rng(1)
    src = tmp_path / "photo.png"
    save_png(rng.random((1, 3, 12, 10), dtype=np.float32), src)
    for _ in range(2):
        code = cli.main(["infer", "--variant", "tiny", "--scale", "2",
                         "--weights", str(tiny_weights), "--input", str(src)])
        assert code == 0
    out = tmp_path / "photo_x2.png"
    assert out.exists()
    first = out.read_bytes()
    cli.main(["infer", "--variant", "tiny", "--scale", "2",
              "--weights", str(tiny_weights), "--input", str(src)])
    assert out.read_bytes() == first
    assert load_png(out).shape == (1, 3, 24, 20)


def test_infer_matches_library_forward(tmp_path, tiny_weights):
    rng = np.random.default_rng(2)
    src = tmp_path / "x.png"
    img = rng.integers(0, 256, (1, 3, 9, 9)).astype(np.float32) / 255.0
    save_png(img, src)
    cli.main(["infer", "--variant", "tiny", "--scale", "2",
              "--weights", str(tiny_weights), "--input", str(src)])
    model = EARFA(ModelConfig.tiny(2))
    model.load_state(load_weights(tiny_weights))
    direct = super_resolve(model, load_png(src))
    via_cli = load_png(tmp_path / "x_x2.png")
    # CLI output goes through 8-bit quantization; compare at that precision.
    np.testing.assert_allclose(via_cli, direct, atol=0.5 / 255.0)


def test_infer_missing_input_exits_2(tiny_weights):
    assert cli.main(["infer", "--variant", "tiny", "--scale", "2",
                     "--weights", str(tiny_weights),
                     "--input", "/nonexistent/img.png"]) == 2


def test_infer_wrong_scale_exits_3(tmp_path, tiny_weights):
    rng = np.random.default_rng(3)
    src = tmp_path / "y.png"
    save_png(rng.random((1, 3, 8, 8), dtype=np.float32), src)
    assert cli.main(["infer", "--variant", "tiny", "--scale", "4",
                     "--weights", str(tiny_weights), "--input", str(src)]) == 3


def test_eval_subcommand_and_csv(tmp_path, dataset_dir, tiny_weights, capsys):
    out_csv = tmp_path / "report.csv"
    code = cli.main(["eval", "--variant", "tiny", "--scale", "2",
                     "--weights", str(tiny_weights),
                     "--dataset", str(dataset_dir), "--out", str(out_csv)])
    assert code == 0
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "dataset,image,psnr,ssim,bicubic_psnr,bicubic_ssim"
    assert len(lines) == 4  # header + 3 images
    assert "mean over 3 images" in capsys.readouterr().out


def test_eval_empty_dir_exits_2(tmp_path, tiny_weights):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["eval", "--variant", "tiny", "--scale", "2",
                     "--weights", str(tiny_weights), "--dataset", str(empty)]) == 2


def test_eval_bicubic_column_matches_library(tmp_path, dataset_dir, tiny_weights):
    from earfa.data import bicubic_resize, scan_dataset
    from earfa.metrics import y_channel_scores
    out_csv = tmp_path / "r.csv"
    cli.main(["eval", "--variant", "tiny", "--scale", "2",
              "--weights", str(tiny_weights),
              "--dataset", str(dataset_dir), "--out", str(out_csv)])
    rows = out_csv.read_text().strip().splitlines()[1:]
    pairs = scan_dataset(dataset_dir, 2)
    for row, pair in zip(rows, pairs):
        up = np.clip(bicubic_resize(pair.lr, 2.0), 0.0, 1.0)
        p, s = y_channel_scores(up, pair.hr, 2)
        assert float(row.split(",")[4]) == pytest.approx(p, abs=5e-5)
        assert float(row.split(",")[5]) == pytest.approx(s, abs=5e-7)


def test_stats_full_x4(capsys):
    assert cli.main(["stats", "--variant", "full", "--scale", "4"]) == 0
    text = capsys.readouterr().out
    params = int(text.split("params")[1].split(":")[1].split("(")[0].strip())
    assert abs(params - 1_045_000) / 1_045_000 < 0.15
    assert "slka receptive field : 23 px" in text


def test_stats_config_file(tmp_path, capsys):
    cfg_path = tmp_path / "m.cfg"
    cfg_path.write_text(ModelConfig.light(4).to_text())
    assert cli.main(["stats", "--config", str(cfg_path)]) == 0
    assert "multi-adds" in capsys.readouterr().out


def test_stats_bad_config_key_exits_3(tmp_path, capsys):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("bogus_key=7\n")
    assert cli.main(["stats", "--config", str(cfg_path)]) == 3
    assert "bogus_key" in capsys.readouterr().err


def test_bench_entropy_emits_json(capsys):
    code = cli.main(["bench-entropy", "--batch", "1", "--c", "4",
                     "--h", "16", "--w", "16", "--reps", "10"])
    assert code == 0
    out = capsys.readouterr().out
    json_line = [line for line in out.splitlines() if line.startswith("{")][-1]
    report = json.loads(json_line)
    assert report["reps"] == 10
    assert report["speedup"] > 0
    assert "traditional" in out and "gaussian" in out


def test_ablate_six_rows(tmp_path, dataset_dir, capsys):
    out = tmp_path / "ablation"
    code = cli.main(["ablate", "--dataset", str(dataset_dir), "--out", str(out),
                     "--iters", "2", "--batch", "1", "--patch", "8"])
    assert code == 0
    lines = (out / "ablation.csv").read_text().strip().splitlines()
    assert len(lines) == 7
    text = capsys.readouterr().out
    assert "slka+ea" in text


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit):
        cli.main(["stats", "--nonsense", "1"])


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "earfa", "stats",
                           "--variant", "tiny", "--scale", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "params" in proc.stdout


def test_debug_flag_catches_nonfinite():
    import subprocess
    import sys
    snippet = (
        "import numpy as np\n"
        "from earfa.tensor import Tensor, scale\n"
        "from earfa.errors import NumericError\n"
        "x = Tensor(np.array([1e30], dtype=np.float32))\n"
        "try:\n"
        "    scale(scale(x, 1e30), 1e30)\n"
        "    print('no-check')\n"
        "except NumericError:\n"
        "    print('caught')\n"
    )
    on = subprocess.run([sys.executable, "-c", snippet], capture_output=True,
                        text=True, env={"EARFA_DEBUG": "1", "PATH": "/usr/bin:/bin"})
    off = subprocess.run([sys.executable, "-c", snippet], capture_output=True,
                         text=True, env={"PATH": "/usr/bin:/bin"})
    assert on.stdout.strip() == "caught", on.stderr
    assert off.stdout.strip() == "no-check", off.stderr


def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for name in ("train", "infer", "eval", "bench-entropy", "stats", "ablate"):
        assert name in text
    assert "EARFA_THREADS" in text


@pytest.mark.parametrize("command,flags", [
    ("train", ["--dataset", "--out", "--iters", "--batch", "--patch", "--lr0",
               "--milestones", "--seed", "--resume", "--config", "--variant",
               "--scale", "--val-dataset"]),
    ("infer", ["--weights", "--input", "--output", "--self-ensemble"]),
    ("eval", ["--weights", "--dataset", "--out", "--shave", "--self-ensemble"]),
    ("stats", ["--config", "--variant", "--scale", "--out-h", "--out-w"]),
    ("bench-entropy", ["--batch", "--c", "--h", "--w", "--reps", "--seed", "--json"]),
    ("ablate", ["--dataset", "--out", "--scale", "--iters", "--batch",
                "--patch", "--lr0", "--seed", "--val-dataset"]),
])
def test_subcommand_help_enumerates_flags(capsys, command, flags):
    with pytest.raises(SystemExit):
        cli.main([command, "--help"])
    text = capsys.readouterr().out
    for flag in flags:
        assert flag in text, f"{command} --help missing {flag}"

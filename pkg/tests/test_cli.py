import json

import numpy as np
import pytest

from fagstyle import cli
from fagstyle.contentloss import LossWeights
from fagstyle.geodesic import AugmentConfig
from fagstyle.styleloss import StyleInputs, loss_style
from fagstyle.tensor import read_tensor, write_tensor

ALL_OPERATIONS = {
    "write_tensor", "read_tensor",
    "reshape_to_landmarks", "project", "geodesic_distance",
    "curve_point", "surface_point", "generate_weight_sets", "augment",
    "plan", "extract",
    "loss_pc", "loss_pd", "loss_style",
    "self_correlation", "loss_psc", "loss_mse", "loss_feature_mse",
    "loss_patch_contrastive", "loss_content",
    "grad_eval", "fd_check",
    "build_schedule", "q_sample", "denoised_estimate", "ddim_invert",
    "guided_step", "sample_loop", "toy_predictor",
    "psnr", "ssim", "clip_score",
}


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _write(path, arr):
    write_tensor(np.asarray(arr, dtype=np.float64), path)
    return str(path)


def test_operation_table_is_complete_and_unique():
    assert set(cli.OPERATION_COMMANDS) == ALL_OPERATIONS
    for op, cmd in cli.OPERATION_COMMANDS.items():
        assert isinstance(cmd, str) and cmd


def test_project_and_gdist(capsys, tmp_path, rng):
    a = _write(tmp_path / "a.tnsr", rng.normal(size=16))
    b = _write(tmp_path / "b.tnsr", rng.normal(size=16))
    out_path = tmp_path / "tau.tnsr"
    code, out, _ = run(capsys, "project", "--input", a, "--output", str(out_path))
    assert code == 0
    assert json.loads(out)["k"] == 8
    tau = read_tensor(out_path)
    assert abs(np.linalg.norm(tau) - 1.0) < 1e-12

    code, out, _ = run(capsys, "gdist", "--a", a, "--b", b)
    assert code == 0
    value = float(out.strip())
    assert 0.0 <= value <= np.pi
    # 17 significant digits, reparsable bit-exactly
    assert out.strip() == format(value, ".17g")


def test_curve_surface_augment(capsys, tmp_path, rng):
    files = [_write(tmp_path / f"t{i}.tnsr", rng.normal(size=12)) for i in range(3)]
    code, out, _ = run(capsys, "curve", "--a", files[0], "--b", files[1],
                       "--s", "0.25", "--output", str(tmp_path / "c.tnsr"))
    assert code == 0
    code, out, _ = run(capsys, "surface", "--inputs", *files,
                       "--weights", "1", "1", "2", "--output", str(tmp_path / "s.tnsr"))
    assert code == 0
    code, out, _ = run(capsys, "augment", "--inputs", *files,
                       "--gamma", "0.5", "--output-dir", str(tmp_path / "aug"))
    assert code == 0
    doc = json.loads(out)
    assert doc["m"] == 3
    for f in doc["files"]:
        lm = read_tensor(f)
        assert abs(np.linalg.norm(lm) - 1.0) < 1e-12


def test_swc_plan_and_extract(capsys, tmp_path, rng):
    code, out, _ = run(capsys, "swc-plan", "--height", "256", "--width", "256",
                       "--n", "49", "--mode", "full-coverage")
    assert code == 0
    doc = json.loads(out)
    assert (doc["side"], doc["stride"], len(doc["patches"])) == (64, 32, 49)
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(out)

    img = _write(tmp_path / "img.tnsr", rng.uniform(0, 1, size=(3, 256, 256)))
    code, out, _ = run(capsys, "swc-extract", "--image", img,
                       "--plan", str(plan_path), "--output-dir", str(tmp_path / "patches"))
    assert code == 0
    doc = json.loads(out)
    assert doc["n"] == 49
    patch0 = read_tensor(doc["files"][0])
    assert patch0.shape == (3, 64, 64)


def _style_config(tmp_path, rng, n=3, size=16):
    cfg = {
        "target_patches": [_write(tmp_path / f"tp{i}.tnsr", rng.normal(size=size)) for i in range(n)],
        "source_patches": [_write(tmp_path / f"sp{i}.tnsr", rng.normal(size=size)) for i in range(n)],
        "tgt_text": _write(tmp_path / "tt.tnsr", rng.normal(size=size)),
        "src_text": _write(tmp_path / "st.tnsr", rng.normal(size=size)),
        "weights": {"n": n},
        "augment": {"gamma": 0.5},
    }
    path = tmp_path / "loss.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def test_loss_style_matches_library(capsys, tmp_path, rng):
    path, cfg = _style_config(tmp_path, rng)
    code, out, _ = run(capsys, "loss", "style", "--config", str(path))
    assert code == 0
    inputs = StyleInputs(
        target_patch_feats=tuple(read_tensor(p) for p in cfg["target_patches"]),
        source_patch_feats=tuple(read_tensor(p) for p in cfg["source_patches"]),
        tgt_text_feat=read_tensor(cfg["tgt_text"]),
        src_text_feat=read_tensor(cfg["src_text"]),
        aug_cfg=AugmentConfig(gamma=0.5),
    )
    assert float(out.strip()) == loss_style(inputs, LossWeights(n=3))


def test_loss_grad_out(capsys, tmp_path, rng):
    path, cfg = _style_config(tmp_path, rng)
    code, out, _ = run(capsys, "loss", "pc", "--config", str(path),
                       "--grad-out", str(tmp_path / "grads"))
    assert code == 0
    doc = json.loads(out)
    g = read_tensor(doc["grads"]["target_patches.0"])
    assert g.shape == (16,)


def test_loss_mse_cli(capsys, tmp_path):
    cfg = {
        "source_image": _write(tmp_path / "ia.tnsr", np.zeros((2, 3))),
        "target_image": _write(tmp_path / "ib.tnsr", np.full((2, 3), 10.0)),
    }
    path = tmp_path / "mse.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(capsys, "loss", "mse", "--config", str(path))
    assert code == 0
    assert float(out.strip()) == 100.0


def test_loss_degenerate_exit_code(capsys, tmp_path, rng):
    feats = [rng.normal(size=10) for _ in range(2)]
    cfg = {
        "target_patches": [_write(tmp_path / f"a{i}.tnsr", f) for i, f in enumerate(feats)],
        "source_patches": [_write(tmp_path / f"b{i}.tnsr", f) for i, f in enumerate(feats)],
        "tgt_text": _write(tmp_path / "t.tnsr", rng.normal(size=10)),
        "src_text": _write(tmp_path / "s.tnsr", rng.normal(size=10)),
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    code, out, err = run(capsys, "loss", "pd", "--config", str(path))
    assert code == 1
    assert json.loads(err)["error"] == "degenerate-direction"


def test_gradcheck_cli(capsys):
    code, out, _ = run(capsys, "gradcheck", "--loss", "pc", "--seed", "3", "--coords", "40")
    assert code == 0
    doc = json.loads(out)
    assert doc["loss_id"] == "pc"
    assert doc["max_rel"] < 1e-5


def test_schedule_cli(capsys):
    code, out, _ = run(capsys, "schedule", "--T", "1000", "--t-prime", "50", "--t0", "25")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["steps"]) == 50
    assert doc["steps"][0]["t"] == 20
    assert doc["steps"][-1]["t"] == 1000
    assert all(s["sigma"] == 0 for s in doc["steps"])


def _guide_config(tmp_path, rng, seed=0):
    x0 = rng.uniform(0, 1, size=(3, 16, 16))
    mean = rng.uniform(0, 1, size=(3, 16, 16))
    size = 3 * 10 * 10  # full-coverage side for 16 px, n=4
    cfg = {
        "source_image": _write(tmp_path / "x0.tnsr", x0),
        "tgt_text": _write(tmp_path / "tgt.tnsr", rng.normal(size=size)),
        "src_text": _write(tmp_path / "src.tnsr", rng.normal(size=size)),
        "weights": {"n": 4},
        "schedule": {"T": 100, "T_prime": 10, "t0": 5, "sigma_mode": "ddim"},
        "augment": {"gamma": 0.5},
        "predictor": {"mean": _write(tmp_path / "mean.tnsr", mean), "scale": 1.0},
        "guidance": {"eta": 1e-6, "pool_factors": [4, 8]},
        "seed": seed,
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_guide_stages(capsys, tmp_path, rng):
    path = _guide_config(tmp_path, rng)
    for stage in ("qsample", "denoise", "invert", "step", "full"):
        code, out, _ = run(capsys, "guide", "--config", str(path), "--stage", stage)
        assert code == 0, stage
    doc = json.loads(out)
    assert doc["steps"] == 5
    trace = json.loads((tmp_path / "out" / "trace.json").read_text())["trace"]
    assert len(trace) == 5


def test_guide_determinism(capsys, tmp_path, rng):
    path = _guide_config(tmp_path, rng)
    code, out1, _ = run(capsys, "guide", "--config", str(path))
    bytes1 = (tmp_path / "out" / "stylized.tnsr").read_bytes()
    trace1 = (tmp_path / "out" / "trace.json").read_bytes()
    code, out2, _ = run(capsys, "guide", "--config", str(path))
    bytes2 = (tmp_path / "out" / "stylized.tnsr").read_bytes()
    trace2 = (tmp_path / "out" / "trace.json").read_bytes()
    assert out1 == out2
    assert bytes1 == bytes2
    assert trace1 == trace2


def test_metrics_cli(capsys, tmp_path, rng):
    a = _write(tmp_path / "a.tnsr", np.zeros((12, 12)))
    b = _write(tmp_path / "b.tnsr", np.full((12, 12), 10.0))
    code, out, _ = run(capsys, "metrics", "psnr", "--a", a, "--b", b, "--peak", "8bit")
    assert code == 0
    assert abs(json.loads(out)["psnr"] - 28.131) < 1e-3

    code, out, _ = run(capsys, "metrics", "psnr", "--a", a, "--b", a)
    assert json.loads(out)["psnr"] == "identical"

    code, out, _ = run(capsys, "metrics", "ssim", "--a", a, "--b", a)
    assert json.loads(out)["ssim"] == 1.0

    t = _write(tmp_path / "t.tnsr", np.array([1.0, 0.0]))
    p1 = _write(tmp_path / "p1.tnsr", np.array([0.2, np.sqrt(0.96)]))
    p2 = _write(tmp_path / "p2.tnsr", np.array([0.3, np.sqrt(0.91)]))
    code, out, _ = run(capsys, "metrics", "clip-i", "--image-feat", t, "--text-feat", t)
    assert json.loads(out)["clip_i"] == 1.0
    code, out, _ = run(capsys, "metrics", "clip-p", "--patch-feats", p1, p2, "--text-feat", t)
    doc = json.loads(out)
    assert abs(doc["clip_p"] - 0.25) < 1e-12
    assert doc["clip_p_patch_side"] == 64


def test_unknown_subcommand_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_file_exit_1(capsys, tmp_path):
    code, out, err = run(capsys, "gdist", "--a", str(tmp_path / "no.tnsr"),
                         "--b", str(tmp_path / "no2.tnsr"))
    assert code == 1
    assert json.loads(err)["error"] == "io"


def test_threads_flag(capsys, tmp_path, rng, monkeypatch):
    a = _write(tmp_path / "a.tnsr", rng.normal(size=8))
    code, _, _ = run(capsys, "--threads", "4", "gdist", "--a", a, "--b", a)
    assert code == 0
    assert cli.get_thread_cap() == 4
    monkeypatch.setenv("FAG_THREADS", "2")
    code, _, _ = run(capsys, "gdist", "--a", a, "--b", a)
    assert cli.get_thread_cap() == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["--threads", "0", "gdist", "--a", a, "--b", a])
    assert exc.value.code == 2

import logging
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from invml.cli import (
    PROFILES,
    ExperimentConfig,
    all_combos,
    main,
    parse_combos,
    resolve_config,
)
from invml.datasets import gen_swiss_roll, write_idx
from invml.errors import ConfigError

TINY = ["--set", "dataset.n=60", "--set", "trainer.epochs=12", "--set", "trainer.k=5",
        "--set", "metrics.k=5", "--set", "model.L=4", "--set", "trainer.log_interval=3"]


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def _shifted_roll_csv(path, n=80):
    x = gen_swiss_roll(n, seed=0).x
    x = x - x.min(axis=0)
    np.savetxt(path, x, delimiter=",", header="a,b,c", comments="")
    return ["--set", "dataset.source=csv", "--set", f"dataset.csv={path}", "--set", "dataset.n=0"]


# --- config -------------------------------------------------------------------

def test_defaults_and_field_errors():
    cfg = resolve_config()
    assert cfg["model"]["L"] == 8 and cfg["trainer"]["epochs"] == 2000
    with pytest.raises(ConfigError, match="trainer.lr: expected float"):
        resolve_config(overrides=["trainer.lr=fast"])
    with pytest.raises(ConfigError, match="model.depth: unknown key"):
        resolve_config(overrides=["model.depth=3"])
    with pytest.raises(ConfigError, match="schedule.lis_norm"):
        resolve_config(overrides=["schedule.lis_norm=l3"])
    with pytest.raises(ConfigError, match="ramps"):
        resolve_config(overrides=["schedule.alpha_end=0.5"])


def test_config_text_roundtrip():
    cfg = resolve_config("halfspheres", overrides=["schedule.push_radius=2.5", "trainer.lr=0.003"])
    again = ExperimentConfig()
    again.update_from_text(cfg.to_text())
    assert again.values == cfg.values
    assert again["schedule"]["mu_embed"] is None


def test_quick_and_seed():
    cfg = resolve_config("swissroll", quick=True, seed=7)
    assert cfg["trainer"]["epochs"] == 2000 and cfg["dataset"]["n"] == 160
    assert cfg["trainer"]["seed"] == cfg["model"]["seed"] == 7
    assert resolve_config("swissroll", quick=True, overrides=["trainer.epochs=50"])["trainer"]["epochs"] == 50


def test_profiles_resolve_or_name_missing_files():
    for name in PROFILES:
        if name in ("swissroll", "spheres", "halfspheres"):
            cfg = resolve_config(name)
            assert cfg["model"]["s_prime"] <= cfg.input_dim()
        else:
            with pytest.raises(ConfigError, match="dataset.(images|csv): file not found"):
                resolve_config(name)


def test_s_prime_above_m_exits_2(tmp_path, capsys):
    assert _run(tmp_path, "train", "--profile", "swissroll", "--set", "model.s_prime=4") == 2
    assert "s_prime" in capsys.readouterr().err


def test_bad_config_file_exits_2(tmp_path):
    (tmp_path / "c.ini").write_text("[model]\nL = two\n")
    assert _run(tmp_path, "train", "--config", str(tmp_path / "c.ini")) == 2
    (tmp_path / "d.ini").write_text("[nonsense]\nx = 1\n")
    assert _run(tmp_path, "train", "--config", str(tmp_path / "d.ini")) == 2


def test_combo_parsing():
    assert parse_combos("Pad+Ex, none") == [("Ex", "Pad"), ()]
    assert len(all_combos()) == 8
    with pytest.raises(ConfigError):
        parse_combos(" , ")
    with pytest.raises(ConfigError):
        parse_combos("Ex+Foo")


# --- commands -----------------------------------------------------------------

def test_train_is_deterministic_and_manifest_reproduces(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert _run(a, "train", "--profile", "swissroll", *TINY) == 0
    assert _run(b, "train", "--profile", "swissroll", *TINY) == 0
    for name in ("history.csv", "model.ckpt", "history.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "history.csv").read_text().splitlines()[0]
    assert header == "epoch,orth,pad,lis,push,extra,total"
    assert _run(c, "train", "--config", str(a / "manifest.ini")) == 0
    assert (c / "history.csv").read_bytes() == (a / "history.csv").read_bytes()
    assert (c / "model.ckpt").read_bytes() == (a / "model.ckpt").read_bytes()
    ET.parse(a / "history.svg")


def test_evaluate_identity_model(tmp_path, caplog):
    args = ["--profile", "swissroll", "--set", "dataset.n=160", "--set", "model.init=identity",
            "--set", "trainer.epochs=0", "--set", "metrics.accuracy=true"]
    assert _run(tmp_path, "train", *args) == 0
    with caplog.at_level(logging.WARNING, logger="invml"):
        assert _run(tmp_path, "evaluate", *args) == 0
    assert any("no labels" in r.message for r in caplog.records)
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0].startswith("layer,rmse,mne,trust,cont")
    rows = {ln.split(",")[0]: ln.split(",") for ln in lines[1:]}
    body = rows["L-1"]
    assert float(body[3]) >= 0.95 and float(body[4]) >= 0.95
    assert body[8] == "" and body[9] == ""  # accuracy columns
    ET.parse(tmp_path / "embedding.svg")
    ET.parse(tmp_path / "latent.svg")


def test_evaluate_dim_mismatch(tmp_path, capsys):
    assert _run(tmp_path, "train", "--profile", "swissroll", *TINY) == 0
    code = _run(tmp_path, "evaluate", "--profile", "halfspheres", "--set", "dataset.n=30",
                "--checkpoint", str(tmp_path / "model.ckpt"))
    assert code == 2 and "m=3" in capsys.readouterr().err


def test_interpolate_identity_curve_is_zero(tmp_path):
    data = _shifted_roll_csv(tmp_path / "roll.csv")
    args = ["--set", "model.init=identity", "--set", "trainer.epochs=0", "--set", "model.L=4", *data]
    assert _run(tmp_path, "train", *args) == 0
    assert _run(tmp_path, "interpolate", *args, "--mode", "knn") == 0
    lines = (tmp_path / "interp_curve.csv").read_text().splitlines()
    assert lines[0] == "k,mse" and len(lines) == 11
    assert all(float(ln.split(",")[1]) <= 1e-20 for ln in lines[1:])


def test_geodesic_disconnected_exits_3(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.standard_normal((20, 3)), 1000 + rng.standard_normal((20, 3))])
    np.savetxt(tmp_path / "two.csv", pts, delimiter=",")
    args = ["--set", "dataset.source=csv", "--set", f"dataset.csv={tmp_path / 'two.csv'}",
            "--set", "dataset.n=0", "--set", "model.L=4", "--set", "trainer.epochs=0",
            "--set", "interpolate.graph_k=2", "--set", "interpolate.pair=0,39"]
    assert _run(tmp_path, "train", *args) == 0
    assert _run(tmp_path, "interpolate", *args, "--mode", "geodesic") == 3
    assert "not connected" in capsys.readouterr().err


def test_ablate(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "ablate", "--profile", "swissroll", *TINY, "--combos", "Ex+Orth+Pad,Orth") == 0
    assert _run(b, "ablate", "--profile", "swissroll", *TINY, "--combos", "Ex+Orth+Pad,Orth") == 0
    text = (a / "ablation.csv").read_text()
    assert text == (b / "ablation.csv").read_text()
    lines = text.splitlines()
    assert lines[0].startswith("combo,layer,") and lines[0].endswith("rank_sparsity")
    assert [ln.split(",")[0] for ln in lines[1:]] == ["Ex+Orth+Pad", "Orth"]
    assert _run(a, "ablate", "--profile", "swissroll", *TINY, "--combos", "") == 2


def test_image_pipeline_writes_strips(tmp_path):
    rng = np.random.default_rng(1)
    imgs = rng.integers(0, 256, (40, 4, 4), dtype=np.uint8)
    write_idx(tmp_path / "img.idx", imgs)
    write_idx(tmp_path / "lab.idx", np.repeat(np.arange(4, dtype=np.uint8), 10))
    args = ["--set", "dataset.source=idx", "--set", f"dataset.images={tmp_path / 'img.idx'}",
            "--set", f"dataset.labels={tmp_path / 'lab.idx'}", "--set", "dataset.n=0",
            "--set", "model.s_prime=4", "--set", "model.L=4", "--set", "trainer.epochs=5",
            "--set", "trainer.k=5", "--set", "metrics.k=5", "--set", "interpolate.strips=2",
            "--set", "interpolate.k_max=5"]
    out = tmp_path / "run"
    assert _run(out, "generate", *args) == 0
    assert (out / "data.csv").read_text().splitlines()[0].endswith(",label")
    assert _run(out, "train", *args) == 0
    assert _run(out, "interpolate", *args) == 0
    strips = sorted(p.name for p in out.glob("interp_*.pgm"))
    assert len(strips) == 4
    raw = (out / strips[0]).read_bytes()
    assert raw.startswith(b"P5\n52 4\n255\n")  # 13 frames of 4x4
    assert _run(out, "reconstruct", *args) == 0
    rec = (out / "reconstruct.csv").read_text().splitlines()
    assert rec[0] == "path,rmse" and float(rec[1].split(",")[1]) <= 1e-9
    assert (out / "reconstruct_input.pgm").exists()


def test_nonfinite_training_exits_3(tmp_path, capsys):
    x = gen_swiss_roll(30, seed=0).x
    x[0, 0] = 1e308
    np.savetxt(tmp_path / "bad.csv", x, delimiter=",")
    args = ["--set", "dataset.source=csv", "--set", f"dataset.csv={tmp_path / 'bad.csv'}",
            "--set", "dataset.n=0", "--set", "trainer.k=3", "--set", "trainer.epochs=3", "--set", "model.L=4"]
    with np.errstate(all="ignore"):
        assert _run(tmp_path, "train", *args) == 3
    assert "epoch 0" in capsys.readouterr().err


def test_corrupt_checkpoint_exits_4(tmp_path):
    assert _run(tmp_path, "train", "--profile", "swissroll", *TINY) == 0
    raw = (tmp_path / "model.ckpt").read_bytes()
    (tmp_path / "model.ckpt").write_bytes(raw[:-7])
    assert _run(tmp_path, "evaluate", "--profile", "swissroll", *TINY) == 4

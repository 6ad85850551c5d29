import json
import shutil

import numpy as np
import pytest

from multiformer import cli
from multiformer.export import read_pgm


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    assert run("synth", "--out", root, "--samples", 4, "--persons", 1, "--seed", 2) == 0
    return root


@pytest.fixture(scope="module")
def run_dir(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    assert run("train", "--data", dataset, "--out", out, "--epochs", 2, "--batch-size", 2) == 0
    return out


def resolve(cmd, argv, env=None):
    args = cli.build_parser().parse_args([cmd, *argv])
    return cli.resolve(cmd, args, environ=env or {})


# settings


def test_precedence_flag_env_file(tmp_path):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[train]\nepochs = 7\nlr = 0.5\nseed = 9\ndata = d\nout = o\n")
    env = {"MF_EPOCHS": "8", "MF_LR": "0.25"}
    o = resolve("train", ["--config", str(ini), "--epochs", "9"], env)
    assert o["epochs"] == 9  # flag beats env and file
    assert o["lr"] == 0.25  # env beats file
    assert o["seed"] == 9  # file beats default
    assert o["batch_size"] == 32  # default


def test_unknown_config_key_exits_2_and_names_it(tmp_path, capsys):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[synth]\nout = x\nbogus_key = 1\n")
    assert run("synth", "--config", ini) == 2
    assert "bogus_key" in capsys.readouterr().err


def test_unknown_section_exits_2(tmp_path):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[nonsense]\na = 1\n")
    assert run("synth", "--config", ini, "--out", tmp_path / "d") == 2


def test_missing_required_setting(capsys):
    assert run("synth") == 2
    assert "out" in capsys.readouterr().err


def test_bad_env_value_exits_2(monkeypatch, tmp_path):
    monkeypatch.setenv("MF_SAMPLES", "abc")
    assert run("synth", "--out", tmp_path / "d") == 2


@pytest.mark.parametrize("cmd", sorted(cli.OPTIONS))
def test_help_lists_every_flag(cmd, capsys):
    with pytest.raises(SystemExit) as info:
        run(cmd, "--help")
    assert info.value.code == 0
    text = capsys.readouterr().out
    for key in cli.OPTIONS[cmd]:
        assert "--" + key.replace("_", "-") in text


# synth


def test_synth_writes_files(dataset):
    manifest = json.loads((dataset / "manifest.json").read_text())
    assert len(manifest["samples"]) == 4
    assert len(list((dataset / "csi").iterdir())) == 4
    for f in (dataset / "ann").iterdir():
        assert len(json.loads(f.read_text())["persons"]) == 1


def test_synth_two_persons_and_determinism(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--out", tmp_path / name, "--samples", 3, "--persons", 2, "--seed", 5) == 0
    anns = sorted((tmp_path / "a" / "ann").iterdir())
    assert all(len(json.loads(f.read_text())["persons"]) == 2 for f in anns)
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


@pytest.mark.parametrize("flag,value", [("--samples", -1), ("--val-fraction", 1.0), ("--noise", -0.1)])
def test_synth_rejects_bad_values(tmp_path, flag, value):
    assert run("synth", "--out", tmp_path / "d", flag, value) == 2


# train / eval / decode


def test_train_outputs(run_dir):
    rows = (run_dir / "loss.csv").read_text().strip().splitlines()
    assert rows[0] == "epoch,train_loss,val_loss,lr" and len(rows) == 3
    assert (run_dir / "best.mfck").exists() and (run_dir / "last.mfck").exists()


def test_eval_report_alpha_keys(dataset, run_dir, tmp_path):
    out = tmp_path / "rep.json"
    assert run("eval", "--ckpt", run_dir / "last.mfck", "--data", dataset, "--alpha", "5,15", "--split", "all", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert set(rep["alpha"]) == {"5", "15"} and set(rep["mean"]) == {"5", "15"}
    assert rep["n_samples"] == 4


def test_eval_empty_split_is_io_error(dataset, run_dir):
    assert run("eval", "--ckpt", run_dir / "last.mfck", "--data", dataset, "--split", "nope") == 3


def test_decode_from_annotation(tmp_path, capsys):
    assert run("synth", "--out", tmp_path / "d", "--samples", 1, "--persons", 2, "--seed", 11) == 0
    ann = next((tmp_path / "d" / "ann").iterdir())
    out = tmp_path / "sk.json"
    assert run("decode", "--ann", ann, "--out", out, "--svg", tmp_path / "sk.svg", "--heatmaps", tmp_path / "hm") == 0
    assert len(json.loads(out.read_text())["persons"]) == 2
    assert (tmp_path / "sk.svg").read_text().startswith("<svg")
    assert len(list((tmp_path / "hm").glob("*.pgm"))) == 19 + 38


def test_decode_from_checkpoint(dataset, run_dir, tmp_path):
    csi = sorted((dataset / "csi").iterdir())[0]
    out = tmp_path / "sk.json"
    assert run("decode", "--ckpt", run_dir / "last.mfck", "--csi", csi, "--out", out) == 0
    assert "persons" in json.loads(out.read_text())


def test_decode_needs_input(tmp_path):
    assert run("decode", "--out", tmp_path / "x.json") == 2


# error exits


def test_missing_checkpoint_exit_3(dataset, tmp_path):
    assert run("eval", "--ckpt", tmp_path / "none.mfck", "--data", dataset) == 3


def test_dataset_version_mismatch_exit_5(dataset, run_dir, tmp_path):
    copy = tmp_path / "data"
    shutil.copytree(dataset, copy)
    manifest = json.loads((copy / "manifest.json").read_text())
    manifest["version"] = 99
    (copy / "manifest.json").write_text(json.dumps(manifest))
    assert run("eval", "--ckpt", run_dir / "last.mfck", "--data", copy) == 5


def test_checkpoint_version_mismatch_exit_5(dataset, run_dir, tmp_path):
    from multiformer.numerics.checkpoint import load_checkpoint, save_checkpoint

    ckpt = tmp_path / "old.mfck"
    save_checkpoint(ckpt, load_checkpoint(run_dir / "last.mfck"), version=99)
    shutil.copy(f"{run_dir / 'last.mfck'}.json", f"{ckpt}.json")
    assert run("eval", "--ckpt", ckpt, "--data", dataset) == 5


def test_divergence_exit_4(dataset, tmp_path, capsys):
    with np.errstate(all="ignore"):
        code = run("train", "--data", dataset, "--out", tmp_path / "r", "--epochs", 4, "--batch-size", 2, "--lr", 1e8)
    assert code == 4
    assert "produced by" in capsys.readouterr().err


# gradcheck / attn / params


def test_gradcheck_pass_and_exit_codes(capsys):
    assert run("gradcheck", "--ops", "softmax,msa") == 0
    assert capsys.readouterr().out.count("PASS") == 2
    assert run("gradcheck", "--ops", "no_such_op") == 2


def test_attn_writes_pgm_and_uniform_salience(dataset, tmp_path):
    csi = sorted((dataset / "csi").iterdir())[0]
    prefix = tmp_path / "att"
    assert run("attn", "--csi", csi, "--out", prefix, "--branch", "time") == 0
    img = read_pgm(f"{prefix}.pgm")
    assert img.shape == (16, 16)
    sal = np.loadtxt(f"{prefix}.csv", delimiter=",", skiprows=1)[:, 1]
    assert sal.max() / sal.min() < 1.5
    assert run("attn", "--csi", csi, "--out", prefix, "--layer", 5) == 2
    assert run("attn", "--csi", csi, "--out", prefix, "--branch", "space") == 2


def test_params_report(tmp_path):
    out = tmp_path / "p.json"
    assert run("params", "--preset", "desk", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["params"]["total"] == 837517 and "justification" in rep

"""Command-line entry point.

Settings come from flags, ``MF_<KEY>`` environment variables and an INI file
given with ``--config`` (one section per subcommand), in that order of
precedence. Exit codes: 0 ok, 1 check failure, 2 configuration or usage
error, 3 I/O error, 4 numerical abort, 5 version mismatch.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_VERSION = 0, 1, 2, 3, 4, 5


class ConfigError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# key -> (type, default, help); None default with required=True means mandatory
OPTIONS: dict[str, dict[str, tuple]] = {
    "synth": {
        "out": (str, None, "output dataset directory"),
        "samples": (int, 16, "number of samples"),
        "persons": (int, 0, "persons per sample (0: random 1 or 2)"),
        "seed": (int, 0, "generator seed"),
        "val_fraction": (float, 0.2, "fraction of samples in the validation split"),
        "noise": (float, 0.05, "complex noise standard deviation"),
    },
    "train": {
        "data": (str, None, "dataset directory"),
        "out": (str, None, "run directory for checkpoints and loss.csv"),
        "preset": (str, "desk", "network preset"),
        "epochs": (int, 100, "training epochs"),
        "batch_size": (int, 32, "batch size"),
        "lr": (float, 1e-3, "learning rate"),
        "decay": (float, 0.7, "learning-rate decay factor"),
        "decay_interval": (int, 15, "epochs between decays"),
        "seed": (int, 0, "initialization and shuffling seed"),
        "stages": (int, 3, "refinement stages"),
        "dtype": (str, "float32", "float32 or float64"),
        "dropout": (float, -1.0, "dropout rate (negative keeps the preset value)"),
        "resume": (str, "", "continue from this last.mfck"),
    },
    "eval": {
        "ckpt": (str, None, "checkpoint file"),
        "data": (str, None, "dataset directory"),
        "alpha": (_int_list, "5,10,20", "comma separated PCK thresholds"),
        "split": (str, "val", "train, val or all"),
        "out": (str, "", "write the JSON report here"),
    },
    "decode": {
        "ckpt": (str, "", "checkpoint file"),
        "csi": (str, "", "CSI window file"),
        "ann": (str, "", "annotation JSON: render its labels and decode them instead of running a model"),
        "size": (int, 36, "grid size for --ann"),
        "out": (str, None, "skeleton JSON output"),
        "svg": (str, "", "optional SVG overlay"),
        "heatmaps": (str, "", "optional directory for per-channel PGM dumps"),
    },
    "gradcheck": {
        "preset": (str, "desk", "preset of the end-to-end check"),
        "ops": (str, "all", "'all' or comma separated check names"),
        "seed": (int, 0, "seed"),
    },
    "attn": {
        "ckpt": (str, "", "checkpoint file (omit to use a freshly initialized --preset)"),
        "preset": (str, "desk", "preset when no checkpoint is given"),
        "seed": (int, 0, "initialization seed when no checkpoint is given"),
        "csi": (str, None, "CSI window file"),
        "branch": (str, "freq", "freq or time"),
        "layer": (int, 0, "encoder layer"),
        "head": (int, 0, "attention head"),
        "out": (str, None, "output prefix for .pgm and .csv"),
    },
    "params": {
        "preset": (str, "MultiFormer", "preset to count"),
        "out": (str, "", "write the JSON report here"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiformer", description="WiFi CSI multi-person pose estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd, help=f"{cmd} subcommand")
        p.add_argument("--config", default=None, help="INI file with a [%s] section" % cmd)
        for key, (_, default, text) in opts.items():
            shown = "required" if default is None else f"default {default}"
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=f"{text} ({shown})")
    return parser


def read_config_file(path) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in OPTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in cp[section]:
            norm = key.replace("-", "_")
            if norm not in OPTIONS[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
        out[section] = {k.replace("-", "_"): v for k, v in cp[section].items()}
    return out


def resolve(cmd: str, args: argparse.Namespace, environ=None) -> dict:
    """Merge flag > environment (MF_<KEY>) > config file > built-in default."""
    environ = os.environ if environ is None else environ
    file_values = read_config_file(args.config).get(cmd, {}) if args.config else {}
    out = {}
    for key, (kind, default, _) in OPTIONS[cmd].items():
        raw = getattr(args, key)
        if raw is None:
            raw = environ.get(f"MF_{key.upper()}")
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required setting '{key}' (flag --{key.replace('_', '-')}, MF_{key.upper()} or config)")
            raw = default
        try:
            out[key] = kind(raw) if kind is not _bool else _bool(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value {raw!r} for '{key}'") from None
    return out


# -- subcommands -----------------------------------------------------------
def cmd_synth(o: dict) -> int:
    from .datakit import SceneConfig, generate_dataset, write_dataset

    if o["samples"] < 0:
        raise ConfigError("samples must be >= 0")
    if o["persons"] < 0:
        raise ConfigError("persons must be >= 0")
    if not 0.0 <= o["val_fraction"] < 1.0:
        raise ConfigError("val_fraction must be in [0, 1)")
    try:
        scene = SceneConfig(noise_sigma=o["noise"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ds = generate_dataset(o["samples"], o["seed"], scene, val_fraction=o["val_fraction"], persons=o["persons"] or None)
    root = write_dataset(ds, o["out"])
    print(f"wrote {len(ds)} samples to {root}")
    return EXIT_OK


def cmd_train(o: dict) -> int:
    from .datakit import read_dataset
    from .train import TrainConfig, train

    cfg = TrainConfig(
        preset=o["preset"],
        lr=o["lr"],
        batch_size=o["batch_size"],
        epochs=o["epochs"],
        decay=o["decay"],
        decay_interval=o["decay_interval"],
        seed=o["seed"],
        stages=o["stages"],
        dtype=o["dtype"],
        dropout=None if o["dropout"] < 0 else o["dropout"],
    )
    ds = read_dataset(o["data"])

    def log(row):
        print(f"epoch {row['epoch']:4d}  train {row['train_loss']:.4f}  val {row['val_loss']:.4f}  lr {row['lr']:.2e}", flush=True)

    result = train(cfg, ds, out_dir=o["out"], resume=o["resume"] or None, log=log)
    print(f"best checkpoint: {result.best_path}\nlast checkpoint: {result.last_path}")
    return EXIT_OK


def cmd_eval(o: dict) -> int:
    from .datakit import DatasetError, read_dataset, to_arrays
    from .evaluate import evaluate_pck
    from .train import load_model

    if not o["alpha"] or any(a <= 0 for a in o["alpha"]):
        raise ConfigError("alpha values must be positive")
    model, _ = load_model(o["ckpt"])
    ds = read_dataset(o["data"])
    samples = ds.split(o["split"])
    if not samples:
        raise DatasetError(f"split '{o['split']}' of {o['data']} is empty")
    c = model.cfg
    data = to_arrays(samples, c.packets, c.subcarriers, c.side, dtype=model.parameters()[0].dtype)
    report = evaluate_pck(model, data, tuple(o["alpha"]))
    print(report.table())
    print(f"wall clock: {report.wall_clock_s:.2f} s")
    if o["out"]:
        Path(o["out"]).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_decode(o: dict) -> int:
    from .decoder import decode_poses
    from .export import dump_heatmaps, write_svg

    if o["ann"]:
        from .datakit import read_annotation, render_labels

        pcm, paf = render_labels(read_annotation(o["ann"]).persons, o["size"])
    else:
        if not o["ckpt"] or not o["csi"]:
            raise ConfigError("decode needs --ckpt and --csi (or --ann)")
        from .frontend import read_csi
        from .train import load_model

        model, _ = load_model(o["ckpt"])
        f, t = model.tokenize(read_csi(o["csi"]))
        pcm, paf = model.predict(f[None], t[None])
        pcm, paf = pcm[0], paf[0]
    skel = decode_poses(pcm, paf)
    Path(o["out"]).write_text(skel.to_json(indent=1), encoding="utf-8")
    if o["svg"]:
        write_svg(o["svg"], skel, background=pcm[-1])
    if o["heatmaps"]:
        dump_heatmaps(o["heatmaps"], pcm, paf)
    print(f"{len(skel)} person(s) -> {o['out']}")
    return EXIT_OK


def cmd_gradcheck(o: dict) -> int:
    from .gradsuite import CHECKS, run_checks

    names = list(CHECKS) if o["ops"] == "all" else [n.strip() for n in o["ops"].split(",") if n.strip()]
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown op(s) {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    results = run_checks(names, seed=o["seed"], preset=o["preset"])
    print(f"{'op':<16} {'worst rel. error':>17} {'tolerance':>10}  result")
    for r in results:
        print(f"{r.name:<16} {r.max_rel_error:17.3e} {r.tolerance:10.0e}  {'PASS' if r.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_attn(o: dict) -> int:
    from .encoder import export_attention
    from .export import write_attention
    from .frontend import read_csi

    if o["ckpt"]:
        from .train import load_model

        model, _ = load_model(o["ckpt"])
    else:
        from .model import MultiFormer
        from .presets import get_preset

        model = MultiFormer(get_preset(o["preset"]), seed=o["seed"])
    if o["branch"] not in ("freq", "time"):
        raise ConfigError(f"branch must be 'freq' or 'time', got {o['branch']!r}")
    freq, temp = model.tokenize(read_csi(o["csi"]))
    branch = model.encoder.branch(o["branch"])
    try:
        matrix, salience = export_attention(branch, freq if o["branch"] == "freq" else temp, o["layer"], o["head"])
    except IndexError as exc:
        raise ConfigError(str(exc)) from None
    label = "subcarrier" if o["branch"] == "freq" else "packet"
    pgm, csv_path = write_attention(o["out"], matrix, salience, label)
    print(f"attention -> {pgm}, salience -> {csv_path} (max/min {salience.max() / salience.min():.3f})")
    return EXIT_OK


def cmd_params(o: dict) -> int:
    from .evaluate import parameter_report

    report = parameter_report(o["preset"])
    for k, v in report["params"].items():
        print(f"{k:<28} {v:>14,}")
    print(f"total {report['params_m']:.2f} M vs reference {report['reference_m']} M (ratio {report['ratio']:.2f})")
    if "justification" in report:
        print("justification:", report["justification"])
    if o["out"]:
        Path(o["out"]).write_text(json.dumps(report, indent=1), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "decode": cmd_decode,
    "gradcheck": cmd_gradcheck,
    "attn": cmd_attn,
    "params": cmd_params,
}


def main(argv=None) -> int:
    from .datakit import DatasetError, DatasetVersionError
    from .frontend import CsiFormatError
    from .numerics import CheckpointError, ConfigurationError, VersionMismatchError
    from .train import TrainingDivergedError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        options = resolve(args.command, args)
        return COMMANDS[args.command](options)
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VersionMismatchError, DatasetVersionError) as exc:
        print(f"version mismatch: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except (DatasetError, CsiFormatError, CheckpointError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

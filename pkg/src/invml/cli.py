"""Command-line experiment runner.

Configs are INI-style files with the sections below; every key is optional
and falls back to its default. ``--profile`` loads a shipped config, then
``--config``, ``--quick``, ``--set section.key=value`` and ``--seed`` are
applied in that order, so explicit overrides win over the quick scaling.
"""
from __future__ import annotations

import argparse
import configparser
import datetime
import logging
import sys
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import Dataset, gen_spheres, gen_swiss_roll, knn_graph, load_csv, load_idx
from .errors import (
    BadMagic,
    ChecksumMismatch,
    ConfigError,
    CountMismatch,
    DimMismatch,
    InvMLError,
    ShapeMismatch,
    TruncatedFile,
    VersionMismatch,
)
from .interpolation import (
    geodesic_interpolate,
    interpolation_mse_curve,
    knn_interpolate,
    select_distant_pair,
    write_curve_csv,
    write_pgm_strip,
)
from .losses import ScheduleConfig
from .metrics import evaluate_encoder, rmse, write_reports_csv
from .model import (
    InvMLEncoder,
    forward,
    inverse_body,
    invert_head_least_squares,
    invert_head_sparse,
)
from .plots import embedding_points, line_svg, scatter_svg
from .trainer import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train, write_history_csv

log = logging.getLogger("invml")

PROFILES = ("swissroll", "spheres", "halfspheres", "usps", "mnist256", "mnist784", "kmnist", "fmnist", "coil20")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
QUICK_FACTOR = 5
COMBO_PARTS = ("Ex", "Orth", "Pad")


def _dataclass_defaults(cls, skip=()):
    return {f.name: f.default for f in fields(cls) if f.name not in skip}


SECTIONS = {
    "dataset": {
        "source": "swissroll",  # swissroll | spheres | idx | csv
        "n": 800,  # sample count; for files 0 keeps every row
        "seed": 0,
        "noise": 0.0,
        "ambient_dim": 101,
        "intrinsic_dim": 0,  # 0 -> ambient_dim - 1
        "half": False,
        "images": "",
        "labels": "",
        "downsample": 0,
        "csv": "",
        "label_column": False,
        "image_shape": "",  # e.g. 16x16; inferred for square IDX images
    },
    "model": {"L": 8, "s_prime": 2, "alpha": 0.1, "init": "orthogonal", "seed": 0},
    "schedule": _dataclass_defaults(ScheduleConfig),
    "trainer": _dataclass_defaults(TrainConfig, skip=("schedule",)),
    "metrics": {"k": 15, "k1": 5, "k2": 10, "rank_tol": 1e-3, "accuracy": True, "seed": 0},
    "interpolate": {"mode": "knn", "k_max": 10, "t_steps": 13, "n_samples": 0, "segments": 4,
                    "graph_k": 15, "max_rank": 20, "min_rank": 45, "pair": "", "strips": 4},
    "reconstruct": {"sparsity": 0, "strips": 8},
}
# keys whose default is None accept a float or "none"
OPTIONAL_FLOATS = {("schedule", "mu_embed"), ("schedule", "push_radius")}
CHOICES = {
    ("dataset", "source"): ("swissroll", "spheres", "idx", "csv"),
    ("model", "init"): ("orthogonal", "identity"),
    ("schedule", "lis_norm"): ("l1", "squared"),
    ("schedule", "push_mode"): ("prose", "formula"),
    ("trainer", "batch_mode"): ("full", "block"),
    ("interpolate", "mode"): ("knn", "geodesic"),
}


def _parse_value(section, key, text):
    default = SECTIONS[section][key]
    where = f"{section}.{key}"
    text = text.strip()
    if (section, key) in OPTIONAL_FLOATS:
        if text.lower() in ("", "none"):
            return None
        default = 0.0
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {text!r}") from None
    allowed = CHOICES.get((section, key))
    if allowed and text not in allowed:
        raise ConfigError(f"{where}: must be one of {', '.join(allowed)}, got {text!r}")
    return text


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


class ExperimentConfig:
    """Resolved configuration: one dict of typed values per section."""

    def __init__(self):
        self.values = {s: dict(d) for s, d in SECTIONS.items()}

    def __getitem__(self, section):
        return self.values[section]

    def update_from_text(self, text: str, source: str = "<config>") -> None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str  # keep "L" upper-case
        try:
            parser.read_string(text, source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        for section in parser.sections():
            if section == "run":  # manifest metadata
                continue
            if section not in SECTIONS:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key, raw in parser.items(section):
                self.set(section, key, raw)

    def set(self, section: str, key: str, raw: str) -> None:
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SECTIONS[section]:
            raise ConfigError(f"{section}.{key}: unknown key")
        self.values[section][key] = _parse_value(section, key, raw)

    def to_text(self) -> str:
        out = []
        for section, vals in self.values.items():
            out.append(f"[{section}]")
            out.extend(f"{k} = {_format_value(v)}" for k, v in vals.items())
            out.append("")
        return "\n".join(out)

    def validate(self) -> None:
        ds, model, tr, met = self["dataset"], self["model"], self["trainer"], self["metrics"]
        if ds["source"] in ("swissroll", "spheres") and ds["n"] < 2:
            raise ConfigError("dataset.n: generators need at least 2 samples")
        if ds["n"] < 0:
            raise ConfigError("dataset.n: must be >= 0")
        for key in ("images", "labels", "csv"):
            if ds[key] and not Path(ds[key]).exists():
                raise ConfigError(f"dataset.{key}: file not found: {ds[key]}")
        if ds["source"] == "idx" and not ds["images"]:
            raise ConfigError("dataset.images: required for source = idx")
        if ds["source"] == "csv" and not ds["csv"]:
            raise ConfigError("dataset.csv: required for source = csv")
        if model["L"] < 3:
            raise ConfigError("model.L: must be >= 3")
        if model["s_prime"] < 1:
            raise ConfigError("model.s_prime: must be >= 1")
        m = self.input_dim()
        if m is not None and model["s_prime"] > m:
            raise ConfigError(f"model.s_prime: {model['s_prime']} exceeds input dimension m={m}")
        if tr["epochs"] < 0 or tr["k"] < 1:
            raise ConfigError("trainer: epochs must be >= 0 and k >= 1")
        if not 2 <= met["k1"] <= met["k2"]:
            raise ConfigError("metrics.k1/k2: need 2 <= k1 <= k2")
        try:
            self.schedule()
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def input_dim(self):
        """Input dimension when it is known without reading data files."""
        ds = self["dataset"]
        if ds["source"] == "swissroll":
            return 3
        if ds["source"] == "spheres":
            return ds["ambient_dim"]
        if ds["source"] == "idx" and ds["downsample"]:
            return ds["downsample"] ** 2
        return None

    def schedule(self) -> ScheduleConfig:
        return ScheduleConfig(**self["schedule"])

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self["trainer"], schedule=self.schedule())


def resolve_config(profile=None, config=None, overrides=(), seed=None, quick=False) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if profile is not None:
        text = resources.files("invml").joinpath("profiles", f"{profile}.ini").read_text()
        cfg.update_from_text(text, f"profile {profile}")
    if config is not None:
        try:
            text = Path(config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config}: {exc}") from None
        cfg.update_from_text(text, str(config))
    if quick:
        cfg["trainer"]["epochs"] //= QUICK_FACTOR
        if cfg["dataset"]["n"] > 0:
            cfg["dataset"]["n"] = max(cfg["dataset"]["n"] // QUICK_FACTOR, 2)
    for item in overrides:
        name, sep, raw = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        cfg.set(section, key, raw)
    if seed is not None:
        for section in ("model", "trainer", "metrics"):
            cfg[section]["seed"] = seed
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# data and model plumbing

def _image_shape(ds_cfg, m):
    if ds_cfg["image_shape"]:
        try:
            h, w = (int(v) for v in ds_cfg["image_shape"].lower().split("x"))
        except ValueError:
            raise ConfigError(f"dataset.image_shape: expected HxW, got {ds_cfg['image_shape']!r}") from None
        if h * w != m:
            raise ConfigError(f"dataset.image_shape: {h}x{w} does not match m={m}")
        return h, w
    if ds_cfg["source"] == "idx":
        side = int(round(np.sqrt(m)))
        if side * side == m:
            return side, side
    return None


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    d = cfg["dataset"]
    if d["source"] == "swissroll":
        ds = gen_swiss_roll(d["n"], seed=d["seed"], noise=d["noise"])
    elif d["source"] == "spheres":
        ds = gen_spheres(d["n"], ambient_dim=d["ambient_dim"], seed=d["seed"], half=d["half"],
                         intrinsic_dim=d["intrinsic_dim"] or None)
    else:
        if d["source"] == "idx":
            ds = load_idx(d["images"], d["labels"] or None, d["downsample"] or None)
        else:
            ds = load_csv(d["csv"], label_column=d["label_column"])
        if 0 < d["n"] < ds.n:
            rng = np.random.default_rng(d["seed"])
            ds = ds.subset(np.sort(rng.choice(ds.n, d["n"], replace=False)))
    if cfg["model"]["s_prime"] > ds.m:
        raise ConfigError(f"model.s_prime: {cfg['model']['s_prime']} exceeds input dimension m={ds.m}")
    ds.image_shape = _image_shape(d, ds.m)
    return ds


def build_encoder(cfg: ExperimentConfig, m: int) -> InvMLEncoder:
    mc = cfg["model"]
    if mc["init"] == "identity":
        return InvMLEncoder.identity(m, mc["s_prime"], mc["L"], mc["alpha"])
    return InvMLEncoder.init(m, mc["s_prime"], mc["L"], seed=mc["seed"], alpha=mc["alpha"])


def _plot_labels(ds: Dataset):
    if ds.labels is not None:
        return ds.labels
    if ds.color is not None:
        # ten colour bands along the continuous parameter
        edges = np.quantile(ds.color, np.linspace(0, 1, 11)[1:-1])
        return np.searchsorted(edges, ds.color)
    return None


def write_manifest(out: Path, cfg: ExperimentConfig, command: str) -> None:
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    text = cfg.to_text() + f"[run]\ncommand = {command}\nversion = {__version__}\ncreated = {stamp}\n"
    (out / "manifest.ini").write_text(text)


def _load_checkpoint_for(path: Path, ds: Dataset) -> InvMLEncoder:
    enc = load_checkpoint(path).encoder
    if enc.m != ds.m:
        raise DimMismatch(f"checkpoint expects m={enc.m}, dataset has m={ds.m}")
    return enc


def _write_strips(out: Path, stem: str, frames_by_name: dict, shape) -> list:
    written = []
    for name, frames in frames_by_name.items():
        path = out / f"{stem}_{name}.pgm"
        write_pgm_strip(path, frames, shape)
        written.append(path)
    return written


# --------------------------------------------------------------------------
# subcommands

def cmd_generate(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = load_dataset(cfg)
    cols = [f"x{i}" for i in range(ds.m)]
    data = ds.x
    if ds.labels is not None:
        cols.append("label")
        data = np.column_stack([ds.x, ds.labels])
    with open(out / "data.csv", "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row[:ds.m]))
            if ds.labels is not None:
                fh.write(f",{int(row[-1])}")
            fh.write("\n")
    scatter_svg(out / "data.svg", embedding_points(ds.x), _plot_labels(ds), f"{ds.name} (n={ds.n}, m={ds.m})")
    write_manifest(out, cfg, "generate")
    print(f"generated {ds.n} x {ds.m} samples -> {out / 'data.csv'}")
    return EXIT_OK


def _train_one(cfg: ExperimentConfig, ds: Dataset, schedule=None):
    enc = build_encoder(cfg, ds.m)
    tc = cfg.train_config()
    if schedule is not None:
        tc.schedule = schedule
    return train(enc, ds, tc)


def cmd_train(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = load_dataset(cfg)
    enc, history, state = _train_one(cfg, ds)
    save_checkpoint(out / "model.ckpt", Checkpoint(enc, cfg["trainer"]["epochs"], state, cfg.values))
    write_history_csv(out / "history.csv", history)
    if history:
        epochs = [row["epoch"] for row in history]
        series = {k: [row[k] for row in history] for k in ("orth", "pad", "lis", "push", "extra", "total")}
        line_svg(out / "history.svg", epochs, series, "training loss (symlog)", log_y=True)
    write_manifest(out, cfg, "train")
    last = history[-1]["total"] if history else float("nan")
    print(f"trained {cfg['trainer']['epochs']} epochs, final loss {last:.6g} -> {out / 'model.ckpt'}")
    return EXIT_OK


def _checkpoint_path(args, out: Path) -> Path:
    return Path(args.checkpoint) if args.checkpoint else out / "model.ckpt"


def cmd_evaluate(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = load_dataset(cfg)
    enc = _load_checkpoint_for(_checkpoint_path(args, out), ds)
    met = cfg["metrics"]
    labels = ds.labels if met["accuracy"] else None
    if met["accuracy"] and ds.labels is None:
        log.warning("dataset has no labels; accuracy columns left empty")
    top, body = evaluate_encoder(enc, ds.x, labels, k=met["k"], k1=met["k1"], k2=met["k2"],
                                 seed=met["seed"], rank_tol=met["rank_tol"])
    write_reports_csv(out / "metrics.csv", [top, body])
    trace = forward(enc, ds.x)
    colours = _plot_labels(ds)
    scatter_svg(out / "embedding.svg", embedding_points(trace.embedding), colours,
                f"layer L (s'={enc.s_prime})" + (", PCA" if enc.s_prime > 2 else ""))
    scatter_svg(out / "latent.svg", embedding_points(trace.latent), colours, "layer L-1, PCA")
    write_manifest(out, cfg, "evaluate")
    for rep in (top, body):
        print(f"{rep.layer}: trust {rep.trust:.4f} cont {rep.cont:.4f} rmse {rep.rmse:.3g} "
              f"kmin {rep.k_min:.3g} rank {rep.rank_sparsity}")
    return EXIT_OK


def cmd_interpolate(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = load_dataset(cfg)
    enc = _load_checkpoint_for(_checkpoint_path(args, out), ds)
    ic = cfg["interpolate"]
    mode = args.mode or ic["mode"]
    if mode == "knn":
        k_values = list(range(1, ic["k_max"] + 1))
        graph = knn_graph(ds.x, ic["k_max"])
        curve = interpolation_mse_curve(enc, ds.x, graph, k_values, seed=cfg["metrics"]["seed"],
                                        n_samples=ic["n_samples"] or None, t_steps=ic["t_steps"])
        write_curve_csv(out / "interp_curve.csv", k_values, curve)
        line_svg(out / "interp_curve.svg", k_values, {"mse": curve}, "latent interpolation MSE vs k")
        if ds.image_shape is not None and ic["strips"] > 0:
            res = knn_interpolate(enc, ds.x, graph, ic["k_max"], 1, ic["t_steps"], cfg["metrics"]["seed"],
                                  samples=np.arange(min(ic["strips"], ds.n)))
            for r in res:
                _write_strips(out, f"interp_{r.pair[0]}_{r.pair[1]}",
                              {"latent": r.latent_recons, "input": r.input_interps}, ds.image_shape)
        print(f"interpolation MSE k=1: {curve[0]:.4g}, k={k_values[-1]}: {curve[-1]:.4g}")
    else:
        latent = forward(enc, ds.x).latent
        if ic["pair"]:
            try:
                pair = tuple(int(v) for v in ic["pair"].split(","))
            except ValueError:
                raise ConfigError(f"interpolate.pair: expected i,j, got {ic['pair']!r}") from None
        else:
            pair = select_distant_pair(latent, ds.labels, ic["min_rank"], cfg["metrics"]["seed"])
        res = geodesic_interpolate(enc, ds.x, pair, ic["segments"], ic["graph_k"], ic["t_steps"], ic["max_rank"])
        with open(out / "geodesic.csv", "w") as fh:
            fh.write("kind,step,index\n")
            for kind, seq in (("path", res.path), ("waypoint", res.waypoints)):
                for step, idx in enumerate(seq):
                    fh.write(f"{kind},{step},{idx}\n")
        if ds.image_shape is not None:
            _write_strips(out, f"geodesic_{pair[0]}_{pair[1]}",
                          {"latent": res.latent_recons, "input": res.input_interps}, ds.image_shape)
        print(f"geodesic {pair[0]} -> {pair[1]}: {len(res.path)} path nodes, {len(res.waypoints)} waypoints")
    write_manifest(out, cfg, f"interpolate --mode {mode}")
    return EXIT_OK


def parse_combos(text: str) -> list:
    """``"Ex+Orth+Pad,Orth,none"`` -> list of part tuples; ``none`` is the baseline."""
    combos = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = () if item.lower() in ("none", "base", "baseline") else tuple(p.strip() for p in item.split("+"))
        bad = [p for p in parts if p not in COMBO_PARTS]
        if bad:
            raise ConfigError(f"--combos: unknown part(s) {', '.join(bad)}; use {'+'.join(COMBO_PARTS)}")
        combos.append(tuple(p for p in COMBO_PARTS if p in parts))
    if not combos:
        raise ConfigError("--combos: empty combination list")
    return combos


def all_combos() -> list:
    out = []
    for mask in range(2 ** len(COMBO_PARTS)):
        out.append(tuple(p for b, p in enumerate(COMBO_PARTS) if mask >> b & 1))
    return out


def combo_name(parts) -> str:
    return "+".join(parts) if parts else "baseline"


def cmd_ablate(cfg: ExperimentConfig, out: Path, args) -> int:
    combos = parse_combos(args.combos) if args.combos is not None else all_combos()
    ds = load_dataset(cfg)
    met = cfg["metrics"]
    reports = []
    base = cfg["schedule"]
    for parts in combos:
        sched = ScheduleConfig(**{**base, "use_extra": "Ex" in parts, "use_orth": "Orth" in parts,
                                  "use_pad": "Pad" in parts})
        enc, _, _ = _train_one(cfg, ds, sched)
        top, _ = evaluate_encoder(enc, ds.x, ds.labels if met["accuracy"] else None, k=met["k"],
                                  k1=met["k1"], k2=met["k2"], seed=met["seed"], rank_tol=met["rank_tol"])
        reports.append(top)
        print(f"{combo_name(parts)}: trust {top.trust:.4f} rmse {top.rmse:.3g} rank {top.rank_sparsity}")
    write_reports_csv(out / "ablation.csv", reports, extra_columns=[("combo", [combo_name(c) for c in combos])])
    write_manifest(out, cfg, "ablate")
    return EXIT_OK


def cmd_reconstruct(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = load_dataset(cfg)
    enc = _load_checkpoint_for(_checkpoint_path(args, out), ds)
    trace = forward(enc, ds.x)
    body = inverse_body(enc, trace.latent)
    s = cfg["reconstruct"]["sparsity"]
    if s:
        z_hat = invert_head_sparse(enc, trace.embedding, s)
    else:
        z_hat = invert_head_least_squares(enc, trace.embedding)
    head = inverse_body(enc, z_hat)
    with open(out / "reconstruct.csv", "w") as fh:
        fh.write("path,rmse\n")
        fh.write(f"body,{float(rmse(ds.x, body))!r}\n")
        fh.write(f"head+body,{float(rmse(ds.x, head))!r}\n")
    count = min(cfg["reconstruct"]["strips"], ds.n)
    if ds.image_shape is not None and count:
        _write_strips(out, "reconstruct", {"input": ds.x[:count], "body": body[:count], "head": head[:count]},
                      ds.image_shape)
    write_manifest(out, cfg, "reconstruct")
    print(f"rmse body {rmse(ds.x, body):.3g}, head+body {rmse(ds.x, head):.3g}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "interpolate": cmd_interpolate,
    "ablate": cmd_ablate,
    "reconstruct": cmd_reconstruct,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--profile", choices=PROFILES, help="shipped dataset profile")
    common.add_argument("--seed", type=int, help="seed for model init, training and metrics")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--quick", action="store_true", help=f"divide epochs and n by {QUICK_FACTOR}")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a single config value; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="invml", description="Invertible manifold learning experiments.")
    parser.add_argument("--version", action="version", version=f"invml {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the configured dataset to data.csv")
    sub.add_parser("train", parents=[common], help="train and write model.ckpt and history.csv")
    for name, text in (("evaluate", "metrics at layers L and L-1"),
                       ("interpolate", "latent interpolation experiments"),
                       ("reconstruct", "inverse pass from the embedding and from layer L-1")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--checkpoint", help="checkpoint path (default: OUT/model.ckpt)")
        if name == "interpolate":
            p.add_argument("--mode", choices=("knn", "geodesic"))
    p = sub.add_parser("ablate", parents=[common], help="train one model per loss combination")
    p.add_argument("--combos", help="comma-separated list such as Ex+Orth+Pad,Orth,none (default: all 8)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args.profile, args.config, args.overrides, args.seed, args.quick)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (BadMagic, TruncatedFile, CountMismatch, ChecksumMismatch, VersionMismatch, OSError) as exc:
        code, msg = EXIT_IO, f"I/O error: {exc}"
    except (ConfigError, ShapeMismatch) as exc:
        code, msg = EXIT_CONFIG, f"config error: {exc}"
    except (InvMLError, ArithmeticError) as exc:
        code, msg = EXIT_NUMERIC, f"numeric failure: {exc}"
    except ValueError as exc:
        code, msg = EXIT_CONFIG, f"invalid value: {exc}"
    print(f"invml: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``pup <command> [options]``.

Commands: prepare, analyze-cwtp, train, evaluate, coldstart-eval, synth.
Settings come from defaults, then an optional ``key = value`` config file,
then command-line flags (highest precedence).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .baselines import VARIANTS, fit_variant, load_variant, save_variant
from .dataset import (
    QUANTIZERS,
    DatasetError,
    build_dataset,
    cwtp_profile,
    entropy_histogram,
    load_bundle,
    load_dataset,
    save_bundle,
    write_cwtp_report,
    write_raw,
)
from .evaluation import PROTOCOLS, evaluate, evaluate_by_entropy_group, write_metrics, write_per_user
from .synthetic import generate_world
from .training import TrainConfig, TrainingDiverged, write_loss_history

log = logging.getLogger("pup")


@dataclass
class RunConfig:
    # data
    interactions: str | None = None
    catalog: str | None = None
    data: str | None = None
    checkpoint: str | None = None
    out: str = "runs"
    quantizer: str = "uniform"
    levels: int = 10
    # model / training (mirrors TrainConfig)
    variant: str = "pup"
    total_dim: int = 64
    dim_split: tuple[int, int] = (48, 16)
    learning_rate: float = 1e-2
    batch_size: int = 1024
    epochs: int = 200
    neg_rate: int = 1
    lambda_reg: float = 1e-4
    alpha: float = 1.0
    dropout_p: float = 0.1
    seed: int = 0
    lr_decay_epochs: tuple[int, int] | None = None
    # evaluation
    ks: tuple[int, ...] = (50, 100)
    protocol: str = "standard"
    entropy_threshold: float | None = None
    per_user: bool = False
    threads: int = 1
    # synth
    users: int = 200
    items: int = 500
    categories: int = 5
    _explicit: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        if self.quantizer not in QUANTIZERS:
            raise ValueError(f"quantizer must be one of {QUANTIZERS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {', '.join(VARIANTS)}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def data_dir(self) -> Path:
        return Path(self.data) if self.data else self.out_dir / "data"

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else self.out_dir / "model.ckpt"

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in names})

    def echo(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if not k.startswith("_")}
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_ALIASES = {"k": "ks", "dim-split": "dim_split", "lr": "learning_rate", "dropout": "dropout_p", "quantization": "quantizer"}


def _int_list(text: str, sep: str = ",") -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace("/", sep).split(sep) if x.strip())


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    v = value.strip()
    if key in ("dim_split", "lr_decay_epochs", "ks"):
        if key == "lr_decay_epochs" and v.lower() in ("", "none", "auto"):
            return None
        return _int_list(v)
    if key == "entropy_threshold":
        return None if v.lower() in ("", "none") else float(v)
    if key == "per_user":
        return v.lower() in ("1", "true", "yes", "on")
    kinds = {f.name: f.type for f in fields(RunConfig)}
    kind = kinds.get(key)
    if kind == "int":
        return int(v)
    if kind == "float":
        return float(v)
    return v


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    out = {}
    known = {f.name for f in fields(RunConfig) if not f.name.startswith("_")}
    for n, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key).replace("-", "_")
        if key not in known:
            raise ValueError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _coerce(f.name, flag)
    cfg = RunConfig(**values)
    cfg._explicit = set(values)
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _write_manifest(cfg: RunConfig, command: str, started: float, artifacts: list[Path]) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"manifest-{command}.json"
    manifest = {
        "command": command,
        "config": cfg.echo(),
        "seed": cfg.seed,
        "version": __version__,
        "python": platform.python_version(),
        "duration_seconds": round(time.time() - started, 3),
        "artifacts": [str(p) for p in artifacts],
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def cmd_prepare(cfg: RunConfig) -> list[Path]:
    if not cfg.interactions or not cfg.catalog:
        raise ValueError("prepare needs --interactions and --catalog")
    interactions, catalog = load_dataset(cfg.interactions, cfg.catalog)
    ds = build_dataset(interactions, catalog, levels=cfg.levels, quantizer=cfg.quantizer)
    out = save_bundle(ds, cfg.data_dir, {"quantizer": cfg.quantizer})
    log.info("prepared %d users, %d items -> %s", ds.num_users, ds.num_items, out)
    return [out]


def cmd_analyze_cwtp(cfg: RunConfig) -> list[Path]:
    ds = load_bundle(cfg.data_dir)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if len(ds.train) == 0:
        log.warning("training split is empty; CWTP report will be empty")
    prof = cwtp_profile(ds)
    report = cfg.out_dir / "cwtp.jsonl"
    write_cwtp_report(ds, prof, report)
    edges, counts = entropy_histogram(list(prof.entropy.values()))
    hist = cfg.out_dir / "cwtp_histogram.csv"
    with open(hist, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_left", "bin_right", "count"))
        for k, c in enumerate(counts):
            w.writerow((repr(float(edges[k])), repr(float(edges[k + 1])), int(c)))
    return [report, hist]


def cmd_train(cfg: RunConfig) -> list[Path]:
    ds = load_bundle(cfg.data_dir)
    tc = cfg.train_config()
    try:
        result = fit_variant(cfg.variant, ds, tc)
    except TrainingDiverged as exc:
        raise RuntimeError(f"training diverged at epoch {exc.epoch}") from exc
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = cfg.checkpoint_path
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_variant(ckpt, result.model, tc)
    loss = cfg.out_dir / "loss.csv"
    write_loss_history(result.history, loss)
    return [ckpt, loss]


def _load_checked(cfg: RunConfig, ds):
    model, header = load_variant(cfg.checkpoint_path, ds)
    if "variant" in cfg._explicit and header["variant"] != cfg.variant:
        raise ValueError(f"checkpoint holds variant {header['variant']!r} but --variant is {cfg.variant!r}")
    return model


def cmd_evaluate(cfg: RunConfig, protocols: tuple[str, ...] | None = None, name: str = "metrics") -> list[Path]:
    ds = load_bundle(cfg.data_dir)
    model = _load_checked(cfg, ds)
    reports = [evaluate(model, ds, cfg.ks, p, threads=cfg.threads) for p in (protocols or (cfg.protocol,))]
    if cfg.entropy_threshold is not None:
        for p in protocols or (cfg.protocol,):
            reports.extend(evaluate_by_entropy_group(model, ds, cfg.entropy_threshold, cfg.ks, p, cfg.threads))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"{name}.jsonl"
    write_metrics(reports, path)
    out = [path]
    if cfg.per_user:
        per_user = cfg.out_dir / f"{name}_per_user.csv"
        write_per_user(reports, ds, per_user)
        out.append(per_user)
    return out


def cmd_coldstart_eval(cfg: RunConfig) -> list[Path]:
    return cmd_evaluate(cfg, ("cir", "ucir"), name="coldstart_metrics")


def cmd_synth(cfg: RunConfig) -> list[Path]:
    world = generate_world(cfg.users, cfg.items, cfg.categories, cfg.levels, cfg.seed)
    return list(write_raw(world.interactions, world.catalog, cfg.out_dir))


COMMANDS = {
    "prepare": cmd_prepare,
    "analyze-cwtp": cmd_analyze_cwtp,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "coldstart-eval": cmd_coldstart_eval,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="key = value config file")
    a("--seed", type=int)
    a("--variant", choices=VARIANTS)
    a("--levels", type=int, help="number of price levels")
    a("--quantizer", choices=QUANTIZERS)
    a("--alpha", type=float, help="category-branch weight")
    a("--dim-split", dest="dim_split", help="global/category embedding sizes, e.g. 48/16")
    a("--k", dest="ks", help="comma-separated cutoffs, e.g. 50,100")
    a("--protocol", choices=PROTOCOLS)
    a("--threads", type=int)
    a("--out", help="output directory")
    a("--interactions", help="interactions.csv")
    a("--catalog", help="catalog.csv")
    a("--data", help="prepared dataset directory (default: <out>/data)")
    a("--checkpoint", help="checkpoint path (default: <out>/model.ckpt)")
    a("--epochs", type=int)
    a("--lr", dest="learning_rate", type=float)
    a("--batch-size", dest="batch_size", type=int)
    a("--dropout", dest="dropout_p", type=float)
    a("--lambda-reg", dest="lambda_reg", type=float)
    a("--total-dim", dest="total_dim", type=int)
    a("--entropy-threshold", dest="entropy_threshold", type=float)
    a("--per-user", dest="per_user", action="store_const", const=True)
    a("--users", type=int)
    a("--items", type=int)
    a("--categories", type=int)
    a("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pup", description="Price-aware graph recommender.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    started = time.time()
    try:
        cfg = resolve_config(args)
        artifacts = COMMANDS[args.command](cfg)
        _write_manifest(cfg, args.command, started, artifacts)
    except (DatasetError, FileNotFoundError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in artifacts:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver.

Subcommands: gen, label, sample, split, train, predict, evaluate, gradcheck.
Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric
failure. Events go to stderr as one `key=value ...` line each, including the
fully resolved configuration, so a run can be re-executed from its log.

Config files are flat UTF-8 `key = value` lines with `#` comments. Keys are
prefixed by the consuming stage (`train.epochs`, `feat.n_mels`,
`sim.p_clean`, `split.frac`); command-line flags override file values.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from . import estimator, metrics, sampling, simgen
from .corpus import Manifest, label_corpus, load_manifest, save_manifest
from .errors import DataError, NumericError
from .featurize import FeaturizerConfig


class UsageError(Exception):
    pass


def log_event(event, **fields):
    parts = [f"event={event}"]
    for key, value in fields.items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif value is None:
            text = "none"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
            if " " in text or "=" in text:
                text = json.dumps(text)
        parts.append(f"{key}={text}")
    print(" ".join(parts), file=sys.stderr)


def parse_config(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


FEAT_KEYS = {
    "feat.window_samples": int, "feat.hop_samples": int, "feat.n_mels": int,
    "feat.log_floor": float, "feat.vocab_size": int, "feat.embed_dim": int,
    "feat.max_frames": int,
}
TRAIN_KEYS = {
    "train.epochs": int, "train.learning_rate": float, "train.dropout": float,
    "train.batch_size": int, "train.hidden": int, "train.fc1": int,
    "train.fc2": int, "train.freeze_lexical": bool, "train.zero_acoustic": bool,
}
SIM_KEYS = {
    "sim.n_utterances": int, "sim.vocab_size": int, "sim.min_words": int,
    "sim.max_words": int, "sim.p_clean": float, "sim.rate_low": float,
    "sim.rate_high": float, "sim.rate_power": float, "sim.p_sub": float,
    "sim.p_del": float, "sim.p_ins": float, "sim.noise_scale": float,
    "sim.noise_base": float,
    "sim.gain_low": float, "sim.gain_high": float, "sim.lang": str,
}
SPLIT_KEYS = {"split.n_bins": int, "split.frac": float}
ALL_KEYS = {**FEAT_KEYS, **TRAIN_KEYS, **SIM_KEYS, **SPLIT_KEYS}


def _coerce(key, raw, kind):
    if kind is bool:
        if raw not in ("true", "false"):
            raise DataError(f"config key {key}: expected true or false, got {raw!r}")
        return raw == "true"
    try:
        return kind(raw)
    except ValueError:
        raise DataError(f"config key {key}: expected {kind.__name__}, got {raw!r}") from None


def _load_config(args) -> dict:
    config = {}
    if getattr(args, "config", None):
        for key, raw in parse_config(args.config).items():
            if key not in ALL_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            config[key] = _coerce(key, raw, ALL_KEYS[key])
    return config


def _gather(config, args, keys, prefix):
    """Merge config-file values and CLI overrides for one key group."""
    out = {}
    for key in keys:
        field = key.split(".", 1)[1]
        if key in config:
            out[field] = config[key]
        value = getattr(args, field, None)
        if value is not None:
            out[field] = value
    return out


def _build_feat_cfg(config, args) -> FeaturizerConfig:
    return FeaturizerConfig(**_gather(config, args, FEAT_KEYS, "feat"))


def _add_feat_flags(parser):
    parser.add_argument("--window-samples", type=int, dest="window_samples")
    parser.add_argument("--hop-samples", type=int, dest="hop_samples")
    parser.add_argument("--n-mels", type=int, dest="n_mels")
    parser.add_argument("--log-floor", type=float, dest="log_floor")
    parser.add_argument("--vocab-size", type=int, dest="vocab_size")
    parser.add_argument("--embed-dim", type=int, dest="embed_dim")
    parser.add_argument("--max-frames", type=int, dest="max_frames")


def cmd_gen(args):
    config = _load_config(args)
    fields = _gather(config, args, SIM_KEYS, "sim")
    cfg = simgen.SimConfig(seed=args.seed, **fields)
    log_event("config", subcommand="gen", seed=cfg.seed, out=args.out,
              manifest=args.manifest,
              **{f"sim.{k}": getattr(cfg, k) for k in
                 ("n_utterances", "vocab_size", "min_words", "max_words",
                  "p_clean", "rate_low", "rate_high", "rate_power", "p_sub",
                  "p_del", "p_ins", "noise_scale", "noise_base", "gain_low",
                  "gain_high", "lang")})
    manifest = simgen.gen_corpus(cfg, args.out)
    save_manifest(manifest, args.manifest)
    log_event("done", subcommand="gen", n_utterances=len(manifest))
    return 0


def cmd_label(args):
    log_event("config", subcommand="label", manifest=args.manifest, out=args.out)
    manifest = load_manifest(args.manifest)
    labeled = label_corpus(manifest)
    save_manifest(labeled, args.out)
    log_event("done", subcommand="label", n_utterances=len(labeled))
    return 0


def cmd_sample(args):
    log_event("config", subcommand="sample", manifest=args.manifest,
              out=args.out, seed=args.seed)
    manifest = load_manifest(args.manifest)
    sampled = sampling.downsample_zero(manifest, args.seed)
    save_manifest(sampled, args.out)
    log_event("done", subcommand="sample", n_in=len(manifest), n_out=len(sampled))
    return 0


def cmd_split(args):
    config = _load_config(args)
    fields = _gather(config, args, SPLIT_KEYS, "split")
    n_bins = fields.get("n_bins", 10)
    frac = fields.get("frac", 0.1)
    log_event("config", subcommand="split", manifest=args.manifest,
              train_out=args.train_out, dev_out=args.dev_out, seed=args.seed,
              **{"split.n_bins": n_bins, "split.frac": frac})
    manifest = load_manifest(args.manifest)
    train, dev = sampling.binned_dev_split(manifest, args.seed,
                                           n_bins=n_bins, frac=frac)
    save_manifest(train, args.train_out)
    save_manifest(dev, args.dev_out)
    log_event("done", subcommand="split", n_train=len(train), n_dev=len(dev))
    return 0


def cmd_train(args):
    config = _load_config(args)
    feat_cfg = _build_feat_cfg(config, args)
    fields = _gather(config, args, TRAIN_KEYS, "train")
    cfg = estimator.TrainConfig(seed=args.seed, **fields)
    log_event("config", subcommand="train", manifest=args.manifest,
              dev=args.dev, out=args.out, seed=cfg.seed,
              **{f"train.{k}": getattr(cfg, k) for k in
                 ("epochs", "learning_rate", "dropout", "batch_size",
                  "hidden", "fc1", "fc2", "freeze_lexical", "zero_acoustic")},
              **{f"feat.{k}": getattr(feat_cfg, k) for k in
                 ("window_samples", "hop_samples", "n_mels", "log_floor",
                  "vocab_size", "embed_dim", "max_frames")})
    train_manifest = load_manifest(args.manifest)
    dev_manifest = load_manifest(args.dev) if args.dev else Manifest(())

    def progress(epoch, stats):
        log_event("train_epoch", epoch=epoch, train_loss=stats.train_loss,
                  dev_loss=stats.dev_loss, dev_pcc=stats.dev_pcc)

    params, history = estimator.train(train_manifest, dev_manifest, cfg,
                                      feat_cfg=feat_cfg, progress=progress)
    estimator.save_model(params, cfg, feat_cfg, args.out)
    log_event("done", subcommand="train", model=args.out,
              final_train_loss=history[-1].train_loss)
    return 0


def cmd_predict(args):
    log_event("config", subcommand="predict", manifest=args.manifest,
              model=args.model, out=args.out)
    params, _, feat_cfg = estimator.load_model(args.model)
    manifest = load_manifest(args.manifest)
    rows = estimator.predict_corpus(params, manifest, feat_cfg=feat_cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "predicted"])
        for rid, pred, _ in rows:
            writer.writerow([rid, repr(float(pred))])
    log_event("done", subcommand="predict", n_utterances=len(rows))
    return 0


def cmd_evaluate(args):
    log_event("config", subcommand="evaluate", manifest=args.manifest,
              predictions=args.predictions, out=args.out)
    manifest = load_manifest(args.manifest)
    with open(args.predictions, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "predicted"]:
            raise DataError(f"{args.predictions}: expected header id,predicted")
        preds = []
        for row in reader:
            if len(row) < 2:
                raise DataError(f"{args.predictions}: short row {row!r}")
            preds.append((row[0], float(row[1])))
    report = metrics.evaluate(preds, manifest)
    metrics.write_report(report, args.out)
    if report.pcc is None:
        log_event("warning", subcommand="evaluate",
                  message="pcc undefined: zero variance")
    log_event("done", subcommand="evaluate", n_utterances=len(report.rows),
              pcc=report.pcc, rmse=report.rmse,
              ewer3_percent=report.ewer3_percent,
              oracle_wer_percent=report.oracle_wer_percent)
    return 0


def cmd_gradcheck(args):
    log_event("config", subcommand="gradcheck", seed=args.seed,
              count=args.count, tol=args.tol)
    seeds = range(args.seed, args.seed + args.count)
    err = estimator.gradient_check(seeds=seeds)
    log_event("done", subcommand="gradcheck", max_rel_err=err, tol=args.tol)
    if err > args.tol:
        raise NumericError(f"gradient check failed: max rel err {err:.3e} > {args.tol:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewer3",
        description="Reference-free transcription quality estimation pipeline.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True, help="directory for WAV files")
    p.add_argument("--manifest", required=True, help="output manifest path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--n-utterances", type=int, dest="n_utterances")
    p.add_argument("--vocab-size", type=int, dest="vocab_size")
    p.add_argument("--min-words", type=int, dest="min_words")
    p.add_argument("--max-words", type=int, dest="max_words")
    p.add_argument("--p-clean", type=float, dest="p_clean")
    p.add_argument("--rate-low", type=float, dest="rate_low")
    p.add_argument("--rate-high", type=float, dest="rate_high")
    p.add_argument("--rate-power", type=float, dest="rate_power")
    p.add_argument("--p-sub", type=float, dest="p_sub")
    p.add_argument("--p-del", type=float, dest="p_del")
    p.add_argument("--p-ins", type=float, dest="p_ins")
    p.add_argument("--noise-scale", type=float, dest="noise_scale")
    p.add_argument("--noise-base", type=float, dest="noise_base")
    p.add_argument("--gain-low", type=float, dest="gain_low")
    p.add_argument("--gain-high", type=float, dest="gain_high")
    p.add_argument("--lang")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("label", help="fill wer labels from references")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("sample", help="downsample the zero-WER group per language")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("split", help="binned train/dev split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-out", required=True, dest="train_out")
    p.add_argument("--dev-out", required=True, dest="dev_out")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--n-bins", type=int, dest="n_bins")
    p.add_argument("--frac", type=float)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train an estimator")
    p.add_argument("--manifest", required=True, help="labeled training manifest")
    p.add_argument("--dev", help="labeled dev manifest")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--hidden", type=int)
    p.add_argument("--fc1", type=int)
    p.add_argument("--fc2", type=int)
    p.add_argument("--freeze-lexical", action="store_true", default=None,
                   dest="freeze_lexical")
    p.add_argument("--zero-acoustic", action="store_true", default=None,
                   dest="zero_acoustic")
    _add_feat_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict wer for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output CSV path (id,predicted)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--manifest", required=True, help="labeled manifest")
    p.add_argument("--predictions", required=True, help="CSV from predict")
    p.add_argument("--out", required=True, help="output report directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except UsageError as exc:
        log_event("error", kind="usage", message=str(exc))
        return 1
    except NumericError as exc:
        log_event("error", kind="numeric", message=str(exc))
        return 3
    except DataError as exc:
        log_event("error", kind="data", message=str(exc))
        return 2
    except OSError as exc:
        log_event("error", kind="data", message=str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())

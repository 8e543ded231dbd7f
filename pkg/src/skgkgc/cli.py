"""Command-line entry point: ``skgkgc {stats,expand,train,eval,summarize,synth}``.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .evaluator import evaluate, relation_accuracy
from .expansion import expand_dataset
from .kg import DATA_FILES, DataError, compute_stats, focusing_ratios, load_data_dir, write_data_dir
from .summarize import summarize
from .synthetic import clue_graph
from .trainer import TrainConfig, TrainingDiverged, train, train_vocab

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CONFIG_VERSION = 1
RUN_KEYS = {"version", "data_dir", "output_dir"}

log = logging.getLogger("skgkgc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def load_run_config(path) -> dict:
    """Read a JSON run config; every unknown or ill-typed key is reported at once."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})")
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    train_fields = {f.name: f for f in fields(TrainConfig)}
    problems = [f"unknown key {k!r}" for k in sorted(raw) if k not in train_fields and k not in RUN_KEYS]
    defaults = TrainConfig()
    for k, v in sorted(raw.items()):
        if k in train_fields:
            want = type(getattr(defaults, k))
            ok = isinstance(v, want) or (want is float and isinstance(v, int) and not isinstance(v, bool))
            if want is int and isinstance(v, bool):
                ok = False
            if not ok:
                problems.append(f"key {k!r} must be {want.__name__}, got {type(v).__name__}")
    if raw.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        problems.append(f"unsupported config version {raw.get('version')!r}")
    if problems:
        raise UsageError(f"{path}: " + "; ".join(problems))
    return raw


def resolve_config(raw: dict, args) -> tuple[dict, TrainConfig]:
    cfg = dict(raw)
    for key, flag in (("data_dir", "data_dir"), ("output_dir", "out"), ("seed", "seed"), ("epochs", "epochs")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "no_balancing", False):
        cfg["balancing"] = False
    cfg.setdefault("version", CONFIG_VERSION)
    missing = [k for k in ("data_dir", "output_dir") if k not in cfg]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join(missing))
    tc = TrainConfig(**{k: v for k, v in cfg.items() if k not in RUN_KEYS})
    try:
        tc.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    resolved = {"version": cfg["version"], "data_dir": str(cfg["data_dir"]), "output_dir": str(cfg["output_dir"])}
    resolved.update(tc.to_dict())
    return resolved, tc


def _load(data_dir):
    d = Path(data_dir)
    if not d.is_dir():
        raise UsageError(f"data directory not found: {d}")
    missing = [str(d / f) for f in DATA_FILES.values() if not (d / f).is_file()]
    if missing:
        raise UsageError("missing dataset file(s): " + ", ".join(missing))
    return load_data_dir(d)


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_stats(args) -> int:
    g = _load(args.data_dir)
    st = compute_stats(g)
    out = st.as_dict()
    if g.train:
        out["r_head"], out["r_tail"] = focusing_ratios(g)
    out["missing_text"] = g.missing_text
    out["duplicates_dropped"] = g.duplicates_dropped
    print(f"entities   {st.n_entities:,}")
    print(f"relations  {st.n_relations:,}")
    print(f"train      {st.n_train:,}")
    print(f"valid      {st.n_valid:,}")
    print(f"test       {st.n_test:,}")
    print(f"share (h,r) {100 * st.share_hr:.1f}%")
    print(f"share (r,t) {100 * st.share_rt:.1f}%")
    if "r_head" in out:
        print(f"focusing   r_head={out['r_head']:.4f} r_tail={out['r_tail']:.4f}")
    if args.out:
        _write_json(args.out, out)
    else:
        print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_expand(args) -> int:
    g = _load(args.data_dir)
    examples = expand_dataset(g, top_n=args.top_n, min_group_size=args.min_group_size)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
    n_set = sum(ex.is_set_example for ex in examples)
    print(f"wrote {len(examples)} examples ({n_set} set examples) to {out}")
    return EXIT_OK


def _set_threads(n):
    if n is None:
        return
    from threadpoolctl import threadpool_limits

    threadpool_limits(n)
    if n > 1:
        log.warning("multi-threaded BLAS: results are not guaranteed to be bit-reproducible")


def cmd_train(args) -> int:
    raw = load_run_config(args.config) if args.config else {}
    resolved, tc = resolve_config(raw, args)
    _set_threads(args.threads)
    g = _load(resolved["data_dir"])
    out = Path(resolved["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    h = config_hash(resolved)
    resolved_out = dict(resolved, config_hash=h)
    _write_json(out / "config.json", resolved_out)
    log_fh = open(out / "train_log.jsonl", "w", encoding="utf-8")
    w_fh = open(out / "weights.jsonl", "w", encoding="utf-8")

    def on_epoch(rec):
        log_fh.write(json.dumps(dict(rec, config_hash=h), sort_keys=True) + "\n")
        w = rec["weights"]
        w_fh.write(json.dumps({
            "epoch": rec["epoch"], "w_hp": w["HP"], "w_rp": w["RP"], "w_tp": w["TP"],
            "a_hp": rec["val_mrr_hp"], "a_rp": rec["val_acc_rp"], "a_tp": rec["val_mrr_tp"],
            "config_hash": h,
        }, sort_keys=True) + "\n")

    try:
        res = train(g, tc, on_epoch=on_epoch)
    finally:
        log_fh.close()
        w_fh.close()
    res.checkpoint.config = dict(res.checkpoint.config, config_hash=h)
    res.best.config = dict(res.best.config, config_hash=h)
    save_checkpoint(res.checkpoint, out / "checkpoint")
    save_checkpoint(res.best, out / "best")
    last = res.log[-1]
    print(f"trained {tc.epochs} epochs; final val MRR {last['val_mrr']}; checkpoints in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    g = _load(args.data_dir)
    ckpt = load_checkpoint(args.checkpoint)
    vocab_size = ckpt.config.get("vocab_size", TrainConfig.vocab_size)
    if g.train and train_vocab(g, vocab_size).hash != ckpt.model.vocab.hash:
        raise CheckpointError(
            "vocabulary hash mismatch: the checkpoint was not trained on this dataset's train split"
        )
    report = evaluate(ckpt.model, g, args.split, config_hash=ckpt.config.get("config_hash"))
    out = report.to_json()
    out["relation_accuracy"] = relation_accuracy(ckpt.model, g, args.split)
    out["split"] = args.split
    if args.out:
        _write_json(args.out, out)
    avg = report.average
    print(" ".join(f"{k}={v:.4f}" for k, v in avg.items()))
    if not args.out:
        print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_summarize(args) -> int:
    if (args.text is None) == (args.file is None):
        raise UsageError("give exactly one of --text or --file")
    text = args.text if args.text is not None else Path(args.file).read_text(encoding="utf-8")
    print(summarize(text, top_n=args.top_n))
    return EXIT_OK


def cmd_synth(args) -> int:
    g = clue_graph(seed=args.seed, set_structured=args.set_structured)
    write_data_dir(g, args.out)
    print(f"wrote synthetic graph ({len(g.entities)} entities, {len(g.train)} train triples) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skgkgc", description="Text-based knowledge graph completion: expansion, training, evaluation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="dataset statistics and focusing ratios")
    s.add_argument("--data-dir", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("expand", help="write the expanded training set as JSON lines")
    s.add_argument("--data-dir", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--top-n", type=int, default=3)
    s.add_argument("--min-group-size", type=int, default=2)
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("train", help="train from a JSON run config")
    s.add_argument("--config")
    s.add_argument("--data-dir")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--no-balancing", action="store_true")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="filtered ranking evaluation of a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data-dir", required=True)
    s.add_argument("--split", default="test", choices=["train", "valid", "dev", "test"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("summarize", help="TextRank extractive summary")
    s.add_argument("--text")
    s.add_argument("--file")
    s.add_argument("--top-n", type=int, default=3)
    s.set_defaults(func=cmd_summarize)

    s = sub.add_parser("synth", help="write the synthetic clue graph as a data directory")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--set-structured", action="store_true")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse: usage error or --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

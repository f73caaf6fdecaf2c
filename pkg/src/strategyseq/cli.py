"""Command-line surface: train, stats, bi, synth, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.  Every
run writes a ``manifest.json`` beside its artifacts recording the resolved
configuration, input hashes and output paths; JSON reports point back at
it.  ``STRATEGYSEQ_THREADS`` caps fold workers; ``--deterministic`` forces
a single worker.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from datetime import datetime, timezone
from pathlib import Path

from .data.corpus import (
    CorpusError,
    LabelVocabulary,
    bi_transform,
    load_corpus,
    save_corpus,
)
from .data.features import FeatureFileError, FeatureStore, synth_features
from .data.transitions import ROLE_PAIRS, transition_stats
from .metrics import f1_report
from .snapshot import save_snapshot
from .training import GRIDS, TrainConfig, report_json, run_grid, train_variant

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class InputError(ValueError):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat()


class Manifest:
    def __init__(self, command, config, deterministic=False):
        self.deterministic = deterministic
        self.data = {
            "command": command,
            "config": config,
            "inputs": {},
            "outputs": [],
            "started": None if deterministic else _now(),
        }

    def add_input(self, name, path):
        self.data["inputs"][name] = {"path": str(path), "sha256": _sha256(path)}

    def add_output(self, path):
        # stored relative to the run directory so the whole dir can move
        self.data["outputs"].append(Path(path).name)

    def write(self, out_dir):
        self.data["finished"] = None if self.deterministic else _now()
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(self.data, indent=2) + "\n", encoding="utf-8")
        return path


def _require_file(path, what):
    if not Path(path).is_file():
        raise InputError(f"{what} file not found: {path}")
    return Path(path)


def _load_config_file(path):
    if path is None:
        return {}
    _require_file(path, "config")
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc.msg}") from None


def _resolve_train_config(args):
    raw = _load_config_file(args.config)
    cfg_keys = {f.name for f in dataclass_fields(TrainConfig)}
    overrides = {
        "variant": args.variant,
        "folds": args.folds,
        "repeats": args.repeats,
        "seed": args.seed,
    }
    merged = {k: v for k, v in raw.items() if k in cfg_keys}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if args.bi:
        merged["bi_scheme"] = True
    if args.deterministic:
        merged["deterministic"] = True
    try:
        cfg = TrainConfig(**merged).validate()
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad training configuration: {exc}") from None
    return cfg, raw


def _load_inputs(raw_config, args, manifest):
    corpus_path = raw_config.get("corpus") or getattr(args, "corpus", None)
    if not corpus_path:
        raise InputError("no corpus given (config key 'corpus' or --corpus)")
    _require_file(corpus_path, "corpus")
    manifest.add_input("corpus", corpus_path)
    er_vocab = ee_vocab = None
    if raw_config.get("er_vocab"):
        er_vocab = LabelVocabulary.from_file(_require_file(raw_config["er_vocab"], "vocabulary"))
    if raw_config.get("ee_vocab"):
        ee_vocab = LabelVocabulary.from_file(_require_file(raw_config["ee_vocab"], "vocabulary"))
    corpus, er_vocab, ee_vocab = load_corpus(corpus_path, er_vocab, ee_vocab)
    if not corpus:
        raise InputError(f"corpus {corpus_path} is empty")

    synth_spec = raw_config.get("synth_features")
    feat_path = raw_config.get("features") or getattr(args, "features", None)
    if feat_path:
        _require_file(feat_path, "feature")
        manifest.add_input("features", feat_path)
        store = FeatureStore.load(feat_path, corpus=corpus)
    elif synth_spec:
        store = synth_features(
            corpus,
            dim=int(synth_spec.get("dim", 16)),
            seed=int(synth_spec.get("seed", 0)),
            sigma=float(synth_spec.get("sigma", 0.1)),
            success_shift=float(synth_spec.get("success_shift", 0.0)),
        )
    else:
        raise InputError("no features given (config key 'features' or 'synth_features')")
    return corpus, er_vocab, ee_vocab, store


def _write_confusions(result, out_dir, manifest, prefix=""):
    import csv

    for role in ("er", "ee"):
        pooled = result.pooled_confusion(role)
        if pooled is None:
            continue
        vocab = result.er_vocab if role == "er" else result.ee_vocab
        path = Path(out_dir) / f"confusion_{prefix}{role}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + list(vocab.names))
            for i, name in enumerate(vocab.names):
                writer.writerow([name] + [int(v) for v in pooled[i]])
        manifest.add_output(path)


def cmd_train(args):
    cfg, raw = _resolve_train_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("train", {**cfg.to_dict(), "grid": args.grid},
                        deterministic=cfg.deterministic)
    corpus, er_vocab, ee_vocab, store = _load_inputs(raw, args, manifest)

    if args.grid:
        grid = run_grid(args.grid, cfg, corpus, er_vocab, ee_vocab, store,
                        verbose=args.verbose)
        payload = grid.to_dict()
        payload["manifest"] = "manifest.json"
        report_path = out_dir / "grid_report.json"
        report_path.write_text(report_json(payload) + "\n", encoding="utf-8")
        table_path = out_dir / "grid_table.txt"
        table_path.write_text(grid.format_table() + "\n", encoding="utf-8")
        manifest.add_output(report_path)
        manifest.add_output(table_path)
        for result in grid.results:
            _write_confusions(result, out_dir, manifest, prefix=f"{result.variant}_")
        print(grid.format_table())
    else:
        result = train_variant(cfg, corpus, er_vocab, ee_vocab, store,
                               verbose=args.verbose)
        payload = result.to_dict()
        payload["manifest"] = "manifest.json"
        report_path = out_dir / "report.json"
        report_path.write_text(report_json(payload) + "\n", encoding="utf-8")
        manifest.add_output(report_path)
        summary = result.summary()
        lines = [
            f"variant: {summary['variant']}",
            f"ER macro F1: {100 * summary['er_macro_f1']:.1f}",
            f"ER weighted F1: {100 * summary['er_weighted_f1']:.1f}",
            f"EE macro F1: {100 * summary['ee_macro_f1']:.1f}",
            f"EE weighted F1: {100 * summary['ee_weighted_f1']:.1f}",
            f"divergent runs: {summary['divergent_runs']}",
        ]
        text_path = out_dir / "report.txt"
        text_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest.add_output(text_path)
        _write_confusions(result, out_dir, manifest)
        if result.model is not None:
            snap_path = out_dir / "model.pfgm"
            save_snapshot(snap_path, result.model, extra={"variant": cfg.variant})
            manifest.add_output(snap_path)
        print("\n".join(lines))
    manifest.write(out_dir)
    return 0


def cmd_stats(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("stats", {"corpus": args.corpus},
                        deterministic=args.deterministic)
    _require_file(args.corpus, "corpus")
    manifest.add_input("corpus", args.corpus)
    corpus, er_vocab, ee_vocab = load_corpus(args.corpus)
    if not corpus:
        raise InputError(f"corpus {args.corpus} is empty")
    stats = transition_stats(corpus, er_vocab, ee_vocab)
    for prev_role, next_role in ROLE_PAIRS:
        path = out_dir / f"transitions_{prev_role.value.lower()}_{next_role.value.lower()}.csv"
        stats.to_csv(prev_role, next_role, path)
        manifest.add_output(path)
    manifest.write(out_dir)
    print(f"wrote 4 transition tables over {stats.dialogue_count} dialogues to {out_dir}")
    return 0


def cmd_bi(args):
    _require_file(args.corpus, "corpus")
    corpus, er_vocab, ee_vocab = load_corpus(args.corpus)
    rewritten = [bi_transform(d, er_vocab, ee_vocab)[0] for d in corpus]
    save_corpus(args.out, rewritten)
    print(f"wrote BI-scheme corpus ({len(rewritten)} dialogues) to {args.out}")
    return 0


def cmd_synth(args):
    _require_file(args.corpus, "corpus")
    corpus, _, _ = load_corpus(args.corpus)
    if not corpus:
        raise InputError(f"corpus {args.corpus} is empty")
    store = synth_features(corpus, dim=args.dim, seed=args.seed, sigma=args.sigma,
                           success_shift=args.success_shift)
    store.save(args.out)
    print(f"wrote {args.dim}-dim synthetic features for {len(store)} dialogues to {args.out}")
    return 0


def _load_predictions(path, corpus, er_vocab, ee_vocab):
    """Predictions JSONL mirrors the corpus schema with 'pred' per turn."""
    by_id = {d.id: d for d in corpus}
    preds = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            did = str(obj.get("id"))
            if did not in by_id:
                raise InputError(f"{path}:{lineno}: unknown dialogue id {did!r}")
            gold = by_id[did]
            turns = obj.get("turns", [])
            if len(turns) != len(gold.utterances):
                raise InputError(
                    f"{path}:{lineno}: {len(turns)} predictions for "
                    f"{len(gold.utterances)} utterances"
                )
            ids = []
            for u, t in zip(gold.utterances, turns):
                vocab = er_vocab if u.role.value == "ER" else ee_vocab
                name = t.get("pred")
                if name not in vocab:
                    raise InputError(
                        f"{path}:{lineno}: predicted label {name!r} not in the "
                        f"{u.role.value} vocabulary"
                    )
                ids.append(vocab.id_of(name))
            preds[did] = ids
    missing = set(by_id) - set(preds)
    if missing:
        raise InputError(f"{path}: no predictions for dialogues {sorted(missing)[:5]}")
    return preds


def cmd_eval(args):
    _require_file(args.corpus, "corpus")
    _require_file(args.predictions, "predictions")
    corpus, er_vocab, ee_vocab = load_corpus(args.corpus)
    preds = _load_predictions(args.predictions, corpus, er_vocab, ee_vocab)
    gold = {"ER": [], "EE": []}
    pred = {"ER": [], "EE": []}
    for d in corpus:
        for pos, u in enumerate(d.utterances):
            gold[u.role.value].append(u.label_id)
            pred[u.role.value].append(preds[d.id][pos])
    er = f1_report(gold["ER"], pred["ER"], er_vocab)
    ee = f1_report(gold["EE"], pred["EE"], ee_vocab)
    out = {
        "er": {"macro_f1": er.macro_f1, "weighted_f1": er.weighted_f1},
        "ee": {"macro_f1": ee.macro_f1, "weighted_f1": ee.weighted_f1},
    }
    print(json.dumps(out, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="strategyseq",
        description="Train and evaluate dialogue strategy sequence labelers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one variant or a whole grid")
    p_train.add_argument("--config", help="JSON config file")
    p_train.add_argument("--corpus", help="dialogues.jsonl (overrides config)")
    p_train.add_argument("--features", help="features.bin (overrides config)")
    p_train.add_argument("--variant", help="model variant id")
    p_train.add_argument("--grid", choices=sorted(GRIDS), help="run a full comparison grid")
    p_train.add_argument("--folds", type=int)
    p_train.add_argument("--repeats", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--bi", action="store_true", help="train on BI-scheme labels")
    p_train.add_argument("--out-dir", default="runs/latest")
    p_train.add_argument("--deterministic", action="store_true",
                         help="force a single fold worker")
    p_train.add_argument("--verbose", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_stats = sub.add_parser("stats", help="emit label-transition tables as CSV")
    p_stats.add_argument("--corpus", required=True)
    p_stats.add_argument("--out-dir", default="stats")
    p_stats.add_argument("--deterministic", action="store_true",
                         help="omit wall-clock fields from the manifest")
    p_stats.set_defaults(func=cmd_stats)

    p_bi = sub.add_parser("bi", help="rewrite a corpus into BI-scheme labels")
    p_bi.add_argument("--corpus", required=True)
    p_bi.add_argument("--out", required=True)
    p_bi.set_defaults(func=cmd_bi)

    p_synth = sub.add_parser("synth", help="emit synthetic features.bin for a corpus")
    p_synth.add_argument("--corpus", required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--sigma", type=float, default=0.1)
    p_synth.add_argument("--success-shift", type=float, default=0.0)
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="score a predictions file against gold")
    p_eval.add_argument("--corpus", required=True)
    p_eval.add_argument("--predictions", required=True)
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "deterministic", False):
        os.environ["STRATEGYSEQ_THREADS"] = "1"
    try:
        return args.func(args)
    except (InputError, CorpusError, FeatureFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"failed: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""export-features: fine-tune, then write features.bin plus its manifest."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import load_dialogues
from .export import export, write_manifest
from .finetune import finetune, load_checkpoint, save_checkpoint
from .models import MissingWeightsError, OFFLINE_MODEL_ID


def build_parser():
    parser = argparse.ArgumentParser(
        prog="export-features",
        description="Fine-tune a sentence encoder on utterance strategy labels "
                    "and export per-utterance feature vectors.",
    )
    parser.add_argument("--corpus", required=True, help="dialogues.jsonl")
    parser.add_argument("--out", required=True, help="features.bin destination")
    parser.add_argument("--model", default="roberta-large",
                        help=f"pretrained model id, or '{OFFLINE_MODEL_ID}' "
                             f"for the offline random-weights encoder")
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--lr", type=float, default=2e-5)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-length", type=int, default=128)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--checkpoint-dir",
                        help="save the fine-tuned classifier here")
    parser.add_argument("--from-checkpoint",
                        help="skip fine-tuning, export from this checkpoint")
    parser.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    corpus_path = Path(args.corpus)
    if not corpus_path.is_file():
        print(f"error: corpus file not found: {corpus_path}", file=sys.stderr)
        return 2
    try:
        dialogues = load_dialogues(corpus_path)
        if not dialogues:
            print(f"error: corpus {corpus_path} is empty", file=sys.stderr)
            return 2
        if args.from_checkpoint:
            model, tokenizer, meta = load_checkpoint(args.from_checkpoint)
            model_id = meta["model_id"]
            label_count = len(meta["label_map"])
        else:
            model, tokenizer, label_map, _ = finetune(
                dialogues, args.model, epochs=args.epochs, lr=args.lr,
                batch_size=args.batch_size, max_length=args.max_length,
                seed=args.seed, verbose=args.verbose,
            )
            model_id = args.model
            label_count = len(label_map)
            if args.checkpoint_dir:
                save_checkpoint(args.checkpoint_dir, model, tokenizer,
                                label_map, model_id)
        dim, layers_used = export(
            dialogues, model, tokenizer, args.out,
            max_length=args.max_length,
        )
        manifest = write_manifest(
            args.out, model_id=model_id, corpus_path=corpus_path, dim=dim,
            layers_used=layers_used, epochs=args.epochs, lr=args.lr,
            seed=args.seed, label_count=label_count,
        )
        print(f"wrote {dim}-dim features for {len(dialogues)} dialogues to "
              f"{args.out} (manifest: {manifest})")
        return 0
    except (MissingWeightsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Exporter contract: file format compatibility, determinism, fine-tuning.

The offline `random-test` encoder (1024-dim, randomly initialized, word
tokenizer) stands in for the pretrained model so everything runs without
network access; the real model path differs only in where weights and the
tokenizer come from.
"""

import json
import subprocess
import sys
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

import featureexport as FE

# the training-side package is the validation oracle for the file format
import strategyseq as S


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    corpus, er, ee = S.synthetic_corpus(10, seed=11, n_er=4, n_ee=5,
                                        turns_range=(4, 8))
    path = root / "dialogues.jsonl"
    S.save_corpus(path, corpus)
    return path


@pytest.fixture(scope="module")
def finetuned(corpus_file):
    dialogues = FE.load_dialogues(corpus_file)
    model, tokenizer, label_map, history = FE.finetune(
        dialogues, FE.OFFLINE_MODEL_ID, epochs=1, lr=1e-4, batch_size=8,
        max_length=24, seed=0,
    )
    return dialogues, model, tokenizer, label_map, history


class TestCorpusReader:
    def test_reads_interchange_format(self, corpus_file):
        dialogues = FE.load_dialogues(corpus_file)
        assert len(dialogues) == 10
        assert all(t.role in ("ER", "EE") for d in dialogues for t in d.turns)

    def test_role_tagged_label_space(self, corpus_file):
        dialogues = FE.load_dialogues(corpus_file)
        label_map = FE.role_tagged_labels(dialogues)
        er = {k for k in label_map if k.startswith("ER:")}
        ee = {k for k in label_map if k.startswith("EE:")}
        assert er and ee and len(label_map) == len(er) + len(ee)


class TestFinetune:
    def test_one_epoch_completes_and_saves_checkpoint(self, finetuned, tmp_path):
        dialogues, model, tokenizer, label_map, history = finetuned
        assert len(history) == 1 and np.isfinite(history[0])
        ckpt = tmp_path / "ckpt"
        FE.save_checkpoint(ckpt, model, tokenizer, label_map,
                           FE.OFFLINE_MODEL_ID)
        again, tok2, meta = FE.load_checkpoint(ckpt)
        assert meta["model_id"] == FE.OFFLINE_MODEL_ID
        assert meta["label_map"] == label_map
        texts = [t.text for t in dialogues[0].turns]
        a, _ = FE.utterance_vectors(model, tokenizer, texts, max_length=24)
        b, _ = FE.utterance_vectors(again, tok2, texts, max_length=24)
        assert np.allclose(a, b, atol=1e-5)

    def test_training_beats_majority_baseline(self, corpus_file):
        dialogues = FE.load_dialogues(corpus_file)
        label_map = FE.role_tagged_labels(dialogues)
        counts = Counter(f"{t.role}:{t.label}" for d in dialogues for t in d.turns)
        majority = max(counts.values()) / sum(counts.values())
        model, tokenizer, _, _ = FE.finetune(
            dialogues, FE.OFFLINE_MODEL_ID, epochs=8, lr=3e-4, batch_size=8,
            max_length=24, seed=0,
        )
        acc = FE.training_accuracy(model, tokenizer, dialogues, label_map,
                                   max_length=24)
        assert acc > majority

    def test_missing_pretrained_weights_actionable(self, corpus_file):
        dialogues = FE.load_dialogues(corpus_file)
        with pytest.raises(FE.MissingWeightsError, match="random-test"):
            FE.finetune(dialogues, "definitely-not-a-model-anyone-published",
                        epochs=1)


class TestExport:
    def test_row_counts_and_primary_side_validation(self, finetuned, tmp_path):
        dialogues, model, tokenizer, _, _ = finetuned
        out = tmp_path / "features.bin"
        dim, layers_used = FE.export(dialogues, model, tokenizer, out,
                                     max_length=24)
        assert dim == 1024
        assert layers_used >= 1
        # primary-side loader is the format oracle
        corpus, _, _ = S.load_corpus(_corpus_path(dialogues, tmp_path))
        store = S.load_features(out, corpus=corpus)
        assert store.dim == 1024
        for d in corpus:
            assert store.get(d.id).shape == (len(d.utterances), 1024)

    def test_identical_texts_identical_vectors(self, finetuned):
        dialogues, model, tokenizer, _, _ = finetuned
        text = dialogues[0].turns[0].text
        vecs, _ = FE.utterance_vectors(model, tokenizer, [text, text],
                                       max_length=24)
        assert np.dot(vecs[0], vecs[1]) / (np.linalg.norm(vecs[0]) *
                                           np.linalg.norm(vecs[1])) == \
            pytest.approx(1.0)

    def test_export_deterministic_across_runs(self, corpus_file, tmp_path):
        outs = []
        for name in ("a.bin", "b.bin"):
            out = tmp_path / name
            proc = subprocess.run(
                [sys.executable, "-m", "featureexport.cli",
                 "--corpus", str(corpus_file), "--out", str(out),
                 "--model", FE.OFFLINE_MODEL_ID, "--epochs", "1",
                 "--max-length", "24", "--seed", "7"],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_manifest_contents(self, corpus_file, tmp_path):
        out = tmp_path / "f.bin"
        proc = subprocess.run(
            [sys.executable, "-m", "featureexport.cli",
             "--corpus", str(corpus_file), "--out", str(out),
             "--model", FE.OFFLINE_MODEL_ID, "--epochs", "1",
             "--max-length", "24"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        manifest = json.loads((tmp_path / "f.bin.manifest.json").read_text())
        assert manifest["model_id"] == FE.OFFLINE_MODEL_ID
        assert manifest["feature_dim"] == 1024
        assert manifest["corpus"]["sha256"]
        assert manifest["finetune"]["epochs"] == 1

    def test_missing_corpus_exit_two(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "featureexport.cli",
             "--corpus", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "f.bin")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert "nope.jsonl" in proc.stderr


def _corpus_path(dialogues, tmp_path):
    """Rewrite the loaded dialogues as a corpus file for the primary loader."""
    path = tmp_path / "for_primary.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for d in dialogues:
            obj = {"id": d.id, "success": False, "turns": [
                {"role": t.role, "text": t.text, "label": t.label}
                for t in d.turns
            ]}
            fh.write(json.dumps(obj) + "\n")
    return path

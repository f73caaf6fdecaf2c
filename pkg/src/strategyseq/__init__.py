"""strategyseq: role-aware sequence labeling for two-party persuasive dialogues.

Context encoders (transformer or LSTM, whole-conversation plus per-speaker)
feed either per-role softmax heads or a chain CRF whose label space and
transition matrix switch with the speaker role, trained end to end on a
small built-in reverse-mode autodiff engine.  A cross-validation harness,
metrics, binary feature/model containers and a CLI round out the package.
"""

from . import autodiff
from .crf import ChainCRF, RolePairCRF, TransitionTable, log_partition, nll, \
    sequence_score, viterbi_decode
from .data import (
    Dialogue,
    FeatureStore,
    LabelVocabulary,
    Role,
    Utterance,
    bi_transform,
    bi_vocabulary,
    default_vocabulary,
    load_corpus,
    load_features,
    make_folds,
    merge_by_position,
    sample_corpus,
    save_corpus,
    split_by_speaker,
    strip_bi,
    synth_features,
    synthetic_corpus,
    transition_stats,
)
from .encoders import ContextEncoder, ContextOutput, EncoderConfig
from .estimator import StrategyLabeler, check_dialogue_inputs
from .heads import EmissionScorer, MlpHead, SuccessClassifier
from .metrics import EvalReport, RoleReport, confusion_counts, f1_from_confusion, f1_report
from .model import (
    Instance,
    StrategyModel,
    TABLE4_GRID,
    TABLE5_GRID,
    VARIANTS,
    get_variant,
    instances_from_corpus,
)
from .snapshot import load_snapshot, read_snapshot, save_snapshot
from .training import (
    DivergenceError,
    GridResult,
    TrainConfig,
    Trainer,
    VariantResult,
    evaluate_model,
    run_grid,
    total_loss,
    train_variant,
)

__version__ = "0.1.0"

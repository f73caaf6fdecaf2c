from .corpus import (
    CorpusError,
    Dialogue,
    LabelVocabulary,
    Role,
    SUCCESS_LABELS,
    Utterance,
    bi_transform,
    bi_vocabulary,
    default_vocabulary,
    derive_success,
    load_corpus,
    merge_by_position,
    sample_corpus,
    save_corpus,
    split_by_speaker,
    strip_bi,
)
from .features import FeatureFileError, FeatureStore, load_features, synth_features
from .folds import carve_validation, make_folds
from .synth import synthetic_corpus, synthetic_vocabularies
from .transitions import ROLE_PAIRS, TransitionStats, transition_stats

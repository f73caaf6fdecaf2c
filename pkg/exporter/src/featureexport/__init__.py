from .corpus import Dialogue, Turn, load_dialogues, role_tagged_labels
from .export import export, utterance_vectors, write_features, write_manifest
from .finetune import finetune, load_checkpoint, save_checkpoint, \
    training_accuracy
from .models import MissingWeightsError, OFFLINE_MODEL_ID, build_model

__version__ = "0.1.0"

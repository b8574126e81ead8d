"""penrec: collaboratively trained two-stream online handwriting recognizer.

Training couples a trajectory stream and an image stream through a
point-to-spatial alignment module; inference runs the trajectory stream
alone. Built on a small hand-rolled reverse-mode array engine so every
gradient path is auditable.
"""

from .config import AlignConfig, EncoderConfig, RunConfig, TrainConfig
from .data import TrajectorySequence, Vocabulary, build_vocab, load_dataset, normalize, render, save_dataset
from .model import Recognizer
from .synth import synth_generate
from .training import evaluate, load_checkpoint, save_checkpoint, train

__all__ = [
    "AlignConfig",
    "EncoderConfig",
    "RunConfig",
    "TrainConfig",
    "TrajectorySequence",
    "Vocabulary",
    "Recognizer",
    "build_vocab",
    "evaluate",
    "load_checkpoint",
    "load_dataset",
    "normalize",
    "render",
    "save_checkpoint",
    "save_dataset",
    "synth_generate",
    "train",
]

__version__ = "0.1.0"

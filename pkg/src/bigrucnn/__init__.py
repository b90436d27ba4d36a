"""Bi-GRU + CNN offensive tweet classification with classical baselines."""

from .baselines import CosineKNN, MultinomialNaiveBayes, SGDLinearClassifier
from .estimator import BiGRUCNNClassifier
from .metrics import EvalReport, evaluate
from .model import ModelConfig
from .text_pipeline import BagOfWords, SequenceEncoder, TweetTokenizer

__all__ = [
    "BagOfWords",
    "BiGRUCNNClassifier",
    "CosineKNN",
    "EvalReport",
    "ModelConfig",
    "MultinomialNaiveBayes",
    "SGDLinearClassifier",
    "SequenceEncoder",
    "TweetTokenizer",
    "evaluate",
]

__version__ = "0.1.0"

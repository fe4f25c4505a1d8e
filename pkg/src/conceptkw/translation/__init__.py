"""Phrase-based pattern translation: alignment, phrase table, LM and decoder."""

from .decoder import Candidate, decode, decode_constrained, score_derivation
from .lm import NgramLM, lm_logprob
from .model import (EmptyCorpusError, PhraseEntry, TrainConfig, TranslationModel, Weights,
                    train_model)

__all__ = [
    "Candidate", "decode", "decode_constrained", "score_derivation", "NgramLM", "lm_logprob",
    "EmptyCorpusError", "PhraseEntry", "TrainConfig", "TranslationModel", "Weights", "train_model",
]

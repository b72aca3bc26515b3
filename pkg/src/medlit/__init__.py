"""Medical-knowledge extraction and classification for health videos."""

__version__ = "0.1.0"

from .classifier import FeatureVector, LogisticKnowledgeClassifier, build_features, predict_video
from .corpus import (Corpus, KnowledgeLabel, Sentence, TokenLabel, VideoRecord,
                     load_annotated_corpus, split_dataset)
from .embeddings import SkipGramEmbedding, build_vocabulary, encode_tokens, train_embeddings
from .tagger import BLSTMTagger, LexiconTagger, extract_spans

__all__ = [
    "BLSTMTagger", "Corpus", "FeatureVector", "KnowledgeLabel", "LexiconTagger",
    "LogisticKnowledgeClassifier", "Sentence", "SkipGramEmbedding", "TokenLabel", "VideoRecord",
    "build_features", "build_vocabulary", "encode_tokens", "extract_spans", "load_annotated_corpus",
    "predict_video", "split_dataset", "train_embeddings",
]

"""Labeled proximity-graph ANN search with quantized distances and layered auto-tuning."""

from .core import Dataset, Metric, PreparedQuery, decomposed_distance, exact_distance
from .datasets import read_fvecs, read_ivecs, write_fvecs, write_ivecs
from .evaluation import brute_force_groundtruth, compute_recall, mean_recall
from .graph import BuildParams, GraphIndex, build_index, filtered_neighbors, prune_based_labeling
from .quant import CodeStore, QuantizerModel, train_quantizer
from .search import (EnvParams, PrsStore, QuantizedStore, SearchParams, SearchResult,
                     VectorStore, greedy_search, search_batch, selective_rerank)

__all__ = [
    "Dataset", "Metric", "PreparedQuery", "decomposed_distance", "exact_distance",
    "read_fvecs", "read_ivecs", "write_fvecs", "write_ivecs",
    "brute_force_groundtruth", "compute_recall", "mean_recall",
    "BuildParams", "GraphIndex", "build_index", "filtered_neighbors", "prune_based_labeling",
    "CodeStore", "QuantizerModel", "train_quantizer",
    "EnvParams", "PrsStore", "QuantizedStore", "SearchParams", "SearchResult", "VectorStore",
    "greedy_search", "search_batch", "selective_rerank",
]

from .elp import ElpGrid, profile_elp, tune_elp
from .ilp import FrontierPoint, ParetoFrontier, pareto_frontier, select_ilp, sweep_ilp, tuning_report
from .qlp import (DecisionModel, QueryFeatures, adaptive_search, extract_features,
                  train_qlp_model)
from .tree import DecisionTree

__all__ = [
    "ElpGrid", "profile_elp", "tune_elp",
    "FrontierPoint", "ParetoFrontier", "pareto_frontier", "select_ilp", "sweep_ilp",
    "tuning_report",
    "DecisionModel", "QueryFeatures", "adaptive_search", "extract_features", "train_qlp_model",
    "DecisionTree",
]

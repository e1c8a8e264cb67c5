"""Persistent correspondences between topological entities of two B-rep versions."""

from .adjprop import propagate
from .brep import BRepGraph, EntityRef, Kind, read_brep, validate, write_brep
from .checkpoint import load_params, save_params
from .exact import coincidence_match
from .features import Frame, extract_features
from .greedy import match
from .grid import ShiftedGridIndex
from .matching import Matching, Provenance, read_match, write_match
from .metrics import EvalReport, evaluate
from .overlap import estimate_overlap, overlap_match
from .scorer import ModelConfig, ModelParams, score_all
from .training import TrainConfig, TrainItem, loss, train

__all__ = [
    "BRepGraph", "EntityRef", "EvalReport", "Frame", "Kind", "Matching", "ModelConfig", "ModelParams",
    "Provenance", "ShiftedGridIndex", "TrainConfig", "TrainItem", "coincidence_match", "estimate_overlap",
    "evaluate", "extract_features", "load_params", "loss", "match", "overlap_match", "propagate",
    "read_brep", "read_match", "save_params", "score_all", "train", "validate", "write_brep", "write_match",
]
